"""Imitation-from-observation lab: manual-backprop networks, tabular and
continuous environments, state-transition occupancy machinery, a transition
discriminator with its convex-conjugate analysis, trust-region policy
optimization, and imitation training loops."""

__version__ = "0.1.0"

from . import adversary, envs, harness, imitation, nets, occupancy, trpo
from .adversary import Discriminator
from .envs import PendulumSwingup, PointMass, TabularMDP, gridworld, rollout
from .imitation import (DemonstrationSet, DemonstrationSetWithActions,
                        TrainConfig, bco_train, evaluate, gail_train,
                        gaifo_train, record_demonstrations, scaled_score,
                        train_expert)
from .occupancy import (BinSpec, StateTransitionOccupancy, empirical_occupancy,
                        exact_occupancy, occupancy_distance)
from .trpo import StochasticPolicy, ValueFunction, make_policy, trpo_update

__all__ = [
    "Discriminator", "PendulumSwingup", "PointMass", "TabularMDP",
    "gridworld", "rollout", "DemonstrationSet", "DemonstrationSetWithActions",
    "TrainConfig", "bco_train", "evaluate", "gail_train", "gaifo_train",
    "record_demonstrations", "scaled_score", "train_expert", "BinSpec",
    "StateTransitionOccupancy", "empirical_occupancy", "exact_occupancy",
    "occupancy_distance", "StochasticPolicy", "ValueFunction", "make_policy",
    "trpo_update", "adversary", "envs", "harness", "imitation", "nets",
    "occupancy", "trpo",
]
