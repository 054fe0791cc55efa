"""State-transition occupancy measures: exact dynamic-programming oracles,
empirical estimators, and distances between occupancies.

The exact oracle solves the discounted visitation linear system
(I - gamma * P_pi^T) d = p0 and forms rho(s, s') = d(s) * P_pi(s, s').
For MDPs without terminal states the total mass is exactly 1 / (1 - gamma).
Episodic estimators truncate at the horizon H, which biases the total by at
most gamma^H / (1 - gamma); callers pick H and gamma so that this is
negligible before comparing against the oracle.
"""

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinSpec:
    """Uniform per-dimension grid for discretizing continuous states."""

    lows: tuple
    highs: tuple
    bins: int = 16

    @classmethod
    def from_bounds(cls, lows, highs, bins=16):
        return cls(tuple(float(x) for x in lows), tuple(float(x) for x in highs), bins)

    def index(self, state):
        lows = np.asarray(self.lows)
        highs = np.asarray(self.highs)
        frac = (np.asarray(state, float) - lows) / (highs - lows)
        idx = np.clip((frac * self.bins).astype(int), 0, self.bins - 1)
        return tuple(int(i) for i in idx)


class StateTransitionOccupancy:
    """Discounted mass on (s, s') pairs.

    mode "exact-tabular" or "empirical" with a dense S x S matrix, or
    mode "empirical" with a dict keyed by (bin(s), bin(s')) for binned
    continuous states.
    """

    def __init__(self, mode, gamma, mass=None, mass_map=None, bins=None):
        self.mode = mode
        self.gamma = gamma
        self.mass = None if mass is None else np.asarray(mass, dtype=np.float64)
        self.mass_map = mass_map
        self.bins = bins
        values = self.mass.ravel() if self.mass is not None else np.array(list((mass_map or {}).values()))
        if values.size and values.min() < -1e-15:
            raise ValueError("occupancy mass must be nonnegative")

    def total_mass(self):
        if self.mass is not None:
            return float(self.mass.sum())
        return float(sum(self.mass_map.values()))

    def normalized(self):
        """Copy scaled to unit total mass."""
        total = self.total_mass()
        if total <= 0:
            raise ValueError("cannot normalize zero-mass occupancy")
        if self.mass is not None:
            return StateTransitionOccupancy(self.mode, self.gamma, mass=self.mass / total, bins=self.bins)
        return StateTransitionOccupancy(
            self.mode, self.gamma,
            mass_map={k: v / total for k, v in self.mass_map.items()}, bins=self.bins,
        )

    def to_csv(self, path):
        """Rows (i, j, mass); for binned occupancies i, j are bin tuples."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "mass"])
            if self.mass is not None:
                for i in range(self.mass.shape[0]):
                    for j in range(self.mass.shape[1]):
                        if self.mass[i, j] != 0.0:
                            writer.writerow([i, j, repr(float(self.mass[i, j]))])
            else:
                for (bi, bj), v in sorted(self.mass_map.items()):
                    writer.writerow([bi, bj, repr(float(v))])


def exact_occupancy(mdp, policy_table, gamma):
    """Exact discounted state-transition occupancy of a tabular policy.

    Terminal states are treated as absorbing and contribute no outgoing
    transition mass, so the 1/(1-gamma) total-mass identity holds only for
    MDPs without terminal states.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1); the system is singular at gamma = 1")
    table = np.asarray(policy_table, dtype=np.float64)
    S = mdp.n_states
    if table.shape != (S, mdp.n_actions):
        raise ValueError(f"policy table shape {table.shape} != ({S}, {mdp.n_actions})")
    if np.any(table < 0) or np.max(np.abs(table.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("policy rows must be distributions over actions")
    # P_pi[s, s'] = sum_a pi(a|s) P(s'|s, a)
    P_pi = np.einsum("sa,sat->st", table, mdp.P)
    if mdp.terminal is not None and mdp.terminal.any():
        term = np.where(mdp.terminal)[0]
        P_pi = P_pi.copy()
        P_pi[term] = 0.0
        P_pi[term, term] = 1.0
    d = np.linalg.solve(np.eye(S) - gamma * P_pi.T, mdp.p0)
    rho = d[:, None] * P_pi
    if mdp.terminal is not None and mdp.terminal.any():
        rho[mdp.terminal] = 0.0
    return StateTransitionOccupancy("exact-tabular", gamma, mass=rho)


def exact_visitation(mdp, policy_table, gamma):
    """Discounted state visitation d(s) = sum_t gamma^t P(s_t = s | pi)."""
    table = np.asarray(policy_table, dtype=np.float64)
    P_pi = np.einsum("sa,sat->st", table, mdp.P)
    return np.linalg.solve(np.eye(mdp.n_states) - gamma * P_pi.T, mdp.p0)


def empirical_occupancy(trajectories, gamma, bins=None, n_states=None):
    """Estimate the occupancy from rollouts; step t weighs gamma^t, averaged
    over episodes.

    trajectories is either a list of Trajectory objects or an
    (episodes, T+1) integer array of tabular state indices (the output of
    envs.simulate_tabular). Tabular inputs need n_states; continuous
    trajectories need a BinSpec.
    """
    if isinstance(trajectories, np.ndarray):
        if n_states is None:
            raise ValueError("index-array input requires n_states")
        if trajectories.size == 0:
            raise ValueError("empty trajectory set")
        E, T1 = trajectories.shape
        weights = gamma ** np.arange(T1 - 1)
        mass = np.zeros((n_states, n_states))
        flat = trajectories[:, :-1] * n_states + trajectories[:, 1:]
        for t in range(T1 - 1):
            mass.ravel()[:] += np.bincount(flat[:, t], minlength=n_states * n_states) * weights[t]
        return StateTransitionOccupancy("empirical", gamma, mass=mass / E)

    trajectories = [tr for tr in trajectories if not tr.aborted]
    if not trajectories:
        raise ValueError("empty trajectory set")
    n_eps = len(trajectories)
    if n_states is not None:
        mass = np.zeros((n_states, n_states))
        for tr in trajectories:
            if tr.state_indices is None:
                raise ValueError("tabular estimate requires trajectories with state indices")
            idx = tr.state_indices
            w = gamma ** np.arange(len(idx) - 1)
            np.add.at(mass, (idx[:-1], idx[1:]), w)
        return StateTransitionOccupancy("empirical", gamma, mass=mass / n_eps)

    if bins is None:
        raise ValueError("continuous estimate requires a BinSpec")
    mass_map = {}
    for tr in trajectories:
        for t in range(tr.n_steps):
            key = (bins.index(tr.states[t]), bins.index(tr.states[t + 1]))
            mass_map[key] = mass_map.get(key, 0.0) + gamma**t
    for k in mass_map:
        mass_map[k] /= n_eps
    return StateTransitionOccupancy("empirical", gamma, mass_map=mass_map, bins=bins)


def occupancy_distance(a, b, metric="l1"):
    """Distance between occupancies, computed on unit-normalized masses.

    metric "l1" or "tv" (total variation = l1 / 2). Zero iff the normalized
    mass functions coincide.
    """
    if metric not in ("l1", "tv"):
        raise ValueError(f"unknown metric {metric!r}")
    an, bn = a.normalized(), b.normalized()
    if an.mass is not None and bn.mass is not None:
        if an.mass.shape != bn.mass.shape:
            raise ValueError(f"incompatible supports {an.mass.shape} vs {bn.mass.shape}")
        l1 = float(np.abs(an.mass - bn.mass).sum())
    elif an.mass_map is not None and bn.mass_map is not None:
        if a.bins != b.bins:
            raise ValueError("incompatible binning specs")
        keys = set(an.mass_map) | set(bn.mass_map)
        l1 = float(sum(abs(an.mass_map.get(k, 0.0) - bn.mass_map.get(k, 0.0)) for k in keys))
    else:
        raise ValueError("cannot compare dense and binned occupancies")
    return l1 if metric == "l1" else 0.5 * l1
