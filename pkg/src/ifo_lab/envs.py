"""Seedable desk-scale environments with a uniform stepping interface.

Environments expose:
  reset(seed) -> observation
  step(action) -> (observation, reward, done)
  spec: EnvSpec
Tabular environments additionally expose .mdp (a TabularMDP) and
.state_index (the current discrete state); their observations are one-hot.
Continuous dynamics are integrated with fixed-step semi-implicit Euler.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvSpec:
    env_id: str
    obs_dim: int
    action_kind: str          # "discrete" | "box"
    horizon: int
    gamma: float
    n_actions: int = 0        # discrete
    action_dim: int = 0       # box
    action_low: float = -1.0
    action_high: float = 1.0
    state_count: int = 0      # tabular only

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass
class TabularMDP:
    """Finite MDP: P[s, a, s'] transition tensor, R[s, a] reward, p0 init."""

    P: np.ndarray
    R: np.ndarray
    p0: np.ndarray
    terminal: np.ndarray | None = None

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.p0 = np.asarray(self.p0, dtype=np.float64)
        S, A, S2 = self.P.shape
        if S != S2 or self.R.shape != (S, A) or self.p0.shape != (S,):
            raise ValueError(f"inconsistent MDP shapes P{self.P.shape} R{self.R.shape} p0{self.p0.shape}")
        if np.any(self.P < 0) or np.any(self.p0 < 0):
            raise ValueError("negative probabilities")
        if np.max(np.abs(self.P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if abs(self.p0.sum() - 1.0) > 1e-12:
            raise ValueError("p0 must sum to 1 within 1e-12")
        if self.terminal is not None:
            self.terminal = np.asarray(self.terminal, dtype=bool)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def n_actions(self):
        return self.P.shape[1]


class Transition:
    """One environment step (s, a, s', r, done)."""

    __slots__ = ("s", "a", "s_next", "reward", "done")

    def __init__(self, s, a, s_next, reward, done):
        self.s = s
        self.a = a
        self.s_next = s_next
        self.reward = reward
        self.done = done


@dataclass
class Trajectory:
    """One episode: states has shape (T+1, obs_dim), actions/rewards length T."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    seed: object
    state_indices: np.ndarray | None = None
    aborted: bool = False

    @property
    def n_steps(self):
        return len(self.rewards)

    @property
    def total_return(self):
        return float(self.rewards.sum())

    def transitions(self):
        for t in range(self.n_steps):
            yield Transition(
                self.states[t], self.actions[t], self.states[t + 1],
                float(self.rewards[t]), t == self.n_steps - 1,
            )


class TabularEnv:
    """Episodic wrapper around a TabularMDP with one-hot observations."""

    def __init__(self, mdp, horizon, gamma, env_id="tabular"):
        self.mdp = mdp
        self.spec = EnvSpec(
            env_id=env_id, obs_dim=mdp.n_states, action_kind="discrete",
            horizon=horizon, gamma=gamma, n_actions=mdp.n_actions,
            state_count=mdp.n_states,
        )
        self._eye = np.eye(mdp.n_states)
        self.state_index = None
        self._t = None
        self._rng = None

    def _obs(self):
        return self._eye[self.state_index].copy()

    def reset(self, seed):
        self._rng = np.random.default_rng(seed)
        self.state_index = int(self._rng.choice(self.mdp.n_states, p=self.mdp.p0))
        self._t = 0
        return self._obs()

    def step(self, action):
        if self._t is None:
            raise RuntimeError("step before reset")
        if self._t >= self.spec.horizon:
            raise RuntimeError("step after episode end")
        a = int(action)
        if not 0 <= a < self.mdp.n_actions:
            raise ValueError(f"action {a} outside 0..{self.mdp.n_actions - 1}")
        s = self.state_index
        reward = float(self.mdp.R[s, a])
        self.state_index = int(self._rng.choice(self.mdp.n_states, p=self.mdp.P[s, a]))
        self._t += 1
        done = self._t >= self.spec.horizon
        if self.mdp.terminal is not None and self.mdp.terminal[self.state_index]:
            done = True
        if done:
            self._t = self.spec.horizon
        return self._obs(), reward, done


def gridworld(width=5, height=5, goal=None, slip_prob=0.0, horizon=40,
              gamma=0.95, cyclic_goals=None):
    """Gridworld over cells (x, y), x = column. Actions: 0 right, 1 left,
    2 up (y+1), 3 down. Reward 1 for standing on the goal cell; walls bump.

    cyclic_goals=(g1, g2) switches to a patrol variant: the state carries
    which goal is active, reward 1 for standing on the active goal, which
    then hands off to the other one.
    """
    n_cells = width * height
    if goal is None:
        goal = (width - 1, height - 1)

    def cell(x, y):
        return y * width + x

    moves = np.zeros((n_cells, 4), dtype=int)
    for y in range(height):
        for x in range(width):
            s = cell(x, y)
            moves[s, 0] = cell(min(x + 1, width - 1), y)
            moves[s, 1] = cell(max(x - 1, 0), y)
            moves[s, 2] = cell(x, min(y + 1, height - 1))
            moves[s, 3] = cell(x, max(y - 1, 0))

    # per-cell transition matrix with slip: chosen move w.p. 1-slip, else uniform
    cell_P = np.zeros((n_cells, 4, n_cells))
    for s in range(n_cells):
        uniform = np.zeros(n_cells)
        for a in range(4):
            uniform[moves[s, a]] += 0.25
        for a in range(4):
            row = slip_prob * uniform
            row[moves[s, a]] += 1.0 - slip_prob
            cell_P[s, a] = row

    if cyclic_goals is None:
        g = cell(*goal)
        R = np.zeros((n_cells, 4))
        R[g, :] = 1.0
        p0 = np.zeros(n_cells)
        p0[cell(0, 0)] = 1.0
        mdp = TabularMDP(cell_P, R, p0)
        env = TabularEnv(mdp, horizon, gamma, env_id="gridworld")
        env.layout = {"width": width, "height": height, "goal": goal}
        return env

    g1, g2 = cell(*cyclic_goals[0]), cell(*cyclic_goals[1])
    goals = (g1, g2)
    S = 2 * n_cells  # state = cell + active-goal bit
    P = np.zeros((S, 4, S))
    R = np.zeros((S, 4))
    for bit in range(2):
        active = goals[bit]
        for s in range(n_cells):
            at_active = s == active
            out_bit = (1 - bit) if at_active else bit
            if at_active:
                R[bit * n_cells + s, :] = 1.0
            P[bit * n_cells + s, :, out_bit * n_cells : out_bit * n_cells + n_cells] = cell_P[s]
    p0 = np.zeros(S)
    p0[cell(0, 0)] = 1.0
    mdp = TabularMDP(P, R, p0)
    env = TabularEnv(mdp, horizon, gamma, env_id="gridworld-cyclic")
    env.layout = {"width": width, "height": height, "cyclic_goals": cyclic_goals}
    return env


class PointMass:
    """Double integrator pushed toward a target. State = [pos, vel]."""

    def __init__(self, dim=2, target=None, init_radius=1.0, dt=0.05,
                 horizon=200, gamma=0.99, action_cost=0.01):
        self.dim = dim
        self.target = np.zeros(dim) if target is None else np.asarray(target, float)
        self.init_radius = init_radius
        self.dt = dt
        self.action_cost = action_cost
        self.spec = EnvSpec(
            env_id="point_mass", obs_dim=2 * dim, action_kind="box",
            horizon=horizon, gamma=gamma, action_dim=dim,
            action_low=-1.0, action_high=1.0,
        )
        # state bounds for diagnostic binning
        r = max(1.0, init_radius) + 1.0
        self.state_bounds = (np.array([-r] * dim + [-2.0] * dim),
                             np.array([r] * dim + [2.0] * dim))
        self._pos = None
        self._vel = None
        self._t = None

    def _obs(self):
        return np.concatenate([self._pos, self._vel])

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        self._pos = rng.uniform(-self.init_radius, self.init_radius, size=self.dim)
        self._vel = np.zeros(self.dim)
        self._t = 0
        return self._obs()

    def step(self, action):
        if self._t is None:
            raise RuntimeError("step before reset")
        if self._t >= self.spec.horizon:
            raise RuntimeError("step after episode end")
        a = np.clip(np.asarray(action, dtype=np.float64),
                    self.spec.action_low, self.spec.action_high)
        if a.shape != (self.dim,):
            raise ValueError(f"action shape {a.shape} != ({self.dim},)")
        self._vel = self._vel + self.dt * a
        self._pos = self._pos + self.dt * self._vel
        self._t += 1
        err = self._pos - self.target
        reward = -float(err @ err) - self.action_cost * float(a @ a)
        return self._obs(), reward, self._t >= self.spec.horizon


class PendulumSwingup:
    """Torque-limited swing-up. Angle 0 is upright; starts hanging down.

    Dynamics: theta_dd = (g/l) sin(theta) + u/(m l^2) - damping * theta_d,
    semi-implicit Euler at dt. With zero torque, mechanical energy
    E = 0.5 m l^2 theta_d^2 + m g l cos(theta) changes only through the
    damping term dE/dt = -damping * m l^2 * theta_d^2.
    """

    def __init__(self, dt=0.05, horizon=200, gamma=0.99, max_torque=2.0,
                 damping=0.05, g=9.8, m=1.0, length=1.0, torque_cost=0.001):
        self.dt = dt
        self.max_torque = max_torque
        self.damping = damping
        self.g = g
        self.m = m
        self.length = length
        self.torque_cost = torque_cost
        self.spec = EnvSpec(
            env_id="pendulum_swingup", obs_dim=3, action_kind="box",
            horizon=horizon, gamma=gamma, action_dim=1,
            action_low=-max_torque, action_high=max_torque,
        )
        self.state_bounds = (np.array([-1.0, -1.0, -8.0]),
                             np.array([1.0, 1.0, 8.0]))
        self._theta = None
        self._omega = None
        self._t = None

    def _obs(self):
        return np.array([np.cos(self._theta), np.sin(self._theta), self._omega])

    def energy(self):
        k = 0.5 * self.m * self.length**2 * self._omega**2
        p = self.m * self.g * self.length * np.cos(self._theta)
        return float(k + p)

    def reset(self, seed):
        rng = np.random.default_rng(seed)
        self._theta = np.pi + rng.uniform(-0.05, 0.05)
        self._omega = rng.uniform(-0.05, 0.05)
        self._t = 0
        return self._obs()

    def step(self, action):
        if self._t is None:
            raise RuntimeError("step before reset")
        if self._t >= self.spec.horizon:
            raise RuntimeError("step after episode end")
        u = float(np.clip(np.asarray(action, float).reshape(-1)[0],
                          -self.max_torque, self.max_torque))
        acc = (self.g / self.length) * np.sin(self._theta) \
            + u / (self.m * self.length**2) - self.damping * self._omega
        self._omega = self._omega + self.dt * acc
        self._theta = self._theta + self.dt * self._omega
        self._theta = (self._theta + np.pi) % (2 * np.pi) - np.pi
        self._t += 1
        reward = float(np.cos(self._theta)) - self.torque_cost * u * u
        return self._obs(), reward, self._t >= self.spec.horizon


class ObservationStack:
    """Wrapper emitting the concatenation of the last k observations.

    Initial frames are padded by repeating the first observation, so
    k = 1 is observation-equivalent to the raw environment.
    """

    def __init__(self, env, k):
        if k < 1:
            raise ValueError("history length must be >= 1")
        self.env = env
        self.k = k
        base = env.spec
        self.spec = EnvSpec(
            env_id=f"{base.env_id}-stack{k}", obs_dim=k * base.obs_dim,
            action_kind=base.action_kind, horizon=base.horizon,
            gamma=base.gamma, n_actions=base.n_actions,
            action_dim=base.action_dim, action_low=base.action_low,
            action_high=base.action_high, state_count=base.state_count,
        )
        self._frames = None

    def _obs(self):
        return np.concatenate(self._frames)

    def reset(self, seed):
        first = self.env.reset(seed)
        self._frames = [first.copy() for _ in range(self.k)]
        return self._obs()

    def step(self, action):
        obs, reward, done = self.env.step(action)
        self._frames.pop(0)
        self._frames.append(obs)
        return self._obs(), reward, done


class RandomPolicy:
    """Uniform random actions; the score-0 anchor of the scaled score."""

    def __init__(self, spec):
        self.spec = spec

    def act(self, obs, rng, deterministic=False):
        if self.spec.action_kind == "discrete":
            return int(rng.integers(self.spec.n_actions))
        return rng.uniform(self.spec.action_low, self.spec.action_high,
                           size=self.spec.action_dim)


class TabularPolicy:
    """Stochastic policy given as an (S, A) row-stochastic table.

    Acts on one-hot observations (decodes the state by argmax).
    """

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.float64)
        if np.any(self.table < 0) or np.max(np.abs(self.table.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("policy rows must be distributions")

    def act(self, obs, rng, deterministic=False):
        s = int(np.argmax(obs))
        if deterministic:
            return int(np.argmax(self.table[s]))
        return int(rng.choice(self.table.shape[1], p=self.table[s]))


class PointMassController:
    """Hand-tuned PD controller for PointMass; the expert oracle."""

    def __init__(self, env, kp=4.0, kd=4.0):
        self.dim = env.dim
        self.target = env.target
        self.kp = kp
        self.kd = kd

    def act(self, obs, rng, deterministic=False):
        pos, vel = obs[: self.dim], obs[self.dim :]
        return np.clip(self.kp * (self.target - pos) - self.kd * vel, -1.0, 1.0)


def episode_seeds(master_seed, n):
    """Deterministic per-episode integer seeds derived from a master seed."""
    ss = np.random.SeedSequence(master_seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(n)]


def rollout(policy, env, n_episodes, seed, deterministic=False):
    """Run n_episodes episodes; per-episode seeds derive from the master seed.

    A policy emitting non-finite actions aborts that episode, which is
    returned with aborted=True.
    """
    trajs = []
    tabular = env.spec.state_count > 0
    for ep_seed in episode_seeds(seed, n_episodes):
        # split the episode seed so the policy's and the environment's
        # random streams are independent rather than lockstep-correlated
        env_ss, policy_ss = np.random.SeedSequence(ep_seed).spawn(2)
        rng = np.random.default_rng(policy_ss)
        obs = env.reset(int(env_ss.generate_state(1)[0]))
        states, actions, rewards = [obs], [], []
        indices = [env.state_index] if tabular else None
        aborted = False
        done = False
        while not done:
            a = policy.act(obs, rng, deterministic=deterministic)
            if not np.all(np.isfinite(np.asarray(a, dtype=np.float64))):
                aborted = True
                break
            obs, r, done = env.step(a)
            states.append(obs)
            actions.append(a)
            rewards.append(r)
            if tabular:
                indices.append(env.state_index)
        trajs.append(Trajectory(
            states=np.asarray(states, dtype=np.float64),
            actions=np.asarray(actions),
            rewards=np.asarray(rewards, dtype=np.float64),
            seed=ep_seed,
            state_indices=None if indices is None else np.asarray(indices, dtype=int),
            aborted=aborted,
        ))
    return trajs


def simulate_tabular(mdp, table, n_episodes, horizon, seed):
    """Vectorized index-level simulation of a tabular policy.

    Returns an (n_episodes, horizon + 1) int array of state indices. Used
    by the empirical-occupancy consistency checks, where object-level
    rollouts would dominate the runtime.
    """
    table = np.asarray(table, dtype=np.float64)
    rng = np.random.default_rng(seed)
    S = mdp.n_states
    pi_cum = np.cumsum(table, axis=1)
    P_cum = np.cumsum(mdp.P, axis=2)
    states = np.empty((n_episodes, horizon + 1), dtype=int)
    s = rng.choice(S, size=n_episodes, p=mdp.p0)
    states[:, 0] = s
    for t in range(horizon):
        u = rng.random(n_episodes)
        a = (pi_cum[s] < u[:, None]).sum(axis=1)
        u2 = rng.random(n_episodes)
        s = (P_cum[s, a] < u2[:, None]).sum(axis=1)
        states[:, t + 1] = s
    return states


def value_iteration(mdp, gamma, tol=1e-10, max_iters=100_000):
    """Optimal values and a greedy deterministic policy table."""
    S, A = mdp.n_states, mdp.n_actions
    V = np.zeros(S)
    for _ in range(max_iters):
        Q = mdp.R + gamma * mdp.P @ V
        V_new = Q.max(axis=1)
        if np.max(np.abs(V_new - V)) < tol:
            V = V_new
            break
        V = V_new
    Q = mdp.R + gamma * mdp.P @ V
    table = np.zeros((S, A))
    table[np.arange(S), Q.argmax(axis=1)] = 1.0
    return V, table
