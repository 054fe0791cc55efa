"""Occupancy machinery: the exact linear-system oracle, hand-derived cases,
empirical estimator consistency, and occupancy distances."""

import numpy as np
import pytest

from ifo_lab import envs, occupancy


def random_mdp(rng, n_states, n_actions):
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.normal(size=(n_states, n_actions))
    p0 = rng.dirichlet(np.ones(n_states))
    return envs.TabularMDP(P=P, R=R, p0=p0)


def alternation_mdp():
    """Deterministic two-state cycle s0 -> s1 -> s0, starting at s0."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = 1.0
    return envs.TabularMDP(P=P, R=np.zeros((2, 1)), p0=np.array([1.0, 0.0]))


class TestExactOccupancy:
    def test_self_loop_geometric_series(self):
        P = np.ones((1, 1, 1))
        mdp = envs.TabularMDP(P=P, R=np.zeros((1, 1)), p0=np.array([1.0]))
        occ = occupancy.exact_occupancy(mdp, np.ones((1, 1)), 0.9)
        assert occ.mass[0, 0] == pytest.approx(10.0, abs=1e-12)

    def test_two_state_alternation_hand_values(self):
        # d(s0) = 1/(1-g^2), d(s1) = g/(1-g^2); at g = 0.5: 4/3 and 2/3
        occ = occupancy.exact_occupancy(alternation_mdp(), np.ones((2, 1)), 0.5)
        assert occ.mass[0, 1] == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert occ.mass[1, 0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert occ.mass[0, 0] == 0.0
        assert occ.mass[1, 1] == 0.0

    def test_total_mass_identity_random_mdps(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            mdp = random_mdp(rng, 7, 3)
            table = rng.dirichlet(np.ones(3), size=7)
            gamma = rng.uniform(0.5, 0.99)
            occ = occupancy.exact_occupancy(mdp, table, gamma)
            assert occ.total_mass() == pytest.approx(1.0 / (1.0 - gamma), abs=1e-9)

    def test_rejects_gamma_one(self):
        with pytest.raises(ValueError):
            occupancy.exact_occupancy(alternation_mdp(), np.ones((2, 1)), 1.0)

    def test_rejects_non_stochastic_policy(self):
        with pytest.raises(ValueError):
            occupancy.exact_occupancy(alternation_mdp(), np.full((2, 1), 0.5), 0.9)

    def test_action_relabeling_symmetry(self):
        # two distinct policies inducing the same Markov chain must yield
        # identical occupancies: duplicate each action, split mass across
        # the copies differently
        rng = np.random.default_rng(1)
        base = random_mdp(rng, 5, 2)
        P2 = np.concatenate([base.P, base.P], axis=1)
        R2 = np.concatenate([base.R, base.R], axis=1)
        mdp = envs.TabularMDP(P=P2, R=R2, p0=base.p0)
        pi_a = np.tile(np.array([0.5, 0.5, 0.0, 0.0]), (5, 1))
        pi_b = np.tile(np.array([0.1, 0.2, 0.4, 0.3]), (5, 1))
        occ_a = occupancy.exact_occupancy(mdp, pi_a, 0.9)
        occ_b = occupancy.exact_occupancy(mdp, pi_b, 0.9)
        np.testing.assert_allclose(occ_a.mass, occ_b.mass, atol=1e-12)

    def test_terminal_states_contribute_no_outgoing_mass(self):
        P = np.zeros((2, 1, 2))
        P[0, 0, 1] = 1.0
        P[1, 0, 1] = 1.0
        mdp = envs.TabularMDP(P=P, R=np.zeros((2, 1)), p0=np.array([1.0, 0.0]),
                              terminal=np.array([False, True]))
        occ = occupancy.exact_occupancy(mdp, np.ones((2, 1)), 0.9)
        assert np.all(occ.mass[1] == 0.0)
        assert occ.mass[0, 1] == pytest.approx(1.0)


class TestEmpiricalOccupancy:
    def test_single_one_step_episode(self):
        tr = envs.Trajectory(states=np.eye(2), actions=np.array([0]),
                             rewards=np.zeros(1), seed=0,
                             state_indices=np.array([0, 1]))
        occ = occupancy.empirical_occupancy([tr], 0.7, n_states=2)
        assert occ.mass[0, 1] == pytest.approx(1.0)
        assert occ.total_mass() == pytest.approx(1.0)

    def test_duplicate_episodes_average_to_one(self):
        tr = envs.Trajectory(states=np.eye(2), actions=np.array([0]),
                             rewards=np.zeros(1), seed=0,
                             state_indices=np.array([0, 1]))
        one = occupancy.empirical_occupancy([tr], 0.7, n_states=2)
        two = occupancy.empirical_occupancy([tr, tr], 0.7, n_states=2)
        np.testing.assert_allclose(one.mass, two.mass)

    def test_discount_weighting(self):
        tr = envs.Trajectory(states=np.eye(3), actions=np.zeros(2, int),
                             rewards=np.zeros(2), seed=0,
                             state_indices=np.array([0, 1, 2]))
        occ = occupancy.empirical_occupancy([tr], 0.5, n_states=3)
        assert occ.mass[0, 1] == pytest.approx(1.0)
        assert occ.mass[1, 2] == pytest.approx(0.5)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            occupancy.empirical_occupancy([], 0.9, n_states=2)

    def test_index_array_input_matches_trajectory_input(self):
        arr = np.array([[0, 1, 0], [0, 1, 1]])
        occ_arr = occupancy.empirical_occupancy(arr, 0.9, n_states=2)
        trajs = []
        for row in arr:
            trajs.append(envs.Trajectory(
                states=np.eye(2)[row], actions=np.zeros(2, int),
                rewards=np.zeros(2), seed=0, state_indices=row))
        occ_tr = occupancy.empirical_occupancy(trajs, 0.9, n_states=2)
        np.testing.assert_allclose(occ_arr.mass, occ_tr.mass)

    def test_binned_continuous_occupancy(self):
        bins = occupancy.BinSpec.from_bounds([-1.0], [1.0], bins=4)
        states = np.array([[-0.9], [-0.1], [0.9]])
        tr = envs.Trajectory(states=states, actions=np.zeros(2),
                             rewards=np.zeros(2), seed=0)
        occ = occupancy.empirical_occupancy([tr], 0.5, bins=bins)
        assert occ.mass_map[((0,), (1,))] == pytest.approx(1.0)
        assert occ.mass_map[((1,), (3,))] == pytest.approx(0.5)

    def test_converges_to_exact(self):
        env = envs.gridworld(3, 3, slip_prob=0.3, horizon=60, gamma=0.9)
        table = np.full((9, 4), 0.25)
        exact = occupancy.exact_occupancy(env.mdp, table, 0.9)
        dists = []
        for n in (200, 1000, 5000):
            states = envs.simulate_tabular(env.mdp, table, n, 60, seed=3)
            emp = occupancy.empirical_occupancy(states, 0.9, n_states=9)
            dists.append(occupancy.occupancy_distance(emp, exact))
        assert dists[-1] < 0.05
        assert dists[2] < dists[0]


class TestDistance:
    def test_identity_is_zero(self):
        occ = occupancy.exact_occupancy(alternation_mdp(), np.ones((2, 1)), 0.5)
        assert occupancy.occupancy_distance(occ, occ) == 0.0

    def test_disjoint_singletons_tv_one(self):
        a = occupancy.StateTransitionOccupancy(
            "empirical", 0.9, mass=np.array([[1.0, 0.0], [0.0, 0.0]]))
        b = occupancy.StateTransitionOccupancy(
            "empirical", 0.9, mass=np.array([[0.0, 0.0], [0.0, 1.0]]))
        assert occupancy.occupancy_distance(a, b, metric="tv") == pytest.approx(1.0)
        assert occupancy.occupancy_distance(a, b, metric="l1") == pytest.approx(2.0)

    def test_alternation_vs_uniform_hand_value(self):
        # normalized alternation occupancy: 2/3 on (0,1), 1/3 on (1,0);
        # uniform on 4 entries: 1/4 each
        # L1 = |2/3-1/4| + |1/3-1/4| + 2*1/4 = 5/12 + 1/12 + 1/2 = 1
        occ = occupancy.exact_occupancy(alternation_mdp(), np.ones((2, 1)), 0.5)
        uniform = occupancy.StateTransitionOccupancy(
            "empirical", 0.5, mass=np.full((2, 2), 0.25))
        assert occupancy.occupancy_distance(occ, uniform) == pytest.approx(1.0)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(2)
        a = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass=rng.random((3, 3)))
        b = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass=rng.random((3, 3)))
        d_ab = occupancy.occupancy_distance(a, b)
        d_ba = occupancy.occupancy_distance(b, a)
        assert d_ab == pytest.approx(d_ba)
        assert d_ab >= 0.0

    def test_scale_invariance_via_normalization(self):
        rng = np.random.default_rng(3)
        mass = rng.random((3, 3))
        a = occupancy.StateTransitionOccupancy("empirical", 0.9, mass=mass)
        b = occupancy.StateTransitionOccupancy("empirical", 0.9, mass=5.0 * mass)
        assert occupancy.occupancy_distance(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_incompatible_binning_rejected(self):
        b1 = occupancy.BinSpec.from_bounds([0.0], [1.0], bins=4)
        b2 = occupancy.BinSpec.from_bounds([0.0], [1.0], bins=8)
        a = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass_map={((0,), (1,)): 1.0}, bins=b1)
        b = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass_map={((0,), (1,)): 1.0}, bins=b2)
        with pytest.raises(ValueError):
            occupancy.occupancy_distance(a, b)

    def test_dense_vs_binned_rejected(self):
        a = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass=np.ones((2, 2)))
        b = occupancy.StateTransitionOccupancy("empirical", 0.9,
                                               mass_map={((0,), (0,)): 1.0})
        with pytest.raises(ValueError):
            occupancy.occupancy_distance(a, b)


class TestExport:
    def test_csv_contains_nonzero_entries(self, tmp_path):
        occ = occupancy.exact_occupancy(alternation_mdp(), np.ones((2, 1)), 0.5)
        path = tmp_path / "occ.csv"
        occ.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "i,j,mass"
        entries = {tuple(line.split(",")[:2]): float(line.split(",")[2])
                   for line in lines[1:]}
        assert entries[("0", "1")] == pytest.approx(4.0 / 3.0)
        assert entries[("1", "0")] == pytest.approx(2.0 / 3.0)
        assert len(entries) == 2
