import math

import numpy as np
import pytest

from gravclust import (
    Cluster,
    ContractViolation,
    FeatureConfig,
    InvalidParameter,
    ModelState,
    OrderingError,
    StreamConfig,
    assign,
    confusion,
    estimate_beta,
    generate_scene,
    observations_from_trajectories,
    refine_beta,
    ring_scene_spec,
    run_converged,
    run_stream,
    score,
    unassign,
)
from util import brute_force_choice, brute_force_options, make_obs, recompute_cluster_stats

MAP5 = StreamConfig(beta=5.0)


def inject_cluster(state, label, mean, n):
    mean = np.asarray(mean, dtype=float)
    d = mean.shape[0]
    state.clusters[label] = Cluster(label, n, mean, np.zeros((d, d)))
    state.next_label = max(state.next_label, label + 1)


def line_observations(spacing, count=17, order=None):
    indices = list(range(count)) if order is None else order
    return [
        make_obs(i, [0.0, -spacing * idx], frame=i, index=i)
        for i, idx in enumerate(indices)
    ]


class TestScore:
    def test_empty_state_only_new(self):
        state = ModelState()
        assert score(state, make_obs(0, [1.0, 2.0]), MAP5) == [(None, -5.0)]

    def test_zero_distance_cluster(self):
        state = ModelState()
        inject_cluster(state, 1, [1.0, 2.0], 1)
        options = score(state, make_obs(0, [1.0, 2.0]), MAP5)
        assert options == [(None, -5.0), (1, 0.0)]

    def test_distance_three_two_members(self):
        state = ModelState()
        inject_cluster(state, 1, [3.0, 0.0], 2)
        options = score(state, make_obs(0, [0.0, 0.0]), MAP5)
        assert options[1][1] == pytest.approx(-3 + math.log(2), abs=1e-12)
        assert options[1][1] == pytest.approx(-2.3068528194400546, abs=1e-12)
        # cross-check against brute-force evaluation of the posterior
        expected = brute_force_options([(1, [3.0, 0.0], 2)], [0.0, 0.0], 5.0)
        for (la, sa), (lb, sb) in zip(options, expected):
            assert la == lb and sa == pytest.approx(sb, abs=1e-12)

    def test_score_is_pure(self):
        state = ModelState()
        inject_cluster(state, 1, [0.0, 0.0], 3)
        before = state.work_counter
        score(state, make_obs(0, [1.0, 0.0]), MAP5)
        assert state.work_counter == before

    def test_dimension_mismatch(self):
        state = ModelState()
        inject_cluster(state, 1, [0.0, 0.0], 1)
        with pytest.raises(ContractViolation):
            score(state, make_obs(0, [1.0, 2.0, 3.0]), MAP5)

    def test_no_underflow_at_large_beta(self):
        # e^-800 underflows in doubles; log scores stay finite and usable
        state = ModelState()
        inject_cluster(state, 1, [700.0, 0.0], 1)
        config = StreamConfig(beta=800.0)
        options = score(state, make_obs(0, [0.0, 0.0]), config)
        assert options[0][1] == -800.0
        assert all(np.isfinite(s) for _, s in options)
        assert assign(state, make_obs(0, [0.0, 0.0]), config) == 1


class TestAssign:
    def test_first_observation_creates_label_one(self):
        state = ModelState()
        assert assign(state, make_obs(0, [9.0, 9.0]), MAP5) == 1
        assert state.clusters[1].n == 1
        assert state.total_assigned == 1

    def test_joins_within_threshold(self):
        state = ModelState()
        assign(state, make_obs(0, [0.0, 0.0]), MAP5)
        # distance 4 < beta + ln(1) = 5
        assert assign(state, make_obs(1, [4.0, 0.0]), MAP5) == 1
        assert state.clusters[1].n == 2
        assert np.allclose(state.clusters[1].mean, [2.0, 0.0])

    def test_new_cluster_beyond_threshold(self):
        state = ModelState()
        assign(state, make_obs(0, [0.0, 0.0]), MAP5)
        # distance 6 > beta + ln(1) = 5
        assert assign(state, make_obs(1, [6.0, 0.0]), MAP5) == 2

    def test_tie_prefers_existing(self):
        state = ModelState()
        inject_cluster(state, 1, [3.0, 4.0], 1)  # distance exactly 5 = beta
        assert assign(state, make_obs(0, [0.0, 0.0]), MAP5) == 1

    def test_tie_prefers_lowest_label(self):
        state = ModelState()
        inject_cluster(state, 1, [5.0, 0.0], 1)
        inject_cluster(state, 2, [0.0, 5.0], 1)
        assert assign(state, make_obs(0, [0.0, 0.0]), MAP5) == 1

    def test_double_assignment_rejected(self):
        state = ModelState()
        assign(state, make_obs(0, [0.0, 0.0]), MAP5)
        with pytest.raises(ContractViolation):
            assign(state, make_obs(0, [1.0, 0.0]), MAP5)

    def test_work_counter_counts_existing_clusters(self):
        state = ModelState()
        assign(state, make_obs(0, [0.0, 0.0]), MAP5)
        assert state.work_counter == 0
        assign(state, make_obs(1, [1.0, 0.0]), MAP5)
        assert state.work_counter == 1
        assign(state, make_obs(2, [40.0, 0.0]), MAP5)
        assert state.work_counter == 2
        assign(state, make_obs(3, [40.5, 0.0]), MAP5)
        assert state.work_counter == 4

    def test_join_threshold_law_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            k = int(rng.integers(0, 7))
            d = int(rng.integers(1, 6))
            beta = float(np.exp(rng.uniform(np.log(0.01), np.log(100.0))))
            stats = []
            state = ModelState()
            for label in range(1, k + 1):
                mean = rng.uniform(-50, 50, d)
                n = int(rng.integers(1, 100))
                inject_cluster(state, label, mean, n)
                stats.append((label, mean.tolist(), n))
            obs = make_obs(0, rng.uniform(-60, 60, d))
            expected = brute_force_choice(stats, obs.features.tolist(), beta)
            got = assign(state, obs, StreamConfig(beta=beta))
            if expected is None:
                assert got == k + 1
            else:
                assert got == expected


class TestGibbs:
    def test_reproducible_for_fixed_seed(self):
        trajectories, _ = generate_scene(ring_scene_spec(3, 120, seed=2, ring_radius=20.0))
        observations = observations_from_trajectories(
            trajectories, FeatureConfig(selector="start_end")
        )
        config = StreamConfig(beta=4.0, mode="gibbs", rng_seed=11)
        _, first = run_stream(observations, config)
        _, second = run_stream(observations, config)
        assert first == second

    def test_sampling_follows_score_proportions(self):
        # One cluster at zero distance (log score 0) against a new-cluster
        # option at -1: join probability is 1 / (1 + e^-1).
        p_join = 1.0 / (1.0 + math.exp(-1.0))
        trials = 3000
        joined = 0
        for seed in range(trials):
            state = ModelState(rng_seed=seed)
            inject_cluster(state, 1, [0.0, 0.0], 1)
            if assign(state, make_obs(0, [0.0, 0.0]), StreamConfig(beta=1.0, mode="gibbs")) == 1:
                joined += 1
        sigma = math.sqrt(trials * p_join * (1 - p_join))
        assert abs(joined - trials * p_join) < 3 * sigma


class TestUnassign:
    def test_single_round_trip_restores_fresh_state(self):
        state = ModelState()
        obs = make_obs(0, [2.0, 3.0])
        assign(state, obs, MAP5)
        unassign(state, obs)
        assert state.clusters == {}
        assert state.assignments == {}
        assert state.total_assigned == 0
        assert state.next_label == 2  # labels are never reused

    def test_two_point_downdate(self):
        state = ModelState()
        a, b = make_obs(0, [0.0, 0.0]), make_obs(1, [2.0, 0.0])
        assign(state, a, MAP5)
        assign(state, b, MAP5)
        assert np.allclose(state.clusters[1].mean, [1.0, 0.0])
        assert unassign(state, b) == 1
        assert state.clusters[1].n == 1
        assert np.allclose(state.clusters[1].mean, [0.0, 0.0])

    def test_unknown_observation_rejected(self):
        state = ModelState()
        with pytest.raises(ContractViolation):
            unassign(state, make_obs(0, [0.0, 0.0]))

    def test_hundred_assigns_then_unassign_all(self):
        rng = np.random.default_rng(3)
        state = ModelState()
        config = StreamConfig(beta=3.0)
        members: dict[int, list] = {}
        observations = []
        for i in range(100):
            obs = make_obs(i, rng.uniform(-30, 30, 3))
            label = assign(state, obs, config)
            members.setdefault(label, []).append((i, obs))
            observations.append((label, obs))
        order = rng.permutation(100)
        for pos in order:
            label, obs = observations[int(pos)]
            unassign(state, obs)
            members[label] = [(i, o) for i, o in members[label] if i != obs.obs_id]
            oracle = recompute_cluster_stats(
                {lab: [o.features for _, o in mem] for lab, mem in members.items()}
            )
            assert set(state.clusters) == set(oracle)
            for lab, (count, mean) in oracle.items():
                assert state.clusters[lab].n == count
                assert np.allclose(state.clusters[lab].mean, mean, rtol=1e-9, atol=1e-12)
        assert state.total_assigned == 0
        assert state.clusters == {}


class TestBetaEstimation:
    def test_log_of_one_is_zero(self):
        assert estimate_beta(10.0, 1) == 10.0

    def test_radius_ten_seven_members(self):
        # 10 - ln(7); digits cross-checked with an arbitrary-precision ln
        assert estimate_beta(10.0, 7) == pytest.approx(8.054089850944687, abs=1e-12)

    def test_radius_below_log_count_rejected(self):
        with pytest.raises(InvalidParameter) as err:
            estimate_beta(1.0, 10)
        assert "2.30259" in str(err.value)  # names the minimum viable radius

    def test_refine_zero_spread_clamps(self):
        state = ModelState()
        assign(state, make_obs(0, [5.0, 5.0]), MAP5)
        assign(state, make_obs(1, [5.0, 5.0]), MAP5)
        assert refine_beta(state, MAP5) == 1e-6

    def test_refine_two_clusters(self):
        state = ModelState()
        config = StreamConfig(beta=50.0)
        for i, value in enumerate([-8.0, 8.0, 0.0]):
            assign(state, make_obs(i, [value]), config)
        for i in range(3, 8):
            assign(state, make_obs(i, [1000.0]), config)
        assert state.n_clusters == 2
        assert state.clusters[1].n == 3 and state.clusters[2].n == 5
        assert refine_beta(state, config) == pytest.approx(8 - math.log(4), abs=1e-9)
        assert refine_beta(state, config) == pytest.approx(6.61370563888011, abs=1e-9)

    def test_refine_empty_state_rejected(self):
        with pytest.raises(ContractViolation):
            refine_beta(ModelState(), MAP5)

    def test_refine_bounded_by_observed_radius_on_scene(self):
        trajectories, _ = generate_scene(ring_scene_spec(4, 400, seed=9))
        observations = observations_from_trajectories(
            trajectories, FeatureConfig(selector="start_end")
        )
        config = StreamConfig(beta=2.5 + math.log(100))
        state, assignments = run_stream(observations, config)
        r_obs = max(
            math.dist(state.features[o].tolist(), state.clusters[lab].mean.tolist())
            for o, lab in assignments.items()
        )
        refined = refine_beta(state, config)
        total = state.total_assigned
        assert r_obs - math.log(total) <= refined <= r_obs


class TestRunStream:
    def test_line_collapses_in_temporal_order(self):
        spacing = 0.25
        observations = line_observations(spacing)
        state, _ = run_stream(observations, StreamConfig(beta=1.05 * spacing))
        assert state.n_clusters == 1

    def test_line_single_cluster_any_order_with_huge_beta(self):
        spacing = 1.0
        length = 16.0
        order = [8, 12, 1, 16, 4, 0, 9, 2, 15, 7, 3, 11, 5, 14, 6, 10, 13]
        observations = line_observations(spacing, order=order)
        state, _ = run_stream(observations, StreamConfig(beta=length * 1.01))
        assert state.n_clusters == 1

    def test_three_path_scene_pure_recovery(self):
        trajectories, gt = generate_scene(ring_scene_spec(3, 600, seed=4))
        observations = observations_from_trajectories(
            trajectories, FeatureConfig(selector="start_end")
        )
        beta = 2.5 + math.log(200)
        state, assignments = run_stream(observations, StreamConfig(beta=beta))
        assert state.n_clusters == 3
        assert confusion(assignments, gt).accuracy == 1.0

    def test_unsorted_input_rejected(self):
        observations = [make_obs(0, [0.0], index=1), make_obs(1, [1.0], index=0)]
        with pytest.raises(OrderingError):
            run_stream(observations, MAP5)

    def test_work_bound(self):
        rng = np.random.default_rng(5)
        observations = [make_obs(i, rng.uniform(-40, 40, 2)) for i in range(300)]
        state, _ = run_stream(observations, StreamConfig(beta=10.0))
        assert state.work_counter <= len(observations) * state.n_clusters

    def test_map_mode_bit_reproducible(self):
        rng = np.random.default_rng(6)
        observations = [make_obs(i, rng.uniform(-40, 40, 2)) for i in range(200)]
        s1, a1 = run_stream(observations, StreamConfig(beta=7.0))
        s2, a2 = run_stream(observations, StreamConfig(beta=7.0))
        assert a1 == a2
        for label in s1.clusters:
            assert np.array_equal(s1.clusters[label].mean, s2.clusters[label].mean)
            assert np.array_equal(s1.clusters[label].m2, s2.clusters[label].m2)

    def test_shatter_and_collapse(self):
        rng = np.random.default_rng(8)
        observations = [make_obs(i, rng.uniform(0, 100, 2)) for i in range(60)]
        matrix = np.array([o.features for o in observations])
        dists = np.sqrt(((matrix[:, None] - matrix[None, :]) ** 2).sum(-1))
        np.fill_diagonal(dists, np.inf)
        min_pair = dists.min()
        diameter = dists[np.isfinite(dists)].max()
        shattered, _ = run_stream(observations, StreamConfig(beta=min_pair * 0.999))
        assert shattered.n_clusters == len(observations)
        collapsed, _ = run_stream(observations, StreamConfig(beta=diameter * 1.001))
        assert collapsed.n_clusters == 1

    def test_count_conservation(self):
        rng = np.random.default_rng(9)
        observations = [make_obs(i, rng.uniform(-20, 20, 2)) for i in range(150)]
        state, _ = run_stream(observations, StreamConfig(beta=6.0))
        assert state.total_assigned == len(state.assignments) == 150
        assert sum(c.n for c in state.clusters.values()) == 150


class TestRunConverged:
    def test_stable_scene_converges_in_one_sweep(self):
        trajectories, _ = generate_scene(ring_scene_spec(3, 300, seed=10))
        observations = observations_from_trajectories(
            trajectories, FeatureConfig(selector="start_end")
        )
        config = StreamConfig(beta=2.5 + math.log(100))
        _, single_pass = run_stream(observations, config)
        state, converged, sweeps = run_converged(observations, config, max_sweeps=10)
        assert sweeps == 1
        assert converged == single_pass

    def test_adversarial_order_runs_and_may_split(self):
        spacing = 0.25
        order = [8, 9, 7, 10, 6, 11, 5, 12, 4, 13, 3, 14, 2, 15, 1, 16, 0]
        observations = line_observations(spacing, order=order)
        state, _, sweeps = run_converged(
            observations, StreamConfig(beta=1.05 * spacing), max_sweeps=20
        )
        assert state.n_clusters >= 1
        assert 1 <= sweeps <= 20

    def test_max_sweeps_honored(self):
        rng = np.random.default_rng(12)
        observations = [make_obs(i, rng.uniform(0, 8, 2)) for i in range(60)]
        _, _, sweeps = run_converged(observations, StreamConfig(beta=2.0), max_sweeps=1)
        assert sweeps == 1

    def test_invalid_max_sweeps(self):
        with pytest.raises(InvalidParameter):
            run_converged([], MAP5, max_sweeps=0)
