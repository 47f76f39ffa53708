import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncrs.algorithms import (
    StepSchedule,
    constant_schedule,
    cosine_schedule,
    log_stride,
    ncrs_run,
    ncrs_vote_run,
    rsgf_run,
    rsgf_stable_step,
    theory_schedule,
    vote_params,
)
from ncrs.geometry import RngStream, Subspace, stream_id_for
from ncrs.objectives import (
    InnerFunction,
    RidgeObjective,
    initial_point,
    random_ridge_objective,
)
from ncrs.oracles import ConfidenceOracle, LinkFunction, SignOracle


def _stream(seed, tag):
    return RngStream(seed, stream_id_for(0, tag))


def _quadratic(seed=200, d=15, k=3):
    return random_ridge_objective(
        _stream(seed, "subspace"), d, k, InnerFunction(kind="pure_quadratic")
    )


class _FixedAnswerOracle:
    """Sign oracle stub that always gives the same answer."""

    def __init__(self, answer):
        self.answer = answer
        self.query_count = 0

    def compare(self, x, y):
        self.query_count += 1
        return self.answer


class _SilentOracle:
    """Confidence oracle stub that always abstains."""

    def __init__(self):
        self.query_count = 0

    def compare_batch(self, x, y, n):
        self.query_count += n
        return np.zeros(n)


class _ScalarConfidence:
    """Deterministic link scores without a compare_batch method, to exercise
    the scalar fallback in the vote loop."""

    def __init__(self, objective, link):
        self.objective = objective
        self.link = link
        self.query_count = 0

    def compare(self, x, y):
        self.query_count += 1
        gap = float(self.objective.value(x)) - float(self.objective.value(y))
        if gap == 0.0:
            return 0.0
        return 2.0 * float(self.link.probability(gap)) - 1.0


class TestLogStride:
    def test_frozen_values(self):
        assert log_stride(1) == 1
        assert log_stride(100_000) == 1
        assert log_stride(100_001) == 11
        assert log_stride(200_000) == 20
        assert log_stride(1_000_000) == 100


class TestStepSchedule:
    def test_theory_constant_value(self):
        sched = theory_schedule(alpha0=1.0, intrinsic_dim=4, horizon=100)
        # 1 / sqrt(4 * 100)
        assert sched.step_at(1) == 0.05
        assert sched.step_at(100) == 0.05

    def test_constant(self):
        sched = constant_schedule(0.3, 10)
        assert all(sched.step_at(t) == 0.3 for t in range(1, 11))

    def test_cosine_endpoints_and_floor(self):
        sched = cosine_schedule(max_rate=0.5, min_rate=4e-3, decay_steps=480, horizon=1000)
        assert sched.step_at(1) == 0.5
        assert sched.step_at(480) == 4e-3
        assert sched.step_at(1000) == 4e-3
        steps = np.array([sched.step_at(t) for t in range(1, 1001)])
        assert np.all(np.diff(steps) <= 1e-15)
        assert np.all(steps >= 4e-3)

    def test_domain_validation(self):
        sched = constant_schedule(0.1, 5)
        with pytest.raises(ValueError):
            sched.step_at(0)
        with pytest.raises(ValueError):
            sched.step_at(6)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            StepSchedule(kind="linear", horizon=10)
        with pytest.raises(ValueError):
            constant_schedule(0.0, 10)
        with pytest.raises(ValueError):
            theory_schedule(1.0, 0, 10)
        with pytest.raises(ValueError):
            cosine_schedule(0.1, 0.2, 5, 10)  # min above max
        with pytest.raises(ValueError):
            cosine_schedule(0.2, 0.1, 20, 10)  # decay longer than horizon
        with pytest.raises(ValueError):
            constant_schedule(0.1, 0)


class TestNcrsRun:
    def test_always_reject_keeps_start(self):
        theta1 = np.arange(6, dtype=np.float64)
        oracle = _FixedAnswerOracle(-1)
        traj = ncrs_run(oracle, 6, theta1, constant_schedule(0.5, 50), 50,
                        _stream(201, "algorithm"))
        assert np.array_equal(traj.theta_final, theta1)
        assert not traj.accepted.any()
        assert oracle.query_count == 50

    def test_always_accept_matches_manual_walk(self):
        theta1 = np.zeros(4)
        sched = constant_schedule(0.25, 30)
        traj = ncrs_run(_FixedAnswerOracle(1), 4, theta1, sched, 30,
                        _stream(202, "algorithm"))
        gen = _stream(202, "algorithm").gen
        theta = theta1.copy()
        for _ in range(30):
            theta = theta + 0.25 * gen.standard_normal(4)
        assert np.array_equal(traj.theta_final, theta)
        assert traj.accepted.all()

    def test_matches_independent_reimplementation(self):
        """Replay the exact run: same streams, hand-rolled loop."""
        obj = _quadratic(203)
        theta1 = initial_point(obj, _stream(203, "init"))
        sched = theory_schedule(2.0, 3, 400)
        traj = ncrs_run(
            SignOracle(obj, 0.3, _stream(203, "oracle")),
            15, theta1, sched, 400, _stream(203, "algorithm"),
        )
        oracle = SignOracle(obj, 0.3, _stream(203, "oracle"))
        gen = _stream(203, "algorithm").gen
        theta = theta1.copy()
        accepted = []
        for t in range(1, 401):
            candidate = theta + sched.step_at(t) * gen.standard_normal(15)
            take = oracle.compare(theta, candidate) > 0
            accepted.append(take)
            if take:
                theta = candidate
        assert np.array_equal(traj.theta_final, theta)
        assert np.array_equal(traj.accepted, np.array(accepted))
        assert traj.total_queries == 400

    def test_perfect_oracle_never_increases_value(self):
        obj = _quadratic(204)
        theta1 = initial_point(obj, _stream(204, "init"))
        instrument = lambda t, th: (float(obj.value(th)), 0.0)
        traj = ncrs_run(
            SignOracle(obj, 0.5, _stream(204, "oracle")),
            15, theta1, constant_schedule(0.1, 800), 800,
            _stream(204, "algorithm"), instrument=instrument,
        )
        assert np.all(np.diff(traj.values) <= 1e-12)
        assert float(obj.value(traj.theta_final)) < float(obj.value(theta1)) / 10.0

    def test_instrument_optional(self):
        obj = _quadratic(205)
        traj = ncrs_run(
            SignOracle(obj, 0.5, _stream(205, "oracle")),
            15, np.zeros(15), constant_schedule(0.1, 5), 5,
            _stream(205, "algorithm"),
        )
        assert np.all(np.isnan(traj.values))
        assert np.all(np.isnan(traj.grad_norms))

    def test_decisions_flow_only_through_the_oracle(self):
        """Pad the ambient space with flat directions.  Answering queries from
        the padded objective or from a proxy that truncates every query to the
        structured block must produce the identical run: the algorithm has no
        side channel to the extra coordinates."""
        d, pad = 10, 7
        obj = _quadratic(206, d=d, k=3)
        basis_padded = np.hstack([obj.active.basis, np.zeros((3, pad))])
        obj2 = RidgeObjective(active=Subspace(basis=basis_padded), inner=obj.inner)
        theta1 = initial_point(obj, _stream(206, "init"))
        theta1_padded = np.concatenate([theta1, np.zeros(pad)])
        sched = constant_schedule(0.2, 300)

        class _Truncating:
            def __init__(self):
                self.inner = SignOracle(obj, 0.2, _stream(206, "oracle"))
                self.query_count = 0

            def compare(self, x, y):
                out = self.inner.compare(x[:d], y[:d])
                self.query_count = self.inner.query_count
                return out

        traj = ncrs_run(SignOracle(obj2, 0.2, _stream(206, "oracle")),
                        d + pad, theta1_padded, sched, 300, _stream(206, "algorithm"))
        traj2 = ncrs_run(_Truncating(), d + pad, theta1_padded, sched, 300,
                         _stream(206, "algorithm"))
        assert np.array_equal(traj.accepted, traj2.accepted)
        assert np.array_equal(traj.theta_final, traj2.theta_final)

    def test_validation(self):
        oracle = _FixedAnswerOracle(1)
        sched = constant_schedule(0.1, 10)
        with pytest.raises(ValueError):
            ncrs_run(oracle, 4, np.zeros(5), sched, 10, _stream(0, "a"))
        with pytest.raises(ValueError):
            ncrs_run(oracle, 4, np.zeros(4), sched, 11, _stream(0, "a"))
        with pytest.raises(ValueError):
            ncrs_run(oracle, 4, np.zeros(4), sched, 0, _stream(0, "a"))


class TestTrajectoryLogging:
    def test_short_horizon_logs_every_iteration(self):
        traj = ncrs_run(_FixedAnswerOracle(1), 3, np.zeros(3),
                        constant_schedule(0.1, 250), 250, _stream(210, "algorithm"))
        assert np.array_equal(traj.steps, np.arange(1, 251))
        assert np.array_equal(traj.queries, np.arange(1, 251))

    def test_long_horizon_subsamples_and_keeps_last(self):
        horizon = 200_000
        traj = ncrs_run(_FixedAnswerOracle(-1), 2, np.zeros(2),
                        constant_schedule(0.1, horizon), horizon,
                        _stream(211, "algorithm"))
        assert len(traj.steps) == 10_001
        assert traj.steps[0] == 1
        assert traj.steps[-1] == horizon
        assert np.all(np.diff(traj.steps[:-1]) == 20)
        assert traj.total_queries == horizon


class TestNcrsVoteRun:
    def test_all_abstain_never_moves(self):
        theta1 = np.ones(5)
        oracle = _SilentOracle()
        traj = ncrs_vote_run(oracle, 5, theta1, 0.2, 7, 40, _stream(220, "algorithm"))
        assert np.array_equal(traj.theta_final, theta1)
        assert not traj.accepted.any()
        assert oracle.query_count == 7 * 40

    def test_deterministic_link_is_greedy_descent(self):
        obj = _quadratic(221)
        theta1 = initial_point(obj, _stream(221, "init"))
        oracle = ConfidenceOracle(obj, "deterministic_link",
                                  LinkFunction(kind="logistic"),
                                  _stream(221, "oracle"))
        instrument = lambda t, th: (float(obj.value(th)), 0.0)
        traj = ncrs_vote_run(oracle, 15, theta1, 0.1, 3, 500,
                             _stream(221, "algorithm"), instrument=instrument)
        assert np.all(np.diff(traj.values) <= 1e-12)
        assert float(obj.value(traj.theta_final)) < float(obj.value(theta1)) / 10.0

    def test_scalar_fallback_matches_batch_path(self):
        obj = _quadratic(222)
        theta1 = initial_point(obj, _stream(222, "init"))
        link = LinkFunction(kind="logistic")
        batch = ConfidenceOracle(obj, "deterministic_link", link, _stream(222, "oracle"))
        scalar = _ScalarConfidence(obj, link)
        a = ncrs_vote_run(batch, 15, theta1, 0.15, 3, 200, _stream(222, "algorithm"))
        b = ncrs_vote_run(scalar, 15, theta1, 0.15, 3, 200, _stream(222, "algorithm"))
        assert np.array_equal(a.theta_final, b.theta_final)
        assert np.array_equal(a.accepted, b.accepted)
        assert batch.query_count == scalar.query_count == 600

    def test_validation(self):
        oracle = _SilentOracle()
        with pytest.raises(ValueError):
            ncrs_vote_run(oracle, 3, np.zeros(3), 0.0, 5, 10, _stream(0, "a"))
        with pytest.raises(ValueError):
            ncrs_vote_run(oracle, 3, np.zeros(3), 0.1, 0, 10, _stream(0, "a"))
        with pytest.raises(ValueError):
            ncrs_vote_run(oracle, 3, np.zeros(3), 0.1, 5, 0, _stream(0, "a"))


class TestRsgfRun:
    def test_matches_manual_replay(self):
        obj = _quadratic(230, d=8, k=3)
        theta1 = initial_point(obj, _stream(230, "init"))
        alpha, mu = 0.02, 1e-4
        traj = rsgf_run(obj.value, 8, theta1, alpha, mu, 50, _stream(230, "algorithm"))
        gen = _stream(230, "algorithm").gen
        theta = theta1.copy()
        for _ in range(50):
            s = gen.standard_normal(8)
            slope = (float(obj.value(theta + mu * s)) - float(obj.value(theta))) / mu
            theta = theta - alpha * slope * s
        assert np.array_equal(traj.theta_final, theta)
        assert traj.total_queries == 100
        assert traj.accepted.all()

    def test_stays_near_stationary_point(self):
        obj = _quadratic(231, d=10, k=3)
        traj = rsgf_run(obj.value, 10, np.zeros(10), rsgf_stable_step(1.0, 3), 1e-8,
                        200, _stream(231, "algorithm"))
        assert np.linalg.norm(traj.theta_final) < 1e-5

    def test_descends_at_stable_step(self):
        obj = _quadratic(232, d=10, k=3)
        theta1 = initial_point(obj, _stream(232, "init"))
        traj = rsgf_run(obj.value, 10, theta1, rsgf_stable_step(1.0, 3), 1e-5,
                        3000, _stream(232, "algorithm"))
        assert float(obj.value(traj.theta_final)) < float(obj.value(theta1)) / 10.0

    def test_mean_update_is_negative_gradient(self):
        """E[(f(x+mu s)-f(x))/mu * s] = grad f(x) for the quadratic, checked to
        5 SE per coordinate at 2*10^5 draws."""
        obj = _quadratic(233, d=8, k=3)
        theta = 2.0 * obj.active.basis[0]
        grad = obj.gradient(theta)
        gen = _stream(233, "test:mc").gen
        mu, n = 1e-3, 200_000
        s = gen.standard_normal((n, 8))
        slope = (obj.value(theta + mu * s) - float(obj.value(theta))) / mu
        est = slope[:, None] * s
        mean = est.mean(axis=0)
        se = est.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(mean - grad) <= 5 * se + 1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            rsgf_run(lambda x: 0.0, 3, np.zeros(3), 0.0, 1e-4, 10, _stream(0, "a"))
        with pytest.raises(ValueError):
            rsgf_run(lambda x: 0.0, 3, np.zeros(3), 0.1, 0.0, 10, _stream(0, "a"))


class TestRsgfStableStep:
    def test_value(self):
        assert rsgf_stable_step(1.0, 10) == 1.0 / 48.0
        assert rsgf_stable_step(2.0, 3) == 1.0 / 40.0

    def test_validation(self):
        with pytest.raises(ValueError):
            rsgf_stable_step(0.0, 3)
        with pytest.raises(ValueError):
            rsgf_stable_step(1.0, 0)


class TestVoteParams:
    def test_frozen_instance(self):
        """Recomputed by hand for eps=0.1, L=1, k=4, gap=10, c=1, C=1, rho_r=0.5."""
        params = vote_params(
            epsilon=0.1, smoothness=1.0, intrinsic_dim=4, value_gap=10.0,
            margin_slope=1.0, second_moment_bound=1.0, margin_at_radius=0.5,
        )
        assert_allclose(params.step_size, 0.002216346002230182, rtol=1e-15)
        assert params.horizon == 678585
        assert params.votes == 83213
        assert params.total_comparisons == 678585 * 83213

    def test_second_arm_can_dominate(self):
        # a tiny margin at the certified radius forces the floor arm of N
        params = vote_params(
            epsilon=0.5, smoothness=1.0, intrinsic_dim=1, value_gap=1.0,
            margin_slope=1.0, second_moment_bound=1.0, margin_at_radius=1e-3,
        )
        expected = math.ceil((10.0 / 3.0) * math.log(2.0) / 1e-3)
        assert params.votes == expected == 2311

    def test_monotonicities(self):
        base = dict(smoothness=1.0, intrinsic_dim=4, value_gap=10.0,
                    margin_slope=1.0, second_moment_bound=1.0, margin_at_radius=0.5)
        tight = vote_params(epsilon=0.05, **base)
        loose = vote_params(epsilon=0.2, **base)
        assert tight.horizon > loose.horizon
        assert tight.votes > loose.votes
        assert tight.step_size < loose.step_size
        harder = vote_params(epsilon=0.1, **{**base, "intrinsic_dim": 8})
        easier = vote_params(epsilon=0.1, **base)
        assert harder.horizon > easier.horizon
        assert harder.step_size < easier.step_size

    def test_validation(self):
        good = dict(epsilon=0.1, smoothness=1.0, intrinsic_dim=4, value_gap=10.0,
                    margin_slope=1.0, second_moment_bound=1.0, margin_at_radius=0.5)
        for key, bad in [
            ("epsilon", 0.0), ("epsilon", 1.0), ("epsilon", 1.5),
            ("smoothness", 0.0), ("intrinsic_dim", 0), ("value_gap", 0.0),
            ("margin_slope", 0.0), ("second_moment_bound", 0.5),
            ("margin_at_radius", 0.0), ("margin_at_radius", 1.2),
        ]:
            with pytest.raises(ValueError):
                vote_params(**{**good, key: bad})
