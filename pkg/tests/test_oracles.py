import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ncrs.geometry import RngStream, stream_id_for
from ncrs.objectives import InnerFunction, random_ridge_objective
from ncrs.oracles import (
    ConfidenceOracle,
    LinkFunction,
    SignOracle,
    local_linearity_constants,
    rho_inverse,
)


def _stream(seed, tag):
    return RngStream(seed, stream_id_for(0, tag))


def _quadratic_ridge(seed=100, d=8, k=3):
    return random_ridge_objective(
        _stream(seed, "subspace"), d, k, InnerFunction(kind="pure_quadratic")
    )


def _pair_with_gap(objective, gap):
    """Points x, y along the first active direction with f(x) - f(y) = gap > 0."""
    u1 = objective.active.basis[0]
    a = 1.0
    b = math.sqrt(a * a + 2.0 * gap)
    return b * u1, a * u1


class TestLinkFunction:
    def test_frozen_values(self):
        lg = LinkFunction(kind="logistic")
        pr = LinkFunction(kind="probit")
        at = LinkFunction(kind="arctan")
        assert lg.probability(0.0) == 0.5
        assert pr.probability(0.0) == 0.5
        assert at.probability(0.0) == 0.5
        assert_allclose(lg.rho(2.0), 0.7615941559557649, rtol=1e-15)  # tanh(1)
        assert_allclose(pr.rho(1.0), 0.6826894921370859, rtol=1e-12)  # erf(1/sqrt 2)
        assert_allclose(at.rho(1.0), 0.5, rtol=1e-15)  # (2/pi) arctan(1)
        assert lg.slope_at_zero == 0.25
        assert_allclose(pr.slope_at_zero, 0.3989422804014327, rtol=1e-15)
        assert_allclose(at.slope_at_zero, 0.3183098861837907, rtol=1e-15)

    @pytest.mark.parametrize("kind", ["logistic", "probit", "arctan"])
    @pytest.mark.parametrize("scale", [0.25, 1.0, 3.0])
    def test_reflection_and_margin_consistency(self, kind, scale):
        link = LinkFunction(kind=kind, scale=scale)
        # stay inside +-8 link scales: beyond ~39 scales the probit saturates
        # to exactly 0/1 in float64 and strictness is meaningless
        u = scale * np.linspace(-8.0, 8.0, 401)
        sig = link.probability(u)
        assert_allclose(sig + link.probability(-u), np.ones_like(u), atol=1e-12)
        t = scale * np.linspace(0.0, 8.0, 301)
        assert_allclose(link.rho(t), 2.0 * link.probability(t) - 1.0, atol=1e-12)
        assert np.all(np.diff(sig) > 0)
        assert np.all((sig > 0) & (sig < 1))

    def test_scale_steepens_or_flattens(self):
        sharp = LinkFunction(kind="logistic", scale=0.1)
        flat = LinkFunction(kind="logistic", scale=10.0)
        assert sharp.probability(0.5) > flat.probability(0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            LinkFunction(kind="cauchy")
        with pytest.raises(ValueError):
            LinkFunction(kind="logistic", scale=0.0)


class TestLocalLinearity:
    FROZEN = {
        ("logistic", 1.0): (0.25, 4.0),
        ("logistic", 0.25): (1.0, 1.0),
        ("logistic", 2.0): (0.125, 8.0),
        ("probit", 1.0): (0.3989422804014327, 4.0),
        ("probit", 0.25): (1.5957691216057308, 1.0),
        ("probit", 2.0): (0.19947114020071635, 8.0),
        ("arctan", 1.0): (0.3183098861837907, 4.0),
        ("arctan", 0.25): (1.2732395447351628, 1.0),
        ("arctan", 2.0): (0.15915494309189535, 8.0),
    }

    @pytest.mark.parametrize("kind,scale", sorted(FROZEN))
    def test_frozen_certificates(self, kind, scale):
        c, r = local_linearity_constants(LinkFunction(kind=kind, scale=scale))
        c_exp, r_exp = self.FROZEN[(kind, scale)]
        assert_allclose(c, c_exp, rtol=1e-12)
        assert r == r_exp

    @pytest.mark.parametrize("kind", ["logistic", "probit", "arctan"])
    def test_certificate_property(self, kind):
        """rho(t) >= (c/2) t on a dense grid of [0, r], and fails somewhere by 2r."""
        link = LinkFunction(kind=kind)
        c, r = local_linearity_constants(link)
        t = np.linspace(0.0, r, 100_001)
        assert np.all(np.asarray(link.rho(t)) >= 0.5 * c * t - 1e-15)
        t2 = np.linspace(r, 2.0 * r, 10_001)
        assert np.any(np.asarray(link.rho(t2)) < 0.5 * c * t2)

    def test_radius_scales_with_link_scale(self):
        for kind in ("logistic", "probit", "arctan"):
            _, r1 = local_linearity_constants(LinkFunction(kind=kind, scale=1.0))
            _, r3 = local_linearity_constants(LinkFunction(kind=kind, scale=3.0))
            assert_allclose(r3, 3.0 * r1, rtol=1e-12)


class TestRhoInverse:
    @pytest.mark.parametrize("kind", ["logistic", "probit", "arctan"])
    def test_round_trip(self, kind):
        link = LinkFunction(kind=kind, scale=0.7)
        for target in (0.05, 0.2, 0.5, 0.9):
            t = rho_inverse(link, target)
            assert t > 0
            assert_allclose(link.rho(t), target, atol=1e-9)

    def test_zero_and_validation(self):
        link = LinkFunction(kind="logistic")
        assert rho_inverse(link, 0.0) == 0.0
        with pytest.raises(ValueError):
            rho_inverse(link, 1.0)
        with pytest.raises(ValueError):
            rho_inverse(link, -0.2)


class TestSignOracle:
    def test_advantage_half_is_exact(self):
        obj = _quadratic_ridge(101)
        oracle = SignOracle(obj, 0.5, _stream(101, "oracle"))
        rng = _stream(102, "test:pairs").gen
        for _ in range(2000):
            x, y = rng.standard_normal((2, 8))
            fx, fy = float(obj.value(x)), float(obj.value(y))
            if fx == fy:
                continue
            got = oracle.compare(x, y)
            assert got == (1 if fx > fy else -1)

    def test_correct_frequency_matches_advantage(self):
        """Across 2*10^5 queries the correct-answer rate sits within 4 binomial SE."""
        obj = _quadratic_ridge(103)
        x, y = _pair_with_gap(obj, 1.0)
        oracle = SignOracle(obj, 0.25, _stream(103, "oracle"))
        n = 200_000
        hits = sum(oracle.compare(x, y) == 1 for _ in range(n))
        se = math.sqrt(0.75 * 0.25 / n)
        assert abs(hits / n - 0.75) < 4 * se
        assert oracle.query_count == n

    def test_advantage_does_not_depend_on_gap_size(self):
        obj = _quadratic_ridge(104)
        n = 100_000
        se = math.sqrt(0.75 * 0.25 / n)
        for gap in (1e-8, 1e3):
            x, y = _pair_with_gap(obj, gap)
            oracle = SignOracle(obj, 0.25, _stream(104, "oracle"))
            hits = sum(oracle.compare(x, y) == 1 for _ in range(n))
            assert abs(hits / n - 0.75) < 4 * se

    def test_ties_are_fair_coin(self):
        obj = _quadratic_ridge(105)
        x = obj.active.basis[0].copy()
        oracle = SignOracle(obj, 0.5, _stream(105, "oracle"))
        n = 100_000
        plus = sum(oracle.compare(x, x) == 1 for _ in range(n))
        se = math.sqrt(0.25 / n)
        assert abs(plus / n - 0.5) < 4 * se

    def test_validation(self):
        obj = _quadratic_ridge(106)
        rng = _stream(106, "oracle")
        for bad in (0.0, 0.6, -0.1):
            with pytest.raises(ValueError):
                SignOracle(obj, bad, rng)
        SignOracle(obj, 0.5, rng)  # boundary is allowed


class TestConfidenceOracle:
    def _oracle(self, kind, seed=110, link=None):
        obj = _quadratic_ridge(seed)
        link = link or LinkFunction(kind="logistic")
        return obj, ConfidenceOracle(obj, kind, link, _stream(seed, "oracle"))

    def test_deterministic_link_scores(self):
        obj, oracle = self._oracle("deterministic_link")
        x, y = _pair_with_gap(obj, 0.8)
        gap = float(obj.value(x)) - float(obj.value(y))
        expected = 2.0 * float(oracle.link.probability(gap)) - 1.0
        assert oracle.compare(x, y) == expected
        # antisymmetric under swapping the pair
        assert oracle.compare(y, x) == pytest.approx(-expected, abs=1e-15)
        assert oracle.second_moment_bound == 1.0
        assert np.all(oracle.compare_batch(x, y, 5) == expected)
        assert oracle.query_count == 7

    def test_tie_scores_zero(self):
        for kind in ("deterministic_link", "engage_abstain", "noisy_engage"):
            obj, oracle = self._oracle(kind)
            x = 2.0 * obj.active.basis[1]
            assert np.all(oracle.compare_batch(x, x.copy(), 64) == 0.0)

    @pytest.mark.parametrize("kind,c_factor,cap", [
        ("engage_abstain", 1.0, 1.0),
        ("noisy_engage", 0.5, 2.0),
    ])
    def test_moment_certificates(self, kind, c_factor, cap):
        """E[sign * R] equals the certified margin and E[R^2] equals C * margin,
        both to 4 standard errors at 10^5 draws per gap."""
        obj, oracle = self._oracle(kind)
        n = 100_000
        for gap in (0.05, 0.3, 1.0, 3.0):
            x, y = _pair_with_gap(obj, gap)
            t = abs(float(obj.value(x)) - float(obj.value(y)))
            scores = oracle.compare_batch(x, y, n)
            assert np.all(np.isin(scores, [-1.0, 0.0, 1.0]))
            margin = float(oracle.rho_effective(t))
            for samples, theory in (
                (scores, margin),
                (scores**2, oracle.second_moment_bound * margin),
            ):
                se = float(np.std(samples, ddof=1)) / math.sqrt(n)
                assert abs(float(np.mean(samples)) - theory) < 4 * se + 1e-12
        assert_allclose(
            float(oracle.rho_effective(1.0)),
            c_factor * float(oracle.link.rho(1.0)),
            rtol=1e-15,
        )
        assert oracle.second_moment_bound == cap

    def test_linearity_constants_inherit_from_link(self):
        link = LinkFunction(kind="logistic")
        c, r = local_linearity_constants(link)
        _, plain = self._oracle("engage_abstain", link=link)
        _, noisy = self._oracle("noisy_engage", link=link)
        assert plain.linearity_constants == (c, r)
        assert noisy.linearity_constants == (0.5 * c, r)

    def test_reproducible_given_stream(self):
        obj = _quadratic_ridge(115)
        x, y = _pair_with_gap(obj, 0.4)
        link = LinkFunction(kind="logistic")
        a = ConfidenceOracle(obj, "noisy_engage", link, _stream(115, "oracle"))
        b = ConfidenceOracle(obj, "noisy_engage", link, _stream(115, "oracle"))
        assert np.array_equal(a.compare_batch(x, y, 100), b.compare_batch(x, y, 100))

    def test_query_counting_and_validation(self):
        obj, oracle = self._oracle("engage_abstain")
        x, y = _pair_with_gap(obj, 0.4)
        oracle.compare(x, y)
        oracle.compare_batch(x, y, 9)
        assert oracle.query_count == 10
        with pytest.raises(ValueError):
            oracle.compare_batch(x, y, 0)
        with pytest.raises(ValueError):
            ConfidenceOracle(obj, "always_right", LinkFunction(kind="logistic"),
                             _stream(0, "oracle"))
