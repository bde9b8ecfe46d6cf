"""
Tests for second-order subdifferential estimates and the separable oracle.

Property checks follow the calculus of the set: singleton for C² functions,
homogeneity in the direction, sum-rule inclusion and local upper
semicontinuity of support intervals.
"""

import numpy as np
import pytest

from socheck.analysis.subgrad2 import (
    Interval,
    PieceKind,
    SeparablePiece,
    SubdiffEstimate,
    estimate_hessian_set,
    estimate_subdiff2,
    lipschitz_estimate,
    oracle_subdiff2_separable,
    separable_pieces,
    support_along,
    support_interval,
)
from socheck.core.funcdsl import FunctionDef, abs_, exp_, var
from socheck.core.settings import OracleChoice
from socheck.errors import AllSamplesDiscarded, EmptyEstimate, NotSeparable


def _random_quadratic(rng, n):
    coeffs = rng.normal(size=(n, n))
    expr = None
    for i in range(n):
        for j in range(i, n):
            term = float(coeffs[i, j]) * var(i) * var(j)
            expr = term if expr is None else expr + term
    return FunctionDef("q", n, expr)


class TestInterval:

    def test_rejects_reversed_ends(self):
        with pytest.raises(ValueError):
            Interval(1.0, 0.0)

    def test_arithmetic(self):
        a = Interval(-1.0, 2.0)
        assert a.scale(-2.0) == Interval(-4.0, 2.0)
        assert (a + Interval.point(1.0)).to_list() == [0.0, 3.0]
        assert a.inflate(0.5).contains(2.4)
        assert a.hausdorff(Interval(-1.5, 2.0)) == pytest.approx(0.5)
        assert a.contains_interval(Interval(0.0, 1.0))
        assert a.width == 3.0


class TestSampledEstimate:

    def test_signed_square_at_origin(self, signed_square, fast_cfg):
        est = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 0.0], fast_cfg)
        interval = support_interval(est, [1.0, 0.0])
        assert interval.hausdorff(Interval(-1.0, 1.0)) <= 0.05
        assert est.discarded == 0
        assert est.radius_schedule == fast_cfg.radii

    def test_second_component_along_other_direction(self, signed_square, fast_cfg):
        est = estimate_subdiff2(signed_square, [0.0, 0.0], [0.0, 1.0], fast_cfg)
        assert support_interval(est, [0.0, 1.0]) == Interval(2.0, 2.0)

    def test_sampling_is_deterministic(self, signed_square, fast_cfg):
        a = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 1.0], fast_cfg)
        b = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 1.0], fast_cfg)
        np.testing.assert_array_equal(a.points, b.points)

    def test_all_samples_on_kink(self, fast_cfg):
        x = var(0)
        f = FunctionDef("flat", 1, abs_(x - x) * x)
        with pytest.raises(AllSamplesDiscarded):
            estimate_subdiff2(f, [0.0], [1.0], fast_cfg)

    def test_empty_estimate(self):
        est = SubdiffEstimate(np.zeros(2), np.ones(2), np.zeros((0, 2)))
        with pytest.raises(EmptyEstimate):
            support_interval(est, [1.0, 0.0])

    def test_hessian_set_matrices(self, signed_square, fast_cfg):
        matrices = estimate_hessian_set(signed_square, [0.0, 0.0], fast_cfg)
        diagonals = {tuple(np.diag(m)) for m in matrices}
        assert diagonals == {(1.0, 2.0), (-1.0, 2.0)}

    def test_to_dict_includes_support(self, signed_square, fast_cfg):
        est = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 0.0], fast_cfg)
        data = est.to_dict(h=[1.0, 0.0])
        assert data["support"]["lo"] == pytest.approx(-1.0)
        assert data["support"]["hi"] == pytest.approx(1.0)


class TestSingleton:

    def test_random_quadratics_give_singletons(self, rng, fast_cfg):
        for _ in range(20):
            n = int(rng.integers(1, 4))
            f = _random_quadratic(rng, n)
            x = rng.normal(size=n)
            d = rng.normal(size=n)
            est = estimate_subdiff2(f, x, d, fast_cfg)
            assert est.diameter < 1e-6

    def test_smooth_nonquadratic(self, fast_cfg):
        f = FunctionDef("e", 1, exp_(var(0)))
        est = estimate_subdiff2(f, [1.0], [2.0], fast_cfg)
        np.testing.assert_allclose(est.points, [[2.0 * np.e]])


class TestSeparableOracle:

    def test_pieces_of_signed_square(self, signed_square):
        pieces = separable_pieces(signed_square)
        assert pieces == [
            SeparablePiece(0, PieceKind.SIGNED_SQUARE, 0.5),
            SeparablePiece(1, PieceKind.POWER, 1.0, 2),
        ]

    def test_oracle_interval(self, signed_square):
        oracle = oracle_subdiff2_separable(separable_pieces(signed_square), [0.0, 0.0], [1.0, 0.0])
        assert oracle.intervals == [Interval(-1.0, 1.0), Interval(2.0, 2.0)]
        assert oracle.support([1.0, 0.0]) == Interval(-1.0, 1.0)

    def test_off_kink_is_a_point(self, signed_square):
        oracle = oracle_subdiff2_separable(separable_pieces(signed_square), [-0.3, 1.0], [1.0, 1.0])
        assert oracle.support([1.0, 1.0]) == Interval(1.0, 1.0)

    @pytest.mark.parametrize("expr", [
        var(0) * var(1),
        exp_(var(0) + var(1)),
        abs_(var(0)) * abs_(var(0)),
        abs_(var(0) - var(1)),
    ])
    def test_not_separable(self, expr):
        with pytest.raises(NotSeparable):
            separable_pieces(FunctionDef("f", 2, expr))

    def test_cancelling_pieces_merge(self):
        x = var(0)
        f = FunctionDef("zero", 1, x * abs_(x) - x * abs_(x))
        oracle = oracle_subdiff2_separable(separable_pieces(f), [0.0], [1.0])
        assert oracle.intervals == [Interval(0.0, 0.0)]

    def test_sampled_estimate_inside_oracle(self, signed_square, fast_cfg, rng):
        for _ in range(10):
            d = rng.normal(size=2)
            h = rng.normal(size=2)
            exact = oracle_subdiff2_separable(separable_pieces(signed_square), [0.0, 0.0], d).support(h)
            sampled = support_interval(estimate_subdiff2(signed_square, [0.0, 0.0], d, fast_cfg), h)
            assert exact.contains_interval(sampled, 1e-9)


class TestCalculus:

    @pytest.mark.parametrize("s", [-2.0, -1.0, 0.5, 3.0])
    def test_homogeneity(self, signed_square, fast_cfg, s):
        d = np.array([1.0, 0.5])
        base = support_along(signed_square, [0.0, 0.0], d, d, fast_cfg).interval
        scaled = support_along(signed_square, [0.0, 0.0], s * d, s * d, fast_cfg).interval
        assert scaled.hausdorff(base.scale(s * s)) <= 1e-3

    def test_sum_rule_inclusion(self, fast_cfg):
        x, y = var(0), var(1)
        f = FunctionDef("f", 2, x * abs_(x) + y ** 2)
        g = FunctionDef("g", 2, -(x * abs_(x)) + 3 * y * abs_(y))
        total = FunctionDef("f+g", 2, f.expr + g.expr)
        d = np.array([1.0, -1.0])
        lhs = support_along(total, [0.0, 0.0], d, d, fast_cfg).interval
        rhs = (support_along(f, [0.0, 0.0], d, d, fast_cfg).interval
               + support_along(g, [0.0, 0.0], d, d, fast_cfg).interval)
        assert rhs.contains_interval(lhs, 1e-2)

    def test_upper_semicontinuity(self, signed_square, fast_cfg):
        d = np.array([1.0, 0.0])
        at_origin = support_along(signed_square, [0.0, 0.0], d, d, fast_cfg).interval
        for t in (1e-1, -1e-2, 1e-3, -1e-4):
            nearby = support_along(signed_square, [t, 0.0], d, d, fast_cfg).interval
            assert at_origin.inflate(1e-9).contains_interval(nearby)


class TestSupportAlong:

    def test_auto_uses_oracle_when_separable(self, signed_square, fast_cfg):
        result = support_along(signed_square, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], fast_cfg)
        assert result.exact
        assert result.interval == Interval(-1.0, 1.0)

    def test_sampling_forced(self, signed_square, fast_cfg):
        result = support_along(
            signed_square, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], fast_cfg, OracleChoice.SAMPLING
        )
        assert not result.exact
        assert result.interval.hausdorff(Interval(-1.0, 1.0)) <= 0.05

    def test_separable_forced_on_coupled_function(self, fast_cfg):
        f = FunctionDef("f", 2, var(0) * var(1))
        with pytest.raises(NotSeparable):
            support_along(f, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], fast_cfg, OracleChoice.SEPARABLE)

    def test_coupled_smooth_function_falls_back(self, fast_cfg):
        f = FunctionDef("f", 2, var(0) * var(1))
        result = support_along(f, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], fast_cfg)
        assert not result.exact
        assert result.interval == Interval(2.0, 2.0)


@pytest.fixture
def sampling_cfg(fast_cfg):
    return fast_cfg.with_overrides(oracle=OracleChoice.SAMPLING)


class TestSampledCalculus:
    """The calculus properties again, with the separable oracle switched off."""

    @pytest.mark.parametrize("s", [-2.0, -1.0, 0.5, 3.0])
    def test_homogeneity(self, signed_square, sampling_cfg, s):
        d = np.array([1.0, 0.5])
        base = support_along(signed_square, [0.0, 0.0], d, d, sampling_cfg)
        scaled = support_along(signed_square, [0.0, 0.0], s * d, s * d, sampling_cfg)
        assert not base.exact and not scaled.exact
        assert scaled.interval.hausdorff(base.interval.scale(s * s)) <= 1e-9

    def test_sum_rule_inclusion(self, sampling_cfg, rng):
        x, y = var(0), var(1)
        f = FunctionDef("f", 2, x * abs_(x) + y ** 2)
        g = FunctionDef("g", 2, -(x * abs_(x)) + 3 * y * abs_(y))
        total = FunctionDef("f+g", 2, f.expr + g.expr)
        for _ in range(10):
            d = rng.normal(size=2)
            lhs = support_along(total, [0.0, 0.0], d, d, sampling_cfg).interval
            rhs = (support_along(f, [0.0, 0.0], d, d, sampling_cfg).interval
                   + support_along(g, [0.0, 0.0], d, d, sampling_cfg).interval)
            assert rhs.contains_interval(lhs, 1e-9)

    def test_upper_semicontinuity(self, signed_square, sampling_cfg):
        d = np.array([1.0, 0.0])
        at_origin = support_along(signed_square, [0.0, 0.0], d, d, sampling_cfg).interval
        assert at_origin.hausdorff(Interval(-1.0, 1.0)) <= 1e-9
        for t in (1e-1, -1e-2, 1e-3, -1e-4):
            nearby = support_along(signed_square, [t, 0.0], d, d, sampling_cfg).interval
            assert at_origin.inflate(1e-9).contains_interval(nearby)

    def test_sampled_support_matches_oracle_away_from_kink(self, signed_square, sampling_cfg, rng):
        for _ in range(20):
            x = rng.uniform(-0.5, 0.5, size=2)
            d = rng.normal(size=2)
            sampled = support_along(signed_square, x, d, d, sampling_cfg).interval
            hull = Interval(-d[0] ** 2 + 2 * d[1] ** 2, d[0] ** 2 + 2 * d[1] ** 2)
            assert hull.contains_interval(sampled, 1e-9)
            if abs(x[0]) > max(sampling_cfg.radii):
                exact = support_along(signed_square, x, d, d, sampling_cfg, OracleChoice.SEPARABLE)
                assert sampled.hausdorff(exact.interval) <= 1e-9


class TestLipschitzBound:

    def test_bound_comes_from_gradient_quotients(self, signed_square, fast_cfg):
        d = np.array([3.0, 4.0])
        est = estimate_subdiff2(signed_square, [0.0, 0.0], d, fast_cfg)
        lip = lipschitz_estimate(signed_square, [0.0, 0.0], fast_cfg)
        assert est.lip_bound == pytest.approx(lip * 5.0)
        assert 1.0 <= lip <= 2.0 + 1e-6
        assert est.bound_violations == 0
        limit = est.lip_bound * (1.0 + fast_cfg.tau_bound)
        assert np.all(np.linalg.norm(est.points, axis=1) <= limit)

    def test_disabled_continuity_check_falls_back_to_samples(self, signed_square, fast_cfg):
        cfg = fast_cfg.with_overrides(continuity_samples=0)
        assert lipschitz_estimate(signed_square, [0.0, 0.0], cfg) is None
        est = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 0.0], cfg)
        assert est.lip_bound == pytest.approx(2.0)

    def test_gradient_jump_inflates_the_bound(self, fast_cfg, caplog):
        f = FunctionDef("kinked", 1, abs_(var(0)), declared_c11=True)
        lip = lipschitz_estimate(f, [0.0], fast_cfg)
        assert lip > 10.0
        assert "declared C^{1,1} but its gradient jumps" in caplog.text

    def test_bound_in_serialized_estimate(self, signed_square, fast_cfg):
        data = estimate_subdiff2(signed_square, [0.0, 0.0], [1.0, 0.0], fast_cfg).to_dict()
        assert data["lip_bound"] > 0.0
        assert data["bound_violations"] == 0
