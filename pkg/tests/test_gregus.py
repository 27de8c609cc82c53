import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqfixed.geometry import SampleSpec
from cqfixed.gregus import evaluate_sides, scaled_lhs_gap, segment_bound_gap, sides_many, sweep_pairs, sweep_verify
from cqfixed.maps import PiecewiseMap
from cqfixed.problem import GregusConstants, Problem

from conftest import rng

C100 = GregusConstants(1, 0, 0)


class TestSides:
    def test_ex2_6_point(self, ex2_6):
        P = ex2_6.problem
        lhs, rhs = evaluate_sides(0.8, 0.2, P.A, P.B, P.S, P.T, P.q, C100)
        assert lhs == pytest.approx((4 / 3 - 0.8 - 2 / 3) ** 2, abs=1e-15)
        assert lhs == pytest.approx(0.017778, abs=1e-6)
        assert rhs == pytest.approx(0.09, abs=1e-12)

    @given(st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_diagonal(self, x):
        from cqfixed.problemfile import load_example

        P = load_example("ex2_6").problem
        lhs, _ = evaluate_sides(x, x, P.A, P.A, P.S, P.S, P.q, C100)
        assert lhs == 0.0

    def test_flat_region(self, ex2_6):
        P = ex2_6.problem
        for x, y in [(0.0, 0.1), (0.3, 0.6), (0.66, 0.01)]:
            lhs, _ = evaluate_sides(x, y, P.A, P.B, P.S, P.T, P.q, C100)
            assert lhs == 0.0

    def test_outside_raises(self, ex2_6):
        P = ex2_6.problem
        with pytest.raises(ValueError):
            evaluate_sides(1.5, 0.2, P.A, P.B, P.S, P.T, P.q, C100)


class TestConstants:
    def test_bounds(self):
        GregusConstants(0.5, 0.25, 0.5)
        with pytest.raises(ValueError):
            GregusConstants(0.8, 0.2, 0.0)
        with pytest.raises(ValueError):
            GregusConstants(-0.1, 0, 0)

    def test_strict(self):
        with pytest.raises(ValueError):
            GregusConstants(1, 0, 0, strict=True)
        GregusConstants(0.9, 0, 0, strict=True)

    def test_scaled_is_strict(self):
        c = C100.scaled(0.5)
        assert c.c1 == pytest.approx(0.25)


class TestSweep:
    def test_pair_count(self, ex2_6):
        X, Y = sweep_pairs(ex2_6.problem, ex2_6.problem.sampling)
        assert len(X) == 101 * 101 + 100_000

    def test_identity_maps(self, unit):
        ident = PiecewiseMap.identity(unit)
        P = Problem(unit, 0.5, ident, ident, ident, ident)
        r = sweep_verify(P, C100)
        assert r.verdict == "holds" and r.worst_margin >= -1e-9

    def test_equal_constants(self, unit):
        one, zero = PiecewiseMap.constant(unit, 1.0), PiecewiseMap.constant(unit, 0.0)
        P = Problem(unit, 0.0, one, one, zero, zero)
        assert sweep_verify(P, C100).verdict == "holds"

    def test_ex2_6_counterexample(self, ex2_6):
        # x = 0, y = 1: A0 = 2/3, B1 = 1/3 while S0 = T1 = 2/3 = q makes every right term vanish
        r = sweep_verify(ex2_6.problem, C100)
        assert r.verdict == "violated"
        assert r.worst_margin == pytest.approx(-1 / 9, abs=1e-12)
        assert r.worst_pair == ([0.0], [1.0])
        assert r.pairs_tested >= 110_000

    def test_deterministic(self, ex2_6):
        a = sweep_verify(ex2_6.problem, C100).to_dict()
        b = sweep_verify(ex2_6.problem, C100).to_dict()
        assert a == b

    def test_linear_implies_quadratic(self, unit):
        g = rng(3)
        for _ in range(5):
            a, b = g.uniform(-0.4, 0.4, 2)
            A = PiecewiseMap.from_1d(unit, [((0, 1, True, True), [0.5 + 0.1 * a, 0.3 * b])])
            S = PiecewiseMap.from_1d(unit, [((0, 1, True, True), [0.5, 0.5 * a])])
            P = Problem(unit, 0.5, A, A, S, S, sampling=SampleSpec(pairs=2000))
            lin = sweep_verify(P, C100, "linear_2_2_1")
            quad = sweep_verify(P, C100, "quadratic_2_1_1")
            if lin.verdict == "holds":
                assert quad.verdict == "holds"

    def test_quadratic_matches_linear_squared(self, ex2_6):
        P = ex2_6.problem
        g = rng(5)
        X, Y = g.uniform(0, 1, (1000, 1)), g.uniform(0, 1, (1000, 1))
        lq, rq = sides_many(X, Y, P.A, P.B, P.S, P.T, P.q, C100)
        ll, rl = sides_many(X, Y, P.A, P.B, P.S, P.T, P.q, C100, "linear_2_2_1")
        assert np.allclose(lq, ll**2, atol=1e-15) and np.allclose(rq, rl**2, atol=1e-15)

    def test_restricted_needs_approximants(self, ex2_6):
        with pytest.raises(ValueError):
            sweep_verify(ex2_6.problem, C100, "restricted_3_2_1")

    def test_unknown_form(self, ex2_6):
        with pytest.raises(ValueError):
            sweep_verify(ex2_6.problem, C100, "cubic")


class TestProofSteps:
    def test_scaled_lhs(self, ex2_6):
        P = ex2_6.problem
        g = rng(7)
        X, Y = g.uniform(0, 1, (5000, 1)), g.uniform(0, 1, (5000, 1))
        for k in P.schedule.k_values:
            assert scaled_lhs_gap(P, k, X, Y).max() <= 1e-12

    def test_segment_bound(self, ex2_6):
        P = ex2_6.problem
        X = P.domain.sample(1e-3)
        for k in P.schedule.k_values:
            assert segment_bound_gap(P, k, X).max() <= 1e-12
