import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqfixed.geometry import DomainSet, Interval, SampleSpec, two_disks
from cqfixed.maps import (
    GuardError,
    MapDomainError,
    Piece,
    PiecewiseMap,
    Polynomial,
    ScaledMap,
    check_affinity,
    compose_many,
    image_check,
    scaling_identity_gap,
)

from conftest import rng


class TestEval:
    def test_ex2_6_A(self, ex2_6):
        assert ex2_6.problem.A.eval(0.8)[0] == pytest.approx(4 / 3 - 0.8, abs=1e-15)

    def test_scaled_quadratic(self, cq_def):
        T = cq_def.problem.T
        assert ScaledMap(T, 0.5, 0.0).eval(0.4)[0] == pytest.approx(0.08, abs=1e-15)

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_scaled_k0_is_q(self, x, q):
        E = DomainSet((Interval(0.0, 1.0),))
        T = PiecewiseMap.from_1d(E, [((0, 1, True, True), [0.1, 0.3, 0.5])])
        assert ScaledMap(T, 0.0, q).eval(x)[0] == q

    def test_jump_is_kept(self, ex1_9):
        T = ex1_9.problem.T
        assert T.eval(1.0)[0] == 0.0
        assert T.eval(1.0 - 1e-12)[0] == 1.0

    def test_outside_domain_raises(self, unit):
        with pytest.raises(MapDomainError):
            PiecewiseMap.identity(unit).eval(1.5)

    def test_extend_continues_nearest_piece(self, ex2_6):
        # the right piece 4/3 - x continued past x = 1
        assert ex2_6.problem.A.extend(1.5)[0] == pytest.approx(4 / 3 - 1.5)

    def test_2d_polynomial(self):
        E = two_disks()
        # (x, y) -> (x*y, 1 + y^2) evaluated through term lists
        p0 = Polynomial(((1, 1),), (1.0,))
        p1 = Polynomial(((0, 0), (0, 2)), (1.0, 1.0))
        m = PiecewiseMap(E, (Piece(E, (p0, p1)),), "M")
        assert m.eval([0.5, 0.5]).tolist() == [0.25, 1.25]

    def test_compose_escape_mask(self, unit):
        out = PiecewiseMap.from_1d(unit, [((0, 1, True, True), [0.5])])
        vals, esc = compose_many(out, PiecewiseMap.identity(unit), np.array([[0.2], [0.9]]))
        assert not esc.any() and np.all(vals == 0.5)


class TestGuards:
    def test_overlap_rejected(self, unit):
        with pytest.raises(GuardError):
            PiecewiseMap.from_1d(unit, [((0, 0.6, True, True), [0]), ((0.5, 1, True, True), [1])]).validate()

    def test_shared_closed_endpoint_rejected(self, unit):
        with pytest.raises(GuardError):
            PiecewiseMap.from_1d(unit, [((0, 0.5, True, True), [0]), ((0.5, 1, True, True), [1])]).validate()

    def test_gap_rejected(self, unit):
        with pytest.raises(GuardError):
            PiecewiseMap.from_1d(unit, [((0, 0.5, True, False), [0]), ((0.5, 1, False, True), [1])]).validate()

    def test_degree_cap(self, unit):
        with pytest.raises(ValueError):
            PiecewiseMap.from_1d(unit, [((0, 1, True, True), [0, 0, 0, 0, 0, 1])])

    @pytest.mark.parametrize("name", ["ex2_6", "ex1_9", "cq_def"])
    def test_partition(self, name, request):
        m = request.getfixturevalue(name).problem
        for M in m.maps.values():
            X = m.domain.sample(1e-3)
            assert np.all(M.piece_index_many(X) >= 0)


class TestAffinity:
    def test_ex1_9_not_q_affine(self, ex1_9):
        P = ex1_9.problem
        v = check_affinity(P.T, P.q, "q_affine", P.sampling)
        assert v.status == "violated"
        assert v.witness["residual"] == 0.5

    def test_ex1_9_affine_wrt_point(self, ex1_9):
        # the jump at x = 1 breaks the identity for every lambda in (0, 1)
        P = ex1_9.problem
        v = check_affinity(P.T, P.q, "affine_wrt_point", P.sampling)
        assert v.status == "violated"
        assert v.witness["x"] == [1.0]
        lam = v.witness["lambda"]
        assert v.witness["residual"] == pytest.approx(lam, abs=1e-12)

    @pytest.mark.parametrize("kind", ["affine", "affine_wrt_point", "q_affine"])
    @pytest.mark.parametrize("q", [0.0, 0.25, 1.0])
    def test_identity_all_kinds(self, unit, kind, q):
        assert check_affinity(PiecewiseMap.identity(unit), q, kind, SampleSpec(pitch=1e-2)).ok

    def test_q_affine_fixes_q(self, ex2_6):
        P = ex2_6.problem
        for M in (P.S, P.T):
            assert check_affinity(M, P.q, "q_affine", P.sampling).ok
            assert abs(M.eval(P.q)[0] - P.q[0]) <= 1e-9

    def test_scaled_q_affine_stays_in_image(self, ex2_6):
        P = ex2_6.problem
        X = P.domain.sample(1e-2)
        img = P.S.eval_many(P.domain.sample(1e-4))
        for k in (0.25, 0.5, 0.9):
            Y = ScaledMap(P.S, k, P.q).eval_many(X)
            assert np.all(Y.min() >= img.min() - 1e-12) and np.all(Y.max() <= img.max() + 1e-12)


class TestImageCheck:
    def test_identity(self, unit):
        ident = PiecewiseMap.identity(unit)
        assert image_check(ident, unit, ident).ok

    def test_disjoint_constants(self, unit):
        one = PiecewiseMap.constant(unit, 1.0)
        zero = PiecewiseMap.constant(unit, 0.0)
        assert image_check(one, unit, zero).status == "violated"

    def test_ex2_6_A_vs_T(self, ex2_6):
        # A reaches 1/3 at x = 1, while T(E) = [2/3, 1]
        P = ex2_6.problem
        v = image_check(P.A, P.domain, P.T, P.sampling)
        assert v.status == "violated"
        assert v.witness["x"] == [1.0]
        assert v.witness["distance_to_target_image"] == pytest.approx(1 / 3, abs=1e-12)


class TestScalingIdentity:
    def test_ex2_6(self, ex2_6):
        P = ex2_6.problem
        g = rng()
        X, Y = g.uniform(0, 1, (10_000, 1)), g.uniform(0, 1, (10_000, 1))
        for k in (0.5, 0.9, 12 / 13):
            assert scaling_identity_gap(P.A, P.B, P.q, k, X, Y).max() <= 1e-12
