"""Evaluation and sampled verification of the Gregus-type contractive inequalities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SampleSpec, as_point, point_segment_distance_many
from .maps import AnyMap, PiecewiseMap, ScaledMap
from .problem import GregusConstants, Problem
from .verdict import HOLDS, VIOLATED

FORMS = ("quadratic_2_1_1", "linear_2_2_1", "restricted_3_2_1")
INEQUALITY_TOL = 1e-9


@dataclass
class InequalityReport:
    form: str
    pairs_tested: int
    worst_margin: float
    worst_pair: tuple[list[float], list[float]] | None
    verdict: str
    worst_sides: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        out = {"form": self.form, "status": self.verdict, "pairs_tested": int(self.pairs_tested),
               "worst_margin": float(self.worst_margin)}
        if self.worst_pair is not None:
            out["worst_pair"] = {"x": self.worst_pair[0], "y": self.worst_pair[1]}
            out["worst_sides"] = {"lhs": self.worst_sides[0], "rhs": self.worst_sides[1]}
        return out


def _norm(V: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", V, V))


def sides_many(X: np.ndarray, Y: np.ndarray, A: AnyMap, B: AnyMap, S: AnyMap, T: AnyMap,
               q: np.ndarray, c: GregusConstants, form: str = "quadratic_2_1_1",
               images: tuple | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (lhs, rhs) for pairs (X[i], Y[i])."""
    AX, BY, SX, TY = images if images is not None else (
        A.eval_many(X), B.eval_many(Y), S.eval_many(X), T.eval_many(Y))
    Q = np.broadcast_to(q, AX.shape)
    d_sx_ax = point_segment_distance_many(SX, Q, AX)
    d_ty_by = point_segment_distance_many(TY, Q, BY)
    dist_st = _norm(SX - TY)
    lhs = _norm(AX - BY)
    if form == "linear_2_2_1":
        return lhs, np.maximum.reduce([d_sx_ax, d_ty_by, dist_st])
    d_sx_by = point_segment_distance_many(SX, Q, BY)
    d_ty_ax = point_segment_distance_many(TY, Q, AX)
    rhs = (c.c1 * np.maximum.reduce([d_sx_ax**2, d_ty_by**2, dist_st**2])
           + c.c2 * np.maximum(d_sx_ax * d_sx_by, d_ty_by * d_ty_ax)
           + c.c3 * d_sx_by * d_ty_ax)
    return lhs**2, rhs


def evaluate_sides(x, y, A: PiecewiseMap, B: PiecewiseMap, S: PiecewiseMap, T: PiecewiseMap,
                   q, c: GregusConstants) -> tuple[float, float]:
    """lhs = ||Ax - By||^2 and the quadratic right-hand side at one pair."""
    d = A.dimension
    x, y, q = as_point(x, d), as_point(y, d), as_point(q, d)
    for name, p in (("x", x), ("y", y)):
        if not A.domain.contains(p):
            raise ValueError(f"{name}={p.tolist()} is outside the domain")
    lhs, rhs = sides_many(x.reshape(1, -1), y.reshape(1, -1), A, B, S, T, q, c)
    return float(lhs[0]), float(rhs[0])


def _uniform_in(E, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = E.bbox()
    out = []
    need = n
    while need > 0:
        Z = rng.uniform(lo, hi, size=(max(2 * need, 64), E.dimension))
        Z = Z[E.contains_many(Z, tol=0.0)]
        out.append(Z[:need])
        need -= len(out[-1])
    return np.vstack(out)


def sweep_pairs(problem: Problem, sampler: SampleSpec, pair_pitch: float | None = None,
                exclude_diagonal: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Grid x grid pairs plus ``sampler.pairs`` uniform random pairs (seeded)."""
    E = problem.domain
    h = pair_pitch if pair_pitch is not None else 10 * sampler.pitch_for(E.dimension)
    G = E.sample(h)
    i, j = np.meshgrid(np.arange(len(G)), np.arange(len(G)), indexing="ij")
    X, Y = G[i.ravel()], G[j.ravel()]
    if sampler.pairs > 0:
        rng = np.random.default_rng(sampler.seed)
        X = np.vstack([X, _uniform_in(E, sampler.pairs, rng)])
        Y = np.vstack([Y, _uniform_in(E, sampler.pairs, rng)])
    if exclude_diagonal:
        keep = np.any(X != Y, axis=1)
        X, Y = X[keep], Y[keep]
    return X, Y


def _reduce(form: str, X: np.ndarray, Y: np.ndarray, lhs: np.ndarray, rhs: np.ndarray,
            tol: float) -> InequalityReport:
    margin = rhs - lhs
    # min margin, ties broken by the smallest (x, y) coordinates
    keys = [Y[:, k] for k in reversed(range(Y.shape[1]))] + \
           [X[:, k] for k in reversed(range(X.shape[1]))] + [margin]
    i = int(np.lexsort(keys)[0])
    status = HOLDS if margin[i] >= -tol else VIOLATED
    return InequalityReport(form, len(X), float(margin[i]), (X[i].tolist(), Y[i].tolist()), status,
                            (float(lhs[i]), float(rhs[i])))


def sweep_verify(problem: Problem, c: GregusConstants | None = None, form: str = "quadratic_2_1_1",
                 sampler: SampleSpec | None = None, tol: float = INEQUALITY_TOL,
                 approximants: np.ndarray | None = None, u=None, exclude_diagonal: bool = False,
                 pair_pitch: float | None = None, maps: dict | None = None) -> InequalityReport:
    """Check one inequality form on deterministic grid pairs plus seeded random pairs.

    ``restricted_3_2_1`` needs the approximant set and u; its pairs are all of
    (P u {u}) x (P u {u}), with the two u-branches compared without set-distances.
    Maps are continued polynomially at u when u lies off the domain.
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    c = c or problem.constants
    sampler = sampler or problem.sampling
    m = maps or problem.maps
    A, B, S, T = m["A"], m["B"], m["S"], m["T"]
    q = problem.q

    if form != "restricted_3_2_1":
        X, Y = sweep_pairs(problem, sampler, pair_pitch, exclude_diagonal)
        lhs, rhs = sides_many(X, Y, A, B, S, T, q, c, form)
        return _reduce(form, X, Y, lhs, rhs, tol)

    if approximants is None or u is None:
        raise ValueError("restricted form needs the approximant set and u")
    Pts = np.asarray(approximants, dtype=float).reshape(-1, problem.dimension)
    u = as_point(u, problem.dimension)
    Xs, Ys, L, R = [], [], [], []
    if len(Pts):
        i, j = np.meshgrid(np.arange(len(Pts)), np.arange(len(Pts)), indexing="ij")
        X, Y = Pts[i.ravel()], Pts[j.ravel()]
        if exclude_diagonal:
            keep = np.any(X != Y, axis=1)
            X, Y = X[keep], Y[keep]
        lhs, rhs = sides_many(X, Y, A, B, S, T, q, c)
        Xs.append(X), Ys.append(Y), L.append(lhs), R.append(rhs)
        Au, Bu, Su, Tu = (M.extend(u) for M in (A, B, S, T))
        # y = u branch and x = u branch
        L.append(_norm(A.eval_many(Pts) - Bu) ** 2)
        R.append(_norm(S.eval_many(Pts) - Tu) ** 2)
        Xs.append(Pts), Ys.append(np.broadcast_to(u, Pts.shape))
        L.append(_norm(Au - B.eval_many(Pts)) ** 2)
        R.append(_norm(Su - T.eval_many(Pts)) ** 2)
        Xs.append(np.broadcast_to(u, Pts.shape)), Ys.append(Pts)
    if not Xs:
        return InequalityReport(form, 0, float("inf"), None, HOLDS)
    return _reduce(form, np.vstack(Xs), np.vstack(Ys), np.concatenate(L), np.concatenate(R), tol)


# ---------------------------------------------------------------------------
# proof-step invariants


def scaled_lhs_gap(problem: Problem, k: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """| ||A_k x - B_k y||^2 - k^2 ||Ax - By||^2 | relative to the operand scale squared."""
    A, B, q = problem.A, problem.B, problem.q
    An, Bn = ScaledMap(A, k, q), ScaledMap(B, k, q)
    AX, BY = A.eval_many(X), B.eval_many(Y)
    lhs = _norm(An.eval_many(X) - Bn.eval_many(Y)) ** 2
    rhs = k * k * _norm(AX - BY) ** 2
    scale = np.maximum.reduce([np.ones(len(X)), _norm(AX), _norm(BY),
                               np.full(len(X), float(np.linalg.norm(q)))])
    return np.abs(lhs - rhs) / scale**2


def segment_bound_gap(problem: Problem, k: float, X: np.ndarray) -> np.ndarray:
    """dist(Sx, [q, Ax]) - ||Sx - A_k x||; never positive since A_k x lies on the segment."""
    A, S, q = problem.A, problem.S, problem.q
    AX, SX = A.eval_many(X), S.eval_many(X)
    An = ScaledMap(A, k, q).eval_many(X)
    d = point_segment_distance_many(SX, np.broadcast_to(q, AX.shape), AX)
    return d - _norm(SX - An)
