"""Guarded piecewise-polynomial self-maps and their scaled versions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    MEMBERSHIP_TOL,
    DomainSet,
    Interval,
    SampleSpec,
    as_point,
    parse_number,
)
from .verdict import Verdict

MAX_DEGREE = 4
AFFINITY_TOL = 1e-9
KINDS = ("affine", "affine_wrt_point", "q_affine")


class MapDomainError(ValueError):
    """Raised when a map is evaluated outside every guard."""


class GuardError(ValueError):
    pass


class SelfMapError(ValueError):
    pass


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in d variables stored as (exponents, coefficients) rows."""

    exps: tuple[tuple[int, ...], ...]
    coefs: tuple[float, ...]

    def __post_init__(self):
        if len(self.exps) != len(self.coefs):
            raise ValueError("exponent and coefficient lists differ in length")
        for e in self.exps:
            if any(k < 0 for k in e):
                raise ValueError("negative exponent")
            if sum(e) > MAX_DEGREE:
                raise ValueError(f"total degree {sum(e)} exceeds {MAX_DEGREE}")

    @classmethod
    def univariate(cls, coeffs: Sequence[float]) -> Polynomial:
        """Ascending coefficients c0 + c1 x + c2 x^2 + ..."""
        coeffs = [parse_number(c) for c in coeffs]
        if len(coeffs) > MAX_DEGREE + 1:
            raise ValueError(f"degree exceeds {MAX_DEGREE}")
        return cls(tuple((i,) for i in range(len(coeffs))), tuple(coeffs))

    @classmethod
    def constant(cls, value: float, dim: int) -> Polynomial:
        return cls(((0,) * dim,), (float(value),))

    @classmethod
    def coordinate(cls, i: int, dim: int) -> Polynomial:
        e = [0] * dim
        e[i] = 1
        return cls((tuple(e),), (1.0,))

    @property
    def dim(self) -> int:
        return len(self.exps[0]) if self.exps else 1

    def __call__(self, X: np.ndarray) -> np.ndarray:
        E = np.asarray(self.exps, dtype=float).reshape(len(self.exps), -1)
        C = np.asarray(self.coefs, dtype=float)
        out = np.zeros(len(X))
        for e, c in zip(E, C):
            out += c * np.prod(X ** e[None, :], axis=1)
        return out

    def ascending(self) -> np.ndarray:
        """Dense ascending coefficients (univariate only)."""
        if self.dim != 1:
            raise ValueError("dense coefficients are only defined in 1D")
        out = np.zeros(MAX_DEGREE + 1)
        for (k,), c in zip(self.exps, self.coefs):
            out[k] += c
        return out


@dataclass(frozen=True)
class Piece:
    guard: DomainSet
    expr: tuple[Polynomial, ...]

    def value(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([p(X) for p in self.expr])


@dataclass(frozen=True)
class PiecewiseMap:
    domain: DomainSet
    pieces: tuple[Piece, ...]
    name: str = "T"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.pieces:
            raise GuardError(f"map {self.name} has no pieces")
        d = self.domain.dimension
        for i, pc in enumerate(self.pieces):
            if pc.guard.dimension != d or len(pc.expr) != d:
                raise GuardError(f"map {self.name} piece {i}: dimension mismatch")

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls, domain: DomainSet, name: str = "id") -> PiecewiseMap:
        d = domain.dimension
        return cls(domain, (Piece(domain, tuple(Polynomial.coordinate(i, d) for i in range(d))),), name)

    @classmethod
    def constant(cls, domain: DomainSet, value, name: str = "c") -> PiecewiseMap:
        v = as_point(value, domain.dimension)
        d = domain.dimension
        return cls(domain, (Piece(domain, tuple(Polynomial.constant(c, d) for c in v)),), name)

    @classmethod
    def from_1d(cls, domain: DomainSet, pieces, name: str = "T") -> PiecewiseMap:
        """pieces: iterable of ((lo, hi, lo_closed, hi_closed), ascending coefficients)."""
        built = []
        for (lo, hi, lc, hc), coeffs in pieces:
            guard = DomainSet((Interval(parse_number(lo), parse_number(hi), lc, hc),))
            built.append(Piece(guard, (Polynomial.univariate(coeffs),)))
        return cls(domain, tuple(built), name)

    # -- evaluation ---------------------------------------------------------

    def piece_index_many(self, X: np.ndarray, strict: bool = True) -> np.ndarray:
        """Index of the active piece per row; -1 where no guard matches."""
        X = np.asarray(X, dtype=float).reshape(-1, self.dimension)
        idx = np.full(len(X), -1)
        for i, pc in enumerate(self.pieces):
            hit = (idx < 0) & pc.guard.contains_many(X, tol=0.0)
            idx[hit] = i
        # points within the boundary tolerance of some closed guard
        todo = idx < 0
        if np.any(todo):
            for i, pc in enumerate(self.pieces):
                hit = todo & (idx < 0) & pc.guard.contains_many(X, tol=MEMBERSHIP_TOL)
                idx[hit] = i
        if strict and np.any(idx < 0):
            bad = X[int(np.argmax(idx < 0))]
            raise MapDomainError(f"map {self.name}: point {bad.tolist()} is outside every guard")
        return idx

    def eval_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dimension)
        idx = self.piece_index_many(X)
        out = np.empty_like(X)
        for i, pc in enumerate(self.pieces):
            m = idx == i
            if np.any(m):
                out[m] = pc.value(X[m])
        return out

    def eval(self, x) -> np.ndarray:
        x = as_point(x, self.dimension)
        return self.eval_many(x.reshape(1, -1))[0]

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def extend(self, x) -> np.ndarray:
        """Polynomial continuation of the nearest piece, for points off the domain."""
        x = as_point(x, self.dimension)
        try:
            return self.eval(x)
        except MapDomainError:
            pass
        dists = [pc.guard.distance(x) for pc in self.pieces]
        pc = self.pieces[int(np.argmin(dists))]
        return pc.value(x.reshape(1, -1))[0]

    def breakpoints(self) -> list[float]:
        """Sorted guard endpoints (1D)."""
        if self.dimension != 1:
            return []
        pts = {v for pc in self.pieces for prim in pc.guard.primitives for v in (prim.lo, prim.hi)}
        return sorted(pts)

    # -- validation ---------------------------------------------------------

    def validate(self, sampler: SampleSpec | None = None) -> None:
        """Guard partition and self-map checks; raises GuardError / SelfMapError."""
        sampler = sampler or SampleSpec()
        if self.dimension == 1:
            self._check_guards_1d()
            X = self._probe_points_1d()
        else:
            X = self.domain.sample(sampler.pitch_for(2))
            self._check_guards_sampled(X)
        try:
            Y = self.eval_many(X)
        except MapDomainError as exc:
            raise GuardError(str(exc)) from None
        out = ~self.domain.contains_many(Y)
        if np.any(out):
            i = int(np.argmax(out))
            raise SelfMapError(f"map {self.name} sends {X[i].tolist()} to {Y[i].tolist()}, outside the domain")

    def _check_guards_1d(self) -> None:
        ivs = [(i, prim) for i, pc in enumerate(self.pieces) for prim in pc.guard.primitives]
        for a in range(len(ivs)):
            for b in range(a + 1, len(ivs)):
                (i, p), (j, r) = ivs[a], ivs[b]
                if i == j:
                    continue
                lo, hi = max(p.lo, r.lo), min(p.hi, r.hi)
                if lo < hi:
                    overlap = True
                elif lo == hi:
                    overlap = bool(p.contains_many(np.array([[lo]]), 0.0)[0]
                                   and r.contains_many(np.array([[lo]]), 0.0)[0])
                else:
                    overlap = False
                if overlap:
                    raise GuardError(f"map {self.name}: guards of pieces {i} and {j} overlap near {lo}")
        X = self._probe_points_1d()
        counts = sum(pc.guard.contains_many(X, tol=0.0).astype(int) for pc in self.pieces)
        if np.any(counts == 0):
            x = X[int(np.argmax(counts == 0)), 0]
            raise GuardError(f"map {self.name}: no guard covers x={x}")

    def _probe_points_1d(self) -> np.ndarray:
        # coverage only changes at endpoints, so endpoints and midpoints are exhaustive
        pts = set(self.breakpoints())
        for prim in self.domain.primitives:
            pts.update((prim.lo, prim.hi))
        pts = sorted(pts)
        mids = [(a + b) / 2 for a, b in zip(pts, pts[1:])]
        X = np.array(sorted(set(pts) | set(mids))).reshape(-1, 1)
        return X[self.domain.contains_many(X, tol=0.0)]

    def _check_guards_sampled(self, X: np.ndarray) -> None:
        hits = np.column_stack([pc.guard.contains_many(X) for pc in self.pieces])
        none = ~hits.any(axis=1)
        if np.any(none):
            raise GuardError(f"map {self.name}: no guard covers {X[int(np.argmax(none))].tolist()}")
        multi = hits.sum(axis=1) > 1
        # shared guard boundaries are tolerated only where the pieces agree
        for r in np.flatnonzero(multi):
            vals = [self.pieces[i].value(X[r:r + 1])[0] for i in np.flatnonzero(hits[r])]
            if max(np.linalg.norm(v - vals[0]) for v in vals) > AFFINITY_TOL:
                raise GuardError(f"map {self.name}: overlapping guards disagree at {X[r].tolist()}")


@dataclass(frozen=True)
class ScaledMap:
    """x -> k * base(x) + (1 - k) * q."""

    base: PiecewiseMap
    k: float
    q: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.k <= 1.0):
            raise ValueError(f"scale k={self.k} outside [0, 1]")
        q = as_point(self.q, self.base.dimension)
        object.__setattr__(self, "q", q)

    @property
    def domain(self) -> DomainSet:
        return self.base.domain

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def name(self) -> str:
        return f"{self.base.name}_k"

    def eval_many(self, X) -> np.ndarray:
        return self.k * self.base.eval_many(X) + (1.0 - self.k) * self.q[None, :]

    def eval(self, x) -> np.ndarray:
        x = as_point(x, self.dimension)
        return self.eval_many(x.reshape(1, -1))[0]

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def extend(self, x) -> np.ndarray:
        return self.k * self.base.extend(x) + (1.0 - self.k) * self.q

    def breakpoints(self) -> list[float]:
        return self.base.breakpoints()

    @property
    def pieces(self) -> tuple[Piece, ...]:
        k, q = self.k, self.q
        d = self.dimension
        out = []
        for pc in self.base.pieces:
            expr = tuple(
                Polynomial(p.exps + ((0,) * d,), tuple(k * c for c in p.coefs) + ((1 - k) * q[i],))
                for i, p in enumerate(pc.expr)
            )
            out.append(Piece(pc.guard, expr))
        return tuple(out)

    def piece_index_many(self, X, strict: bool = True) -> np.ndarray:
        return self.base.piece_index_many(X, strict)


AnyMap = PiecewiseMap | ScaledMap


def evaluate(m: AnyMap, x) -> np.ndarray:
    return m.eval(x)


def compose_many(outer: AnyMap, inner: AnyMap, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """outer(inner(X)) with a mask of rows whose intermediate value left the outer domain."""
    Y = inner.eval_many(X)
    idx = outer.piece_index_many(Y, strict=False)
    ok = idx >= 0
    out = np.full_like(Y, np.nan)
    if np.any(ok):
        out[ok] = outer.eval_many(Y[ok])
    return out, ~ok


# ---------------------------------------------------------------------------
# affinity


def check_affinity(m: PiecewiseMap, q, kind: str, sampler: SampleSpec | None = None,
                   tol: float = AFFINITY_TOL) -> Verdict:
    """Sampled test of affine / affine-w.r.t.-q / q-affine identities over E x (0,1)."""
    if kind not in KINDS:
        raise ValueError(f"unknown affinity kind {kind!r}; expected one of {KINDS}")
    sampler = sampler or SampleSpec()
    E = m.domain
    q = as_point(q, E.dimension)
    if not E.contains(q):
        raise ValueError(f"q={q.tolist()} is not in the domain")
    Tq = m.eval(q)
    if kind == "q_affine":
        gap = float(np.linalg.norm(Tq - q))
        if gap > tol:
            return Verdict.violated({"x": q.tolist(), "lambda": None, "Tq": Tq.tolist(),
                                     "residual": gap}, samples=1, reason="Tq != q")

    lam = sampler.interior_params()
    X = E.sample(sampler.pitch_for(E.dimension))
    if kind == "affine":
        # pairs come from a 10x coarser grid (endpoints kept) to bound the count
        Xs = E.sample(10 * sampler.pitch_for(E.dimension))
        ii, jj = np.meshgrid(np.arange(len(Xs)), np.arange(len(Xs)), indexing="ij")
        first, second = Xs[ii.ravel()], Xs[jj.ravel()]
    else:
        first = X
        second = np.broadcast_to(q, X.shape)

    TX = m.eval_many(first)
    if kind == "affine":
        TY = m.eval_many(second)
    else:
        TY = np.broadcast_to(Tq if kind == "affine_wrt_point" else q, first.shape)

    worst = (-1.0, None)
    tested = 0
    for start in range(0, len(first), 4096):
        a, b = first[start:start + 4096], second[start:start + 4096]
        ta, tb = TX[start:start + 4096], TY[start:start + 4096]
        L = lam[None, :, None]
        Z = (L * a[:, None, :] + (1 - L) * b[:, None, :]).reshape(-1, E.dimension)
        rhs = (L * ta[:, None, :] + (1 - L) * tb[:, None, :]).reshape(-1, E.dimension)
        inside = E.contains_many(Z)
        if not np.any(inside):
            continue
        lhs = np.full_like(Z, np.nan)
        lhs[inside] = m.eval_many(Z[inside])
        res = np.where(inside, np.linalg.norm(lhs - rhs, axis=1), -1.0)
        tested += int(inside.sum())
        r = int(np.argmax(res))
        if res[r] > worst[0]:
            i, j = divmod(r, len(lam))
            worst = (float(res[r]), {"x": a[i].tolist(), "y": b[i].tolist(), "lambda": float(lam[j]),
                                     "lhs": lhs[r].tolist(), "rhs": rhs[r].tolist(),
                                     "residual": float(res[r])})
    if worst[0] > tol:
        return Verdict.violated(worst[1], samples=tested)
    return Verdict.holds(samples=tested, max_residual=max(worst[0], 0.0))


def image_check(m: AnyMap, source: DomainSet, target_map: AnyMap,
                sampler: SampleSpec | None = None) -> Verdict:
    """Is m(source) inside target_map(E), up to twice the grid pitch?"""
    sampler = sampler or SampleSpec()
    h = sampler.pitch_for(source.dimension)
    X = source.sample(h)
    img = m.eval_many(X)
    target = target_map.eval_many(target_map.domain.sample(h))
    tree = cKDTree(target)
    dist, _ = tree.query(img)
    bad = dist > 2 * h
    if np.any(bad):
        # worst offender, lowest x on ties
        i = int(np.argmax(dist))
        return Verdict.violated({"x": X[i].tolist(), "image": img[i].tolist(),
                                 "distance_to_target_image": float(dist[i])}, samples=len(X))
    return Verdict.holds(samples=len(X), max_gap=float(dist.max()))


def scaling_identity_gap(A: PiecewiseMap, B: PiecewiseMap, q, k: float, X: np.ndarray,
                         Y: np.ndarray) -> np.ndarray:
    """| ||A_k x - B_k y|| - k ||Ax - By|| | divided by the operand scale."""
    An, Bn = ScaledMap(A, k, q), ScaledMap(B, k, q)
    AX, BY = A.eval_many(X), B.eval_many(Y)
    lhs = np.linalg.norm(An.eval_many(X) - Bn.eval_many(Y), axis=1)
    rhs = k * np.linalg.norm(AX - BY, axis=1)
    scale = np.maximum.reduce([np.ones(len(X)), np.linalg.norm(AX, axis=1),
                               np.linalg.norm(BY, axis=1),
                               np.full(len(X), float(np.linalg.norm(as_point(q))))])
    return np.abs(lhs - rhs) / scale
