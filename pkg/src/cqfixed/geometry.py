"""Compact domains in R^1 and R^2 built from intervals, disks and convex polygons.

All sets are closed unions of primitives, except that interval endpoints may be
flagged open. Every object here is immutable once built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .verdict import Verdict

MEMBERSHIP_TOL = 1e-9
DEFAULT_PITCH_1D = 1e-3
DEFAULT_PITCH_2D = 2e-2
SEGMENT_SAMPLES = 64


class DimensionError(ValueError):
    pass


def parse_number(value) -> float:
    """Parse a decimal literal or an exact fraction "p/q" to the nearest binary64."""
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        text = value.strip()
        try:
            # Fraction rounds correctly for both "2/3" and "0.1"
            out = float(Fraction(text))
        except (ValueError, ZeroDivisionError):
            try:
                out = float(text)
            except ValueError:
                raise ValueError(f"not a number: {value!r}") from None
    else:
        raise ValueError(f"not a number: {value!r}")
    if not math.isfinite(out):
        raise ValueError(f"non-finite number: {value!r}")
    return out


def as_point(p, dim: int | None = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1)
    if arr.size not in (1, 2):
        raise DimensionError(f"points must have 1 or 2 coordinates, got {arr.size}")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected a {dim}-d point, got {arr.size}-d")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def _as_points(P, dim: int) -> np.ndarray:
    arr = np.asarray(P, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, dim) if dim > 1 else arr.reshape(-1, 1)
    if arr.shape[1] != dim:
        raise DimensionError(f"expected {dim}-d points, got {arr.shape[1]}-d")
    return arr


class Segment(NamedTuple):
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class SampleSpec:
    """Sampling resolution shared by every sampling-based predicate.

    ``pitch=None`` picks 1e-3 in 1D and 2e-2 in 2D.
    """

    pitch: float | None = None
    segment_samples: int = SEGMENT_SAMPLES
    pairs: int = 100_000
    seed: int = 0x9E3779B9

    def pitch_for(self, dim: int) -> float:
        if self.pitch is not None:
            return float(self.pitch)
        return DEFAULT_PITCH_1D if dim == 1 else DEFAULT_PITCH_2D

    def interior_params(self) -> np.ndarray:
        """Parameters strictly inside (0, 1), always containing 1/2."""
        n = max(int(self.segment_samples), 1)
        t = np.linspace(0.0, 1.0, n + 2)[1:-1]
        return np.union1d(t, [0.5])


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    dimension = 1

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise ValueError("a degenerate interval must be closed at both ends")

    def contains_many(self, P: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        x = P[:, 0]
        left = x >= self.lo - tol if self.lo_closed else x > self.lo
        right = x <= self.hi + tol if self.hi_closed else x < self.hi
        return left & right

    def signed_distance_many(self, P: np.ndarray) -> np.ndarray:
        x = P[:, 0]
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        return np.abs(x - mid) - half

    def project(self, p: np.ndarray) -> np.ndarray:
        return np.array([min(max(p[0], self.lo), self.hi)])

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([self.lo]), np.array([self.hi])

    def boundary_points(self, pitch: float) -> np.ndarray:
        return np.array([[self.lo], [self.hi]])

    def grid(self, pitch: float) -> np.ndarray:
        n = max(int(math.ceil((self.hi - self.lo) / pitch - 1e-9)), 1)
        x = np.linspace(self.lo, self.hi, n + 1) if self.hi > self.lo else np.array([self.lo])
        pts = [x]
        # open ends get a point just inside so the piece is still exercised
        nudge = min(pitch / 8.0, (self.hi - self.lo) / 4.0)
        if not self.lo_closed:
            pts.append([self.lo + nudge])
        if not self.hi_closed:
            pts.append([self.hi - nudge])
        x = np.unique(np.concatenate(pts))
        P = x.reshape(-1, 1)
        return P[self.contains_many(P, tol=0.0)]


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    dimension = 2

    def __post_init__(self):
        if self.radius < 0 or not math.isfinite(self.radius):
            raise ValueError("disk radius must be finite and nonnegative")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains_many(self, P: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        return np.hypot(P[:, 0] - self.center[0], P[:, 1] - self.center[1]) <= self.radius + tol

    def signed_distance_many(self, P: np.ndarray) -> np.ndarray:
        return np.hypot(P[:, 0] - self.center[0], P[:, 1] - self.center[1]) - self.radius

    def project(self, p: np.ndarray) -> np.ndarray:
        v = p - self.c
        n = float(np.hypot(*v))
        if n <= self.radius:
            return p.copy()
        return self.c + v * (self.radius / n)

    def nearest_boundary_point(self, p: np.ndarray) -> np.ndarray:
        v = p - self.c
        n = float(np.hypot(*v))
        if n == 0.0:
            return self.c + np.array([self.radius, 0.0])
        return self.c + v * (self.radius / n)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.radius
        return self.c - r, self.c + r

    def boundary_points(self, pitch: float) -> np.ndarray:
        if self.radius == 0.0:
            return self.c.reshape(1, 2)
        n = int(math.ceil(2 * math.pi * self.radius / pitch))
        n = max(4 * int(math.ceil(n / 4)), 8)  # keeps the four axis points exact
        theta = 2 * math.pi * np.arange(n) / n
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        # snap the quarter points so (0,1) etc. come out exact
        quarter = n // 4
        pts[0] = (1.0, 0.0)
        pts[quarter] = (0.0, 1.0)
        pts[2 * quarter] = (-1.0, 0.0)
        pts[3 * quarter] = (0.0, -1.0)
        return self.c + self.radius * pts


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple[tuple[float, float], ...]

    dimension = 2

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise ValueError("a convex polygon needs at least three 2-d vertices")
        area2 = _shoelace2(V)
        if area2 == 0.0:
            raise ValueError("polygon is degenerate")
        if area2 < 0:
            object.__setattr__(self, "vertices", tuple(map(tuple, V[::-1])))
            V = V[::-1]
        E = np.roll(V, -1, axis=0) - V
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if np.any(cross < -1e-12):
            raise ValueError("polygon vertices are not convex")

    @property
    def V(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def _edge_terms(self, P: np.ndarray):
        V = self.V
        W = np.roll(V, -1, axis=0)
        D = W - V
        L = np.hypot(D[:, 0], D[:, 1])
        # outward signed distance to each supporting line (CCW order)
        rel = P[:, None, :] - V[None, :, :]
        cross = D[None, :, 0] * rel[:, :, 1] - D[None, :, 1] * rel[:, :, 0]
        return V, D, L, rel, -cross / L[None, :]

    def contains_many(self, P: np.ndarray, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        *_, out = self._edge_terms(P)
        return np.all(out <= tol, axis=1)

    def _edge_distances(self, P: np.ndarray) -> np.ndarray:
        V, D, L, rel, _ = self._edge_terms(P)
        t = np.clip((rel * D[None]).sum(axis=2) / (L**2)[None], 0.0, 1.0)
        foot = V[None] + t[..., None] * D[None]
        diff = P[:, None, :] - foot
        return np.hypot(diff[..., 0], diff[..., 1])

    def signed_distance_many(self, P: np.ndarray) -> np.ndarray:
        d = self._edge_distances(P).min(axis=1)
        inside = self.contains_many(P, tol=0.0)
        return np.where(inside, -d, d)

    def nearest_boundary_point(self, p: np.ndarray) -> np.ndarray:
        V, D, L, rel, _ = self._edge_terms(p.reshape(1, 2))
        t = np.clip((rel[0] * D).sum(axis=1) / L**2, 0.0, 1.0)
        foot = V + t[:, None] * D
        i = int(np.argmin(np.hypot(*(p - foot).T)))
        return foot[i]

    def project(self, p: np.ndarray) -> np.ndarray:
        if self.contains_many(p.reshape(1, 2), tol=0.0)[0]:
            return p.copy()
        return self.nearest_boundary_point(p)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        V = self.V
        return V.min(axis=0), V.max(axis=0)

    def boundary_points(self, pitch: float) -> np.ndarray:
        V = self.V
        out = []
        for a, b in zip(V, np.roll(V, -1, axis=0)):
            n = max(int(math.ceil(np.hypot(*(b - a)) / pitch)), 1)
            t = np.arange(n) / n
            out.append(a + t[:, None] * (b - a))
        return np.vstack(out)


def _shoelace2(V: np.ndarray) -> float:
    x, y = V[:, 0], V[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


Primitive = Interval | Disk | ConvexPolygon


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainSet:
    """Union of primitives of a common dimension."""

    primitives: tuple[Primitive, ...]
    dimension: int = field(init=False)

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not prims:
            raise ValueError("a domain needs at least one primitive")
        dims = {p.dimension for p in prims}
        if len(dims) != 1:
            raise DimensionError("all primitives of a domain must share one dimension")
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "dimension", dims.pop())

    @classmethod
    def interval(cls, lo, hi, lo_closed=True, hi_closed=True) -> DomainSet:
        return cls((Interval(float(lo), float(hi), lo_closed, hi_closed),))

    @classmethod
    def disks(cls, *specs) -> DomainSet:
        return cls(tuple(Disk((float(c[0]), float(c[1])), float(r)) for c, r in specs))

    def _check(self, p) -> np.ndarray:
        return as_point(p, self.dimension)

    def contains(self, p, tol: float = MEMBERSHIP_TOL) -> bool:
        p = self._check(p)
        return bool(self.contains_many(p.reshape(1, -1), tol)[0])

    def contains_many(self, P, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        P = _as_points(P, self.dimension)
        mask = np.zeros(len(P), dtype=bool)
        for prim in self.primitives:
            mask |= prim.contains_many(P, tol)
        return mask

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(p.bbox() for p in self.primitives))
        return np.min(los, axis=0), np.max(his, axis=0)

    def diameter_bound(self) -> float:
        lo, hi = self.bbox()
        return float(np.hypot.reduce(hi - lo)) if self.dimension == 2 else float(hi[0] - lo[0])

    # -- distances ----------------------------------------------------------

    def _components_1d(self) -> list[tuple[float, float]]:
        spans = sorted((p.lo, p.hi) for p in self.primitives)
        merged = [list(spans[0])]
        for lo, hi in spans[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(a, b) for a, b in merged]

    def distance(self, p) -> float:
        """Euclidean distance from p to the closure of the set."""
        p = self._check(p)
        return float(min(np.linalg.norm(p - prim.project(p)) for prim in self.primitives))

    def boundary_distance(self, p) -> float:
        """Signed distance to the boundary: negative inside, positive outside."""
        p = self._check(p)
        if self.dimension == 1:
            x = p[0]
            best = math.inf
            for lo, hi in self._components_1d():
                if lo <= x <= hi:
                    return -min(x - lo, hi - x) + 0.0
                best = min(best, lo - x if x < lo else x - hi)
            return best
        P = p.reshape(1, 2)
        sd = np.array([prim.signed_distance_many(P)[0] for prim in self.primitives])
        if np.all(sd > 0):
            return float(sd.min())
        return -self._inside_boundary_distance(p) + 0.0

    def _uncovered(self, pts: np.ndarray, skip: int) -> np.ndarray:
        """Mask of points not in the interior of any primitive other than ``skip``."""
        keep = np.ones(len(pts), dtype=bool)
        for j, other in enumerate(self.primitives):
            if j != skip:
                keep &= other.signed_distance_many(pts) >= -MEMBERSHIP_TOL
        return keep

    def _inside_boundary_distance(self, p: np.ndarray) -> float:
        best = math.inf
        for i, prim in enumerate(self.primitives):
            foot = prim.nearest_boundary_point(p)
            if self._uncovered(foot.reshape(1, 2), i)[0]:
                best = min(best, float(np.linalg.norm(p - foot)))
                continue
            # nearest boundary point is buried; search the exposed part
            pts = prim.boundary_points(1e-3)
            keep = self._uncovered(pts, i)
            if np.any(keep):
                best = min(best, float(np.min(np.linalg.norm(pts[keep] - p, axis=1))))
        return best

    # -- sampling -----------------------------------------------------------

    def boundary_samples(self, pitch: float) -> np.ndarray:
        pts = np.vstack([prim.boundary_points(pitch) for prim in self.primitives])
        return pts[self.contains_many(pts, tol=MEMBERSHIP_TOL)]

    def sample(self, pitch: float | None = None, boundary: bool = True) -> np.ndarray:
        """Deterministic grid of member points plus boundary samples, sorted lexicographically."""
        h = pitch if pitch is not None else SampleSpec().pitch_for(self.dimension)
        if self.dimension == 1:
            P = np.vstack([prim.grid(h) for prim in self.primitives])
        else:
            lo, hi = self.bbox()
            axes = [np.linspace(lo[i], hi[i], max(int(math.ceil((hi[i] - lo[i]) / h)), 1) + 1)
                    for i in range(2)]
            X, Y = np.meshgrid(*axes, indexing="ij")
            G = np.column_stack([X.ravel(), Y.ravel()])
            P = G[self.contains_many(G, tol=0.0)]
            if boundary:
                P = np.vstack([P, self.boundary_samples(h)])
        P = np.unique(P, axis=0)
        return P


def point_segment_distance(p, s: Segment) -> float:
    """Distance from p to the closed segment [s.a, s.b] by clamped projection."""
    p = as_point(p)
    a = as_point(s.a, p.size)
    b = as_point(s.b, p.size)
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0.0 else min(max(float((p - a) @ d) / dd, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def point_segment_distance_many(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise distance from P[i] to segment [A[i], B[i]]; inputs shaped (N, d)."""
    D = B - A
    dd = np.einsum("ij,ij->i", D, D)
    num = np.einsum("ij,ij->i", P - A, D)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, num / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    R = P - (A + t[:, None] * D)
    return np.sqrt(np.einsum("ij,ij->i", R, R))


# ---------------------------------------------------------------------------
# sampled predicates


def _segment_points(A: np.ndarray, B: np.ndarray, t: np.ndarray) -> np.ndarray:
    # rows ordered pair-major: (pair0,t0), (pair0,t1), ...
    return (t[None, :, None] * B[:, None, :] + (1 - t)[None, :, None] * A[:, None, :]).reshape(-1, A.shape[1])


def is_q_starshaped(E: DomainSet, q, sampler: SampleSpec | None = None) -> Verdict:
    """Search for p in E and t in (0,1) with t*p + (1-t)*q outside E."""
    sampler = sampler or SampleSpec()
    q = as_point(q, E.dimension)
    if not E.contains(q):
        raise ValueError(f"star-center {q.tolist()} is not in the domain")
    P = E.sample(sampler.pitch_for(E.dimension))
    t = sampler.interior_params()
    Q = np.broadcast_to(q, P.shape)
    best = None
    for start in range(0, len(P), 4096):
        chunk = P[start:start + 4096]
        pts = _segment_points(Q[: len(chunk)], chunk, t)
        bad = ~E.contains_many(pts)
        if np.any(bad):
            depth = np.where(bad, _outside_depth(E, pts, bad), -np.inf).reshape(len(chunk), len(t))
            i, j = np.unravel_index(int(np.argmax(depth)), depth.shape)
            if best is None or depth[i, j] > best[0]:
                best = (float(depth[i, j]), chunk[i], float(t[j]))
    n = len(P) * len(t)
    if best is None:
        return Verdict.holds(samples=n)
    _, p, tt = best
    return Verdict.violated({"p": p.tolist(), "t": tt,
                             "point": (tt * p + (1 - tt) * q).tolist()}, samples=n)


def _outside_depth(E: DomainSet, pts: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.zeros(len(pts))
    sub = pts[mask]
    d = np.full(len(sub), np.inf)
    for prim in E.primitives:
        d = np.minimum(d, np.maximum(prim.signed_distance_many(sub), 0.0))
    out[mask] = d
    return out


def is_convex(E: DomainSet, sampler: SampleSpec | None = None, max_points: int = 700) -> Verdict:
    """Pairwise segment sampling; the witness is the deepest excursion found, refined in t."""
    sampler = sampler or SampleSpec()
    h = sampler.pitch_for(E.dimension)
    if E.dimension == 1:
        comps = E._components_1d()
        # a union of intervals is convex iff it is one component with no open holes
        P = E.sample(h)
        pts = np.concatenate([P[:, 0], [c for comp in comps for c in comp]])
        pts = np.unique(pts[E.contains_many(pts.reshape(-1, 1))])
    else:
        bnd = E.boundary_samples(h)
        inner = E.sample(h, boundary=False)
        stride = max(len(inner) // max(max_points - len(bnd), 1), 1)
        P = np.unique(np.vstack([bnd, inner[::stride]]), axis=0)
        if len(P) > max_points:
            P = P[np.linspace(0, len(P) - 1, max_points).astype(int)]
        pts = P
    pts = np.asarray(pts, dtype=float).reshape(len(pts), -1)
    t = sampler.interior_params()
    n = len(pts)
    ii, jj = np.triu_indices(n, k=1)
    best = None
    for start in range(0, len(ii), 20000):
        a = pts[ii[start:start + 20000]]
        b = pts[jj[start:start + 20000]]
        seg = _segment_points(a, b, t)
        bad = ~E.contains_many(seg)
        if np.any(bad):
            depth = np.where(bad, _outside_depth(E, seg, bad), -np.inf)
            # equal depths (symmetric domains): prefer the largest point, last coordinate first
            top = np.flatnonzero(depth >= depth.max() - 1e-12)
            keys = [seg[top, c] for c in range(seg.shape[1])]
            r = int(top[np.lexsort(keys)[-1]])
            k, m = divmod(r, len(t))
            cand = (float(depth[r]), a[k], b[k], float(t[m]))
            if best is None or cand[0] > best[0] + 1e-12 or (
                    cand[0] >= best[0] - 1e-12 and tuple(seg[r][::-1]) > tuple(_at(best)[::-1])):
                best = cand
    tested = len(ii) * len(t)
    if best is None:
        return Verdict.holds(samples=tested)
    depth, a, b, tt = best
    tt, depth = _refine_depth(E, a, b, tt)
    point = tt * b + (1 - tt) * a
    return Verdict.violated({"a": a.tolist(), "b": b.tolist(), "t": tt,
                             "point": point.tolist(), "depth": depth}, samples=tested)


def _at(w: tuple) -> np.ndarray:
    _, a, b, t = w
    return t * b + (1 - t) * a


def _refine_depth(E: DomainSet, a: np.ndarray, b: np.ndarray, t0: float) -> tuple[float, float]:
    from scipy.optimize import minimize_scalar

    def neg_depth(t):
        p = (t * b + (1 - t) * a).reshape(1, -1)
        return -max(E.boundary_distance(p[0]), 0.0)

    res = minimize_scalar(neg_depth, bounds=(max(t0 - 0.05, 0.0), min(t0 + 0.05, 1.0)),
                          method="bounded", options={"xatol": 1e-12})
    if res.fun <= neg_depth(t0):
        return float(res.x), float(-res.fun)
    return t0, float(-neg_depth(t0))


def segment_inside(E: DomainSet, s: Segment, sampler: SampleSpec | None = None) -> bool:
    sampler = sampler or SampleSpec()
    t = np.concatenate([[0.0], sampler.interior_params(), [1.0]])
    pts = _segment_points(np.atleast_2d(s.a), np.atleast_2d(s.b), t)
    return bool(np.all(E.contains_many(pts)))


def two_disks() -> DomainSet:
    return DomainSet.disks(((0.0, 0.0), 1.0), ((2.0, 0.0), 1.0))


def point_list(P: Sequence) -> list[list[float]]:
    return [list(map(float, np.atleast_1d(p))) for p in P]
