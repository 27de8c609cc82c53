"""Coincidence sets C(A, T_k), the union C_q(A, T), and commuting diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq, minimize
from scipy.spatial import cKDTree

from .geometry import SampleSpec, as_point
from .maps import AnyMap, PiecewiseMap, ScaledMap, compose_many
from .verdict import NO_COUNTEREXAMPLE, Verdict

COINCIDENCE_TOL = 1e-7
K_SAMPLES = 101
K_REFINE_DEPTH = 8


@dataclass
class CoincidenceSet:
    """Points and (1D) intervals where two maps agree.

    Intervals are (lo, hi, lo_closed, hi_closed); points are coordinate arrays.
    """

    dimension: int
    intervals: list[tuple[float, float, bool, bool]] = field(default_factory=list)
    points: list[np.ndarray] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.intervals and not self.points

    def signature(self) -> tuple[int, int]:
        return len(self.intervals), len(self.points)

    def sample(self, pitch: float) -> np.ndarray:
        """Every point plus each interval sampled at ``pitch``, open ends nudged inward."""
        rows = [np.atleast_1d(p) for p in self.points]
        for lo, hi, lc, hc in self.intervals:
            n = max(int(np.ceil((hi - lo) / pitch)), 1)
            x = np.linspace(lo, hi, n + 1)
            nudge = min(pitch / 8, (hi - lo) / 4)
            if not lc:
                x[0] = lo + nudge
            if not hc:
                x[-1] = hi - nudge
            rows.extend(x.reshape(-1, 1))
        if not rows:
            return np.empty((0, self.dimension))
        return np.unique(np.vstack(rows), axis=0)

    def to_dict(self) -> dict:
        return {
            "intervals": [{"lo": float(lo), "hi": float(hi), "lo_closed": bool(lc), "hi_closed": bool(hc)}
                          for lo, hi, lc, hc in self.intervals],
            "points": [np.atleast_1d(p).astype(float).tolist() for p in self.points],
        }


@dataclass
class CoincidenceReport:
    k_samples: list[float]
    per_k: list[CoincidenceSet]
    cq_union: CoincidenceSet
    commuting_verdict: Verdict | None = None

    def to_dict(self) -> dict:
        out = {
            "k_samples": [float(k) for k in self.k_samples],
            "per_k": [s.to_dict() for s in self.per_k],
            "cq_union": self.cq_union.to_dict(),
        }
        if self.commuting_verdict is not None:
            out["commuting"] = self.commuting_verdict.to_dict()
        return out


# ---------------------------------------------------------------------------
# coincidence solving


def _residual(A: AnyMap, Tk: AnyMap, x: float) -> float:
    X = np.array([[x]])
    return float(abs(A.eval_many(X)[0, 0] - Tk.eval_many(X)[0, 0]))


def _cuts_1d(A: AnyMap, Tk: AnyMap) -> list[float]:
    cuts = set(A.breakpoints()) | set(Tk.breakpoints())
    for prim in A.domain.primitives:
        cuts.update((prim.lo, prim.hi))
    return sorted(cuts)


def _coincidence_1d(A: AnyMap, Tk: AnyMap, h: float, tol: float) -> CoincidenceSet:
    E = A.domain
    cuts = _cuts_1d(A, Tk)
    A_pieces, T_pieces = A.pieces, Tk.pieces
    points: list[float] = []
    spans: list[tuple[float, float]] = []

    for c in cuts:
        if E.contains_many(np.array([[c]]), tol=0.0)[0] and _residual(A, Tk, c) <= tol:
            points.append(c)

    for a, b in zip(cuts, cuts[1:]):
        mid = np.array([[0.5 * (a + b)]])
        if not E.contains_many(mid, tol=0.0)[0]:
            continue
        ia = int(A.piece_index_many(mid)[0])
        it = int(Tk.piece_index_many(mid)[0])
        g = A_pieces[ia].expr[0].ascending() - T_pieces[it].expr[0].ascending()
        scale = max(1.0, float(np.abs(A_pieces[ia].expr[0].ascending()).max()))
        if np.all(np.abs(g) <= 1e-14 * scale):
            spans.append((a, b))
            continue
        points.extend(_roots_on(g, a, b, h, tol, lambda x: _residual(A, Tk, x)))

    return _assemble(spans, points, E)


def _roots_on(g: np.ndarray, a: float, b: float, h: float, tol: float, resid) -> list[float]:
    """Roots of polynomial g in the open interval (a, b) with |g| <= tol at the maps."""
    f = lambda x: float(P.polyval(x, g))
    n = max(int(np.ceil((b - a) / h)), 2)
    xs = np.linspace(a, b, n + 1)[1:-1]
    cand: list[float] = []
    if len(xs):
        vals = P.polyval(xs, g)
        cand.extend(xs[vals == 0.0])
        # sign-change brackets, refined by bisection-safeguarded Brent
        s = np.sign(vals)
        for i in np.flatnonzero(s[:-1] * s[1:] < 0):
            cand.append(brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
        # brackets against the open ends
        for lo, hi in ((a, xs[0]), (xs[-1], b)):
            if f(lo) * f(hi) < 0:
                cand.append(brentq(f, lo, hi, xtol=1e-15))
    # even-multiplicity roots have no sign change; take them from the companion matrix
    trimmed = np.trim_zeros(g, "b")
    if len(trimmed) > 1:
        for r in P.polyroots(trimmed):
            if abs(r.imag) <= 1e-6:
                cand.append(_polish(g, float(r.real)))
    out = []
    for x in sorted(cand):
        if a < x < b and resid(x) <= tol:
            if not out or abs(x - out[-1]) > 1e-12 * max(1.0, abs(x)):
                out.append(float(x))
    return out


def _polish(g: np.ndarray, x: float) -> float:
    dg = P.polyder(g)
    for _ in range(8):
        d = P.polyval(x, dg)
        if d == 0.0:
            break
        step = P.polyval(x, g) / d
        x -= step
        if abs(step) < 1e-16:
            break
    return x


def _assemble(spans, points, E) -> CoincidenceSet:
    """Join open spans with their endpoint points into closed/half-open intervals."""
    pts = sorted(set(points))
    merged: list[list] = []
    for a, b in sorted(spans):
        lc = a in pts
        hc = b in pts
        if merged and merged[-1][1] == a and (merged[-1][3] or lc):
            merged[-1][1] = b
            merged[-1][3] = hc
        else:
            merged.append([a, b, lc, hc])
    covered = lambda x: any((lo < x < hi) or (x == lo and lc) or (x == hi and hc)
                            for lo, hi, lc, hc in merged)
    loose = [np.array([x]) for x in pts if not covered(x)]
    return CoincidenceSet(1, [tuple(m) for m in merged], loose)


def _coincidence_2d(A: AnyMap, Tk: AnyMap, h: float, tol: float) -> CoincidenceSet:
    E = A.domain
    X = E.sample(h)
    R = np.linalg.norm(A.eval_many(X) - Tk.eval_many(X), axis=1)
    tree = cKDTree(X)
    nbrs = tree.query_ball_point(X, 1.5 * h)
    local_min = np.array([R[i] <= R[nb].min() for i, nb in enumerate(nbrs)])
    # flat zero regions: every zero grid point is reported
    zero = R <= tol
    cand = np.flatnonzero(local_min & ~zero)
    cand = cand[np.argsort(R[cand], kind="stable")][:64]
    found = [X[i] for i in np.flatnonzero(zero)]

    def obj(z):
        z = z.reshape(1, 2)
        pen = 0.0
        if not E.contains_many(z)[0]:
            pen = 1e3 * (1.0 + E.distance(z[0]))
            z = _project_into(E, z[0]).reshape(1, 2)
        return float(np.sum((A.eval_many(z) - Tk.eval_many(z)) ** 2)) + pen

    for i in cand:
        res = minimize(obj, X[i], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-24, "initial_simplex": X[i] + h * np.array([[0, 0], [1, 0], [0, 1]]) / 2})
        z = res.x
        if E.contains(z) and np.linalg.norm(A.eval(z) - Tk.eval(z)) <= tol:
            found.append(z)
    if not found:
        return CoincidenceSet(2)
    F = np.unique(np.round(np.vstack(found), 12), axis=0)
    # collapse duplicates from different starts: keep the first of each 1e-7 cluster
    drop = np.zeros(len(F), dtype=bool)
    for i, j in sorted(cKDTree(F).query_pairs(1e-7)):
        if not drop[i]:
            drop[j] = True
    return CoincidenceSet(2, [], list(F[~drop]))


def _project_into(E, p: np.ndarray) -> np.ndarray:
    cands = [prim.project(p) for prim in E.primitives]
    return min(cands, key=lambda c: float(np.linalg.norm(c - p)))


def coincidence_set(A: AnyMap, T: PiecewiseMap, q, k: float, grid: SampleSpec | None = None,
                    tol: float = COINCIDENCE_TOL) -> CoincidenceSet:
    """C(A, T_k) = {x in E : Ax = k Tx + (1-k) q}."""
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"k={k} outside [0, 1]")
    grid = grid or SampleSpec()
    Tk = ScaledMap(T, float(k), as_point(q, T.dimension))
    h = grid.pitch_for(A.dimension)
    if A.dimension == 1:
        return _coincidence_1d(A, Tk, h, tol)
    return _coincidence_2d(A, Tk, h, tol)


def _union_1d(sets: list[CoincidenceSet], h: float) -> CoincidenceSet:
    ivs = [list(iv) for s in sets for iv in s.intervals]
    ivs += [[float(p[0]), float(p[0]), True, True] for s in sets for p in s.points]
    ivs.sort(key=lambda v: (v[0], v[1]))
    merged: list[list] = []
    for lo, hi, lc, hc in ivs:
        if merged and lo <= merged[-1][1] + 2 * h:
            last = merged[-1]
            if lo == last[0]:
                last[2] = last[2] or lc
            if hi > last[1]:
                last[1], last[3] = hi, hc
            elif hi == last[1]:
                last[3] = last[3] or hc
        else:
            merged.append([lo, hi, lc, hc])
    out = CoincidenceSet(1)
    for lo, hi, lc, hc in merged:
        if hi - lo <= 0.0:
            out.points.append(np.array([lo]))
        else:
            out.intervals.append((lo, hi, lc, hc))
    return out


def _union_2d(sets: list[CoincidenceSet]) -> CoincidenceSet:
    pts = [np.asarray(p) for s in sets for p in s.points]
    if not pts:
        return CoincidenceSet(2)
    U = np.unique(np.round(np.vstack(pts), 12), axis=0)
    return CoincidenceSet(2, [], list(U))


def cq_set(A: PiecewiseMap, T: PiecewiseMap, q, k_grid: int = K_SAMPLES,
           grid: SampleSpec | None = None, tol: float = COINCIDENCE_TOL,
           refine_depth: int = K_REFINE_DEPTH, check_commuting: bool = True) -> CoincidenceReport:
    """Union of C(A, T_k) over a k-grid containing 0 and 1, refined where the set changes shape."""
    grid = grid or SampleSpec()
    ks = list(np.linspace(0.0, 1.0, max(int(k_grid), 2)))
    solved = {k: coincidence_set(A, T, q, k, grid, tol) for k in ks}

    frontier = list(zip(ks, ks[1:]))
    for _ in range(refine_depth):
        nxt = []
        for lo, hi in frontier:
            if solved[lo].signature() == solved[hi].signature():
                continue
            mid = 0.5 * (lo + hi)
            solved[mid] = coincidence_set(A, T, q, mid, grid, tol)
            nxt += [(lo, mid), (mid, hi)]
        frontier = nxt
        if not frontier:
            break

    order = sorted(solved)
    per_k = [solved[k] for k in order]
    h = grid.pitch_for(A.dimension)
    union = _union_1d(per_k, h) if A.dimension == 1 else _union_2d(per_k)
    report = CoincidenceReport(order, per_k, union)
    if check_commuting:
        report.commuting_verdict = check_cq_commuting(A, T, q, report, tol, grid)
    return report


# ---------------------------------------------------------------------------
# commuting checks


def commutator(A: AnyMap, T: AnyMap, x) -> tuple[np.ndarray, np.ndarray]:
    """(ATx, TAx) at a single point."""
    x = as_point(x, A.dimension)
    return A.eval(T.eval(x)), T.eval(A.eval(x))


def _commute_on(A: AnyMap, T: AnyMap, X: np.ndarray, tol: float) -> Verdict:
    if len(X) == 0:
        return Verdict.holds(samples=0, note="empty coincidence set")
    AT, esc1 = compose_many(A, T, X)
    TA, esc2 = compose_many(T, A, X)
    escaped = esc1 | esc2
    if np.any(escaped):
        i = int(np.argmax(escaped))
        return Verdict.violated({"x": X[i].tolist(), "reason": "domain escape"}, samples=len(X))
    gap = np.linalg.norm(AT - TA, axis=1)
    i = int(np.argmax(gap))
    if gap[i] > tol:
        return Verdict.violated({"x": X[i].tolist(), "ATx": AT[i].tolist(), "TAx": TA[i].tolist(),
                                 "gap": float(gap[i])}, samples=len(X))
    return Verdict.holds(samples=len(X), max_gap=float(gap[i]))


def check_cq_commuting(A: PiecewiseMap, T: PiecewiseMap, q, report: CoincidenceReport,
                       tol: float = COINCIDENCE_TOL, grid: SampleSpec | None = None) -> Verdict:
    """ATx = TAx on every point of C_q(A, T) (interval members sampled at the grid pitch)."""
    grid = grid or SampleSpec()
    h = grid.pitch_for(A.dimension)
    # per-k members only: coalescing in the union may bridge gaps that are not coincidences
    pts = [s.sample(h) for s in report.per_k]
    X = np.unique(np.vstack(pts), axis=0) if pts else np.empty((0, A.dimension))
    return _commute_on(A, T, X, tol)


def check_weak_compatibility(A: PiecewiseMap, T: PiecewiseMap, grid: SampleSpec | None = None,
                             tol: float = COINCIDENCE_TOL) -> Verdict:
    """Commuting on C(A, T), the unscaled coincidence set."""
    grid = grid or SampleSpec()
    q = T.domain.sample(grid.pitch_for(T.dimension))[0]
    C = coincidence_set(A, T, q, 1.0, grid, tol)
    v = _commute_on(A, T, C.sample(grid.pitch_for(A.dimension)), tol)
    v.detail["coincidence"] = C.to_dict()
    return v


def check_reciprocal_continuity(A: PiecewiseMap, T: PiecewiseMap, grid: SampleSpec | None = None,
                                tol: float = 1e-6, max_targets: int = 48) -> Verdict:
    """Heuristic refutation search: can only report a counterexample, never certify.

    Sequences x_n -> p approach each target p from both sides with geometric steps at
    three scales; where Ax_n and Tx_n share a limit t, the limits of ATx_n and TAx_n
    are compared with At and Tt.
    """
    grid = grid or SampleSpec()
    h = grid.pitch_for(A.dimension)
    E = A.domain
    targets = _rc_targets(A, T, h, max_targets)
    special = np.array(sorted(set(A.breakpoints()) | set(T.breakpoints()))).reshape(-1, 1) \
        if A.dimension == 1 else np.empty((0, 2))
    n_seq = 0
    dirs = [np.array([-1.0]), np.array([1.0])] if A.dimension == 1 else \
        [np.array(v, dtype=float) / np.linalg.norm(v) for v in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))]
    for p in targets:
        for u in dirs:
            for scale in (10 * h, h, h / 10):
                steps = scale * 0.5 ** np.arange(1, 41)
                X = p[None, :] + steps[:, None] * u[None, :]
                X = X[np.linalg.norm(X - p, axis=1) > 1e-13 * max(1.0, float(np.abs(p).max()))]
                X = X[E.contains_many(X, tol=0.0)]
                if len(X) < 8:
                    continue
                n_seq += 1
                AX, TX = A.eval_many(X), T.eval_many(X)
                if not (_converges(AX) and _converges(TX)):
                    continue
                t = AX[-1]
                if np.linalg.norm(AX[-1] - TX[-1]) > tol:
                    continue
                t = _snap(t, np.vstack([special, p[None, :]]) if len(special) else p[None, :])
                if not E.contains(t):
                    continue
                ATX, esc1 = compose_many(A, T, X)
                TAX, esc2 = compose_many(T, A, X)
                if np.any(esc1 | esc2):
                    continue
                if not (_converges(ATX) and _converges(TAX)):
                    v = Verdict.violated({"target": p.tolist(), "t": t.tolist(), "sequence_tail": X[-3:].tolist(),
                                          "reason": "composed sequences do not converge"}, samples=n_seq)
                    v.heuristic = True
                    return v
                At, Tt = A.eval(t), T.eval(t)
                gap_a = float(np.linalg.norm(ATX[-1] - At))
                gap_t = float(np.linalg.norm(TAX[-1] - Tt))
                if gap_a > tol or gap_t > tol:
                    v = Verdict.violated({"target": p.tolist(), "t": t.tolist(),
                                          "sequence_tail": X[-3:].tolist(),
                                          "lim_ATx": ATX[-1].tolist(), "At": At.tolist(),
                                          "lim_TAx": TAX[-1].tolist(), "Tt": Tt.tolist()}, samples=n_seq)
                    v.heuristic = True
                    return v
    return Verdict(NO_COUNTEREXAMPLE, None, n_seq, {"targets": len(targets)}, heuristic=True)


def _rc_targets(A: AnyMap, T: AnyMap, h: float, limit: int) -> list[np.ndarray]:
    E = A.domain
    X = E.sample(h)
    R = np.linalg.norm(A.eval_many(X) - T.eval_many(X), axis=1)
    out: list[np.ndarray] = []
    if A.dimension == 1:
        for b in sorted(set(A.breakpoints()) | set(T.breakpoints())):
            out.append(np.array([b]))
        order = np.argsort(R, kind="stable")
        locmin = [i for i in order if (i == 0 or R[i] <= R[i - 1]) and (i == len(R) - 1 or R[i] <= R[i + 1])]
    else:
        tree = cKDTree(X)
        nbrs = tree.query_ball_point(X, 1.5 * h)
        locmin = [i for i in np.argsort(R, kind="stable") if R[i] <= R[nbrs[i]].min()]
    # spread picks over the domain so flat residual regions do not crowd out the rest
    picked = np.array(locmin[: max(limit * 8, 1)], dtype=int)
    if len(picked):
        sel = picked[np.linspace(0, len(picked) - 1, min(limit, len(picked))).astype(int)]
        out.extend(X[i] for i in sel)
    uniq: list[np.ndarray] = []
    for p in out:
        if all(np.linalg.norm(p - u) > 1e-12 for u in uniq):
            uniq.append(p)
    return uniq[:limit + len(A.breakpoints()) + len(T.breakpoints())]


def _converges(Y: np.ndarray, tol: float = 1e-6) -> bool:
    tail = Y[-4:]
    return bool(np.all(np.linalg.norm(tail - tail[-1], axis=1) <= tol))


def _snap(t: np.ndarray, special: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    d = np.linalg.norm(special - t[None, :], axis=1)
    i = int(np.argmin(d))
    return special[i].copy() if d[i] <= tol else t
