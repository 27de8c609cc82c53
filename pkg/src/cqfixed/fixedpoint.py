"""Inner common-fixed-point solves for (A_k, B_k, S, T) and the outer k -> 1 schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import DomainSet, SampleSpec, as_point
from .maps import AnyMap, PiecewiseMap, ScaledMap
from .problem import Problem, Schedule
from .verdict import DIVERGED, HOLDS, NOT_FOUND, VIOLATED, Verdict

N_REFINE = 16
CAUCHY_RUN = 3


@dataclass
class InnerResult:
    x: np.ndarray | None
    residual: float
    best: np.ndarray
    candidates: int

    @property
    def found(self) -> bool:
        return self.x is not None


@dataclass
class StepRecord:
    n: int
    k: float
    x: list[float] | None
    residual: float
    displacement_gap: float | None = None

    def to_dict(self) -> dict:
        out = {"n": self.n, "k": float(self.k), "x": self.x, "residual": float(self.residual)}
        if self.displacement_gap is not None:
            out["displacement_gap"] = float(self.displacement_gap)
        return out


@dataclass
class FixedPointTrace:
    schedule_rule: str
    records: list[StepRecord] = field(default_factory=list)
    z: np.ndarray | None = None
    limit_residuals: dict[str, float] = field(default_factory=dict)
    status: str = NOT_FOUND
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "schedule": self.schedule_rule,
            "steps": [r.to_dict() for r in self.records],
            "z": None if self.z is None else [float(v) for v in self.z],
            "limit_residuals": {k: float(v) for k, v in self.limit_residuals.items()},
            "message": self.message,
        }


def residual_many(maps: tuple[AnyMap, ...], X: np.ndarray) -> np.ndarray:
    """max over the maps of ||M x - x||, row-wise."""
    R = np.zeros(len(X))
    for M in maps:
        R = np.maximum(R, np.linalg.norm(M.eval_many(X) - X, axis=1))
    return R


def _pick(cands: np.ndarray, R: np.ndarray, q: np.ndarray, tol: float) -> int:
    """Index of the chosen minimizer: within tol, nearest q then lexicographic; else lowest R."""
    ok = np.flatnonzero(R <= tol)
    if len(ok) == 0:
        return int(np.argmin(R))
    d = np.linalg.norm(cands[ok] - q, axis=1)
    keys = [cands[ok][:, k] for k in reversed(range(cands.shape[1]))] + [d]
    return int(ok[np.lexsort(keys)[0]])


def _refine_1d(f, x0: float, h: float, E: DomainSet) -> float:
    lo, hi = x0 - h, x0 + h
    # stay inside the component holding x0
    for prim in E.primitives:
        if prim.lo - 1e-12 <= x0 <= prim.hi + 1e-12:
            lo, hi = max(lo, prim.lo), min(hi, prim.hi)
            break
    if hi <= lo:
        return x0
    res = minimize_scalar(lambda t: f(np.array([[t]]))[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    return float(res.x)


def _refine_2d(f, x0: np.ndarray, h: float, E: DomainSet) -> np.ndarray:
    """Compass pattern search, step halving from h down to 1e-13."""
    x = x0.copy()
    fx = f(x.reshape(1, 2))[0]
    step = h
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    while step > 1e-13:
        trial = x[None, :] + step * dirs
        trial = trial[E.contains_many(trial, tol=0.0)]
        if len(trial):
            ft = f(trial)
            i = int(np.argmin(ft))
            if ft[i] < fx:
                x, fx = trial[i], ft[i]
                continue
        step *= 0.5
    return x


def inner_solve(A_n: AnyMap, B_n: AnyMap, S: AnyMap, T: AnyMap, E: DomainSet,
                grid: SampleSpec | None = None, tol: float | None = None, q=None,
                points: np.ndarray | None = None) -> InnerResult:
    """Minimize R(x) = max ||Mx - x|| over the four maps; coarse scan then local refinement.

    When ``points`` is given the search is restricted to that finite set.
    """
    grid = grid or SampleSpec()
    d = E.dimension
    tol = tol if tol is not None else (1e-9 if d == 1 else 1e-6)
    q = as_point(q if q is not None else getattr(A_n, "q", E.sample()[0]), d)
    maps = (A_n, B_n, S, T)
    f = lambda X: residual_many(maps, X)

    if points is not None:
        X = np.asarray(points, dtype=float).reshape(-1, d)
        R = f(X)
        i = _pick(X, R, q, tol)
        x = X[i] if R[i] <= tol else None
        return InnerResult(x, float(R[i]), X[i], len(X))

    h = grid.pitch_for(d)
    extra = [q.reshape(1, -1)]
    if d == 1:
        bps = sorted({b for M in maps for b in M.breakpoints()})
        if bps:
            extra.append(np.array(bps).reshape(-1, 1))
    X = np.vstack([E.sample(h)] + extra)
    X = np.unique(X[E.contains_many(X, tol=0.0)], axis=0)
    R = f(X)

    order = np.argsort(R, kind="stable")
    if d == 1:
        locmin = [i for i in order[: 8 * N_REFINE]
                  if (i == 0 or R[i] <= R[i - 1]) and (i == len(R) - 1 or R[i] <= R[i + 1])]
    else:
        locmin = list(order[: 4 * N_REFINE])
    seeds = [X[i] for i in locmin[:N_REFINE]]
    seeds += list(extra[0]) + (list(extra[1]) if len(extra) > 1 else [])

    cands = [X[i] for i in order[:N_REFINE]]
    for s in seeds:
        cands.append(s)
        y = np.array([_refine_1d(f, float(s[0]), h, E)]) if d == 1 else _refine_2d(f, s, h, E)
        if E.contains(y, tol=0.0):
            cands.append(y)
    C = np.unique(np.vstack(cands), axis=0)
    RC = f(C)
    i = _pick(C, RC, q, tol)
    x = C[i] if RC[i] <= tol else None
    return InnerResult(x, float(RC[i]), C[i], len(C))


def solve_schedule(problem: Problem, schedule: Schedule | None = None, tol: float | None = None,
                   grid: SampleSpec | None = None, points: np.ndarray | None = None,
                   domain: DomainSet | None = None) -> FixedPointTrace:
    """Solve the scaled problem at each k_n and extract the limit of x_n.

    Convergence: the last three successive differences of x_n fall below tol;
    the limit must then satisfy every map residual <= 10 tol.
    """
    schedule = schedule or problem.schedule
    grid = grid or problem.sampling
    E = domain or problem.domain
    tol = tol if tol is not None else problem.tolerances.inner(problem.dimension)
    q = problem.q
    trace = FixedPointTrace(schedule.rule)
    xs: list[np.ndarray] = []
    for n, k in enumerate(schedule.k_values, start=1):
        An, Bn = ScaledMap(problem.A, k, q), ScaledMap(problem.B, k, q)
        res = inner_solve(An, Bn, problem.S, problem.T, E, grid, tol, q, points)
        if not res.found:
            trace.records.append(StepRecord(n, k, None, res.residual))
            trace.status = NOT_FOUND
            trace.message = (f"no common fixed point of the scaled maps at k={k!r}; "
                             f"best residual {res.residual:.3e} at {res.best.tolist()}")
            return trace
        x = res.x
        ax = problem.A.eval(x)
        gap = abs(np.linalg.norm(x - ax) - (1 - k) * np.linalg.norm(q - ax))
        trace.records.append(StepRecord(n, k, x.tolist(), res.residual, float(gap)))
        xs.append(x)
        if len(xs) > CAUCHY_RUN:
            diffs = [np.linalg.norm(a - b) for a, b in zip(xs[-CAUCHY_RUN - 1:], xs[-CAUCHY_RUN:])]
            if max(diffs) < tol:
                break
    else:
        if len(xs) <= CAUCHY_RUN or max(np.linalg.norm(a - b) for a, b in
                                        zip(xs[-CAUCHY_RUN - 1:], xs[-CAUCHY_RUN:])) >= tol:
            trace.status = DIVERGED
            trace.z = xs[-1]
            trace.message = "x_n did not settle within the schedule"
            return trace

    z = xs[-1]
    trace.z = z
    v = validate_common_fixed_point(problem, z, 10 * tol, domain=E)
    trace.limit_residuals = v.detail["residuals"]
    trace.status = HOLDS if v.ok else VIOLATED
    if not v.ok:
        trace.message = "limit of x_n is not a common fixed point"
    return trace


def validate_common_fixed_point(problem: Problem, z, tol: float | None = None,
                                domain: DomainSet | None = None) -> Verdict:
    """Residuals ||Mz - z|| for M in A, B, S, T; holds iff all are <= tol."""
    E = domain or problem.domain
    tol = tol if tol is not None else problem.tolerances.inner(problem.dimension)
    z = as_point(z, problem.dimension)
    if not E.contains(z):
        raise ValueError(f"z={z.tolist()} is not in the domain")
    res = {name: float(np.linalg.norm(M.eval(z) - z)) for name, M in problem.maps.items()}
    worst = max(res, key=lambda k: res[k])
    if res[worst] <= tol:
        return Verdict.holds(samples=1, residuals=res, z=z.tolist())
    return Verdict.violated({"z": z.tolist(), "map": worst, "residual": res[worst]},
                            samples=1, residuals=res, z=z.tolist())


def identity_problem(domain: DomainSet, q) -> Problem:
    ident = PiecewiseMap.identity(domain)
    return Problem(domain, q, ident, ident, ident, ident)
