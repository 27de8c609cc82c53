"""Best approximants P_E(u) and the invariant-approximation pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .commute import _commute_on
from .fixedpoint import FixedPointTrace, solve_schedule, validate_common_fixed_point
from .geometry import DomainSet, SampleSpec, as_point
from .gregus import sweep_verify
from .problem import GregusConstants, Problem, Schedule
from .verdict import HOLDS, VACUOUS, VIOLATED, Verdict

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-7


@dataclass
class BestApproximantSet:
    u: np.ndarray
    dist: float
    points: list[np.ndarray]
    containment_margin: float
    grid_dist: float

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "dist": float(self.dist),
                "points": [p.tolist() for p in self.points],
                "containment_margin": float(self.containment_margin),
                "grid_dist": float(self.grid_dist)}


def best_approximants(E: DomainSet, u, grid: SampleSpec | None = None,
                      tol: float = CLUSTER_TOL) -> BestApproximantSet:
    """Grid scan of ||u - z||, clustering near the minimum, then closed-form projection.

    Each cluster is refined by projecting u onto the primitive that holds it; every
    primitive's projection is also offered so a cluster the grid missed cannot drop out.
    """
    grid = grid or SampleSpec()
    u = as_point(u, E.dimension)
    if E.contains(u, tol=0.0):
        return BestApproximantSet(u, 0.0, [u.copy()], abs(min(E.boundary_distance(u), 0.0)), 0.0)

    h = grid.pitch_for(E.dimension)
    Z = E.sample(h)
    D = np.linalg.norm(Z - u, axis=1)
    grid_dist = float(D.min())
    near = Z[D <= grid_dist + 2 * h]

    cands = []
    for prim in E.primitives:
        held = near[prim.contains_many(near)] if len(near) else near
        p = prim.project(u)
        if len(held) or E.contains(p):
            cands.append(p)
    cands = [p for p in cands if E.contains(p)]
    if not cands:
        # open endpoints: the infimum is not attained
        return BestApproximantSet(u, grid_dist, [], 0.0, grid_dist)
    dists = np.array([np.linalg.norm(u - p) for p in cands])
    dist = float(dists.min())
    pts: list[np.ndarray] = []
    for p, dp in sorted(zip(cands, dists), key=lambda t: tuple(t[0])):
        if dp <= dist + tol and all(np.linalg.norm(p - o) > tol for o in pts):
            pts.append(p)
    margin = max(abs(E.boundary_distance(p)) for p in pts)
    return BestApproximantSet(u, dist, pts, margin, grid_dist)


def check_boundary_containment(result: BestApproximantSet, E: DomainSet, tol: float = 1e-9) -> Verdict:
    """Every best approximant of an outside point lies on the boundary of E."""
    if E.contains(result.u, tol=0.0):
        return Verdict(VACUOUS, None, 0, {"reason": "u lies in E"})
    worst, where = 0.0, None
    for p in result.points:
        b = abs(E.boundary_distance(p))
        if b >= worst:
            worst, where = b, p
    if worst > tol:
        return Verdict.violated({"y": where.tolist(), "boundary_distance": worst}, samples=len(result.points))
    return Verdict.holds(samples=len(result.points), max_boundary_distance=worst)


# the operation name used throughout the reports
check_lemma_3_1 = check_boundary_containment


@dataclass
class PipelineResult:
    status: str
    approximants: BestApproximantSet | None
    checks: dict[str, Verdict] = field(default_factory=dict)
    trace: FixedPointTrace | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "approximants": None if self.approximants is None else self.approximants.to_dict(),
            "checks": {k: v.to_dict() for k, v in self.checks.items()},
            "trace": None if self.trace is None else self.trace.to_dict(),
            "warnings": list(self.warnings),
        }


def _fixed_at(problem: Problem, u: np.ndarray, tol: float, warnings: list[str]) -> Verdict:
    inside = problem.domain.contains(u)
    if not inside:
        warnings.append("u lies outside E; maps are continued polynomially from the nearest piece to test u in F(M)")
    res = {}
    for name, M in problem.maps.items():
        val = M.eval(u) if inside else M.extend(u)
        res[name] = float(np.linalg.norm(val - u))
    worst = max(res, key=lambda k: res[k])
    detail = {"residuals": res, "extended": not inside}
    if res[worst] > tol:
        return Verdict.violated({"u": u.tolist(), "map": worst, "residual": res[worst]}, samples=4, **detail)
    return Verdict.holds(samples=4, **detail)


def _boundary_into(problem: Problem, name: str, sampler: SampleSpec) -> Verdict:
    E = problem.domain
    M = problem.maps[name]
    Bd = E.boundary_samples(sampler.pitch_for(E.dimension))
    Y = M.eval_many(Bd)
    out = ~E.contains_many(Y)
    if np.any(out):
        i = int(np.argmax(out))
        return Verdict.violated({"x": Bd[i].tolist(), "image": Y[i].tolist()}, samples=len(Bd))
    return Verdict.holds(samples=len(Bd))


def _in_set(y: np.ndarray, pts: list[np.ndarray], tol: float) -> bool:
    return any(np.linalg.norm(y - p) <= tol for p in pts)


def _invariance(problem: Problem, pts: list[np.ndarray], tol: float) -> Verdict:
    """S(P) = P = T(P) on a finite approximant set."""
    for name in ("S", "T"):
        M = problem.maps[name]
        imgs = [M.eval(p) for p in pts]
        for p, y in zip(pts, imgs):
            if not _in_set(y, pts, tol):
                return Verdict.violated({"map": name, "y": p.tolist(), "image": y.tolist(),
                                         "reason": "image leaves P_E(u)"}, samples=len(pts))
        for p in pts:
            if not _in_set(p, imgs, tol):
                return Verdict.violated({"map": name, "y": p.tolist(),
                                         "reason": "point of P_E(u) has no preimage"}, samples=len(pts))
    return Verdict.holds(samples=len(pts))


def _cq_on_points(A, T, q, pts: list[np.ndarray], tol: float) -> Verdict:
    """C_q-commuting restricted to a finite set: x is a member iff Ax lies on [q, Tx]."""
    from .geometry import point_segment_distance_many

    X = np.vstack(pts)
    AX, TX = A.eval_many(X), T.eval_many(X)
    on = point_segment_distance_many(AX, np.broadcast_to(q, AX.shape), TX) <= tol
    v = _commute_on(A, T, X[on], tol)
    v.detail["members"] = X[on].tolist()
    return v


def invariant_approximation(problem: Problem, u=None, c: GregusConstants | None = None,
                            schedule: Schedule | None = None, tol: float | None = None,
                            force: bool = False, sampler: SampleSpec | None = None) -> PipelineResult:
    """Locate a common fixed point inside P_E(u), checking every hypothesis on the way.

    Hypotheses are reported one by one; the first hard failure stops the pipeline
    unless ``force`` is set.
    """
    E = problem.domain
    u = as_point(u if u is not None else problem.u, E.dimension)
    c = c or problem.constants
    sampler = sampler or problem.sampling
    tol = tol if tol is not None else problem.tolerances.inner(E.dimension)
    warnings: list[str] = []
    checks: dict[str, Verdict] = {}

    P = best_approximants(E, u, sampler)
    result = PipelineResult(HOLDS, P, checks, None, warnings)

    def fail(name: str) -> bool:
        if checks[name].ok:
            return False
        if force:
            warnings.append(f"precondition {name} failed; continuing because force is set")
            return False
        result.status = "precondition_failure"
        return True

    if not P.points:
        checks["approximants_exist"] = Verdict.violated({"u": u.tolist(), "reason": "infimum not attained"})
        if fail("approximants_exist"):
            return result
    pts = P.points

    checks["boundary_containment"] = check_boundary_containment(P, E, 1e-6)
    if fail("boundary_containment"):
        return result

    checks["u_common_fixed_point"] = _fixed_at(problem, u, tol, warnings)
    if fail("u_common_fixed_point"):
        return result

    for name in ("A", "B", "S", "T"):
        key = f"{name}_boundary_into_E"
        checks[key] = _boundary_into(problem, name, sampler)
        if fail(key):
            return result

    q = problem.q
    if len(pts) == 1:
        if np.linalg.norm(q - pts[0]) > tol:
            warnings.append(f"P_E(u) is the single point {pts[0].tolist()}; star-center moved there from {q.tolist()}")
        q = pts[0]
        checks["approximants_starshaped"] = Verdict.holds(samples=1, note="single point")
    else:
        # a finite set with two or more points is never starshaped
        checks["approximants_starshaped"] = Verdict.violated(
            {"points": [p.tolist() for p in pts], "reason": "finite set with more than one point"},
            samples=len(pts))
        if fail("approximants_starshaped"):
            return result
    local = problem.with_(q=q)

    for name in ("S", "T"):
        key = f"{name}q_equals_q"
        r = float(np.linalg.norm(problem.maps[name].eval(q) - q))
        checks[key] = Verdict.holds(samples=1, residual=r) if r <= tol else \
            Verdict.violated({"q": q.tolist(), "residual": r}, samples=1)
        if fail(key):
            return result

    checks["approximant_invariance"] = _invariance(local, pts, 1e-9 + tol)
    if fail("approximant_invariance"):
        return result

    rep = sweep_verify(local, c, "restricted_3_2_1", sampler, problem.tolerances.inequality,
                       approximants=np.vstack(pts), u=u)
    checks["restricted_inequality"] = Verdict(rep.verdict, None if rep.verdict == HOLDS else
                                              {"x": rep.worst_pair[0], "y": rep.worst_pair[1]},
                                              rep.pairs_tested, rep.to_dict())
    if fail("restricted_inequality"):
        return result

    for a, b in (("A", "S"), ("B", "T")):
        key = f"cq_commuting_{a}{b}"
        checks[key] = _cq_on_points(local.maps[a], local.maps[b], q, pts, problem.tolerances.coincidence)
        if fail(key):
            return result

    trace = solve_schedule(local, schedule, tol, sampler, points=np.vstack(pts))
    result.trace = trace
    if trace.z is None or trace.status != HOLDS:
        result.status = trace.status
        return result
    z = trace.z
    in_p = _in_set(z, pts, 10 * tol)
    v = validate_common_fixed_point(problem, z, tol)
    v.detail["in_approximants"] = in_p
    v.detail["distance_to_u"] = float(np.linalg.norm(z - u))
    checks["z_in_approximants"] = v if in_p else Verdict.violated({"z": z.tolist()}, samples=1)
    checks["z_common_fixed_point"] = v
    result.status = HOLDS if (in_p and v.ok) else VIOLATED
    return result
