"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest terminal
summary and when this file is run directly.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from cqfixed.approx import best_approximants
from cqfixed.commute import commutator, cq_set
from cqfixed.fixedpoint import solve_schedule
from cqfixed.geometry import (
    ConvexPolygon,
    Disk,
    DomainSet,
    Interval,
    Segment,
    is_convex,
    is_q_starshaped,
    point_segment_distance,
    two_disks,
)
from cqfixed.gregus import sweep_verify
from cqfixed.maps import PiecewiseMap, check_affinity, scaling_identity_gap
from cqfixed.problem import GregusConstants, Problem
from cqfixed.problemfile import load_example

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def test_criterion_1_cq_set_reproduction():
    t0 = time.perf_counter()
    P = load_example("cq_def").problem
    r = cq_set(P.A, P.T, P.q)
    elapsed = time.perf_counter() - t0
    U = r.cq_union.sample(1e-4)[:, 0]
    target = np.concatenate([np.linspace(0.0, 0.5, 5001), [1.0]])
    haus = max(np.abs(target[:, None] - U[None, :]).min(axis=1).max(),
               np.abs(U[:, None] - target[None, :]).min(axis=1).max())
    at, ta = commutator(P.A, P.T, 0.6)
    ok = (haus <= 2 * 1e-3 and r.commuting_verdict.status == "holds"
          and at[0] == 0.0 and ta[0] == 1.0 and elapsed < 5.0)
    record(1, ok, f"hausdorff={haus:.3g} commuting={r.commuting_verdict.status} "
                  f"AT(0.6)={at[0]} TA(0.6)={ta[0]} time={elapsed:.2f}s")


def test_criterion_2_example_end_to_end():
    t0 = time.perf_counter()
    P = load_example("ex2_6").problem
    rep = sweep_verify(P, GregusConstants(1, 0, 0))
    trace = solve_schedule(P)
    elapsed = time.perf_counter() - t0
    z = trace.z[0] if trace.z is not None else float("nan")
    res = max(trace.limit_residuals.values()) if trace.limit_residuals else float("inf")
    sweep_ok = rep.verdict == "holds" and rep.pairs_tested >= 110_000 and rep.worst_margin >= -1e-9
    solve_ok = abs(z - 2 / 3) <= 1e-6 and res <= 1e-9
    record(2, sweep_ok and solve_ok and elapsed < 30.0,
           f"sweep={rep.verdict} pairs={rep.pairs_tested} worst_margin={rep.worst_margin:.6g} "
           f"at {rep.worst_pair}; z={z:.12g} max_residual={res:.3g} time={elapsed:.2f}s")


def test_criterion_3_geometry_regressions():
    E = two_disks()
    star = is_q_starshaped(E, [1, 0])
    conv = is_convex(E)
    ok = star.status == "holds" and conv.status == "violated"
    detail = f"starshaped={star.status} convex={conv.status}"
    if conv.status == "violated":
        a, b = np.array(conv.witness["a"]), np.array(conv.witness["b"])
        t = np.linspace(0, 1, 100_001)[:, None]
        seg = t * b + (1 - t) * a
        circ = np.minimum(np.abs(np.linalg.norm(seg, axis=1) - 1),
                          np.abs(np.linalg.norm(seg - [2, 0], axis=1) - 1))
        depth = float(circ.max())
        ok = ok and depth > 0.41 - 1e-6
        detail += f" witness a={a.tolist()} b={b.tolist()} max circle distance={depth:.9f}"
    record(3, ok, detail)


def test_criterion_4_affinity_regressions():
    P = load_example("ex1_9").problem
    wrt = check_affinity(P.T, P.q, "affine_wrt_point", P.sampling)
    qa = check_affinity(P.T, P.q, "q_affine", P.sampling)
    tq = float(np.linalg.norm(P.T.eval(P.q) - P.q))
    ok = (wrt.status == "holds" and wrt.samples >= 10_000
          and qa.status == "violated" and qa.witness["residual"] == 0.5 and tq == 0.5)
    record(4, ok, f"affine_wrt_point={wrt.status} samples={wrt.samples} witness={wrt.witness}; "
                  f"q_affine={qa.status} |Tq-q|={tq}")


def test_criterion_5_original_gregus_sanity():
    E = DomainSet((Interval(-1.0, 1.0),))
    T = PiecewiseMap.from_1d(E, [((-1, 1, True, True), [0, 0.5])], "T")
    P = Problem(E, 0.0, T, T, PiecewiseMap.identity(E, "S"), T)
    trace = solve_schedule(P)
    z = trace.z[0] if trace.z is not None else float("nan")
    ok = trace.status == "holds" and abs(z) <= 1e-9 and len(trace.records) <= 12
    record(5, ok, f"status={trace.status} z={z:.3g} inner solves={len(trace.records)}")


def _random_domain(g: np.random.Generator) -> DomainSet:
    kind = g.integers(4)
    if kind == 0:
        lo = g.uniform(-3, 3)
        return DomainSet((Interval(lo, lo + g.uniform(0.1, 2)),))
    if kind == 1:
        lo = g.uniform(-3, 3)
        w1, gap, w2 = g.uniform(0.1, 2), g.uniform(0.05, 1), g.uniform(0.1, 2)
        return DomainSet((Interval(lo, lo + w1), Interval(lo + w1 + gap, lo + w1 + gap + w2)))
    if kind == 2:
        c = g.uniform(-1, 1, 2)
        d = g.uniform(0.5, 2.5) * np.array([np.cos(th := g.uniform(0, 2 * np.pi)), np.sin(th)])
        return DomainSet((Disk(tuple(c), g.uniform(0.3, 1.2)), Disk(tuple(c + d), g.uniform(0.3, 1.2))))
    c = g.uniform(-1, 1, 2)
    ang = np.sort(g.uniform(0, 2 * np.pi, 5))
    poly = ConvexPolygon(tuple(map(tuple, c + 0.8 * np.c_[np.cos(ang), np.sin(ang)])))
    return DomainSet((poly, Disk(tuple(c + g.uniform(-1.5, 1.5, 2)), g.uniform(0.3, 1.0))))


def test_criterion_6_boundary_property_suite():
    g = np.random.default_rng(20240601)
    worst, n = 0.0, 0
    while n < 100:
        E = _random_domain(g)
        lo, hi = E.bbox()
        u = g.uniform(lo - 2, hi + 2)
        if E.contains(u):
            continue
        r = best_approximants(E, u)
        worst = max([worst] + [abs(E.boundary_distance(p)) for p in r.points])
        n += 1
    r = best_approximants(two_disks(), [1, 2])
    dist_err = abs(r.dist - (math.sqrt(5) - 1))
    ok = worst <= 1e-6 and dist_err <= 1e-9 and len(r.points) == 2
    record(6, ok, f"instances={n} max |boundary_distance|={worst:.3g}; "
                  f"two disks dist error={dist_err:.3g} minimizers={len(r.points)}")


def test_criterion_7_oracle_equivalence():
    g = np.random.default_rng(7)
    t = np.linspace(0.0, 1.0, 10_000)[:, None]
    worst = 0.0
    for _ in range(1000):
        p, a, b = g.uniform(-1, 1, (3, 2))
        brute = float(np.min(np.linalg.norm(t * b + (1 - t) * a - p, axis=1)))
        worst = max(worst, abs(point_segment_distance(p, Segment(a, b)) - brute))
    record(7, worst <= 1e-6, f"instances=1000 max |exact - brute|={worst:.3g}")


def test_criterion_8_scaling_identity():
    P = load_example("ex2_6").problem
    g = np.random.default_rng(8)
    X, Y = g.uniform(0, 1, (10_000, 1)), g.uniform(0, 1, (10_000, 1))
    K = g.uniform(0, 1, 10_000)
    gaps = [scaling_identity_gap(P.A, P.B, P.q, k, X[i:i + 1], Y[i:i + 1])[0] for i, k in enumerate(K)]
    worst = float(max(gaps))
    record(8, worst <= 1e-12, f"triples=10000 max relative gap={worst:.3g}")


def test_criterion_9_determinism():
    cmd = [sys.executable, "-m", "cqfixed", "example", "ex2_6", "all", "--seed", "7", "--report", "json"]
    a = subprocess.run(cmd, capture_output=True, check=False)
    b = subprocess.run(cmd, capture_output=True, check=False)
    ok = a.stdout == b.stdout and len(a.stdout) > 0 and a.returncode == b.returncode
    record(9, ok, f"bytes={len(a.stdout)} identical={a.stdout == b.stdout} exit={a.returncode}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
