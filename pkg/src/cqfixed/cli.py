"""Command-line entry point.

    cqfixed <command> PROBLEM.json [flags]
    cqfixed example <name> <command> [flags]

Exit codes: 0 every hypothesis/conclusion holds, 1 a violation was found,
2 a solve failed (not_found / divergence), 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import approx, commute, fixedpoint, geometry, gregus, maps
from .geometry import SampleSpec
from .problem import Problem, Schedule, Tolerances
from .problemfile import EXAMPLES, ProblemError, ProblemFile, load_example, parse_problem
from .verdict import HOLDS, SEVERITY, Verdict, jsonable

COMMANDS = ("check-geometry", "check-affinity", "check-commute", "verify-gregus",
            "solve-fixedpoint", "invariant-approx", "all")
HYPOTHESIS, DIAGNOSTIC, CONCLUSION = "hypothesis", "diagnostic", "conclusion"
EXIT_INPUT = 3


@dataclass
class Report:
    command: str
    problem: str
    digest: str
    seed: int
    settings: dict
    checks: dict[str, dict] = field(default_factory=dict)
    artifacts: dict[str, object] = field(default_factory=dict)
    wall_time: float = 0.0

    def add(self, name: str, role: str, verdict: Verdict | dict) -> None:
        body = verdict.to_dict() if isinstance(verdict, Verdict) else dict(verdict)
        body["role"] = role
        self.checks[name] = body

    @property
    def exit_code(self) -> int:
        codes = [SEVERITY.get(c["status"], 1) for c in self.checks.values() if c["role"] != DIAGNOSTIC]
        return max(codes, default=0)

    @property
    def outcome(self) -> str:
        return {0: "holds", 1: "violation", 2: "not_found"}[self.exit_code]

    def to_json(self, timing: bool = False) -> str:
        doc = {
            "schema": 1,
            "command": self.command,
            "problem": self.problem,
            "input_digest": self.digest,
            "seed": self.seed,
            "settings": self.settings,
            "outcome": self.outcome,
            "exit_code": self.exit_code,
            "checks": self.checks,
            "artifacts": self.artifacts,
        }
        if timing:
            doc["wall_time_s"] = self.wall_time
        return json.dumps(jsonable(doc), indent=2, sort_keys=False) + "\n"

    def to_text(self) -> str:
        lines = [f"{self.command} on {self.problem} ({self.digest})",
                 f"seed {self.seed}  settings {json.dumps(jsonable(self.settings), sort_keys=True)}"]
        width = max((len(n) for n in self.checks), default=10)
        for name, c in self.checks.items():
            tag = " (heuristic)" if c.get("heuristic") else ""
            line = f"  {name:<{width}}  {c['status']:<17} [{c['role']}]{tag}"
            if "witness" in c:
                line += f"  witness={json.dumps(jsonable(c['witness']), sort_keys=True)}"
            lines.append(line)
        for name, art in self.artifacts.items():
            if isinstance(art, dict) and "summary" in art:
                lines.append(f"  {name}: {art['summary']}")
        lines.append(f"outcome: {self.outcome} (exit {self.exit_code})  wall time {self.wall_time:.3f}s")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands


def _fmt_set(s: commute.CoincidenceSet) -> str:
    parts = [f"{'[' if lc else '('}{lo:.6g}, {hi:.6g}{']' if hc else ')'}" for lo, hi, lc, hc in s.intervals]
    parts += ["{" + ", ".join(f"{v:.6g}" for v in np.atleast_1d(p)) + "}" for p in s.points]
    if len(parts) > 8:
        parts = parts[:6] + [f"... ({len(parts) - 6} more components)"]
    return " U ".join(parts) if parts else "empty"


def cmd_geometry(pf: ProblemFile, rep: Report, opts) -> None:
    P = pf.problem
    E, sampler = P.domain, P.sampling
    rep.add("q_starshaped", HYPOTHESIS, geometry.is_q_starshaped(E, P.q, sampler))
    rep.add("convex", DIAGNOSTIC, geometry.is_convex(E, sampler))
    rep.add("q_boundary_distance", DIAGNOSTIC,
            Verdict.holds(samples=1, value=E.boundary_distance(P.q)))
    for i, p in enumerate(pf.probes):
        rep.add(f"probe_{i}_membership", DIAGNOSTIC,
                Verdict.holds(samples=1, point=p.tolist(), contains=E.contains(p),
                              boundary_distance=E.boundary_distance(p)))


def cmd_affinity(pf: ProblemFile, rep: Report, opts) -> None:
    P = pf.problem
    names = opts.map or ["S", "T"]
    kinds = opts.kind or ["q_affine"]
    for name in names:
        for kind in kinds:
            rep.add(f"{name}_{kind}", HYPOTHESIS,
                    maps.check_affinity(P.maps[name], P.q, kind, P.sampling, P.tolerances.affinity))
    if not opts.map and not opts.kind:
        rep.add("A_image_in_T_image", HYPOTHESIS, maps.image_check(P.A, P.domain, P.T, P.sampling))
        rep.add("B_image_in_S_image", HYPOTHESIS, maps.image_check(P.B, P.domain, P.S, P.sampling))


def cmd_commute(pf: ProblemFile, rep: Report, opts) -> None:
    P = pf.problem
    tol = P.tolerances.coincidence
    rc_ok = {}
    for a, b in pf.pairs:
        A, T = P.maps[a], P.maps[b]
        r = commute.cq_set(A, T, P.q, grid=P.sampling, tol=tol)
        rep.add(f"cq_commuting_{a}{b}", HYPOTHESIS, r.commuting_verdict)
        rep.artifacts[f"cq_set_{a}{b}"] = {"summary": f"C_q({a},{b}) = {_fmt_set(r.cq_union)}",
                                           "cq_union": r.cq_union.to_dict(), "k_count": len(r.k_samples)}
        rep.add(f"weakly_compatible_{a}{b}", DIAGNOSTIC, commute.check_weak_compatibility(A, T, P.sampling, tol))
        rc = commute.check_reciprocal_continuity(A, T, P.sampling)
        rc_ok[(a, b)] = rc.ok
        rep.add(f"reciprocally_continuous_{a}{b}", DIAGNOSTIC, rc)
    for i, x in enumerate(pf.probes):
        for a, b in pf.pairs:
            try:
                at, ta = commute.commutator(P.maps[a], P.maps[b], x)
            except maps.MapDomainError as exc:
                rep.add(f"probe_{i}_{a}{b}", DIAGNOSTIC, Verdict.violated({"x": x.tolist(), "reason": str(exc)}))
                continue
            gap = float(np.linalg.norm(at - ta))
            v = Verdict.holds(samples=1) if gap <= tol else Verdict.violated({"x": x.tolist()}, samples=1)
            v.detail.update({f"{a}{b}x": at.tolist(), f"{b}{a}x": ta.tolist(), "gap": gap})
            rep.add(f"probe_{i}_{a}{b}", DIAGNOSTIC, v)
    if tuple(pf.pairs) == (("A", "S"), ("B", "T")):
        # either (A,S),(B,T) or (A,T),(B,S) must be reciprocally continuous
        for a, b in (("A", "T"), ("B", "S")):
            rc = commute.check_reciprocal_continuity(P.maps[a], P.maps[b], P.sampling)
            rc_ok[(a, b)] = rc.ok
            rep.add(f"reciprocally_continuous_{a}{b}", DIAGNOSTIC, rc)
        either = (rc_ok[("A", "S")] and rc_ok[("B", "T")]) or (rc_ok[("A", "T")] and rc_ok[("B", "S")])
        v = Verdict("no_counterexample" if either else "violated", None if either else
                    {"reason": "both pairings have a counterexample sequence"}, 4)
        v.heuristic = True
        rep.add("reciprocal_continuity", HYPOTHESIS, v)


def _ineq_verdict(r: gregus.InequalityReport) -> Verdict:
    w = None if r.verdict == HOLDS else {"x": r.worst_pair[0], "y": r.worst_pair[1],
                                         "lhs": r.worst_sides[0], "rhs": r.worst_sides[1]}
    return Verdict(r.verdict, w, r.pairs_tested, {"worst_margin": r.worst_margin, "form": r.form})


def cmd_gregus(pf: ProblemFile, rep: Report, opts) -> None:
    P = pf.problem
    forms = opts.form or ["quadratic_2_1_1"]
    for form in forms:
        if form == "restricted_3_2_1":
            u = _u(pf, opts)
            B = approx.best_approximants(P.domain, u, P.sampling)
            r = gregus.sweep_verify(P, P.constants, form, P.sampling, P.tolerances.inequality,
                                    approximants=np.vstack(B.points), u=u)
        else:
            r = gregus.sweep_verify(P, P.constants, form, P.sampling, P.tolerances.inequality)
        rep.add(f"inequality_{form}", HYPOTHESIS, _ineq_verdict(r))
    rng = np.random.default_rng(P.sampling.seed)
    E = P.domain
    X = gregus._uniform_in(E, 2000, rng)
    Y = gregus._uniform_in(E, 2000, rng)
    worst = 0.0
    bound = -np.inf
    for k in P.schedule.k_values:
        worst = max(worst, float(gregus.scaled_lhs_gap(P, k, X, Y).max()))
        bound = max(bound, float(gregus.segment_bound_gap(P, k, X).max()))
    rep.add("scaling_identity", DIAGNOSTIC,
            Verdict.holds(samples=len(X) * len(P.schedule.k_values), max_relative_gap=worst)
            if worst <= 1e-12 else Verdict.violated({"max_relative_gap": worst}))
    rep.add("segment_distance_bound", DIAGNOSTIC,
            Verdict.holds(samples=len(X), max_excess=bound) if bound <= 1e-12 else
            Verdict.violated({"max_excess": bound}))
    rep.add("scaled_constants_strict", DIAGNOSTIC,
            Verdict.holds(samples=len(P.schedule.k_values),
                          first=list(P.constants.scaled(P.schedule.k_values[0]).as_tuple()),
                          last=list(P.constants.scaled(P.schedule.k_values[-1]).as_tuple())))


def _preconditions(pf: ProblemFile) -> dict[str, Verdict]:
    """Structural hypotheses the scaled solve relies on: the segment [q, Ax] stays in E
    and S, T fix q. The sampled inequality and C_q checks have their own commands."""
    P = pf.problem
    out = {"q_starshaped": geometry.is_q_starshaped(P.domain, P.q, P.sampling)}
    for name in ("S", "T"):
        out[f"{name}_q_affine"] = maps.check_affinity(P.maps[name], P.q, "q_affine", P.sampling,
                                                      P.tolerances.affinity)
    return out


def cmd_solve(pf: ProblemFile, rep: Report, opts, gate: bool = True) -> None:
    P = pf.problem
    if gate and not opts.force:
        pre = _preconditions(pf)
        for n, v in pre.items():
            rep.add(f"precondition_{n}", HYPOTHESIS, v)
        failed = [n for n, v in pre.items() if not v.ok]
        if failed:
            rep.artifacts["fixedpoint"] = {"summary": f"not attempted: failed preconditions {failed} (use --force)"}
            return
    trace = fixedpoint.solve_schedule(P)
    z = None if trace.z is None else [float(v) for v in trace.z]
    v = Verdict(trace.status, None if trace.status == HOLDS else {"message": trace.message, "z": z},
                len(trace.records), {"z": z, "limit_residuals": trace.limit_residuals})
    rep.add("common_fixed_point", CONCLUSION, v)
    rep.artifacts["fixedpoint"] = dict(trace.to_dict(), summary=f"z = {z} ({trace.status}, "
                                                                 f"{len(trace.records)} inner solves)")


def _u(pf: ProblemFile, opts) -> np.ndarray:
    P = pf.problem
    if opts.u is not None:
        return geometry.as_point([geometry.parse_number(v) for v in opts.u], P.dimension)
    if P.u is None:
        raise ProblemError("no reference point u (set 'u' in the problem or pass --u)", "u")
    return P.u


def cmd_approx(pf: ProblemFile, rep: Report, opts) -> None:
    P = pf.problem
    res = approx.invariant_approximation(P, _u(pf, opts), force=opts.force)
    for name, v in res.checks.items():
        rep.add(f"approx_{name}", CONCLUSION if name.startswith("z_") else HYPOTHESIS, v)
    if res.status == "precondition_failure" and not any(
            c["status"] != HOLDS for n, c in rep.checks.items() if n.startswith("approx_")):
        rep.add("approx_pipeline", HYPOTHESIS, Verdict.violated({"reason": res.status}))
    rep.artifacts["invariant_approximation"] = dict(res.to_dict(), summary=(
        f"P_E(u) = {[p.tolist() for p in res.approximants.points]}, status {res.status}"))


def cmd_all(pf: ProblemFile, rep: Report, opts) -> None:
    cmd_geometry(pf, rep, opts)
    cmd_affinity(pf, rep, opts)
    cmd_commute(pf, rep, opts)
    cmd_gregus(pf, rep, opts)
    # every hypothesis is reported above, so the solve runs ungated
    cmd_solve(pf, rep, opts, gate=False)
    if pf.problem.u is not None or opts.u is not None:
        cmd_approx(pf, rep, opts)


DISPATCH = {
    "check-geometry": cmd_geometry,
    "check-affinity": cmd_affinity,
    "check-commute": cmd_commute,
    "verify-gregus": cmd_gregus,
    "solve-fixedpoint": cmd_solve,
    "invariant-approx": cmd_approx,
    "all": cmd_all,
}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cqfixed", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("words", nargs="+", help="COMMAND PROBLEM | example NAME COMMAND")
    p.add_argument("--grid", type=float, help="sampling pitch (default 1e-3 in 1D, 2e-2 in 2D)")
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.add_argument("--pairs", type=int, help="random pairs for the inequality sweep")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="random seed (default 0x9E3779B9)")
    p.add_argument("--schedule", help="harmonic | geometric:<r>")
    p.add_argument("--force", action="store_true", help="skip precondition gating")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--timing", action="store_true", help="include wall time in the JSON report")
    p.add_argument("--kind", action="append", choices=maps.KINDS, help="affinity kind (repeatable)")
    p.add_argument("--map", action="append", choices=("A", "B", "S", "T"), help="map to check (repeatable)")
    p.add_argument("--form", action="append", choices=gregus.FORMS, help="inequality form (repeatable)")
    p.add_argument("--u", nargs="+", help="reference point for invariant-approx")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    return p


def _apply_flags(pf: ProblemFile, opts) -> ProblemFile:
    P: Problem = pf.problem
    s = P.sampling
    sampling = SampleSpec(pitch=opts.grid if opts.grid is not None else s.pitch,
                          segment_samples=s.segment_samples,
                          pairs=opts.pairs if opts.pairs is not None else s.pairs,
                          seed=opts.seed if opts.seed is not None else s.seed)
    schedule = Schedule.parse(opts.schedule, len(P.schedule.k_values)) if opts.schedule else P.schedule
    tolerances = P.tolerances
    if opts.tol is not None:
        t = opts.tol
        tolerances = Tolerances(t, t, t, t, t, t)
    return replace(pf, problem=P.with_(sampling=sampling, schedule=schedule, tolerances=tolerances))


def _resolve(words: list[str]) -> tuple[str, str, bool]:
    if words[0] == "example":
        if len(words) != 3:
            raise ProblemError(f"usage: example NAME COMMAND (NAME in {', '.join(EXAMPLES)})", "arguments")
        return words[2], words[1], True
    if len(words) != 2:
        raise ProblemError("usage: COMMAND PROBLEM.json", "arguments")
    return words[0], words[1], False


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    opts = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        command, target, is_example = _resolve(opts.words)
        if command not in DISPATCH:
            raise ProblemError(f"unknown subcommand {command!r}; choose from {', '.join(COMMANDS)}", "arguments")
        pf = load_example(target) if is_example else parse_problem(target)
        pf = _apply_flags(pf, opts)
        P = pf.problem
        rep = Report(command, P.name, pf.digest, P.sampling.seed, {
            "grid": P.sampling.pitch_for(P.dimension), "pairs": P.sampling.pairs,
            "schedule": P.schedule.rule, "schedule_length": len(P.schedule.k_values),
            "constants": list(P.constants.as_tuple()), "force": bool(opts.force),
            "tolerances": vars(P.tolerances).copy() if hasattr(P.tolerances, "__dict__") else {},
        })
        DISPATCH[command](pf, rep, opts)
    except (ProblemError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rep.wall_time = time.perf_counter() - t0
    text = rep.to_json(opts.timing) if opts.report == "json" else rep.to_text()
    if opts.output:
        with open(opts.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return rep.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
