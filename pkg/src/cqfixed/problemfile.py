"""JSON problem files: parsing, validation and the bundled example registry."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import ConvexPolygon, Disk, DomainSet, Interval, SampleSpec, parse_number
from .maps import GuardError, MapDomainError, Piece, PiecewiseMap, Polynomial, SelfMapError
from .problem import GregusConstants, Problem, Schedule, Tolerances

SCHEMA_VERSION = 1
EXAMPLES = ("two_disks", "ex1_9", "cq_def", "ex2_6")
MAP_NAMES = ("A", "B", "S", "T")
DEFAULT_PAIRS = (("A", "S"), ("B", "T"))


class ProblemError(ValueError):
    """Input error with a location (line/column for syntax, a field path otherwise)."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass
class ProblemFile:
    problem: Problem
    digest: str
    source: str
    pairs: tuple[tuple[str, str], ...] = DEFAULT_PAIRS
    probes: list[np.ndarray] = field(default_factory=list)
    raw: dict = field(default_factory=dict)


def _num(value, where: str) -> float:
    try:
        return parse_number(value)
    except ValueError as exc:
        raise ProblemError(str(exc), where) from None


def _point(value, dim: int, where: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        value = [value]
    if len(value) != dim:
        raise ProblemError(f"expected {dim} coordinate(s), got {len(value)}", where)
    return np.array([_num(v, f"{where}[{i}]") for i, v in enumerate(value)])


def _primitive(spec, dim: int, where: str):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ProblemError("primitive must be an object with a 'type'", where)
    kind = spec["type"]
    try:
        if kind == "interval":
            if dim != 1:
                raise ProblemError("intervals need dimension 1", where)
            return Interval(_num(spec["lo"], f"{where}.lo"), _num(spec["hi"], f"{where}.hi"),
                            bool(spec.get("lo_closed", True)), bool(spec.get("hi_closed", True)))
        if kind == "point":
            p = _point(spec["at"], dim, f"{where}.at")
            return Interval(p[0], p[0]) if dim == 1 else Disk((p[0], p[1]), 0.0)
        if kind == "disk":
            if dim != 2:
                raise ProblemError("disks need dimension 2", where)
            c = _point(spec["center"], 2, f"{where}.center")
            return Disk((c[0], c[1]), _num(spec["radius"], f"{where}.radius"))
        if kind == "polygon":
            if dim != 2:
                raise ProblemError("polygons need dimension 2", where)
            verts = tuple(tuple(_point(v, 2, f"{where}.vertices[{i}]")) for i, v in enumerate(spec["vertices"]))
            return ConvexPolygon(verts)
    except KeyError as exc:
        raise ProblemError(f"missing field {exc.args[0]!r}", where) from None
    except ProblemError:
        raise
    except ValueError as exc:
        raise ProblemError(str(exc), where) from None
    raise ProblemError(f"unknown primitive type {kind!r}", where)


def _domain(spec, dim: int, where: str) -> DomainSet:
    if isinstance(spec, dict):
        spec = [spec]
    if not isinstance(spec, list) or not spec:
        raise ProblemError("expected a nonempty list of primitives", where)
    return DomainSet(tuple(_primitive(p, dim, f"{where}[{i}]") for i, p in enumerate(spec)))


def _poly(spec, dim: int, where: str) -> Polynomial:
    try:
        if dim == 1:
            if not isinstance(spec, list):
                spec = [spec]
            return Polynomial.univariate([_num(c, f"{where}[{i}]") for i, c in enumerate(spec)])
        exps, coefs = [], []
        for i, term in enumerate(spec):
            if not isinstance(term, list) or len(term) != 3:
                raise ProblemError("2-d terms are [coefficient, i, j]", f"{where}[{i}]")
            coefs.append(_num(term[0], f"{where}[{i}][0]"))
            exps.append((int(term[1]), int(term[2])))
        if not exps:
            exps, coefs = [(0, 0)], [0.0]
        return Polynomial(tuple(exps), tuple(coefs))
    except ProblemError:
        raise
    except ValueError as exc:
        raise ProblemError(str(exc), where) from None


def _map(name: str, spec, domain: DomainSet, built: dict, raw_maps: dict, where: str,
         stack: tuple = ()) -> PiecewiseMap:
    dim = domain.dimension
    if isinstance(spec, str):
        if spec == "identity":
            return PiecewiseMap.identity(domain, name)
        if spec in stack:
            raise ProblemError(f"circular map alias {' -> '.join(stack + (spec,))}", where)
        if spec in built:
            return built[spec]
        if spec in raw_maps:
            return _map(spec, raw_maps[spec], domain, built, raw_maps, f"maps.{spec}", stack + (name,))
        raise ProblemError(f"unresolved map name {spec!r}", where)
    if not isinstance(spec, dict):
        raise ProblemError("a map is a name, 'identity', or an object", where)
    if "constant" in spec:
        return PiecewiseMap.constant(domain, _point(spec["constant"], dim, f"{where}.constant"), name)
    pieces = spec.get("pieces")
    if not isinstance(pieces, list) or not pieces:
        raise ProblemError("expected a nonempty 'pieces' list", where)
    built_pieces = []
    for i, pc in enumerate(pieces):
        w = f"{where}.pieces[{i}]"
        if not isinstance(pc, dict) or "guard" not in pc or "poly" not in pc:
            raise ProblemError("each piece needs 'guard' and 'poly'", w)
        guard = _domain(pc["guard"], dim, f"{w}.guard")
        poly = pc["poly"]
        if dim == 1:
            expr = (_poly(poly[0] if poly and isinstance(poly[0], list) else poly, 1, f"{w}.poly"),)
        else:
            if not isinstance(poly, list) or len(poly) != 2:
                raise ProblemError("2-d maps need one term list per output coordinate", f"{w}.poly")
            expr = tuple(_poly(p, 2, f"{w}.poly[{j}]") for j, p in enumerate(poly))
        built_pieces.append(Piece(guard, expr))
    try:
        return PiecewiseMap(domain, tuple(built_pieces), name)
    except GuardError as exc:
        raise ProblemError(str(exc), where) from None


def build_problem(doc: dict, source: str = "<memory>", digest: str = "") -> ProblemFile:
    if not isinstance(doc, dict):
        raise ProblemError("top level must be a JSON object", "$")
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ProblemError(f"unsupported schema {schema!r}", "schema")
    dim = doc.get("dimension")
    if dim not in (1, 2):
        raise ProblemError("dimension must be 1 or 2", "dimension")
    if "domain" not in doc:
        raise ProblemError("missing field", "domain")
    try:
        domain = _domain(doc["domain"], dim, "domain")
    except ValueError as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError(str(exc), "domain") from None
    if "q" not in doc:
        raise ProblemError("missing field", "q")
    q = _point(doc["q"], dim, "q")
    if not domain.contains(q):
        raise ProblemError(f"q={q.tolist()} is not in the domain", "q")

    raw_maps = doc.get("maps", {}) or {}
    if not isinstance(raw_maps, dict):
        raise ProblemError("maps must be an object", "maps")
    unknown = set(raw_maps) - set(MAP_NAMES)
    if unknown:
        raise ProblemError(f"unknown map names {sorted(unknown)}", "maps")
    defaults = {"A": "identity", "B": "A", "S": "identity", "T": "identity"}
    built: dict[str, PiecewiseMap] = {}
    for name in MAP_NAMES:
        spec = raw_maps.get(name, defaults[name])
        m = _map(name, spec, domain, built, raw_maps, f"maps.{name}")
        if m.name != name:
            m = PiecewiseMap(m.domain, m.pieces, name)
        built[name] = m

    c_spec = doc.get("constants", {}) or {}
    try:
        cs = c_spec.get("c", [1, 0, 0])
        if len(cs) != 3:
            raise ValueError("c must have three entries")
        constants = GregusConstants(*(_num(v, f"constants.c[{i}]") for i, v in enumerate(cs)),
                                    strict=bool(c_spec.get("strict", False)))
    except ProblemError:
        raise
    except (ValueError, TypeError, AttributeError) as exc:
        raise ProblemError(str(exc), "constants") from None

    s = doc.get("sampling", {}) or {}
    try:
        sampling = SampleSpec(pitch=None if s.get("grid") is None else _num(s["grid"], "sampling.grid"),
                              segment_samples=int(s.get("segment_samples", 64)),
                              pairs=int(s.get("pairs", 100_000)),
                              seed=int(s.get("seed", 0x9E3779B9)))
    except (ValueError, TypeError) as exc:
        raise ProblemError(str(exc), "sampling") from None

    sch = doc.get("schedule", {}) or {}
    try:
        schedule = Schedule.parse(str(sch.get("rule", "harmonic")), int(sch.get("length", 12)))
    except (ValueError, TypeError) as exc:
        raise ProblemError(str(exc), "schedule") from None

    tol = doc.get("tolerances", {}) or {}
    try:
        tolerances = Tolerances(**{k: _num(v, f"tolerances.{k}") for k, v in tol.items()})
    except TypeError as exc:
        raise ProblemError(str(exc), "tolerances") from None

    u = _point(doc["u"], dim, "u") if doc.get("u") is not None else None

    pairs = tuple(tuple(p) for p in doc.get("pairs", DEFAULT_PAIRS))
    for i, p in enumerate(pairs):
        if len(p) != 2 or not set(p) <= set(MAP_NAMES):
            raise ProblemError("pairs are two map names", f"pairs[{i}]")
    probes = [_point(p, dim, f"probes[{i}]") for i, p in enumerate(doc.get("probes", []))]

    problem = Problem(domain, q, built["A"], built["B"], built["S"], built["T"], constants, sampling,
                      schedule, tolerances, u, str(doc.get("name", Path(source).stem)))
    for name, m in built.items():
        try:
            m.validate(sampling)
        except (GuardError, MapDomainError) as exc:
            raise ProblemError(f"guard coverage: {exc}", f"maps.{name}") from None
        except SelfMapError as exc:
            raise ProblemError(str(exc), f"maps.{name}") from None
    return ProblemFile(problem, digest, source, pairs, probes, doc)


def parse_text(text: str, source: str = "<memory>") -> ProblemFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"syntax error: {exc.msg}", f"line {exc.lineno}, column {exc.colno}") from None
    digest = "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()
    return build_problem(doc, source, digest)


def parse_problem(path) -> ProblemFile:
    path = Path(path)
    if not path.exists():
        raise ProblemError("file not found", str(path))
    return parse_text(path.read_text(encoding="utf-8"), str(path))


def example_text(name: str) -> str:
    if name not in EXAMPLES:
        raise ProblemError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}", "example")
    return resources.files("cqfixed.problems").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_example(name: str) -> ProblemFile:
    return parse_text(example_text(name), f"example:{name}")
