import json

import pytest

from cqfixed.problemfile import EXAMPLES, ProblemError, load_example, parse_problem, parse_text

BASE = {
    "schema": 1,
    "dimension": 1,
    "domain": [{"type": "interval", "lo": 0, "hi": 1}],
    "q": 0.5,
}


def doc(**changes):
    d = json.loads(json.dumps(BASE))
    d.update(changes)
    return json.dumps(d)


def test_registry():
    assert EXAMPLES == ("two_disks", "ex1_9", "cq_def", "ex2_6")
    for name in EXAMPLES:
        assert load_example(name).problem.name == name


def test_ex2_6_q_exact():
    pf = load_example("ex2_6")
    assert pf.problem.q[0] == 2 / 3
    assert pf.problem.B is not pf.problem.A and pf.problem.B.name == "B"


def test_defaults():
    P = parse_text(doc()).problem
    assert P.A.eval(0.3)[0] == 0.3 and P.S.eval(0.3)[0] == 0.3
    assert P.sampling.seed == 0x9E3779B9


def test_q_outside():
    with pytest.raises(ProblemError, match="q"):
        parse_text(doc(q=2))


def test_overlapping_guards():
    maps = {"A": {"pieces": [
        {"guard": {"type": "interval", "lo": 0, "hi": 0.6}, "poly": [0]},
        {"guard": {"type": "interval", "lo": 0.5, "hi": 1}, "poly": [1]},
    ]}}
    with pytest.raises(ProblemError) as exc:
        parse_text(doc(maps=maps))
    assert exc.value.location == "maps.A"
    assert "guard" in str(exc.value)


def test_uncovered():
    maps = {"T": {"pieces": [{"guard": {"type": "interval", "lo": 0, "hi": 0.5}, "poly": [0.2]}]}}
    with pytest.raises(ProblemError, match="guard coverage"):
        parse_text(doc(maps=maps))


def test_not_a_self_map():
    maps = {"S": {"pieces": [{"guard": {"type": "interval", "lo": 0, "hi": 1}, "poly": [2]}]}}
    with pytest.raises(ProblemError, match="outside the domain"):
        parse_text(doc(maps=maps))


def test_syntax_error_location():
    with pytest.raises(ProblemError) as exc:
        parse_text('{"schema": 1,\n  "dimension": 1,,\n}')
    assert exc.value.location.startswith("line 2")


def test_unresolved_alias():
    with pytest.raises(ProblemError, match="unresolved"):
        parse_text(doc(maps={"B": "Z"}))


def test_circular_alias():
    with pytest.raises(ProblemError, match="circular"):
        parse_text(doc(maps={"A": "B", "B": "A"}))


def test_missing_file(tmp_path):
    with pytest.raises(ProblemError, match="not found"):
        parse_problem(tmp_path / "nope.json")


def test_file_round_trip(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(doc(q="1/3"))
    pf = parse_problem(p)
    assert pf.problem.q[0] == 1 / 3 and pf.digest.startswith("sha256:")


def test_bad_constants():
    with pytest.raises(ProblemError, match="constants"):
        parse_text(doc(constants={"c": [0.9, 0.2, 0]}))


def test_polygon_and_2d_maps():
    d = {
        "dimension": 2,
        "domain": {"type": "polygon", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
        "q": [0.5, 0.5],
        "maps": {"T": {"pieces": [{"guard": {"type": "polygon", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
                                   "poly": [[[0.5, 0, 0], [0.5, 1, 0]], [[0.5, 0, 0], [0.5, 0, 1]]]}]}},
    }
    P = parse_text(json.dumps(d)).problem
    assert P.T.eval([0, 1]).tolist() == [0.5, 1.0]
