import io
import json

import pytest

from cqfixed.cli import run


def invoke(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


def test_ex2_6_solve():
    code, text = invoke("example", "ex2_6", "solve-fixedpoint", "--report", "json")
    rep = json.loads(text)
    assert code == 0
    assert rep["checks"]["common_fixed_point"]["detail"]["z"][0] == pytest.approx(2 / 3, abs=1e-9)


def test_cq_def_commute():
    code, text = invoke("example", "cq_def", "check-commute")
    assert code == 0
    assert "C_q(A,T) = [0, 0.5] U {1}" in text
    assert "ATx" not in text or "0.6" in text


def test_cq_def_probe_values():
    _, text = invoke("example", "cq_def", "check-commute", "--report", "json")
    probe = json.loads(text)["checks"]["probe_0_AT"]
    assert probe["detail"]["ATx"] == [0.0] and probe["detail"]["TAx"] == [1.0]
    assert probe["role"] == "diagnostic"


def test_ex1_9_q_affine():
    code, text = invoke("example", "ex1_9", "check-affinity", "--kind", "q_affine")
    assert code == 1 and "violated" in text


def test_force_runs_solve():
    code, text = invoke("example", "ex1_9", "solve-fixedpoint", "--force", "--report", "json")
    rep = json.loads(text)
    assert rep["checks"]["common_fixed_point"]["status"] == "not_found"
    assert code == 2


def test_gate_blocks_solve():
    code, text = invoke("example", "ex1_9", "solve-fixedpoint", "--report", "json")
    rep = json.loads(text)
    assert code == 1 and "common_fixed_point" not in rep["checks"]


def test_json_determinism():
    a = invoke("example", "ex2_6", "verify-gregus", "--seed", "7", "--report", "json")[1]
    b = invoke("example", "ex2_6", "verify-gregus", "--seed", "7", "--report", "json")[1]
    assert a == b
    rep = json.loads(a)
    assert rep["schema"] == 1 and rep["seed"] == 7 and "wall_time_s" not in rep


def test_timing_flag():
    rep = json.loads(invoke("example", "ex2_6", "check-geometry", "--report", "json", "--timing")[1])
    assert rep["wall_time_s"] >= 0


def test_text_and_json_agree():
    _, text = invoke("example", "ex1_9", "check-affinity")
    rep = json.loads(invoke("example", "ex1_9", "check-affinity", "--report", "json")[1])
    for name, check in rep["checks"].items():
        line = next(l for l in text.splitlines() if l.strip().startswith(name + " "))
        assert check["status"] in line


def test_default_seed_recorded():
    rep = json.loads(invoke("example", "cq_def", "check-geometry", "--report", "json")[1])
    assert rep["seed"] == 0x9E3779B9


def test_file_problem(tmp_path):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"dimension": 1, "domain": {"type": "interval", "lo": 0, "hi": 1}, "q": 0.5}))
    code, _ = invoke("check-geometry", str(p))
    assert code == 0


def test_input_errors(tmp_path, capsys):
    assert invoke("frobnicate", "x.json")[0] == 3
    assert invoke("example", "nope", "all")[0] == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 1, "domain": {"type": "interval", "lo": 0, "hi": 1}, "q": 2}')
    assert invoke("check-geometry", str(bad))[0] == 3
    assert "q" in capsys.readouterr().err


def test_grid_and_schedule_flags():
    rep = json.loads(invoke("example", "ex2_6", "solve-fixedpoint", "--grid", "0.01",
                            "--schedule", "geometric:0.5", "--report", "json")[1])
    assert rep["settings"]["grid"] == 0.01 and rep["settings"]["schedule"] == "geometric:0.5"
    assert rep["checks"]["common_fixed_point"]["status"] == "holds"


def test_output_file(tmp_path):
    out = tmp_path / "r.json"
    code, text = invoke("example", "ex2_6", "check-geometry", "--report", "json", "-o", str(out))
    assert text == "" and json.loads(out.read_text())["command"] == "check-geometry"


def test_invariant_approx_command():
    code, text = invoke("example", "two_disks", "invariant-approx", "--u", "1", "2", "--report", "json")
    rep = json.loads(text)
    assert code == 1
    assert rep["checks"]["approx_approximants_starshaped"]["status"] == "violated"
