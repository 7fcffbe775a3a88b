import json

import pytest

from measim.cli import main, parse_series


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rates_mc_bb84(capsys):
    code, out, _ = run(capsys, "rates", "bundled:bb84", "--theorem", "mc", "--state", "pi", "--povm", "bb84")
    assert code == 0
    rep = json.loads(out)
    assert rep["result"]["corner"] == {"R": 1.0, "S": 1.0}
    assert rep["checks"]["corner_feasible"] is True
    assert rep["input"]["path"] == "bundled:bb84"
    assert "wall_clock_s" not in rep


def test_rates_other_theorems(capsys):
    code, out, _ = run(capsys, "rates", "bundled:bell_bb84", "--theorem", "mcqsi")
    assert code == 0 and json.loads(out)["result"]["corner"] == {"R": 0.0, "S": 1.0}
    code, out, _ = run(capsys, "rates", "bundled:conjugate_coding", "--theorem", "cdcqsi")
    assert code == 0
    code, out, _ = run(capsys, "rates", "bundled:ghz", "--theorem", "uncertainty", "--povm", "z", "--povm-z", "x")
    rep = json.loads(out)
    assert code == 0 and rep["result"]["c1"] == pytest.approx(0.5)
    code, out, _ = run(capsys, "rates", "bundled:bb84", "--theorem", "nonfeedback", "--povm", "coarse", "--refinement", "coarse_via_bb84")
    assert code == 0


def test_rates_timing_flag(capsys):
    code, out, _ = run(capsys, "rates", "bundled:bb84", "--theorem", "mc", "--timing")
    assert code == 0 and "wall_clock_s" in json.loads(out)


def test_usage_errors(capsys):
    assert run(capsys, "rates", "bundled:bb84")[0] == 1
    assert run(capsys, "rates", "/nonexistent.json", "--theorem", "mc")[0] == 1
    code, out, _ = run(capsys, "rates", "bundled:bb84", "--theorem", "mc", "--povm", "nope")
    assert code == 1


def test_parse_error_reports_path(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"povms": {"p": {"elements": [[[[0.5, 0]]]]}}}')
    code, out, _ = run(capsys, "rates", str(p), "--theorem", "mc")
    assert code == 1
    assert json.loads(out)["error"]["path"].startswith("povms.p")


def test_size_limit_exit_code(capsys):
    code, out, _ = run(capsys, "simulate", "bundled:bb84", "--protocol", "mc", "--n", "12", "--trials", "1")
    assert code == 3
    assert json.loads(out)["error"]["type"] == "SizeLimit"


def test_simulate_mc(capsys):
    code, out, _ = run(capsys, "simulate", "bundled:bb84", "--protocol", "mc", "--L", "4", "--M", "2", "--trials", "3")
    rep = json.loads(out)
    assert code == 0
    assert rep["checks"]["equivalence"] is True


def test_simulate_series_csv(capsys):
    code, out, _ = run(
        capsys, "simulate", "bundled:conjugate_coding", "--protocol", "cdcqsi", "--series", "n=2..4:2", "--trials", "10", "--csv"
    )
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 3
    assert lines[0].split(",")[0] == "n"


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate", "bundled:conjugate_coding", "--protocol", "cdcqsi", "--series", "n=2..4:2", "--trials", "10"),
        ("simulate", "bundled:bb84", "--protocol", "mc", "--L", "4", "--trials", "3", "--seed", "5"),
        ("simulate", "bundled:bb84", "--protocol", "nonfeedback", "--povm", "coarse", "--refinement", "coarse_via_bb84", "--trials", "2", "--L", "2"),
        ("verify", "sen", "--instances", "20", "--seed", "2"),
    ],
)
def test_byte_identical_reruns(capsys, argv):
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b and a


def test_verify_suites(capsys):
    code, out, _ = run(capsys, "verify", "gentle", "--instances", "10")
    assert code == 0 and json.loads(out)["result"]["violations"] == []
    code, out, err = run(capsys, "verify", "sen", "--instances", "0")
    assert code == 0 and "warning" in err.lower()
    code, out, _ = run(capsys, "verify", "chernoff")
    assert code == 0


def test_output_file(tmp_path, capsys):
    dest = tmp_path / "r.json"
    code, out, _ = run(capsys, "rates", "bundled:bb84", "--theorem", "mc", "--output", str(dest))
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["command"]["name"] == "rates"


def test_parse_series():
    assert parse_series("n=2..8:2") == ("n", [2, 4, 6, 8])
    assert parse_series("L=1,2,4") == ("L", [1, 2, 4])
    assert parse_series("n=2..4") == ("n", [2, 3, 4])
    with pytest.raises(Exception):
        parse_series("q=1,2")
