import json
import shutil
import subprocess

import pytest

from defi_roleplay import __version__
from defi_roleplay.cli import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK, main, parse_param_pairs, UsageError
from defi_roleplay.scenario import preset_text


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_emits_versioned_report(capsys):
    code, out, _ = run(["simulate", "--scenario", "bb_desk", "--strategy", "bb"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["tool_version"] == __version__
    assert len(doc["scenario_fingerprint"]) == 64
    assert doc["report"]["profit"] == pytest.approx(7129.375264, rel=1e-9)
    assert doc["report"]["feasible"] is True


def test_simulate_is_byte_identical_across_runs(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["simulate", "--scenario", "bd_desk", "--strategy", "bd-enhanced", "--out", str(p)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert "report written" in capsys.readouterr().out


def test_scenario_file_path_and_param_override(tmp_path, capsys):
    path = tmp_path / "desk.yaml"
    path.write_text(preset_text("bb_desk"))
    code, out, _ = run(["simulate", "--scenario", str(path), "--strategy", "bb", "--out-s", "1000"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["report"]["profit"] == pytest.approx(800.0, rel=1e-12)


def test_infeasible_run_exits_two(capsys):
    code, out, _ = run(["simulate", "--scenario", "bd_desk", "--strategy", "bd", "--param", "donate=0"], capsys)
    assert code == EXIT_INFEASIBLE
    assert json.loads(out)["report"]["feasible"] is False


@pytest.mark.parametrize("argv", [
    ["simulate", "--scenario", "nope", "--strategy", "bb"],
    ["simulate", "--scenario", "bb_desk", "--strategy", "bd"],
    ["simulate", "--scenario", "bb_desk", "--strategy", "bb", "--param", "rounds"],
    ["simulate", "--scenario", "bb_desk", "--strategy", "bb", "--param", "bogus=1"],
    ["simulate", "--scenario", "bb_desk", "--strategy", "zz"],
    ["optimize", "--scenario", "bb_desk", "--strategy", "bb", "--sweep-iter", "1:3"],
])
def test_bad_input_exits_one(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_ERROR
    assert capsys.readouterr().err


def test_formula_reports_closed_forms(capsys):
    code, out, _ = run(["formula", "--scenario", "bd_desk", "--strategy", "bd"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["formula"]["epsilon"] == pytest.approx(4.11522633744856, rel=1e-12)
    code, out, _ = run(["formula", "--scenario", "bd_desk", "--strategy", "bd", "--param", "init_mint=0",
                        "--param", "iter=1"], capsys)
    assert code == EXIT_INFEASIBLE
    assert json.loads(out)["feasible"] is False


def test_optimize_single_round(capsys):
    code, out, _ = run(["optimize", "--scenario", "bb_desk", "--strategy", "bb"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["profit"] == pytest.approx(7129.375264, rel=1e-7)


def test_optimize_iteration_sweep(capsys):
    code, out, _ = run(["optimize", "--scenario", "bd_desk", "--strategy", "bd", "--sweep-iter", "2:4"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert [row[0] for row in doc["table"]] == [2, 3, 4]
    # two loops cannot repay the flashloan on the desk, which shows up as null
    assert doc["table"][0][1] is None
    assert doc["params"] == {"iter": 4}


def test_verify_table(tmp_path, capsys):
    out_path = tmp_path / "v.json"
    code, out, _ = run(["verify", "--scenario", "bb_desk", "--no-numeric", "--out", str(out_path)], capsys)
    assert code == EXIT_OK
    assert "bb-multi" in out and "PASS" in out and "FAIL" not in out
    assert len(json.loads(out_path.read_text())["rows"]) == 2


def test_verify_fee_sweep(capsys):
    code, out, _ = run(["verify", "--scenario", "bd_desk", "--strategy", "bd", "--no-numeric", "--fee-sweep"],
                       capsys)
    assert code == EXIT_OK
    assert "nonincreasing" in out


def test_param_pairs():
    assert parse_param_pairs(["a=1", "b=2.5", "c=true", "d=none"]) == {"a": 1, "b": 2.5, "c": True, "d": None}
    with pytest.raises(UsageError):
        parse_param_pairs(["x=abc"])


@pytest.mark.skipif(shutil.which("defi-roleplay") is None, reason="console script not installed")
def test_console_script_version():
    res = subprocess.run(["defi-roleplay", "--version"], capture_output=True, text=True, check=True)
    assert res.stdout.strip() == __version__
