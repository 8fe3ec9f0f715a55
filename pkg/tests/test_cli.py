"""Command-line behavior: outputs, determinism, exit codes."""

import json

from nlqclab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_gh_exhaustive_truth_table(capsys):
    code, out = run(capsys, "gh", "--strategy", "and", "--exhaustive", "--out", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,y,side,terminal"
    assert len(lines) == 5
    sides = [line.split(",")[2] for line in lines[1:]]
    assert sides == ["0", "0", "0", "1"]


def test_geometry_marginal_preset(capsys):
    code, out = run(capsys, "geometry", "--preset", "marginal", "--resolution", "512")
    assert code == 0
    row = json.loads(out)[0]
    assert row["region_nonempty"] is True
    assert abs(row["ridge_length"]) < 1e-6
    assert abs(row["mutual_information_length_units"]) < 1e-9


def test_pbt_csv_columns(capsys):
    code, out = run(capsys, "pbt", "--N", "1", "2", "--out", "csv")
    assert code == 0
    header = out.splitlines()[0]
    assert header == "N,d_A,choi_fidelity,choi_trace_distance,paper_bound"


def test_identical_invocations_are_byte_identical(capsys):
    _, first = run(capsys, "clifford-nlqc", "--d", "2", "--n", "2", "--seed", "5")
    _, second = run(capsys, "clifford-nlqc", "--d", "2", "--n", "2", "--seed", "5")
    assert first == second
    assert json.loads(first)["exact"] is True


def test_bound_check_reports_both_constants(capsys):
    code, out = run(capsys, "bound-check", "--samples", "3", "--seed", "1")
    doc = json.loads(out)
    assert doc["all_full_I_hold"] is True
    assert code == 0
    assert {"half_I_holds", "full_I_holds"} <= set(doc["samples"][0])


def test_surgery_report_fields(capsys):
    code, out = run(capsys, "surgery", "--mode", "clifford", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["exact"] is True
    assert doc["n_prime"] == 2 * doc["pairs"]
    assert doc["gate_count"] <= 4 * doc["pairs"]


def test_usage_error_exit_code(capsys):
    assert cli.main(["geometry"]) == 2
    capsys.readouterr()
    assert cli.main(["no-such-command"]) == 2


def test_suite_quick_passes(capsys):
    code, out = run(capsys, "suite", "--quick")
    doc = json.loads(out)
    assert code == 0 and doc["all_passed"] is True


def test_code_route_table(capsys):
    code, out = run(capsys, "code-route", "--f", "and", "--d", "3", "--out", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,y,side,fidelity,hiding_distance"
    assert [line.split(",")[2] for line in lines[1:]] == ["0", "0", "0", "1"]


def test_missing_strategy_file_is_a_usage_error(capsys):
    assert cli.main(["gh", "--strategy", "/tmp/definitely-not-here.json"]) == 2


def test_strategy_file_round_trip(tmp_path, capsys):
    from nlqclab import gardenhose
    path = tmp_path / "or.json"
    path.write_text(gardenhose.dump_strategy_json(gardenhose.or_strategy()))
    code, out = run(capsys, "gh", "--strategy", str(path), "--exhaustive", "--out", "csv")
    assert code == 0
    sides = [line.split(",")[2] for line in out.strip().splitlines()[1:]]
    assert sides == ["0", "1", "1", "1"]
