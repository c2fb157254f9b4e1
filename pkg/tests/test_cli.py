import csv
import io
import json
import math

import pytest

from psghz.cli import fmt, main
from psghz.protocol import ProtocolParams, run_post_selected


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_fmt_is_12_significant_digits():
    assert fmt(math.pi) == "3.14159265359"
    assert fmt(1e-20) == "1e-20"
    assert fmt(3) == "3"


def test_run_headline(capsys):
    code, out, _ = _run(capsys, "run", "--n", 50, "--chi-t", 0.4, "--variance", 22, "--post-select", 0)
    assert code == 0
    data = json.loads(out)
    assert list(data) == [
        "n", "chi_t", "variance", "outcome_bin_center", "outcome_probability", "fidelity", "fidelity_phase"
    ]
    assert abs(data["fidelity"] - 0.97) <= 0.015
    assert data["outcome_bin_center"] == 0


def test_run_two_particles(capsys):
    code, out, _ = _run(capsys, "run", "--n", 2, "--chi-t", 0, "--variance", 1e6, "--post-select", 0)
    assert code == 0 and abs(json.loads(out)["fidelity"] - 0.5) < 1e-6


def test_run_csv_and_output_file(capsys, tmp_path):
    path = tmp_path / "run.csv"
    code, out, _ = _run(capsys, "run", "--n", 10, "--chi-t", 0.3, "--variance", 4, "--format", "csv",
                        "--output", path)
    assert code == 0 and out == ""
    header, row = _rows(path.read_text())
    assert header[0] == "n" and row[0] == "10"


def test_run_fixed_phase(capsys):
    base = ["run", "--n", 20, "--chi-t", 0.4, "--variance", 8]
    _, out, _ = _run(capsys, *base)
    opt = json.loads(out)
    _, out, _ = _run(capsys, *base, "--ghz-phase", f"fixed:{opt['fidelity_phase'] + 0.5}")
    assert json.loads(out)["fidelity"] < opt["fidelity"]


def test_run_sampled_deterministic(capsys):
    argv = ["run", "--n", 30, "--chi-t", 0.4, "--variance", 10, "--post-select", "-3:3", "--sampled", "--seed", 5]
    _, a, _ = _run(capsys, *argv)
    _, b, _ = _run(capsys, *argv)
    assert a == b and "accepted" in json.loads(a)


def test_missing_n_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--chi-t", "0.4", "--variance", "22"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--n", "0", "--chi-t", "0.4", "--variance", "1"],
        ["run", "--n", "4", "--chi-t", "0.4", "--variance", "-1"],
        ["run", "--n", "4", "--chi-t", "0.4", "--variance", "1", "--post-select", "-3:3"],
        ["run", "--n", "4", "--chi-t", "0.4", "--variance", "1", "--post-select", "999"],
        ["sweep", "--axis", "variance", "--from", "5", "--to", "1", "--steps", "3", "--n", "4", "--chi-t", "0.4"],
        ["sweep", "--axis", "n", "--from", "1", "--to", "2", "--steps", "3", "--chi-t", "0.4", "--variance", "1"],
        ["optimize", "--var-max", "5", "--sigma2-0", "10"],
    ],
)
def test_validation_errors_exit_2(capsys, argv):
    code, out, err = _run(capsys, *argv)
    assert code == 2 and out == "" and "error" in err


def test_zero_probability_exits_3(capsys):
    code, out, _ = _run(capsys, "run", "--n", 1, "--chi-t", 0, "--variance", 1e-6, "--post-select", 0)
    assert code == 3 and out == ""


def test_sweep_header_and_single_point(capsys):
    code, out, _ = _run(capsys, "sweep", "--axis", "variance", "--from", 22, "--to", 22, "--steps", 1,
                        "--n", 50, "--chi-t", 0.4)
    assert code == 0
    header, row = _rows(out)
    assert header == ["axis_value", "fidelity"]
    assert row[1] == fmt(run_post_selected(ProtocolParams(50, 0.4, 22.0)).fidelity)


def test_sweep_variance_peak(capsys):
    _, out, _ = _run(capsys, "sweep", "--axis", "variance", "--from", 1, "--to", 60, "--steps", 60,
                     "--n", 50, "--chi-t", 0.4)
    rows = [(float(a), float(b)) for a, b in _rows(out)[1:]]
    assert [r[0] for r in rows] == [float(v) for v in range(1, 61)]
    assert 18 <= max(rows, key=lambda r: r[1])[0] <= 26


def test_sweep_n_with_variance_maximization(capsys):
    _, out, _ = _run(capsys, "sweep", "--axis", "n", "--from", 10, "--to", 50, "--steps", 5, "--chi-t", 0.4,
                     "--maximize-variance", "--var-to", 40, "--var-steps", 40)
    header, *rows = _rows(out)
    assert header == ["axis_value", "fidelity", "best_variance"]
    fs = [float(r[1]) for r in rows]
    assert [r[0] for r in rows] == ["10", "20", "30", "40", "50"]
    assert all(a < b for a, b in zip(fs, fs[1:]))


def test_optimize_zero_iterations(capsys):
    code, out, _ = _run(capsys, "optimize", "--n", 20, "--max-iterations", 0)
    assert code == 0
    data = json.loads(out)
    assert data["iterations"] == 0 and data["sigma2"] == 10 and data["chi_t"] == 0.3
    assert data["fidelity"] == float(fmt(run_post_selected(ProtocolParams(20, 0.3, 10.0)).fidelity))


def test_optimize_deterministic_with_trace(capsys, tmp_path):
    argv = ["optimize", "--n", 20, "--max-iterations", 50, "--threshold", 0.999, "--seed", 3]
    _, a, _ = _run(capsys, *argv)
    _, b, _ = _run(capsys, *argv, "--trace", tmp_path / "t.csv")
    assert a == b
    header, *rows = _rows((tmp_path / "t.csv").read_text())
    assert header == ["iteration", "sigma2", "chi_t", "fidelity", "accepted"]
    # out-of-bounds proposals are rejected unevaluated and not logged
    iters = [int(r[0]) for r in rows]
    assert iters[0] == 0 and iters == sorted(set(iters))
    assert iters[-1] <= json.loads(a)["iterations"]
    assert max(float(r[3]) for r in rows) == json.loads(a)["fidelity"]


def test_husimi_cs_stage(capsys):
    code, out, _ = _run(capsys, "husimi", "--n", 20, "--chi-t", 0.3, "--variance", 5, "--stage", "cs",
                        "--theta-steps", 21, "--phi-steps", 40)
    assert code == 0
    header, *rows = _rows(out)
    assert header == ["theta", "phi", "value"] and len(rows) == 21 * 40
    # theta outer, phi inner
    assert rows[0][0] == rows[39][0] != rows[40][0]
    top = max(rows, key=lambda r: float(r[2]))
    assert abs(float(top[2]) - 1) < 1e-9
    assert abs(float(top[0]) - math.pi / 2) < 1e-9 and abs(float(top[1])) < 1e-9


def test_husimi_unknown_stage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["husimi", "--n", "4", "--chi-t", "0.3", "--variance", "1", "--stage", "middle"])
    assert exc.value.code == 2


def test_outcomes_default_window_is_whole_grid(capsys):
    code, out, _ = _run(capsys, "outcomes", "--n", 10, "--chi-t", 0.4, "--variance", 2, "--bin-width", 1)
    assert code == 0
    header, *rows = _rows(out)
    assert header == ["c_center", "probability", "fidelity"]
    assert len(rows) == len(ProtocolParams(10, 0.4, 2.0, bin_width=1.0).grid)
    assert abs(sum(float(r[1]) for r in rows) - 1) < 1e-9


def test_efficiency_table_block(capsys):
    code, out, _ = _run(capsys, "efficiency", "--n", 50, "--chi-t", 0.4, "--variance", 22,
                        "--intervals", "-5:5,-2:2,-1:1")
    assert code == 0
    header, *rows = _rows(out)
    assert header == ["c_lo", "c_hi", "f_min", "f_max", "probability"]
    expected = [(0.80, 0.97, 0.161), (0.94, 0.97, 0.067), (0.956, 0.965, 0.035)]
    for row, (fmin, fmax, p) in zip(rows, expected):
        assert abs(float(row[2]) - fmin) <= 0.02 and abs(float(row[3]) - fmax) <= 0.02
        assert abs(float(row[4]) - p) <= 0.005


@pytest.mark.parametrize("bad", ["-5", "5:-5", "a:b", "-5:5,", "-500:0"])
def test_efficiency_malformed_interval(capsys, bad):
    try:
        code = main(["efficiency", "--n", "10", "--chi-t", "0.4", "--variance", "2", "--intervals", bad])
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_efficiency_covering_interval(capsys):
    grid = ProtocolParams(10, 0.4, 2.0).grid
    _, out, _ = _run(capsys, "efficiency", "--n", 10, "--chi-t", 0.4, "--variance", 2,
                     "--intervals", f"{grid.c_min}:{grid.c_max}")
    assert abs(float(_rows(out)[1][4]) - 1) < 1e-9


def test_outcomes_central_peak_at_quarter_pi(capsys):
    _, out, _ = _run(capsys, "outcomes", "--n", 50, "--chi-t", math.pi / 4, "--variance", 49)
    rows = _rows(out)[1:]
    assert float(max(rows, key=lambda r: float(r[1]))[0]) == 0.0
