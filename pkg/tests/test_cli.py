import csv
import io
import json

import pytest

from mprtree import cli, stability
from mprtree.model import ChannelConfig


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_cri_single_batch(capsys):
    code, out, _ = run(["cri", "--K", "4", "--n", "3"], capsys)
    assert code == 0
    assert out.startswith("# config: ")
    (row,) = csv_rows(out)
    assert float(row["L_n"]) == 1.0
    assert float(row["T_n"]) == pytest.approx(0.75)


def test_cri_table_with_cross_check(capsys):
    code, out, _ = run(["cri", "--K", "2", "--n-max", "40", "--check", "closed-form"], capsys)
    assert code == 0
    rows = csv_rows(out)
    assert [int(r["n"]) for r in rows] == list(range(0, 41))
    line = [x for x in out.splitlines() if "max relative difference" in x]
    assert line and float(line[0].rsplit(":", 1)[1]) < 1e-6


def test_cri_json(capsys):
    code, out, _ = run(["cri", "--K", "1", "--n-max", "3", "--format", "json"], capsys)
    payload = json.loads(out)
    assert code == 0
    assert payload["effective_config"]["K"] == 1
    assert payload["rows"][2]["L_n"] == pytest.approx(5.0)


def test_stability_vacuous_low_order(capsys):
    code, out, _ = run(["stability", "--K", "1", "--m", "1"], capsys)
    assert code == 0
    (row,) = csv_rows(out)
    assert float(row["lambda_S_over_K"]) == 0.0


def test_stability_row(capsys):
    code, out, _ = run(["stability", "--K", "1,2", "--m", "50"], capsys)
    assert code == 0
    rows = csv_rows(out)
    expected = [cli.REFERENCE_BOUNDS[K]["lambda_S_over_K"] for K in (1, 2)]
    for row, e in zip(rows, expected):
        assert abs(float(row["lambda_S_over_K"]) - e) <= 1e-4


def test_simulate_cri_small(capsys, tmp_path):
    trace = tmp_path / "trace.csv"
    code, out, _ = run(["simulate", "cri", "--n", "0", "--reps", "10", "--trace", str(trace)],
                       capsys)
    payload = json.loads(out)
    assert code == 0
    assert payload["mean"] == 1.0 and payload["ci95"] == 0.0
    assert csv_rows(trace.read_text())[0]["feedback"] == "0"


def test_simulate_trace_columns(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, _, _ = run(["simulate", "cri", "--n", "5", "--K", "2", "--reps", "200",
                      "--trace", str(trace)], capsys)
    assert code == 0
    rows = csv_rows(trace.read_text())
    assert set(rows[0]) == {"slot", "occupancy", "feedback"}
    assert int(rows[0]["occupancy"]) == 5


def test_arrivals_expectation_exit_code(capsys):
    code, _, err = run(["simulate", "arrivals", "--lambda", "0.46", "--horizon", "1e6",
                        "--expect-stable"], capsys)
    assert code == cli.EXIT_EXPECTATION
    assert "expectation failed" in err


def test_arrivals_stable_run(capsys):
    code, out, _ = run(["simulate", "arrivals", "--lambda", "0.3", "--horizon", "1e6",
                        "--expect-stable"], capsys)
    assert code == 0
    assert json.loads(out)["unstable"] is False


def test_arrivals_default_window_is_certified(capsys):
    code, out, _ = run(["simulate", "arrivals", "--lambda", "0.3", "--horizon", "1e5"], capsys)
    want = stability.stable_throughput_bounds(50, ChannelConfig(1)).delta_S
    assert code == 0
    assert json.loads(out)["effective_config"]["delta"] == pytest.approx(want)


def test_asymptote_numeric_guard(capsys):
    code, _, err = run(["asymptote", "--K", "1", "--n-range", "256:4000"], capsys)
    assert code == cli.EXIT_NUMERIC
    assert "numerical guard" in err


def test_bad_arguments_are_usage_errors(capsys):
    assert run(["cri", "--K", "0"], capsys)[0] == cli.EXIT_USAGE
    assert run(["cri", "--p", "1.5"], capsys)[0] == cli.EXIT_USAGE
    assert run(["nope"], capsys)[0] == cli.EXIT_USAGE


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nK = 2\nn = 5\np = 0.3\n")
    code, out, _ = run(["cri", "--config", str(cfg), "--p", "0.5"], capsys)
    assert code == 0
    config = json.loads(out.splitlines()[0].removeprefix("# config: "))
    assert config["K"] == 2 and config["n"] == 5 and config["p"] == 0.5


def test_config_supplies_required_argument(capsys, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 3\nreps = 200\n")
    code, out, _ = run(["simulate", "cri", "--config", str(cfg)], capsys)
    assert code == 0
    assert json.loads(out)["reps"] == 200


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    code, _, err = run(["cri", "--config", str(cfg)], capsys)
    assert code == cli.EXIT_USAGE
    assert "bogus" in err


def test_output_directory_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(["cri", "--n-max", "5", "-o", "sub/table.csv"], capsys)
    assert code == 0 and out == ""
    assert len(csv_rows((tmp_path / "sub" / "table.csv").read_text())) == 6


def _results(text):
    return {k: v for k, v in json.loads(text).items() if k != "effective_config"}


def test_reruns_are_byte_identical(capsys):
    argv = ["simulate", "cri", "--n", "7", "--K", "2", "--reps", "5000", "--seed", "3"]
    first = run(argv, capsys)[1]
    second = run(argv + ["--workers", "3"], capsys)[1]
    assert first == run(argv, capsys)[1]
    assert _results(first) == _results(second)


@pytest.mark.parametrize("leaf", [["cri"], ["stability"], ["simulate", "cri"],
                                  ["simulate", "arrivals"]])
def test_help_states_units(capsys, leaf):
    code, out, _ = run(leaf + ["--help"], capsys)
    assert code == 0
    assert "slots" in out or "packets/slot" in out


def test_top_level_help(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    for word in ("cri", "stability", "simulate", "asymptote", "reproduce-paper"):
        assert word in out


@pytest.mark.slow
def test_reproduce_writes_manifest(capsys, tmp_path):
    code, out, _ = run(["reproduce-paper", "--out-dir", str(tmp_path), "--n-max", "200"], capsys)
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["passed"] == manifest["total"] > 0
    for name in manifest["files"]:
        assert (tmp_path / name).exists()
    assert f"{manifest['total']}/{manifest['total']} checks passed" in out
