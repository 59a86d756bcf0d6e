import csv
import io
import json

import pytest

from app.cli import EXIT_CRITERIA, EXIT_OK, EXIT_USAGE, main
from app.config import DEFAULT_GOLDEN


def _write_config(tmp_path, **sections):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(sections))
    return path


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture
def short_config(tmp_path):
    return _write_config(tmp_path, dynamics={"initial_altitude_m": 0.5})


def test_bench_reproduces_quad_core_figure(capsys):
    assert main(["bench"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0][:3] == ["point", "ops_per_cycle_per_core", "cores"]
    requested = rows[1]
    assert requested[0] == "requested"
    assert requested[1:4] == ["19", "4", "76"]
    assert requested[5] == "21.22"


def test_bench_rejects_bad_cores():
    assert main(["bench", "--cores", "0"]) == EXIT_USAGE


def test_bench_output_file(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--output-dir", str(out), "bench", "--cores", "5", "--clock-mhz", "266.03"]) == EXIT_OK
    rows = _rows((out / "bench.csv").read_text())
    assert rows[1][5] == "25.27"
    capsys.readouterr()


def test_verify_golden_only(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--output-dir", str(out), "verify", "--no-sweep"]) == EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("distance_raw,rate_raw,reference,quantized,relative_error\n")
    assert "golden max relative error" in printed
    assert len(_rows((out / "golden_results.csv").read_text())) == 13


def test_verify_with_sweep(capsys):
    assert main(["verify"]) == EXIT_OK
    assert "sweep max relative error" in capsys.readouterr().out


def test_verify_empty_golden_is_usage_error(tmp_path):
    golden = tmp_path / "golden.csv"
    golden.write_text("distance_raw,rate_raw,reference_output\n")
    assert main(["verify", "--golden", str(golden), "--no-sweep"]) == EXIT_USAGE


def test_verify_narrow_output_fails(tmp_path, engine_config, capsys):
    engine = engine_config.model_dump(mode="json")
    engine["widths"]["output"] = {"total_bits": 4, "signed": False, "scale_pow2": 0}
    config = _write_config(tmp_path, engine=engine)
    assert main(["--config", str(config), "verify"]) == EXIT_CRITERIA
    capsys.readouterr()


def test_verify_detects_golden_drift(tmp_path, capsys):
    golden = tmp_path / "golden.csv"
    lines = DEFAULT_GOLDEN.read_text().splitlines()
    lines[1] = "0,0,136.000000"
    golden.write_text("\n".join(lines) + "\n")
    assert main(["verify", "--golden", str(golden), "--no-sweep"]) == EXIT_CRITERIA
    capsys.readouterr()


def test_invalid_config_creates_no_output(tmp_path):
    config = _write_config(tmp_path, sensors={"dropout_probability": 2.0})
    out = tmp_path / "out"
    assert main(["--config", str(config), "--output-dir", str(out), "run"]) == EXIT_USAGE
    assert main(["--config", str(config), "run", "--trace", str(out)]) == EXIT_USAGE
    assert not out.exists()


def test_missing_config_is_usage_error(tmp_path):
    assert main(["--config", str(tmp_path / "none.json"), "bench"]) == EXIT_USAGE


def test_unknown_command_is_usage_error():
    assert main(["fly"]) == EXIT_USAGE


def test_run_writes_trace_and_report(tmp_path, short_config, capsys):
    trace = tmp_path / "trace"
    assert main(["--config", str(short_config), "run", "--trace", str(trace)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "SUCCESS" in printed
    for name in ("trace.csv", "core_trace.csv", "hub_trace.csv", "report.csv"):
        assert (trace / name).is_file()
    report = _rows((trace / "report.csv").read_text())
    assert report[0][0] == "seed" and report[1][5] == "1"


def test_run_is_byte_identical_across_executions(tmp_path, short_config, capsys):
    first, second = tmp_path / "a", tmp_path / "b"
    main(["--config", str(short_config), "--seed", "7", "run", "--trace", str(first)])
    main(["--config", str(short_config), "--seed", "7", "run", "--trace", str(second)])
    capsys.readouterr()
    for name in ("trace.csv", "core_trace.csv", "hub_trace.csv", "report.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_sweep_inclination_rows(tmp_path, short_config, capsys):
    out = tmp_path / "out"
    args = ["--config", str(short_config), "--output-dir", str(out), "sweep"]
    args += ["--param", "inclination", "--from", "0", "--to", "10", "--steps", "11"]
    assert main(args) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0][:3] == ["param", "value", "seed"]
    assert len(rows) == 12
    assert [float(r[1]) for r in rows[1:]] == [float(v) for v in range(11)]
    assert (out / "sweep.csv").read_text() == "\n".join(",".join(r) for r in rows) + "\n"


def test_sweep_seed_and_parallel_jobs_agree(short_config, capsys):
    args = ["--config", str(short_config), "sweep", "--param", "seed", "--from", "0", "--to", "2", "--steps", "3"]
    assert main(args) == EXIT_OK
    serial = capsys.readouterr().out
    assert main(args + ["--jobs", "2"]) == EXIT_OK
    parallel = capsys.readouterr().out
    assert serial == parallel
    assert [r[2] for r in _rows(serial)[1:]] == ["0", "1", "2"]


def test_sweep_fault_step_injects_core_fault(short_config, capsys):
    args = ["--config", str(short_config), "sweep", "--param", "fault_step", "--from", "0", "--to", "100", "--steps", "2"]
    assert main(args) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert [r[-1] for r in rows[1:]] == ["1", "1"]


@pytest.mark.parametrize(
    "extra",
    [
        ["--param", "inclination", "--from", "0", "--to", "60", "--steps", "3"],
        ["--param", "seed", "--from", "0", "--to", "1", "--steps", "0"],
        ["--param", "gravity", "--from", "0", "--to", "1", "--steps", "2"],
        ["--param", "seed", "--from", "0", "--to", "1", "--steps", "2", "--jobs", "0"],
    ],
)
def test_sweep_usage_errors(tmp_path, short_config, extra):
    out = tmp_path / "out"
    assert main(["--config", str(short_config), "--output-dir", str(out), "sweep"] + extra) == EXIT_USAGE
    assert not out.exists()


def test_golden_regeneration_matches_shipped_set(tmp_path):
    out = tmp_path / "golden.csv"
    assert main(["golden", "--out", str(out)]) == EXIT_OK
    fresh = _rows(out.read_text())
    shipped = _rows(DEFAULT_GOLDEN.read_text())
    assert fresh[0] == shipped[0]
    assert [r[:2] for r in fresh] == [r[:2] for r in shipped]
    for a, b in zip(fresh[1:], shipped[1:]):
        assert float(a[2]) == pytest.approx(float(b[2]), abs=1e-6)
