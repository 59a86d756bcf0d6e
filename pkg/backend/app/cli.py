"""
Command-line harness: verify, bench, run, sweep, golden and serve.

Exit codes: 0 success, 1 criteria failure, 2 usage or configuration error.
Logs go to stderr; CSV payloads go to stdout and, when an output directory
is configured, to files.
"""

import argparse
import logging
import math
import sys
import time
from multiprocessing import Pool
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError

from .config import DEFAULT_GOLDEN, ConfigError, RunConfig, get_settings, load_run_config
from .services.fls import (
    GOLDEN_HEADER,
    FlsConfigError,
    FlsInputError,
    GoldenFileError,
    QuantizedEngine,
    load_golden,
    verify_engine,
    write_golden,
)
from .services.reports import csv_text, format_table, landing_summary, write_csv, write_landing_outputs
from .services.scenario import (
    DynamicsParams,
    FaultSpec,
    LandingReport,
    LandingSetup,
    SensorModel,
    SimulationError,
    TerrainModel,
    run_landing,
)
from .services.systolic import ScheduleError, ThroughputReport, build_schedule, operating_point_reports, system_throughput

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CRITERIA = 1
EXIT_USAGE = 2

GOPS_TOLERANCE = 0.01
BENCH_SAMPLES = 20000
SWEEP_PARAMS = ("inclination", "roll", "noise", "fault_step", "seed", "altitude")
SWEEP_HEADER = ("param", "value") + LandingReport.HEADER


class UsageError(ValueError):
    """Bad command-line arguments that argparse itself cannot catch."""


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(
    config: RunConfig,
    golden_path: Path = DEFAULT_GOLDEN,
    sweep: bool = True,
    output_dir: Optional[Path] = None,
) -> int:
    """Golden comparison plus the exhaustive sweep against the error budgets."""
    crit = config.criteria
    outcome = verify_engine(
        config.engine_config,
        load_golden(golden_path),
        crit.golden_max_relative_error,
        crit.sweep_max_relative_error,
        sweep=sweep,
    )
    report = outcome.golden

    sys.stdout.write(csv_text(GOLDEN_HEADER, report.rows()))
    if output_dir is not None:
        write_csv(output_dir / "golden_results.csv", GOLDEN_HEADER, report.rows())

    print(f"golden max relative error: {report.max_relative_error:.6f} (budget {crit.golden_max_relative_error})")
    if outcome.sweep is not None:
        result = outcome.sweep
        print(
            f"sweep max relative error: {result.max_relative_error:.6f} at {result.worst_input} "
            f"(budget {crit.sweep_max_relative_error}), max absolute error {result.max_absolute_error:.6f}, "
            f"{result.held} held of {result.evaluated}"
        )
    return EXIT_OK if outcome.passed else EXIT_CRITERIA


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def host_evaluations_per_second(config: RunConfig, samples: int = BENCH_SAMPLES) -> float:
    engine = QuantizedEngine(config.engine_config)
    d_fmt, r_fmt = engine.in_fmts
    rng = np.random.default_rng(config.seed)
    d = rng.integers(d_fmt.min_raw, d_fmt.max_raw + 1, samples)
    r = rng.integers(r_fmt.min_raw, r_fmt.max_raw + 1, samples)
    start = time.perf_counter()
    for distance, rate in zip(d.tolist(), r.tolist()):
        engine.evaluate(distance, rate)
    elapsed = time.perf_counter() - start
    return samples / elapsed if elapsed > 0 else float("inf")


def cmd_bench(
    config: RunConfig,
    cores: int = 4,
    clock_mhz: float = 279.25,
    output_dir: Optional[Path] = None,
) -> int:
    """Throughput at the requested point and at the published operating points.

    Exit 0 iff every published point with an expected figure is reproduced
    within ``GOPS_TOLERANCE``.
    """
    if cores < 1 or not clock_mhz > 0:
        raise UsageError("bench needs --cores >= 1 and --clock-mhz > 0")
    schedule = build_schedule(config.engine_config, config.systolic)

    header = ("point",) + ThroughputReport.HEADER
    rows = [("requested",) + system_throughput(schedule, cores, clock_mhz).row()]
    mismatches = []
    for point, report in operating_point_reports(schedule):
        rows.append((point.label,) + report.row())
        if point.expected_gops is not None and abs(report.gops - point.expected_gops) > GOPS_TOLERANCE:
            mismatches.append(point)
            logger.error(f"{point.label}: {report.gops:.4f} GOPS, expected {point.expected_gops:.2f}")

    sys.stdout.write(csv_text(header, rows))
    if output_dir is not None:
        write_csv(output_dir / "bench.csv", header, rows)
    print(format_table(header, rows), file=sys.stderr)

    rate = host_evaluations_per_second(config)
    logger.info(f"Host quantized engine: {rate:,.0f} evaluations/s")
    return EXIT_CRITERIA if mismatches else EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def cmd_run(config: RunConfig, trace_dir: Optional[Path] = None) -> int:
    try:
        report, trace = run_landing(config.setup(), record_trace=trace_dir is not None)
    except SimulationError as e:
        logger.error(f"Landing run aborted: {e}")
        return EXIT_CRITERIA

    if trace_dir is not None:
        write_landing_outputs(trace_dir, report, trace)
    sys.stdout.write(csv_text(LandingReport.HEADER, [report.row()]))
    print(landing_summary(report))
    return EXIT_OK if report.success else EXIT_CRITERIA


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def sweep_values(param: str, start: float, stop: float, steps: int) -> List[float]:
    if param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter '{param}'; choose from {', '.join(SWEEP_PARAMS)}")
    if steps < 1:
        raise UsageError("--steps must be at least 1")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise UsageError("--from and --to must be finite")
    values = np.linspace(start, stop, steps).tolist()
    if param in ("fault_step", "seed"):
        values = [float(round(v)) for v in values]
    return values


def sweep_setup(config: RunConfig, param: str, value: float) -> LandingSetup:
    """The landing setup of one sweep point.

    inclination and roll set the terrain's pitch and roll in degrees; noise
    scales both sensor sigmas; altitude sets the start height; seed replaces
    the seed. fault_step moves the first configured fault to start at that
    step, or injects a core 0 fail-stop there when none is configured.

    Raises:
        ValidationError: the value puts a section outside its valid range.
    """
    if param == "inclination":
        terrain = TerrainModel.model_validate({**config.terrain.model_dump(), "pitch_deg": value})
        config = config.model_copy(update={"terrain": terrain})
    elif param == "roll":
        terrain = TerrainModel.model_validate({**config.terrain.model_dump(), "roll_deg": value})
        config = config.model_copy(update={"terrain": terrain})
    elif param == "noise":
        base = config.sensors
        sensors = SensorModel.model_validate(
            {
                **base.model_dump(),
                "lidar_sigma_mm": base.lidar_sigma_mm * value,
                "radar_sigma_mm": base.radar_sigma_mm * value,
            }
        )
        config = config.model_copy(update={"sensors": sensors})
    elif param == "altitude":
        dynamics = DynamicsParams.model_validate({**config.dynamics.model_dump(), "initial_altitude_m": value})
        config = config.model_copy(update={"dynamics": dynamics})
    elif param == "seed":
        config = config.model_copy(update={"seed": RunConfig.model_validate({"seed": int(value)}).seed})
    elif param == "fault_step":
        step = int(value)
        if config.faults:
            first = config.faults[0]
            end = first.end_step
            if end is not None:
                end = step + (end - first.start_step)
            moved = FaultSpec.model_validate({**first.model_dump(), "start_step": step, "end_step": end})
            faults = [moved] + list(config.faults[1:])
        else:
            faults = [FaultSpec(target="core:0", start_step=step, mode="fail-stop")]
        config = config.model_copy(update={"faults": faults})
    return config.setup()


def _sweep_point(setup: LandingSetup) -> Optional[LandingReport]:
    try:
        report, _ = run_landing(setup, record_trace=False)
        return report
    except SimulationError as e:
        logger.error(f"Sweep run (seed {setup.seed}) aborted: {e}")
        return None


def cmd_sweep(
    config: RunConfig,
    param: str,
    start: float,
    stop: float,
    steps: int,
    jobs: int = 1,
    output_dir: Optional[Path] = None,
) -> int:
    """One landing per parameter value; success is data, aborted runs fail the sweep."""
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    values = sweep_values(param, start, stop, steps)
    setups = [sweep_setup(config, param, v) for v in values]
    logger.info(f"Sweeping {param} over {len(values)} points with {jobs} job(s)")

    if jobs > 1 and len(setups) > 1:
        with Pool(processes=min(jobs, len(setups))) as pool:
            reports = pool.map(_sweep_point, setups)
    else:
        reports = [_sweep_point(s) for s in setups]

    rows: List[Tuple] = []
    for value, report in zip(values, reports):
        if report is None:
            rows.append((param, value, setups[len(rows)].seed) + (None,) * (len(LandingReport.HEADER) - 1))
        else:
            rows.append((param, value) + report.row())

    sys.stdout.write(csv_text(SWEEP_HEADER, rows))
    if output_dir is not None:
        write_csv(output_dir / "sweep.csv", SWEEP_HEADER, rows)
    aborted = sum(r is None for r in reports)
    if aborted:
        logger.error(f"{aborted} of {len(reports)} sweep runs aborted")
    return EXIT_CRITERIA if aborted else EXIT_OK


# ---------------------------------------------------------------------------
# golden, serve
# ---------------------------------------------------------------------------


def cmd_golden(config: RunConfig, out: Path, source: Path = DEFAULT_GOLDEN) -> int:
    """Re-freeze reference outputs for the input pairs of ``source``."""
    pairs = [(e.distance_raw, e.rate_raw) for e in load_golden(source)]
    write_golden(config.engine_config, pairs, out)
    return EXIT_OK


def cmd_serve(host: str, port: int) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=host, port=port, log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algas2", description="Quad-core fuzzy landing guidance simulator.")
    parser.add_argument("--config", type=Path, help="run config JSON (default: ALGAS2_CONFIG or the shipped default)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), help="logging level")
    parser.add_argument("--output-dir", type=Path, help="directory for CSV outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="golden comparison and exhaustive error sweep")
    verify.add_argument("--golden", type=Path, default=DEFAULT_GOLDEN, help="golden sample CSV")
    verify.add_argument("--no-sweep", action="store_true", help="skip the exhaustive sweep")

    bench = sub.add_parser("bench", help="throughput accounting")
    bench.add_argument("--cores", type=int, default=4)
    bench.add_argument("--clock-mhz", type=float, default=279.25)

    run = sub.add_parser("run", help="one closed-loop landing")
    run.add_argument("--trace", type=Path, help="directory for trace and report CSVs")

    sweep = sub.add_parser("sweep", help="repeat landings across a parameter range")
    sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--steps", type=int, required=True)
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    golden = sub.add_parser("golden", help="regenerate a golden set from the reference evaluator")
    golden.add_argument("--out", type=Path, required=True)
    golden.add_argument("--source", type=Path, default=DEFAULT_GOLDEN, help="golden file supplying the input pairs")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _load_config(args: argparse.Namespace, settings) -> RunConfig:
    config = load_run_config(args.config or settings.config_path)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        config = config.model_copy(update={"seed": args.seed})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    settings = get_settings()
    logging.basicConfig(
        level=getattr(logging, args.log_level or settings.log_level, logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    if args.command == "serve":
        return cmd_serve(args.host, args.port)

    try:
        config = _load_config(args, settings)
        output_dir = args.output_dir or settings.output_dir or (Path(config.output_dir) if config.output_dir else None)
        if args.command == "verify":
            return cmd_verify(config, args.golden, not args.no_sweep, output_dir)
        if args.command == "bench":
            return cmd_bench(config, args.cores, args.clock_mhz, output_dir)
        if args.command == "run":
            return cmd_run(config, args.trace or output_dir)
        if args.command == "sweep":
            return cmd_sweep(config, args.param, args.start, args.stop, args.steps, args.jobs, output_dir)
        if args.command == "golden":
            return cmd_golden(config, args.out, args.source)
    except (ConfigError, FlsConfigError, FlsInputError, GoldenFileError, ScheduleError, UsageError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except ValidationError as e:
        logger.error(f"invalid configuration:\n{e}")
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
