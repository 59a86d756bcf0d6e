import asyncio
import logging
from contextlib import asynccontextmanager
from dataclasses import asdict
from typing import List, Literal, Optional

import aiofiles
from dotenv import load_dotenv
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import RunConfig, Settings, config_digest, get_settings, load_run_config
from .services.cleanup_service import CleanupService
from .services.fls import (
    FlsInputError,
    GoldenFileError,
    compile_engine,
    evaluate_reference,
    load_golden,
    relative_error,
    verify_engine,
)
from .services.reports import csv_text
from .services.run_cache import RunCache
from .services.scenario import (
    CoreTraceRow,
    FaultSpec,
    HubTraceRow,
    LandingReport,
    SimulationError,
    TerrainModel,
    VehicleTraceRow,
    run_landing,
)
from .services.systolic import ScheduleError, build_schedule, operating_point_reports, system_throughput

load_dotenv()

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

TRACE_FILES = {
    "vehicle": "trace.csv",
    "cores": "core_trace.csv",
    "hub": "hub_trace.csv",
    "report": "report.csv",
}


class EvaluateRequest(BaseModel):
    distance_raw: int
    rate_raw: int


class VerifyRequest(BaseModel):
    sweep: bool = False


class RunRequest(BaseModel):
    seed: Optional[int] = Field(default=None, ge=0)
    terrain: Optional[TerrainModel] = None
    faults: Optional[List[FaultSpec]] = None
    trace: bool = True


def create_app(settings: Optional[Settings] = None, run_config: Optional[RunConfig] = None) -> FastAPI:
    """Build the service around one validated run config.

    The run cache and the cleanup loop live under ``settings.data_dir`` and
    are created when the application starts.
    """
    settings = settings or get_settings()
    base_config = run_config or load_run_config(settings.config_path)
    runs_dir = settings.data_dir / "runs"

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        runs_dir.mkdir(parents=True, exist_ok=True)
        app.state.run_cache = RunCache(str(settings.data_dir / "runs.sqlite3"))
        app.state.cleanup = CleanupService(
            runs_dir=str(runs_dir),
            cleanup_interval_minutes=settings.cleanup_interval_minutes,
            run_max_age_minutes=settings.run_retention_minutes,
            run_cache=app.state.run_cache,
        )
        app.state.cleanup.start_background_task()
        logger.info(f"ALGAS2 service started (engine '{base_config.engine_config.name}', data dir {settings.data_dir})")

        yield

        await app.state.cleanup.stop()
        logger.info("Stopped cleanup service")

    app = FastAPI(
        title="ALGAS2 API",
        description="Quad-core fuzzy landing guidance simulator",
        version=__version__,
        lifespan=lifespan,
    )
    app.state.settings = settings
    app.state.run_config = base_config

    @app.get("/api/health")
    async def health():
        return {
            "status": "ok",
            "version": __version__,
            "engine": base_config.engine_config.name,
            "cleanup": app.state.cleanup.get_status(),
        }

    @app.get("/api/engine")
    async def get_engine():
        return base_config.engine_config.model_dump(mode="json")

    @app.post("/api/evaluate")
    async def evaluate(request: EvaluateRequest):
        """Reference and quantized outputs for one raw input pair."""
        engine_config = base_config.engine_config
        engine = compile_engine(engine_config)
        try:
            d, r = engine.check_inputs((request.distance_raw, request.rate_raw))
        except FlsInputError as e:
            raise HTTPException(status_code=400, detail=str(e))
        reference = evaluate_reference(engine_config, [d * engine.in_fmts[0].lsb, r * engine.in_fmts[1].lsb])
        quantized, held = engine.evaluate(d, r)
        out_lsb = engine.output_fmt.lsb
        return {
            "distance_raw": d,
            "rate_raw": r,
            "reference": reference,
            "quantized": quantized,
            "held": held,
            "relative_error": relative_error(quantized * out_lsb, reference, out_lsb),
        }

    @app.get("/api/bench")
    async def bench(cores: int = Query(default=4, ge=1), clock_mhz: float = Query(default=279.25, gt=0)):
        try:
            schedule = build_schedule(base_config.engine_config, base_config.systolic)
        except ScheduleError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {
            "requested": asdict(system_throughput(schedule, cores, clock_mhz)),
            "operating_points": [
                {"label": point.label, "expected_gops": point.expected_gops, **asdict(report)}
                for point, report in operating_point_reports(schedule)
            ],
        }

    @app.post("/api/verify")
    async def verify(request: VerifyRequest = VerifyRequest()):
        crit = base_config.criteria

        def _verify():
            return verify_engine(
                base_config.engine_config,
                load_golden(settings.golden_path),
                crit.golden_max_relative_error,
                crit.sweep_max_relative_error,
                sweep=request.sweep,
            )

        loop = asyncio.get_running_loop()
        try:
            outcome = await loop.run_in_executor(None, _verify)
        except GoldenFileError as e:
            raise HTTPException(status_code=500, detail=str(e))

        golden = outcome.golden
        result = {
            "samples": [
                {
                    "distance_raw": s.crisp_inputs[0],
                    "rate_raw": s.crisp_inputs[1],
                    "reference": s.reference_output,
                    "quantized": s.quantized_output,
                    "relative_error": s.relative_error,
                }
                for s in golden.samples
            ],
            "max_relative_error": golden.max_relative_error,
            "drifted": [
                {
                    "distance_raw": entry.distance_raw,
                    "rate_raw": entry.rate_raw,
                    "frozen": entry.reference_output,
                    "reference": fresh,
                }
                for entry, fresh in outcome.drifted
            ],
        }
        if outcome.sweep is not None:
            result["sweep"] = asdict(outcome.sweep)
        result["passed"] = outcome.passed
        return result

    @app.post("/api/runs")
    async def create_run(request: RunRequest = RunRequest()):
        """Fly one landing, or serve it from the cache when the config was seen before."""
        update = {}
        if request.seed is not None:
            update["seed"] = request.seed
        if request.terrain is not None:
            update["terrain"] = request.terrain
        if request.faults is not None:
            update["faults"] = request.faults
        config = base_config.model_copy(update=update)
        run_id = config_digest(config)
        cache: RunCache = app.state.run_cache
        cleanup: CleanupService = app.state.cleanup

        cached = cache.get_report(run_id)
        trace_dir = cache.get_trace_dir(run_id)
        if cached is not None and (not request.trace or (trace_dir is not None and trace_dir.exists())):
            return {"run_id": run_id, "cached": True, "report": cached.model_dump()}

        setup = config.setup()
        cleanup.add_active_run(run_id)
        try:
            loop = asyncio.get_running_loop()
            try:
                report, trace = await loop.run_in_executor(None, run_landing, setup, request.trace)
            except SimulationError as e:
                logger.error(f"Run {run_id[:12]} aborted: {e}")
                raise HTTPException(status_code=500, detail=f"Landing run aborted: {e}")

            run_dir = None
            if request.trace:
                run_dir = runs_dir / run_id
                run_dir.mkdir(parents=True, exist_ok=True)
                payloads = {
                    "vehicle": csv_text(VehicleTraceRow._fields, trace.vehicle),
                    "cores": csv_text(CoreTraceRow._fields, trace.cores),
                    "hub": csv_text(HubTraceRow._fields, trace.hub),
                    "report": csv_text(LandingReport.HEADER, [report.row()]),
                }
                for kind, text in payloads.items():
                    async with aiofiles.open(run_dir / TRACE_FILES[kind], "w", encoding="utf-8") as f:
                        await f.write(text)

            cache.save_run(run_id, config.model_dump(mode="json"), report, str(run_dir) if run_dir else None)
        finally:
            cleanup.remove_active_run(run_id)

        return {"run_id": run_id, "cached": False, "report": report.model_dump()}

    @app.get("/api/runs")
    async def list_runs(limit: int = Query(default=50, ge=1, le=500)):
        return {"runs": app.state.run_cache.list_runs(limit)}

    @app.get("/api/runs/{run_id}")
    async def get_run(run_id: str):
        report = app.state.run_cache.get_report(run_id)
        if report is None:
            raise HTTPException(status_code=404, detail="Run not found")
        return {"run_id": run_id, "report": report.model_dump()}

    @app.get("/api/runs/{run_id}/trace")
    async def get_trace(run_id: str, kind: Literal["vehicle", "cores", "hub", "report"] = "vehicle"):
        cache: RunCache = app.state.run_cache
        if cache.get_report(run_id) is None:
            raise HTTPException(status_code=404, detail="Run not found")
        trace_dir = cache.get_trace_dir(run_id)
        path = trace_dir / TRACE_FILES[kind] if trace_dir is not None else None
        if path is None or not path.is_file():
            raise HTTPException(status_code=404, detail="Trace files no longer available")
        return FileResponse(path, media_type="text/csv", filename=f"{run_id[:12]}_{TRACE_FILES[kind]}")

    return app


app = create_app()
