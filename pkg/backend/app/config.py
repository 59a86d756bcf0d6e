"""
Run configuration: one JSON document whose sections mirror the service
modules, plus environment overrides for the process.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .services.core import CoreParams, FusionParams
from .services.fls import FlsConfigError, FlsEngineConfig, load_engine_config
from .services.interconnect import HubParams
from .services.scenario import (
    Criteria,
    DynamicsParams,
    FaultSpec,
    LandingSetup,
    SensorModel,
    TerrainModel,
)
from .services.systolic import SystolicParams

logger = logging.getLogger(__name__)

PACKAGE_DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_RUN_CONFIG = PACKAGE_DATA_DIR / "algas2_default.json"
DEFAULT_ENGINE_CONFIG = PACKAGE_DATA_DIR / "engine_default.json"
DEFAULT_GOLDEN = PACKAGE_DATA_DIR / "golden_samples.csv"


class ConfigError(ValueError):
    """Run configuration is missing or invalid."""


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    engine: Union[FlsEngineConfig, str] = DEFAULT_ENGINE_CONFIG.name
    fusion: FusionParams = Field(default_factory=FusionParams)
    core: CoreParams = Field(default_factory=CoreParams)
    hub: HubParams = Field(default_factory=HubParams)
    dynamics: DynamicsParams = Field(default_factory=DynamicsParams)
    terrain: TerrainModel = Field(default_factory=TerrainModel)
    sensors: SensorModel = Field(default_factory=SensorModel)
    faults: List[FaultSpec] = Field(default_factory=list)
    criteria: Criteria = Field(default_factory=Criteria)
    systolic: SystolicParams = Field(default_factory=SystolicParams)
    seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = None

    @property
    def engine_config(self) -> FlsEngineConfig:
        if not isinstance(self.engine, FlsEngineConfig):
            raise ConfigError("engine reference has not been resolved")
        return self.engine

    def setup(self) -> LandingSetup:
        return LandingSetup(
            engine=self.engine_config,
            fusion=self.fusion,
            core=self.core,
            hub=self.hub,
            dynamics=self.dynamics,
            terrain=self.terrain,
            sensors=self.sensors,
            faults=tuple(self.faults),
            criteria=self.criteria,
            seed=self.seed,
        )


def resolve_engine(config: RunConfig, base_dir: Path) -> RunConfig:
    """Replace a path-valued engine section with the loaded engine config.

    Relative paths are tried against the run config's directory, then against
    the packaged data directory.
    """
    if isinstance(config.engine, FlsEngineConfig):
        return config
    candidate = Path(config.engine)
    if not candidate.is_absolute():
        local = base_dir / candidate
        candidate = local if local.exists() else PACKAGE_DATA_DIR / candidate
    try:
        engine = load_engine_config(candidate)
    except FlsConfigError as e:
        raise ConfigError(str(e)) from e
    return config.model_copy(update={"engine": engine})


def load_run_config(path: Optional[Path] = None) -> RunConfig:
    """Load, validate and resolve a run config file.

    Raises:
        ConfigError: file missing, not JSON, or failing validation.
    """
    path = Path(path) if path else DEFAULT_RUN_CONFIG
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read run config {path}: {e}") from e
    try:
        config = RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"invalid run config {path}:\n{e}") from e
    config = resolve_engine(config, path.parent)
    logger.info(f"Loaded run config {path} (engine '{config.engine_config.name}', seed {config.seed})")
    return config


def config_digest(config: RunConfig) -> str:
    """Stable SHA-256 of a resolved config's canonical JSON."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Settings(BaseModel):
    config_path: Path = DEFAULT_RUN_CONFIG
    output_dir: Optional[Path] = None
    golden_path: Path = DEFAULT_GOLDEN
    log_level: str = "INFO"
    data_dir: Path = Path("data")
    run_retention_minutes: int = 60
    cleanup_interval_minutes: int = 10


def get_settings() -> Settings:
    """Process settings from ALGAS2_* environment variables with defaults.

    Callers run ``load_dotenv()`` first so a local ``.env`` file applies.
    """
    def _int(name: str, default: int) -> int:
        raw = os.getenv(name, "").strip()
        if not raw:
            return default
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
            return default

    output_dir = os.getenv("ALGAS2_OUTPUT_DIR", "").strip()
    settings = Settings(
        config_path=Path(os.getenv("ALGAS2_CONFIG", "").strip() or DEFAULT_RUN_CONFIG),
        output_dir=Path(output_dir) if output_dir else None,
        golden_path=Path(os.getenv("ALGAS2_GOLDEN", "").strip() or DEFAULT_GOLDEN),
        log_level=(os.getenv("ALGAS2_LOG_LEVEL", "INFO").strip() or "INFO").upper(),
        data_dir=Path(os.getenv("ALGAS2_DATA_DIR", "").strip() or "data"),
        run_retention_minutes=_int("ALGAS2_RUN_RETENTION_MINUTES", 60),
        cleanup_interval_minutes=_int("ALGAS2_CLEANUP_INTERVAL_MINUTES", 10),
    )

    logger.info("=== ALGAS2 Settings ===")
    logger.info(f"Run config: {settings.config_path}")
    logger.info(f"Output dir: {settings.output_dir or '(none)'}")
    logger.info(f"Golden samples: {settings.golden_path}")
    logger.info(f"Data dir: {settings.data_dir}")
    logger.info(f"Run retention: {settings.run_retention_minutes} min")
    logger.info("=======================")
    return settings
