"""
Closed-loop V/STOL descent simulator.

A 3-DOF plant (heave, roll, pitch) over an inclined terrain plane, four corner
lidar/radar pods, fault and jam injection, and the per-step loop that ties
four independent cores and the hub together.

Frame: world z up; body x forward, y left, z up. Positive roll raises the left
side, positive pitch lowers the front. Body-to-world rotation is Ry(pitch) Rx(roll).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import ClassVar, Dict, FrozenSet, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .core import (
    CORNER_SIGNS,
    CoreCommand,
    CoreConfig,
    CoreParams,
    CoreState,
    FusionParams,
    HoaSample,
    SensorBlackoutError,
    SiuOutput,
    core_step,
    siu_fuse,
)
from .fls import FlsEngineConfig, QuantizedEngine
from .interconnect import CORE_COUNT, DISTANCE_MAX_RAW, HubParams, HubState, exchange, ni_collect

logger = logging.getLogger(__name__)

# fault-stream draws per step: 8 sensor garbage, 4 core codes, 4 core trims, 4 hub distances
_FAULT_DRAWS = 20


class SimulationError(RuntimeError):
    """The plant left its physical envelope; the run is aborted."""


class DynamicsParams(BaseModel):
    g: float = Field(default=9.81, gt=0)
    hover_code: int = Field(default=128, ge=1, le=254)
    dt: float = Field(default=0.001, gt=0)
    k_att: float = 0.005
    tau_att: float = Field(default=0.1, gt=0)
    step_limit: int = Field(default=60000, ge=0)
    initial_altitude_m: float = Field(default=10.0, ge=0)
    initial_v_z: float = 0.0
    initial_roll_deg: float = 0.0
    initial_pitch_deg: float = 0.0
    gear_height: float = Field(default=0.0, ge=0)

    @property
    def a_max(self) -> float:
        """Braking acceleration at code 0; the map passes through g at ``hover_code``."""
        return self.g * 255.0 / (255 - self.hover_code)

    def thrust_accel(self, mean_code: float) -> float:
        return min(self.a_max, max(0.0, self.g * (255.0 - mean_code) / (255 - self.hover_code)))


class TerrainModel(BaseModel):
    roll_deg: float = Field(default=0.0, ge=-45, le=45)
    pitch_deg: float = Field(default=0.0, ge=-45, le=45)
    elevation_m: float = 0.0

    def normal(self) -> np.ndarray:
        return rotation(math.radians(self.roll_deg), math.radians(self.pitch_deg))[:, 2]


class JamSpec(BaseModel):
    sensor: Literal["lidar", "radar"]
    corner: int = Field(ge=0, le=CORE_COUNT - 1)
    start_step: int = Field(ge=0)
    end_step: Optional[int] = None
    mode: Literal["bias", "garbage"] = "garbage"
    bias_mm: float = 0.0

    def active(self, step: int) -> bool:
        return self.start_step <= step and (self.end_step is None or step < self.end_step)


class SensorModel(BaseModel):
    lidar_sigma_mm: float = Field(default=2.0, ge=0)
    radar_sigma_mm: float = Field(default=5.0, ge=0)
    dropout_probability: float = Field(default=0.0, ge=0, le=1)
    max_range_mm: int = Field(default=DISTANCE_MAX_RAW * 10, gt=0)
    jams: List[JamSpec] = Field(default_factory=list)


class FaultSpec(BaseModel):
    """``target`` is ``core:<i>``, ``lidar:<i>``, ``radar:<i>`` or ``hub``."""

    target: str
    start_step: int = Field(ge=0)
    end_step: Optional[int] = None
    mode: Literal["fail-stop", "garbage"] = "fail-stop"

    @field_validator("target")
    @classmethod
    def _check_target(cls, target: str) -> str:
        if target == "hub":
            return target
        kind, _, index = target.partition(":")
        if kind not in ("core", "lidar", "radar") or index not in {str(i) for i in range(CORE_COUNT)}:
            raise ValueError(f"fault target '{target}' must be core:<0-3>, lidar:<0-3>, radar:<0-3> or hub")
        return target

    @model_validator(mode="after")
    def _check_window(self):
        if self.end_step is not None and self.end_step < self.start_step:
            raise ValueError("fault end_step precedes start_step")
        return self

    @property
    def kind(self) -> str:
        return self.target.partition(":")[0]

    @property
    def index(self) -> int:
        return -1 if self.target == "hub" else int(self.target.partition(":")[2])

    def active(self, step: int) -> bool:
        return self.start_step <= step and (self.end_step is None or step < self.end_step)


class Criteria(BaseModel):
    v_max_mps: float = Field(default=0.5, gt=0)
    theta_max_deg: float = Field(default=3.0, gt=0)
    degraded_v_max_mps: float = Field(default=1.0, gt=0)
    degraded_theta_max_deg: float = Field(default=5.0, gt=0)
    golden_max_relative_error: float = Field(default=0.03, gt=0)
    sweep_max_relative_error: float = Field(default=0.05, gt=0)


@dataclass(frozen=True, slots=True)
class VehicleState:
    altitude_m: float
    v_z: float
    roll_rad: float = 0.0
    pitch_rad: float = 0.0
    roll_rate: float = 0.0
    pitch_rate: float = 0.0

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.altitude_m, self.v_z, self.roll_rad, self.pitch_rad, self.roll_rate, self.pitch_rate)
        )


@dataclass(frozen=True)
class ActiveFaults:
    failed_cores: FrozenSet[int] = frozenset()
    garbage_cores: FrozenSet[int] = frozenset()
    sensors: Dict[Tuple[str, int], str] = field(default_factory=dict)
    hub: Optional[str] = None

    @property
    def any(self) -> bool:
        return bool(self.failed_cores or self.garbage_cores or self.sensors or self.hub)


class LandingReport(BaseModel):
    touchdown: bool
    touchdown_speed_mps: float
    touchdown_inclination_error_rad: float
    steps_elapsed: int
    success: bool
    degraded: bool
    seed: int = 0

    HEADER: ClassVar[Tuple[str, ...]] = (
        "seed",
        "touchdown",
        "touchdown_speed_mps",
        "touchdown_inclination_error_deg",
        "steps_elapsed",
        "success",
        "degraded",
    )

    @property
    def inclination_error_deg(self) -> float:
        return math.degrees(self.touchdown_inclination_error_rad)

    def row(self) -> Tuple:
        return (
            self.seed,
            int(self.touchdown),
            self.touchdown_speed_mps,
            self.inclination_error_deg,
            self.steps_elapsed,
            int(self.success),
            int(self.degraded),
        )


class VehicleTraceRow(NamedTuple):
    step: int
    time_s: float
    altitude_m: float
    v_z: float
    roll_deg: float
    pitch_deg: float
    lowest_corner_m: float
    code_0: Optional[int]
    code_1: Optional[int]
    code_2: Optional[int]
    code_3: Optional[int]
    trim_0: Optional[int]
    trim_1: Optional[int]
    trim_2: Optional[int]
    trim_3: Optional[int]


class CoreTraceRow(NamedTuple):
    step: int
    core: int
    lidar: Optional[int]
    radar: Optional[int]
    fused: int
    health: str
    closure_rate: int
    roll: int
    pitch: int
    confidence: str
    descent_code: int
    thrust_trim: int


class HubTraceRow(NamedTuple):
    tick: int
    slot: int
    src: str
    seq: Optional[int]
    delivered: str


@dataclass
class LandingTrace:
    vehicle: List[VehicleTraceRow] = field(default_factory=list)
    cores: List[CoreTraceRow] = field(default_factory=list)
    hub: List[HubTraceRow] = field(default_factory=list)


@dataclass(frozen=True)
class LandingSetup:
    """Everything one landing run depends on."""

    engine: FlsEngineConfig
    fusion: FusionParams = field(default_factory=FusionParams)
    core: CoreParams = field(default_factory=CoreParams)
    hub: HubParams = field(default_factory=HubParams)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    terrain: TerrainModel = field(default_factory=TerrainModel)
    sensors: SensorModel = field(default_factory=SensorModel)
    faults: Tuple[FaultSpec, ...] = ()
    criteria: Criteria = field(default_factory=Criteria)
    seed: int = 0


def rotation(roll: float, pitch: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    return ry @ rx


def corner_offsets(geometry: CoreParams) -> np.ndarray:
    return np.array(
        [[sx * geometry.half_span_x_m, sy * geometry.half_span_y_m, 0.0] for sx, sy in CORNER_SIGNS]
    )


def corner_geometry(
    state: VehicleState, terrain: TerrainModel, geometry: CoreParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-corner (height above the terrain plane, range along body-down)."""
    rot = rotation(state.roll_rad, state.pitch_rad)
    normal = terrain.normal()
    cg = np.array([0.0, 0.0, terrain.elevation_m + state.altitude_m])
    corners = cg + corner_offsets(geometry) @ rot.T
    heights = (corners - np.array([0.0, 0.0, terrain.elevation_m])) @ normal
    facing = float(normal @ rot[:, 2])
    ranges = heights / facing if facing > 1e-6 else np.full(CORE_COUNT, np.inf)
    return heights, ranges


def inclination_error(state: VehicleState, terrain: TerrainModel) -> float:
    body_z = rotation(state.roll_rad, state.pitch_rad)[:, 2]
    return float(math.acos(min(1.0, max(-1.0, float(body_z @ terrain.normal())))))


def step_dynamics(
    state: VehicleState, commands: Sequence[Optional[CoreCommand]], params: DynamicsParams, dt: float
) -> VehicleState:
    """Advance the plant one explicit Euler step.

    Collective thrust is the affine map of the mean code through a_max at code 0,
    g at ``hover_code`` and zero at 255, along body z, averaged over the cores
    that issued a command; none means no thrust.
    Roll follows right-minus-left trims, pitch front-minus-rear, each through
    a first-order rate response.
    """
    live = [c for c in commands if c is not None]
    if live:
        mean_code = sum(c.descent_code for c in live) / len(live)
        accel = params.thrust_accel(mean_code)
    else:
        accel = 0.0
    trims = [c.thrust_trim if c is not None else 0 for c in commands]
    roll_cmd = params.k_att * ((trims[1] + trims[3]) - (trims[0] + trims[2]))
    pitch_cmd = params.k_att * ((trims[0] + trims[1]) - (trims[2] + trims[3]))

    vz_dot = accel * math.cos(state.roll_rad) * math.cos(state.pitch_rad) - params.g
    return VehicleState(
        altitude_m=state.altitude_m + state.v_z * dt,
        v_z=state.v_z + vz_dot * dt,
        roll_rad=state.roll_rad + state.roll_rate * dt,
        pitch_rad=state.pitch_rad + state.pitch_rate * dt,
        roll_rate=state.roll_rate + (roll_cmd - state.roll_rate) / params.tau_att * dt,
        pitch_rate=state.pitch_rate + (pitch_cmd - state.pitch_rate) / params.tau_att * dt,
    )


def sample_sensors(
    state: VehicleState,
    terrain: TerrainModel,
    model: SensorModel,
    geometry: CoreParams,
    rng: np.random.Generator,
    step: int = 0,
) -> List[HoaSample]:
    """Four corner readings: body-down range to the terrain plus noise, dropout and jams.

    The same number of random draws is taken every step whatever the model
    settings, so enabling a jam never shifts another sensor's noise.
    """
    _, ranges = corner_geometry(state, terrain, geometry)
    noise_lidar = rng.normal(size=CORE_COUNT)
    noise_radar = rng.normal(size=CORE_COUNT)
    dropout = rng.random(size=2 * CORE_COUNT)
    garbage = rng.random(size=2 * CORE_COUNT)

    limit = float(model.max_range_mm)
    readings = {
        "lidar": np.minimum(ranges * 1000.0, limit) + noise_lidar * model.lidar_sigma_mm,
        "radar": np.minimum(ranges * 1000.0, limit) + noise_radar * model.radar_sigma_mm,
    }
    for jam in model.jams:
        if jam.active(step):
            slot = jam.corner + (CORE_COUNT if jam.sensor == "radar" else 0)
            if jam.mode == "bias":
                readings[jam.sensor][jam.corner] += jam.bias_mm
            else:
                readings[jam.sensor][jam.corner] = garbage[slot] * limit

    samples = []
    for i in range(CORE_COUNT):
        lidar = int(np.clip(np.rint(readings["lidar"][i]), 0, limit))
        radar = int(np.clip(np.rint(readings["radar"][i]), 0, limit))
        samples.append(
            HoaSample(
                lidar_mm=lidar,
                radar_mm=radar,
                step=step,
                lidar_valid=bool(dropout[i] >= model.dropout_probability),
                radar_valid=bool(dropout[CORE_COUNT + i] >= model.dropout_probability),
            )
        )
    return samples


def apply_faults(plan: Sequence[FaultSpec], step: int) -> ActiveFaults:
    """Faults whose window covers ``step``."""
    failed, garbage, sensors, hub = set(), set(), {}, None
    for fault in plan:
        if not fault.active(step):
            continue
        if fault.kind == "core":
            (failed if fault.mode == "fail-stop" else garbage).add(fault.index)
        elif fault.kind == "hub":
            hub = fault.mode
        else:
            sensors[(fault.kind, fault.index)] = fault.mode
    return ActiveFaults(frozenset(failed), frozenset(garbage - failed), sensors, hub)


def _fault_sensors(
    samples: List[HoaSample], active: ActiveFaults, draws: np.ndarray, limit: int
) -> List[HoaSample]:
    if not active.sensors:
        return samples
    out = list(samples)
    for (kind, corner), mode in active.sensors.items():
        sample = out[corner]
        if mode == "fail-stop":
            out[corner] = replace(sample, **{f"{kind}_valid": False})
        else:
            slot = corner + (CORE_COUNT if kind == "radar" else 0)
            out[corner] = replace(sample, **{f"{kind}_mm": int(draws[slot] * limit)})
    return out


def _touched(heights: np.ndarray, gear_height: float = 0.0) -> bool:
    return bool(heights.min() <= gear_height)


def run_landing(setup: LandingSetup, record_trace: bool = True) -> Tuple[LandingReport, LandingTrace]:
    """Fly one descent until touchdown or the step limit.

    Each step: sample sensors, fuse per core, exchange last step's distances
    through the hub, step the four cores, integrate the plant. Deterministic
    for a given setup and seed.

    Raises:
        SimulationError: the state became non-finite or broke the energy bound.
    """
    dyn = setup.dynamics
    dt = dyn.dt
    sensor_seq, fault_seq = np.random.SeedSequence(setup.seed).spawn(2)
    rng_sensor = np.random.default_rng(sensor_seq)
    rng_fault = np.random.default_rng(fault_seq)

    engine = QuantizedEngine(setup.engine)
    core_config = CoreConfig(engine, setup.core, setup.fusion, dt)
    states = [CoreState.initial(i, setup.engine.hold_code) for i in range(CORE_COUNT)]
    outgoing = [None] * CORE_COUNT
    hub = HubState()
    trace = LandingTrace()

    vehicle = VehicleState(
        altitude_m=dyn.initial_altitude_m,
        v_z=dyn.initial_v_z,
        roll_rad=math.radians(dyn.initial_roll_deg),
        pitch_rad=math.radians(dyn.initial_pitch_deg),
    )
    speed_bound = abs(dyn.initial_v_z)
    degraded = False
    logger.info(
        f"Landing run: seed {setup.seed}, altitude {dyn.initial_altitude_m} m, terrain "
        f"roll {setup.terrain.roll_deg} deg pitch {setup.terrain.pitch_deg} deg, {len(setup.faults)} faults"
    )

    heights, _ = corner_geometry(vehicle, setup.terrain, setup.core)
    step = 0
    touched = _touched(heights, dyn.gear_height)
    while not touched and step < dyn.step_limit:
        active = apply_faults(setup.faults, step)
        samples = sample_sensors(vehicle, setup.terrain, setup.sensors, setup.core, rng_sensor, step)
        draws = rng_fault.random(_FAULT_DRAWS)
        samples = _fault_sensors(samples, active, draws, setup.sensors.max_range_mm)
        if active.any or any(jam.active(step) for jam in setup.sensors.jams):
            if not degraded:
                logger.warning(f"Fault or jam active from step {step}; degraded thresholds apply")
            degraded = True

        sius: List[Optional[SiuOutput]] = []
        for i in range(CORE_COUNT):
            if i in active.failed_cores:
                sius.append(None)
                continue
            try:
                sius.append(siu_fuse(samples[i], states[i], setup.fusion, dt))
            except SensorBlackoutError as e:
                logger.warning(str(e))
                degraded = True
                sius.append(SiuOutput.blackout_output(step, states[i]))

        posts = [m for i, m in enumerate(outgoing) if m is not None and i not in active.failed_cores]
        if active.hub == "garbage":
            posts = [replace(m, fused_distance_raw=int(draws[16 + m.src_core] * DISTANCE_MAX_RAW)) for m in posts]
        ticks = 0 if active.hub == "fail-stop" else setup.hub.ticks_per_step
        hub, hub_log = exchange(hub, posts, ticks)

        commands: List[Optional[CoreCommand]] = [None] * CORE_COUNT
        for i in range(CORE_COUNT):
            if sius[i] is None:
                outgoing[i] = None
                continue
            command, message, states[i] = core_step(states[i], sius[i], ni_collect(hub, i, step), core_config)
            if i in active.garbage_cores:
                command = replace(
                    command,
                    descent_code=int(draws[8 + i] * 256) % 256,
                    thrust_trim=int(draws[12 + i] * 256) - 128,
                )
                if message is not None:
                    message = replace(message, fused_distance_raw=int(draws[8 + i] * DISTANCE_MAX_RAW))
            commands[i] = command
            outgoing[i] = message

        vehicle = step_dynamics(vehicle, commands, dyn, dt)
        step += 1
        if not vehicle.is_finite():
            raise SimulationError(f"non-finite vehicle state at step {step}: {vehicle}")
        if abs(vehicle.v_z) > speed_bound + (dyn.g + dyn.a_max) * step * dt + 1e-9:
            raise SimulationError(f"vertical speed {vehicle.v_z:.3f} m/s broke the energy bound at step {step}")

        heights, _ = corner_geometry(vehicle, setup.terrain, setup.core)
        touched = _touched(heights, dyn.gear_height)

        if record_trace:
            _record(trace, step - 1, dt, vehicle, heights, samples, sius, commands, states, hub_log)

    incl = inclination_error(vehicle, setup.terrain) if touched else 0.0
    speed = abs(vehicle.v_z) if touched else 0.0
    crit = setup.criteria
    v_max = crit.degraded_v_max_mps if degraded else crit.v_max_mps
    theta_max = math.radians(crit.degraded_theta_max_deg if degraded else crit.theta_max_deg)
    report = LandingReport(
        touchdown=touched,
        touchdown_speed_mps=speed,
        touchdown_inclination_error_rad=incl,
        steps_elapsed=step,
        success=touched and speed <= v_max and incl <= theta_max,
        degraded=degraded,
        seed=setup.seed,
    )
    if touched:
        logger.info(
            f"Touchdown after {step} steps at {speed:.3f} m/s, inclination error "
            f"{math.degrees(incl):.2f} deg, success={report.success}, degraded={degraded}"
        )
    else:
        logger.warning(f"No touchdown within {step} steps")
    return report, trace


def _record(
    trace: LandingTrace,
    step: int,
    dt: float,
    vehicle: VehicleState,
    heights: np.ndarray,
    samples: List[HoaSample],
    sius: List[Optional[SiuOutput]],
    commands: List[Optional[CoreCommand]],
    states: List[CoreState],
    hub_log,
) -> None:
    codes = [c.descent_code if c is not None else None for c in commands]
    trims = [c.thrust_trim if c is not None else None for c in commands]
    trace.vehicle.append(
        VehicleTraceRow(
            step,
            (step + 1) * dt,
            vehicle.altitude_m,
            vehicle.v_z,
            math.degrees(vehicle.roll_rad),
            math.degrees(vehicle.pitch_rad),
            float(heights.min()),
            *codes,
            *trims,
        )
    )
    for i, (sample, siu, command) in enumerate(zip(samples, sius, commands)):
        if siu is None or command is None:
            continue
        estimate = states[i].estimate
        trace.cores.append(
            CoreTraceRow(
                step,
                i,
                sample.lidar_mm if sample.lidar_valid else None,
                sample.radar_mm if sample.radar_valid else None,
                siu.fused_distance_raw,
                siu.health.value,
                siu.closure_rate_raw,
                estimate.roll_mrad,
                estimate.pitch_mrad,
                command.confidence.value,
                command.descent_code,
                command.thrust_trim,
            )
        )
    for tick, broadcast in hub_log:
        if broadcast is None:
            trace.hub.append(HubTraceRow(tick, tick % CORE_COUNT, "idle", None, ""))
        else:
            trace.hub.append(
                HubTraceRow(
                    tick,
                    broadcast.slot,
                    str(broadcast.message.src_core),
                    broadcast.message.seq,
                    format(broadcast.delivered_mask, "04b"),
                )
            )
