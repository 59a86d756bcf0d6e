"""
One ALGAS2 core: SIU sensor fusion, the local FLS engine and the IICU
inclination estimator, composed into a pure per-step decision.

Corner layout (body frame, x forward, y left):
    core 0 FL (+Lx, +Ly)    core 1 FR (+Lx, -Ly)
    core 2 RL (-Lx, +Ly)    core 3 RR (-Lx, -Ly)
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .fls import QuantizedEngine
from .fxp import QFormat, quantize, round_half_away
from .interconnect import CORE_COUNT, NIMessage

logger = logging.getLogger(__name__)

DISTANCE_FMT = QFormat(total_bits=11, signed=False)
RATE_FMT = QFormat(total_bits=10, signed=True)
TRIM_FMT = QFormat(total_bits=8, signed=True)

# (x sign, y sign) per core id
CORNER_SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
CORNER_NAMES = ("FL", "FR", "RL", "RR")


class SensorBlackoutError(RuntimeError):
    """Both sensors of a corner are invalid this step."""


class Health(str, Enum):
    NOMINAL = "NOMINAL"
    LIDAR_SUSPECT = "LIDAR_SUSPECT"
    RADAR_SUSPECT = "RADAR_SUSPECT"
    DEGRADED = "DEGRADED"


class Confidence(str, Enum):
    FULL = "FULL"
    PARTIAL = "PARTIAL"
    NONE = "NONE"


_HEALTH_CODE = {h: i for i, h in enumerate(Health)}
_CONFIDENCE_CODE = {c: i for i, c in enumerate(Confidence)}


class FusionParams(BaseModel):
    agreement_threshold_mm: int = Field(default=200, ge=0)
    rate_window_steps: int = Field(default=50, ge=1)


class CoreParams(BaseModel):
    half_span_x_m: float = Field(default=0.5, gt=0)
    half_span_y_m: float = Field(default=0.5, gt=0)
    k_trim: float = 0.1
    staleness_bound_steps: int = Field(default=1, ge=0)


@dataclass(frozen=True, slots=True)
class HoaSample:
    lidar_mm: int
    radar_mm: int
    step: int
    lidar_valid: bool = True
    radar_valid: bool = True

    def __post_init__(self):
        if self.lidar_mm < 0 or self.radar_mm < 0:
            raise ValueError("sensor distances must be non-negative")


@dataclass(frozen=True, slots=True)
class SiuOutput:
    fused_distance_raw: int
    closure_rate_raw: int
    health: Health
    fused_distance_mm: int = 0
    step: int = 0
    blackout: bool = False

    @classmethod
    def blackout_output(cls, step: int, state: Optional["CoreState"] = None) -> "SiuOutput":
        last_mm = state.history[-1][1] if state is not None and state.history else 0
        rate = state.closure_rate_raw if state is not None else 0
        return cls(
            quantize(last_mm / 10.0, DISTANCE_FMT).raw, rate, Health.DEGRADED, last_mm, step, True
        )


@dataclass(frozen=True, slots=True)
class IicuEstimate:
    roll_mrad: int = 0
    pitch_mrad: int = 0
    confidence: Confidence = Confidence.NONE


@dataclass(frozen=True, slots=True)
class CoreCommand:
    descent_code: int
    thrust_trim: int
    source_core: int
    step: int
    degraded: bool = False
    held: bool = False
    confidence: Confidence = Confidence.NONE
    status: int = 0

    def __post_init__(self):
        if not 0 <= self.descent_code <= 255:
            raise ValueError(f"descent code {self.descent_code} does not fit 8 bits")


@dataclass(frozen=True, slots=True)
class CoreState:
    core_id: int
    # (step, fused mm), oldest first, covering the rate window
    history: Tuple[Tuple[int, int], ...] = ()
    closure_rate_raw: int = 0
    hold_output: int = 0
    # per core id: (distance raw, seq) of the latest neighbour message
    neighbors: Tuple[Optional[Tuple[int, int]], ...] = (None,) * CORE_COUNT
    estimate: IicuEstimate = field(default_factory=IicuEstimate)

    @classmethod
    def initial(cls, core_id: int, hold_output: int = 0) -> "CoreState":
        if not 0 <= core_id < CORE_COUNT:
            raise ValueError(f"core id {core_id} outside 0..{CORE_COUNT - 1}")
        return cls(core_id=core_id, hold_output=hold_output)


@dataclass(frozen=True)
class CoreConfig:
    engine: QuantizedEngine
    params: CoreParams = field(default_factory=CoreParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    dt: float = 0.001


def derive_closure_rate(current_mm: float, previous_mm: float, dt: float) -> int:
    """Backward-difference closure rate in raw cm/s, positive when approaching."""
    if dt <= 0:
        return 0
    rate_cms = (previous_mm - current_mm) / 10.0 / dt
    return quantize(rate_cms, RATE_FMT).raw


def _prediction_mm(state: CoreState, step: int, dt: float) -> Optional[float]:
    if not state.history:
        return None
    last_step, last_mm = state.history[-1]
    return last_mm - state.closure_rate_raw * 10.0 * dt * (step - last_step)


def siu_fuse(sample: HoaSample, state: CoreState, params: FusionParams, dt: float = 0.001) -> SiuOutput:
    """Fuse one corner's lidar and radar readings.

    Args:
        sample: Raw readings for this step.
        state: The owning core's state; supplies the prediction and the rate window.
        params: Agreement threshold and rate window length.
        dt: Control step in seconds.

    Returns:
        SiuOutput with saturated raw distance and closure rate.

    Raises:
        SensorBlackoutError: neither sensor is valid.
    """
    lidar, radar = sample.lidar_mm, sample.radar_mm
    if sample.lidar_valid and sample.radar_valid:
        if abs(lidar - radar) <= params.agreement_threshold_mm:
            fused_mm = round_half_away((lidar + radar) / 2.0)
            health = Health.NOMINAL
        else:
            predicted = _prediction_mm(state, sample.step, dt)
            if predicted is None:
                # no track yet: trust the nearer reading
                use_lidar = lidar <= radar
            else:
                use_lidar = abs(lidar - predicted) <= abs(radar - predicted)
            fused_mm = lidar if use_lidar else radar
            health = Health.RADAR_SUSPECT if use_lidar else Health.LIDAR_SUSPECT
    elif sample.lidar_valid:
        fused_mm, health = lidar, Health.DEGRADED
    elif sample.radar_valid:
        fused_mm, health = radar, Health.DEGRADED
    else:
        raise SensorBlackoutError(f"core {state.core_id}: both sensors invalid at step {sample.step}")

    window_start = sample.step - params.rate_window_steps
    oldest = next((entry for entry in state.history if entry[0] >= window_start), None)
    # a span shorter than half the window is too coarse to difference
    if oldest is None or sample.step - oldest[0] < max(1, params.rate_window_steps // 2):
        rate_raw = 0
    else:
        rate_raw = derive_closure_rate(fused_mm, oldest[1], (sample.step - oldest[0]) * dt)

    return SiuOutput(
        quantize(fused_mm / 10.0, DISTANCE_FMT).raw, rate_raw, health, int(fused_mm), sample.step
    )


def iicu_update(
    own_core: int,
    own_distance_m: Optional[float],
    neighbor_distances: Mapping[int, Tuple[float, int]],
    geometry: CoreParams,
    previous: Optional[IicuEstimate] = None,
) -> IicuEstimate:
    """Estimate landing-surface roll and pitch relative to the body axes.

    Args:
        own_core: Core id of the caller; places ``own_distance_m``.
        own_distance_m: The caller's fused distance, or None during blackout.
        neighbor_distances: core id -> (distance in metres, staleness in steps).
        geometry: Half-spans and the staleness bound.
        previous: Estimate returned unchanged (confidence NONE) when fewer than
            three corners are known.
    """
    distances: Dict[int, float] = {}
    if own_distance_m is not None:
        distances[own_core] = own_distance_m
    for core_id, (distance_m, staleness) in neighbor_distances.items():
        if core_id != own_core and 0 <= staleness <= geometry.staleness_bound_steps:
            distances[core_id] = distance_m

    lx, ly = geometry.half_span_x_m, geometry.half_span_y_m
    if len(distances) == CORE_COUNT:
        d_fl, d_fr, d_rl, d_rr = (distances[i] for i in range(CORE_COUNT))
        pitch = math.atan(((d_fl + d_fr) / 2 - (d_rl + d_rr) / 2) / (2 * lx))
        roll = math.atan(((d_fl + d_rl) / 2 - (d_fr + d_rr) / 2) / (2 * ly))
        confidence = Confidence.FULL
    elif len(distances) == 3:
        ids = sorted(distances)
        a = np.array([[1.0, CORNER_SIGNS[i][0] * lx, CORNER_SIGNS[i][1] * ly] for i in ids])
        b = np.array([distances[i] for i in ids])
        _, grad_x, grad_y = np.linalg.solve(a, b)
        pitch = math.atan(grad_x)
        roll = math.atan(grad_y)
        confidence = Confidence.PARTIAL
    else:
        held = previous or IicuEstimate()
        return IicuEstimate(held.roll_mrad, held.pitch_mrad, Confidence.NONE)

    return IicuEstimate(round_half_away(roll * 1000.0), round_half_away(pitch * 1000.0), confidence)


def thrust_trim(core_id: int, estimate: IicuEstimate, k_trim: float) -> int:
    """Per-corner leveling trim; positive lowers the corner."""
    if estimate.confidence is Confidence.NONE:
        return 0
    x_sign, y_sign = CORNER_SIGNS[core_id]
    raw = round_half_away(k_trim * (y_sign * estimate.roll_mrad + x_sign * estimate.pitch_mrad))
    return TRIM_FMT.saturate(raw)


def status_word(held: bool, blackout: bool, confidence: Confidence, health: Health, degraded: bool) -> int:
    return (
        int(held)
        | int(blackout) << 1
        | _CONFIDENCE_CODE[confidence] << 2
        | _HEALTH_CODE[health] << 4
        | int(degraded) << 6
    )


InboxItem = Union[NIMessage, Tuple[NIMessage, int]]


def core_step(
    state: CoreState, siu: SiuOutput, inbox: Iterable[InboxItem], config: CoreConfig
) -> Tuple[CoreCommand, Optional[NIMessage], CoreState]:
    """One independent decision step of one core.

    Pure in its arguments: the same state, SIU output, inbox and config always
    give the same command, outgoing message and successor state.

    Returns:
        (command, outgoing message or None during blackout, new state)
    """
    core_id = state.core_id
    step = siu.step

    neighbors: List[Optional[Tuple[int, int]]] = list(state.neighbors)
    for item in inbox:
        msg = item[0] if isinstance(item, tuple) else item
        if msg.src_core == core_id:
            continue
        known = neighbors[msg.src_core]
        if known is None or msg.seq >= known[1]:
            neighbors[msg.src_core] = (msg.fused_distance_raw, msg.seq)

    neighbor_m = {
        i: (entry[0] / 100.0, step - entry[1])
        for i, entry in enumerate(neighbors)
        if entry is not None and i != core_id
    }
    own_m = None if siu.blackout else siu.fused_distance_raw / 100.0
    estimate = iicu_update(core_id, own_m, neighbor_m, config.params, state.estimate)

    if siu.blackout:
        code, held = state.hold_output, True
        history = state.history
        rate_raw = state.closure_rate_raw
    else:
        code, held = config.engine.evaluate(siu.fused_distance_raw, siu.closure_rate_raw, state.hold_output)
        window_start = step - config.fusion.rate_window_steps
        history = tuple(e for e in state.history if e[0] >= window_start) + ((step, siu.fused_distance_mm),)
        rate_raw = siu.closure_rate_raw
    if held and not siu.blackout:
        logger.warning(f"Core {core_id}: empty aggregation at step {step}, holding code {code}")

    degraded = siu.blackout or siu.health is Health.DEGRADED
    status_fmt = config.engine.config.widths["status"]
    command = CoreCommand(
        descent_code=code,
        thrust_trim=thrust_trim(core_id, estimate, config.params.k_trim),
        source_core=core_id,
        step=step,
        degraded=degraded,
        held=held,
        confidence=estimate.confidence,
        status=status_fmt.saturate(status_word(held, siu.blackout, estimate.confidence, siu.health, degraded)),
    )
    outgoing = None if siu.blackout else NIMessage(core_id, siu.fused_distance_raw, step)
    new_state = CoreState(
        core_id=core_id,
        history=history,
        closure_rate_raw=rate_raw,
        hold_output=state.hold_output if held else code,
        neighbors=tuple(neighbors),
        estimate=estimate,
    )
    return command, outgoing, new_state
