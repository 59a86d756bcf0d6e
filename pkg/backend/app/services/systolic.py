"""
Cycle-level model of the FLS engine as a systolic pipeline.

One operation is one arithmetic unit busy for one cycle in steady state, so a
schedule's ops/cycle is the sum of its stage unit counts and throughput is
clock times ops/cycle.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field

from .fls import FlsEngineConfig, QuantizedEngine, compile_engine

logger = logging.getLogger(__name__)


class ScheduleError(ValueError):
    """Engine cannot be mapped onto the configured systolic resources."""


class SystolicParams(BaseModel):
    max_rule_units: int = Field(default=64, ge=1)
    fuzzify_latency: int = Field(default=2, ge=1)
    divider_latency: int = Field(default=10, ge=1)
    initiation_interval: int = Field(default=1, ge=1)


@dataclass(frozen=True)
class PipelineStage:
    name: str
    latency_cycles: int
    parallel_ops: int

    def __post_init__(self):
        if self.latency_cycles < 1:
            raise ScheduleError(f"stage {self.name} needs latency >= 1, got {self.latency_cycles}")
        if self.parallel_ops < 0:
            raise ScheduleError(f"stage {self.name} has negative unit count")


@dataclass(frozen=True)
class PipelineSchedule:
    stages: Tuple[PipelineStage, ...]
    initiation_interval: int = 1

    @property
    def depth(self) -> int:
        return sum(stage.latency_cycles for stage in self.stages)


@dataclass(frozen=True)
class ThroughputReport:
    ops_per_cycle_per_core: int
    cores: int
    system_ops_per_cycle: int
    clock_mhz: float
    gops: float
    pipeline_depth_cycles: int = 0
    latency_ns: float = 0.0

    HEADER = (
        "ops_per_cycle_per_core",
        "cores",
        "system_ops_per_cycle",
        "clock_mhz",
        "gops",
        "pipeline_depth_cycles",
        "latency_ns",
    )

    def row(self) -> Tuple:
        return (
            self.ops_per_cycle_per_core,
            self.cores,
            self.system_ops_per_cycle,
            f"{self.clock_mhz:.2f}",
            f"{self.gops:.2f}",
            self.pipeline_depth_cycles,
            f"{self.latency_ns:.2f}",
        )


@dataclass(frozen=True)
class OperatingPoint:
    label: str
    cores: int
    clock_mhz: float
    expected_gops: Optional[float] = None


# Published operating points; the first is the system figure bench must reproduce.
REFERENCE_OPERATING_POINTS = (
    OperatingPoint("quad-core, fast timing model", 4, 279.25, 21.22),
    OperatingPoint("quad-core, slow timing model", 4, 252.40, None),
    OperatingPoint("five-engine cross-check", 5, 266.03, 25.27),
)


def build_schedule(config: FlsEngineConfig, params: Optional[SystolicParams] = None) -> PipelineSchedule:
    """Map an engine onto fuzzify, rule-min, weighted-accumulate and divide stages.

    Args:
        config: Engine to schedule.
        params: Unit budget and stage latencies.

    Returns:
        PipelineSchedule with one unit per membership function, one min unit
        per rule, one multiply-add lane per ``lane_width`` rules and a single
        pipelined divider.

    Raises:
        ScheduleError: empty rule base or more rules than rule units.
    """
    params = params or SystolicParams()
    n_rules = len(config.rules)
    if n_rules == 0:
        raise ScheduleError("rule base is empty; nothing to schedule")
    if n_rules > params.max_rule_units:
        raise ScheduleError(f"{n_rules} rules exceed the budget of {params.max_rule_units} rule units")

    lanes = math.ceil(n_rules / config.lane_width)
    n_inputs = len(config.inputs)
    stages = (
        PipelineStage("fuzzify", params.fuzzify_latency, config.mf_count()),
        PipelineStage("rule_min", max(1, math.ceil(math.log2(n_inputs))), n_rules),
        PipelineStage("accumulate", 1 + math.ceil(math.log2(config.lane_width)), lanes),
        PipelineStage("divide", params.divider_latency, 1),
    )
    schedule = PipelineSchedule(stages, params.initiation_interval)
    logger.debug(f"Built schedule: {[(s.name, s.latency_cycles, s.parallel_ops) for s in stages]}")
    return schedule


def ops_per_cycle(schedule: PipelineSchedule) -> int:
    return sum(stage.parallel_ops for stage in schedule.stages)


def system_throughput(schedule: PipelineSchedule, cores: int, clock_mhz: float) -> ThroughputReport:
    per_core = ops_per_cycle(schedule)
    system_ops = per_core * cores
    gops = clock_mhz * 1e6 * system_ops / 1e9
    latency_ns = schedule.depth * 1e3 / clock_mhz if clock_mhz > 0 else 0.0
    return ThroughputReport(per_core, cores, system_ops, clock_mhz, gops, schedule.depth, latency_ns)


def operating_point_reports(schedule: PipelineSchedule) -> List[Tuple[OperatingPoint, ThroughputReport]]:
    return [(p, system_throughput(schedule, p.cores, p.clock_mhz)) for p in REFERENCE_OPERATING_POINTS]


@dataclass
class _Token:
    index: int
    value: Any


@dataclass
class PipelineSimulator:
    """Shift-register model of one engine pipeline.

    Each token advances one register per cycle; a stage's function is applied
    on the last cycle the token spends in that stage. Keeps its own cycle
    counter, so use one instance per stream.
    """

    schedule: PipelineSchedule
    engine: QuantizedEngine
    cycle: int = 0
    _slots: List[Optional[_Token]] = field(default_factory=list, init=False)
    _stage_fns: dict = field(default_factory=dict, init=False)

    def __post_init__(self):
        fns: Sequence[Callable[[Any], Any]] = (
            self.engine.fuzzify,
            self.engine.infer,
            self.engine.accumulate,
            lambda acc: self.engine.divide(acc)[0],
        )
        if len(fns) != len(self.schedule.stages):
            raise ScheduleError("schedule stages do not match the engine datapath")
        end = 0
        for stage, fn in zip(self.schedule.stages, fns):
            end += stage.latency_cycles
            self._stage_fns[end - 1] = fn
        self._slots = [None] * self.schedule.depth

    def run(self, inputs: Iterable[Sequence[int]]) -> Iterator[Tuple[int, int]]:
        pending = iter(inputs)
        exhausted = False
        index = 0
        ii = self.schedule.initiation_interval
        while True:
            self._slots = [None] + self._slots[:-1]
            if not exhausted and self.cycle % ii == 0:
                crisp = next(pending, None)
                if crisp is None:
                    exhausted = True
                else:
                    self._slots[0] = _Token(index, self.engine.check_inputs(crisp))
                    index += 1
            for pos, fn in self._stage_fns.items():
                token = self._slots[pos]
                if token is not None:
                    token.value = fn(token.value)
            done = self._slots[-1]
            if done is not None:
                yield done.value, self.cycle
            if exhausted and all(slot is None for slot in self._slots[:-1]):
                self.cycle += 1
                return
            self.cycle += 1


def simulate_pipeline(
    schedule: PipelineSchedule, inputs: Iterable[Sequence[int]], config: FlsEngineConfig
) -> Iterator[Tuple[int, int]]:
    """Stream (output raw, completion cycle) pairs in input order."""
    return PipelineSimulator(schedule, compile_engine(config)).run(inputs)
