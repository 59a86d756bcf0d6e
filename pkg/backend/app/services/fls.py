"""
Fuzzy logic engine: configuration model, real-valued reference oracle,
fixed-point evaluator and the golden-sample comparator.

Both evaluators implement the same zero-order system: min t-norm over the
rule antecedents and the weighted average of singleton consequents. The
reference runs in float64 on scikit-fuzzy membership functions; the quantized
evaluator carries every intermediate signal in its width-table format.
"""

import csv
import functools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import skfuzzy as fuzz
from pydantic import BaseModel, Field, FiniteFloat, ValidationError, field_validator, model_validator

from .fxp import (
    EmptyAggregationError,
    FxpValue,
    QFormat,
    div_round,
    div_round_array,
    quantize,
    sat_add,
    sat_mul,
)

logger = logging.getLogger(__name__)

# internal buses every engine must declare
REQUIRED_WIDTHS = (
    "degree",
    "strength",
    "consequent",
    "product",
    "lane_num",
    "lane_den",
    "num",
    "den",
    "quotient",
    "output",
    "status",
)

# input 0 is distance, input 1 is closure rate
INPUT_BITS = (11, 10)
# a landing touches a few thousand distinct input pairs
EVAL_CACHE_SIZE = 4096


class FlsConfigError(ValueError):
    """Engine configuration is malformed or violates an engine invariant."""


class FlsInputError(ValueError):
    """Crisp input does not fit its declared input format."""


class GoldenFileError(ValueError):
    """Golden sample file is missing, empty or unreadable."""


class MembershipFunction(BaseModel):
    label: str = ""
    kind: Literal["triangular", "trapezoidal"]
    breakpoints: List[FiniteFloat]

    @model_validator(mode="after")
    def _check_shape(self):
        expected = 3 if self.kind == "triangular" else 4
        if len(self.breakpoints) != expected:
            raise ValueError(
                f"{self.kind} membership function '{self.label}' needs {expected} breakpoints, got {len(self.breakpoints)}"
            )
        if any(b < a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError(f"breakpoints of '{self.label}' must be non-decreasing")
        return self

    def corners(self) -> Tuple[float, float, float, float]:
        """Breakpoints as (a, b, c, d); a triangle has c == b."""
        if self.kind == "triangular":
            a, b, c = self.breakpoints
            return a, b, b, c
        a, b, c, d = self.breakpoints
        return a, b, c, d


class InputSpec(BaseModel):
    name: str
    unit: str
    format: QFormat
    mfs: List[MembershipFunction] = Field(min_length=1)


class Rule(BaseModel):
    antecedents: List[int]
    consequent: int


class FlsEngineConfig(BaseModel):
    """Complete definition of one FLS engine."""

    name: str = "engine"
    inputs: List[InputSpec]
    rules: List[Rule]
    consequents: List[int]
    widths: Dict[str, QFormat]
    lane_width: int = Field(default=3, ge=1)
    hold_code: int = 0

    @field_validator("inputs")
    @classmethod
    def _two_inputs(cls, inputs: List[InputSpec]) -> List[InputSpec]:
        if len(inputs) != 2:
            raise ValueError(f"engine needs exactly 2 crisp inputs, got {len(inputs)}")
        for spec, bits in zip(inputs, INPUT_BITS):
            if spec.format.total_bits != bits:
                raise ValueError(
                    f"input '{spec.name}' must be {bits}-bit, got {spec.format.total_bits}"
                )
        return inputs

    @model_validator(mode="after")
    def _check_references(self):
        missing = [name for name in REQUIRED_WIDTHS if name not in self.widths]
        if missing:
            raise ValueError(f"width table lacks {', '.join(missing)}")

        used = [set() for _ in self.inputs]
        for idx, rule in enumerate(self.rules):
            if len(rule.antecedents) != len(self.inputs):
                raise ValueError(f"rule {idx} must name one MF per input")
            for axis, mf_idx in enumerate(rule.antecedents):
                if not 0 <= mf_idx < len(self.inputs[axis].mfs):
                    raise ValueError(f"rule {idx} references MF {mf_idx} of input {axis}, out of range")
                used[axis].add(mf_idx)
            if not 0 <= rule.consequent < len(self.consequents):
                raise ValueError(f"rule {idx} references consequent {rule.consequent}, out of range")

        if self.rules:
            for axis, spec in enumerate(self.inputs):
                orphans = set(range(len(spec.mfs))) - used[axis]
                if orphans:
                    raise ValueError(f"input '{spec.name}' has MFs no rule uses: {sorted(orphans)}")

        cons_fmt = self.widths["consequent"]
        for code in self.consequents:
            if not cons_fmt.contains(code):
                raise ValueError(f"consequent {code} does not fit {cons_fmt.describe()}")
        if not self.widths["output"].contains(self.hold_code):
            raise ValueError(f"hold code {self.hold_code} does not fit the output format")
        return self

    @property
    def output_format(self) -> QFormat:
        return self.widths["output"]

    def rule_consequents(self) -> List[int]:
        return [self.consequents[rule.consequent] for rule in self.rules]

    def mf_count(self) -> int:
        return sum(len(spec.mfs) for spec in self.inputs)


def load_engine_config(path: Path) -> FlsEngineConfig:
    """Read an engine JSON file.

    Raises:
        FlsConfigError: the file is missing or fails validation.
    """
    path = Path(path)
    try:
        return FlsEngineConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise FlsConfigError(f"engine config not found: {path}") from e
    except ValidationError as e:
        raise FlsConfigError(f"invalid engine config {path}: {e}") from e


def save_engine_config(config: FlsEngineConfig, path: Path) -> None:
    Path(path).write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Reference evaluator
# ---------------------------------------------------------------------------


def _mf_array(mf: MembershipFunction, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if mf.kind == "triangular":
        return fuzz.trimf(xs, mf.breakpoints)
    return fuzz.trapmf(xs, mf.breakpoints)


def membership_degree(mf: MembershipFunction, x: float) -> float:
    return float(_mf_array(mf, np.array([x], dtype=np.float64))[0])


def fuzzify(config: FlsEngineConfig, crisp: Sequence[float]) -> List[List[float]]:
    return [
        [membership_degree(mf, x) for mf in spec.mfs]
        for spec, x in zip(config.inputs, crisp)
    ]


def infer(config: FlsEngineConfig, degrees: Sequence[Sequence[float]]) -> List[float]:
    """Rule strengths by min t-norm over each rule's antecedent degrees."""
    return [
        min(degrees[axis][mf_idx] for axis, mf_idx in enumerate(rule.antecedents))
        for rule in config.rules
    ]


class Defuzzified(NamedTuple):
    value: float
    held: bool


def defuzzify(
    strengths: Sequence[float], consequents: Sequence[float], hold_value: float = 0.0
) -> Defuzzified:
    """Weighted average of singletons; an empty aggregation returns the hold value flagged."""
    den = math.fsum(strengths)
    if den <= 0.0:
        return Defuzzified(float(hold_value), True)
    num = math.fsum(w * c for w, c in zip(strengths, consequents))
    return Defuzzified(num / den, False)


def evaluate_reference(config: FlsEngineConfig, crisp: Sequence[float]) -> float:
    degrees = fuzzify(config, crisp)
    strengths = infer(config, degrees)
    return defuzzify(strengths, config.rule_consequents(), config.hold_code).value


def reference_grid(
    config: FlsEngineConfig, d_values: np.ndarray, r_values: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Reference output over the outer product of two input axes (physical units)."""
    d_deg = np.stack([_mf_array(mf, d_values) for mf in config.inputs[0].mfs], axis=1)
    r_deg = np.stack([_mf_array(mf, r_values) for mf in config.inputs[1].mfs], axis=1)
    shape = (len(d_values), len(r_values))
    num = np.zeros(shape)
    den = np.zeros(shape)
    for rule, code in zip(config.rules, config.rule_consequents()):
        i, j = rule.antecedents
        w = np.minimum(d_deg[:, i][:, None], r_deg[:, j][None, :])
        num += w * code
        den += w
    held = den <= 0.0
    out = np.where(held, float(config.hold_code), num / np.where(held, 1.0, den))
    return out, held


# ---------------------------------------------------------------------------
# Quantized evaluator
# ---------------------------------------------------------------------------


def _rescale_array(raw: np.ndarray, from_scale: int, to_scale: int) -> np.ndarray:
    shift = to_scale - from_scale
    if shift >= 0:
        return raw << shift
    half = 1 << (-shift - 1)
    return np.sign(raw) * ((np.abs(raw) + half) >> -shift)


@dataclass(frozen=True)
class _QuantizedMf:
    a: int
    b: int
    c: int
    d: int
    one: int

    @classmethod
    def compile(cls, mf: MembershipFunction, in_fmt: QFormat, degree_fmt: QFormat) -> "_QuantizedMf":
        a, b, c, d = (quantize(bp, in_fmt).raw for bp in mf.corners())
        return cls(a, b, c, d, degree_fmt.saturate(1 << degree_fmt.scale_pow2))

    def degree(self, x: int) -> int:
        if x < self.a or x > self.d:
            return 0
        if self.b <= x <= self.c:
            return self.one
        if x < self.b:
            return div_round(self.one * (x - self.a), self.b - self.a)
        return div_round(self.one * (self.d - x), self.d - self.c)

    def degree_array(self, xs: np.ndarray) -> np.ndarray:
        deg = np.zeros_like(xs)
        deg[(xs >= self.b) & (xs <= self.c)] = self.one
        if self.b > self.a:
            rising = (xs > self.a) & (xs < self.b)
            span = self.b - self.a
            deg[rising] = (2 * self.one * (xs[rising] - self.a) + span) // (2 * span)
        if self.d > self.c:
            falling = (xs > self.c) & (xs < self.d)
            span = self.d - self.c
            deg[falling] = (2 * self.one * (self.d - xs[falling]) + span) // (2 * span)
        return deg


class QuantizedEngine:
    """An FlsEngineConfig compiled into integer tables.

    The four stage methods are the datapath the systolic model streams
    through; ``evaluate`` composes them and ``evaluate_grid`` is the same
    arithmetic vectorized over an input grid.
    """

    def __init__(self, config: FlsEngineConfig, cache_size: int = EVAL_CACHE_SIZE):
        self.config = config
        w = config.widths
        self.in_fmts = [spec.format for spec in config.inputs]
        self.degree_fmt = w["degree"]
        self.strength_fmt = w["strength"]
        self.cons_fmt = w["consequent"]
        self.product_fmt = w["product"]
        self.lane_num_fmt = w["lane_num"]
        self.lane_den_fmt = w["lane_den"]
        self.num_fmt = w["num"]
        self.den_fmt = w["den"]
        self.quotient_fmt = w["quotient"]
        self.output_fmt = w["output"]
        self.hold_code = config.hold_code

        self._mfs = [
            [_QuantizedMf.compile(mf, spec.format, self.degree_fmt) for mf in spec.mfs]
            for spec in config.inputs
        ]
        self._rules = [tuple(rule.antecedents) for rule in config.rules]
        self._codes = config.rule_consequents()
        n = len(self._rules)
        self._lanes = [range(i, min(i + config.lane_width, n)) for i in range(0, n, config.lane_width)]
        self._evaluate_cached = functools.lru_cache(maxsize=cache_size)(self._evaluate_pair)

    def check_inputs(self, crisp: Sequence[int]) -> Tuple[int, int]:
        if len(crisp) != 2:
            raise FlsInputError(f"expected 2 crisp inputs, got {len(crisp)}")
        for value, fmt, spec in zip(crisp, self.in_fmts, self.config.inputs):
            if int(value) != value or not fmt.contains(int(value)):
                raise FlsInputError(
                    f"{spec.name} raw {value} outside {fmt.describe()} [{fmt.min_raw}, {fmt.max_raw}]"
                )
        return int(crisp[0]), int(crisp[1])

    # -- stages ------------------------------------------------------------

    def fuzzify(self, crisp: Tuple[int, int]) -> Tuple[Tuple[int, ...], ...]:
        return tuple(
            tuple(self.degree_fmt.saturate(mf.degree(x)) for mf in mfs)
            for mfs, x in zip(self._mfs, crisp)
        )

    def infer(self, degrees: Tuple[Tuple[int, ...], ...]) -> Tuple[int, ...]:
        return tuple(
            self.strength_fmt.saturate(min(degrees[axis][idx] for axis, idx in enumerate(rule)))
            for rule in self._rules
        )

    def accumulate(self, strengths: Tuple[int, ...]) -> Tuple[FxpValue, FxpValue]:
        num = FxpValue(0, self.num_fmt)
        den = FxpValue(0, self.den_fmt)
        for lane in self._lanes:
            lane_num = FxpValue(0, self.lane_num_fmt)
            lane_den = FxpValue(0, self.lane_den_fmt)
            for k in lane:
                w = FxpValue(strengths[k], self.strength_fmt)
                product = sat_mul(w, FxpValue(self._codes[k], self.cons_fmt), self.product_fmt)
                lane_num = sat_add(lane_num, product.resize(self.lane_num_fmt))
                lane_den = sat_add(lane_den, w.resize(self.lane_den_fmt))
            num = sat_add(num, lane_num.resize(self.num_fmt))
            den = sat_add(den, lane_den.resize(self.den_fmt))
        return num, den

    def divide(self, acc: Tuple[FxpValue, FxpValue], hold: Optional[int] = None) -> Tuple[int, bool]:
        num, den = acc
        # quotient raw = num / den expressed at the quotient scale
        k = den.format.scale_pow2 + self.quotient_fmt.scale_pow2 - num.format.scale_pow2
        n_raw, d_raw = (num.raw << k, den.raw) if k >= 0 else (num.raw, den.raw << -k)
        try:
            q = div_round(n_raw, d_raw)
        except EmptyAggregationError:
            return self.hold_code if hold is None else hold, True
        quotient = FxpValue(q, self.quotient_fmt)
        return quotient.resize(self.output_fmt).raw, False

    # -- composed ----------------------------------------------------------

    def evaluate(self, distance_raw: int, rate_raw: int, hold: Optional[int] = None) -> Tuple[int, bool]:
        """Evaluate one input pair; returns (output raw, held flag)."""
        hit = self._evaluate_cached(distance_raw, rate_raw)
        if hit[1] and hold is not None:
            return hold, True
        return hit

    def _evaluate_pair(self, distance_raw: int, rate_raw: int) -> Tuple[int, bool]:
        crisp = self.check_inputs((distance_raw, rate_raw))
        return self.divide(self.accumulate(self.infer(self.fuzzify(crisp))))

    def cache_info(self):
        return self._evaluate_cached.cache_info()

    def evaluate_grid(self, d_raw: np.ndarray, r_raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Outputs over the outer product of two raw input axes.

        Bitwise identical to ``evaluate`` at every grid point.
        """
        d_raw = np.asarray(d_raw, dtype=np.int64)
        r_raw = np.asarray(r_raw, dtype=np.int64)
        for values, fmt, spec in zip((d_raw, r_raw), self.in_fmts, self.config.inputs):
            if values.size and (values.min() < fmt.min_raw or values.max() > fmt.max_raw):
                raise FlsInputError(f"{spec.name} grid leaves {fmt.describe()}")

        d_deg = [self.degree_fmt.clip_array(mf.degree_array(d_raw)) for mf in self._mfs[0]]
        r_deg = [self.degree_fmt.clip_array(mf.degree_array(r_raw)) for mf in self._mfs[1]]
        shape = (len(d_raw), len(r_raw))
        num = np.zeros(shape, dtype=np.int64)
        den = np.zeros(shape, dtype=np.int64)
        product_scale = self.strength_fmt.scale_pow2 + self.cons_fmt.scale_pow2

        for lane in self._lanes:
            lane_num = np.zeros(shape, dtype=np.int64)
            lane_den = np.zeros(shape, dtype=np.int64)
            for k in lane:
                i, j = self._rules[k]
                w = self.strength_fmt.clip_array(np.minimum(d_deg[i][:, None], r_deg[j][None, :]))
                product = self.product_fmt.clip_array(
                    _rescale_array(w * self._codes[k], product_scale, self.product_fmt.scale_pow2)
                )
                lane_num = self.lane_num_fmt.clip_array(
                    lane_num
                    + self.lane_num_fmt.clip_array(
                        _rescale_array(product, self.product_fmt.scale_pow2, self.lane_num_fmt.scale_pow2)
                    )
                )
                lane_den = self.lane_den_fmt.clip_array(
                    lane_den
                    + self.lane_den_fmt.clip_array(
                        _rescale_array(w, self.strength_fmt.scale_pow2, self.lane_den_fmt.scale_pow2)
                    )
                )
            num = self.num_fmt.clip_array(
                num
                + self.num_fmt.clip_array(
                    _rescale_array(lane_num, self.lane_num_fmt.scale_pow2, self.num_fmt.scale_pow2)
                )
            )
            den = self.den_fmt.clip_array(
                den
                + self.den_fmt.clip_array(
                    _rescale_array(lane_den, self.lane_den_fmt.scale_pow2, self.den_fmt.scale_pow2)
                )
            )

        k = self.den_fmt.scale_pow2 + self.quotient_fmt.scale_pow2 - self.num_fmt.scale_pow2
        if k >= 0:
            num = num << k
        else:
            den = den << -k
        held = den <= 0
        quotient = self.quotient_fmt.clip_array(div_round_array(num, den))
        out = self.output_fmt.clip_array(
            _rescale_array(quotient, self.quotient_fmt.scale_pow2, self.output_fmt.scale_pow2)
        )
        out = np.where(held, self.hold_code, out)
        return out, held


_compiled: Dict[int, QuantizedEngine] = {}


def compile_engine(config: FlsEngineConfig) -> QuantizedEngine:
    """Compiled engine for ``config``, reused while the same object is passed."""
    engine = _compiled.get(id(config))
    if engine is None or engine.config is not config:
        if len(_compiled) > 32:
            _compiled.clear()
        engine = QuantizedEngine(config)
        _compiled[id(config)] = engine
    return engine


def evaluate_quantized(config: FlsEngineConfig, crisp: Sequence[int]) -> int:
    """Fixed-point evaluation of one raw input pair.

    Raises:
        FlsInputError: an input raw value does not fit its format.
    """
    engine = compile_engine(config)
    distance, rate = engine.check_inputs(crisp)
    return engine.evaluate(distance, rate)[0]


def evaluate_quantized_flagged(
    config: FlsEngineConfig, crisp: Sequence[int], hold: Optional[int] = None
) -> Tuple[int, bool]:
    engine = compile_engine(config)
    distance, rate = engine.check_inputs(crisp)
    return engine.evaluate(distance, rate, hold)


# ---------------------------------------------------------------------------
# Golden comparison and exhaustive sweep
# ---------------------------------------------------------------------------


def relative_error(quantized: float, reference: float, floor: float) -> float:
    return abs(quantized - reference) / max(abs(reference), floor)


@dataclass(frozen=True)
class GoldenSample:
    crisp_inputs: Tuple[int, int]
    reference_output: float
    quantized_output: int
    relative_error: float
    held: bool = False


@dataclass(frozen=True)
class GoldenReport:
    samples: List[GoldenSample]
    max_relative_error: float

    def rows(self) -> List[Tuple]:
        return [
            (s.crisp_inputs[0], s.crisp_inputs[1], s.reference_output, s.quantized_output, s.relative_error)
            for s in self.samples
        ]


GOLDEN_HEADER = ("distance_raw", "rate_raw", "reference", "quantized", "relative_error")


def compare_golden(config: FlsEngineConfig, samples: Iterable[Sequence[int]]) -> GoldenReport:
    """Compare both evaluators on a list of raw input pairs."""
    engine = compile_engine(config)
    out_lsb = engine.output_fmt.lsb
    results: List[GoldenSample] = []
    for crisp in samples:
        pair = engine.check_inputs(crisp)
        physical = [raw * fmt.lsb for raw, fmt in zip(pair, engine.in_fmts)]
        reference = evaluate_reference(config, physical)
        raw, held = engine.evaluate(*pair)
        err = relative_error(raw * out_lsb, reference, out_lsb)
        results.append(GoldenSample(pair, reference, raw, err, held))
    worst = max((s.relative_error for s in results), default=0.0)
    logger.info(f"Golden comparison: {len(results)} samples, max relative error {worst:.4%}")
    return GoldenReport(results, worst)


@dataclass(frozen=True)
class SweepReport:
    evaluated: int
    held: int
    max_relative_error: float
    max_absolute_error: float
    worst_input: Tuple[int, int]


def sweep_errors(config: FlsEngineConfig, chunk_rows: int = 128) -> SweepReport:
    """Exhaustive comparison over every raw input pair of both input formats."""
    engine = compile_engine(config)
    d_fmt, r_fmt = engine.in_fmts
    d_axis = np.arange(d_fmt.min_raw, d_fmt.max_raw + 1, dtype=np.int64)
    r_axis = np.arange(r_fmt.min_raw, r_fmt.max_raw + 1, dtype=np.int64)
    out_lsb = engine.output_fmt.lsb

    worst_rel, worst_abs, worst_at, held_total = 0.0, 0.0, (int(d_axis[0]), int(r_axis[0])), 0
    for start in range(0, len(d_axis), chunk_rows):
        d_chunk = d_axis[start : start + chunk_rows]
        quantized, q_held = engine.evaluate_grid(d_chunk, r_axis)
        reference, _ = reference_grid(config, d_chunk * d_fmt.lsb, r_axis * r_fmt.lsb)
        diff = np.abs(quantized * out_lsb - reference)
        rel = diff / np.maximum(np.abs(reference), out_lsb)
        held_total += int(q_held.sum())
        idx = np.unravel_index(int(np.argmax(rel)), rel.shape)
        if rel[idx] > worst_rel:
            worst_rel = float(rel[idx])
            worst_at = (int(d_chunk[idx[0]]), int(r_axis[idx[1]]))
        worst_abs = max(worst_abs, float(diff.max()))

    evaluated = len(d_axis) * len(r_axis)
    logger.info(
        f"Sweep of {evaluated} input pairs: max relative error {worst_rel:.4%} at {worst_at}, "
        f"max absolute error {worst_abs:.3f}, {held_total} held"
    )
    return SweepReport(evaluated, held_total, worst_rel, worst_abs, worst_at)


@dataclass(frozen=True)
class GoldenEntry:
    distance_raw: int
    rate_raw: int
    reference_output: float


def load_golden(path: Path) -> List[GoldenEntry]:
    """Read a frozen golden set (distance_raw, rate_raw, reference_output)."""
    path = Path(path)
    if not path.is_file():
        raise GoldenFileError(f"golden file not found: {path}")
    entries: List[GoldenEntry] = []
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        try:
            for row in reader:
                entries.append(
                    GoldenEntry(int(row["distance_raw"]), int(row["rate_raw"]), float(row["reference_output"]))
                )
        except (KeyError, TypeError, ValueError) as e:
            raise GoldenFileError(f"malformed golden file {path}: {e}") from e
    if not entries:
        raise GoldenFileError(f"golden file {path} holds no samples")
    return entries


def write_golden(config: FlsEngineConfig, samples: Iterable[Sequence[int]], path: Path) -> List[GoldenEntry]:
    """Freeze reference outputs for ``samples`` into a golden file."""
    engine = compile_engine(config)
    entries = []
    for crisp in samples:
        d, r = engine.check_inputs(crisp)
        ref = evaluate_reference(config, [d * engine.in_fmts[0].lsb, r * engine.in_fmts[1].lsb])
        entries.append(GoldenEntry(d, r, ref))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("distance_raw", "rate_raw", "reference_output"))
        for e in entries:
            writer.writerow((e.distance_raw, e.rate_raw, f"{e.reference_output:.6f}"))
    logger.info(f"Wrote {len(entries)} golden samples to {path}")
    return entries


GOLDEN_DRIFT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class VerifyOutcome:
    golden: GoldenReport
    # (frozen entry, freshly computed reference) pairs that moved
    drifted: List[Tuple[GoldenEntry, float]]
    sweep: Optional[SweepReport]
    golden_ok: bool
    sweep_ok: bool

    @property
    def passed(self) -> bool:
        return self.golden_ok and self.sweep_ok and not self.drifted


def verify_engine(
    config: FlsEngineConfig,
    entries: Sequence[GoldenEntry],
    golden_budget: float,
    sweep_budget: float,
    sweep: bool = True,
) -> VerifyOutcome:
    """Golden comparison, frozen-reference drift check and optional sweep.

    The golden budget is strict (< budget), the sweep budget inclusive.
    """
    golden = compare_golden(config, [(e.distance_raw, e.rate_raw) for e in entries])
    drifted = [
        (e, s.reference_output)
        for e, s in zip(entries, golden.samples)
        if abs(e.reference_output - s.reference_output) > GOLDEN_DRIFT_TOLERANCE
    ]
    for entry, fresh in drifted:
        logger.error(
            f"Golden reference drifted at ({entry.distance_raw}, {entry.rate_raw}): "
            f"frozen {entry.reference_output:.6f}, oracle {fresh:.6f}"
        )
    result = sweep_errors(config) if sweep else None
    outcome = VerifyOutcome(
        golden=golden,
        drifted=drifted,
        sweep=result,
        golden_ok=golden.max_relative_error < golden_budget,
        sweep_ok=result is None or result.max_relative_error <= sweep_budget,
    )
    logger.info(
        f"Verify {'PASSED' if outcome.passed else 'FAILED'} "
        f"(golden ok={outcome.golden_ok}, sweep ok={outcome.sweep_ok}, drifted={len(drifted)})"
    )
    return outcome
