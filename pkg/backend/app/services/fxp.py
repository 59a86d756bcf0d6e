"""
Bit-exact fixed-point primitives shared by every quantized datapath.

A value is an integer ``raw`` interpreted as ``raw / 2**scale_pow2`` inside a
QFormat. All arithmetic saturates to the destination range; nothing wraps.
"""

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

Number = Union[int, float]


class FxpFormatError(ValueError):
    """Operands carry formats the operation cannot combine."""


class EmptyAggregationError(ArithmeticError):
    """Divider asked to divide by a zero rule-strength sum."""


class QFormat(BaseModel):
    """Width, signedness and binary scale of one fixed-point bus."""

    model_config = ConfigDict(frozen=True)

    total_bits: int = Field(ge=2, le=32)
    signed: bool = False
    scale_pow2: int = 0

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1)) if self.signed else 0

    @property
    def max_raw(self) -> int:
        if self.signed:
            return (1 << (self.total_bits - 1)) - 1
        return (1 << self.total_bits) - 1

    @property
    def lsb(self) -> float:
        return 2.0 ** (-self.scale_pow2)

    def saturate(self, raw: int) -> int:
        if raw > self.max_raw:
            return self.max_raw
        if raw < self.min_raw:
            return self.min_raw
        return raw

    def contains(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def clip_array(self, raw: np.ndarray) -> np.ndarray:
        return np.clip(raw, self.min_raw, self.max_raw)

    def describe(self) -> str:
        kind = "s" if self.signed else "u"
        return f"{kind}{self.total_bits}/2^{self.scale_pow2}"


@dataclass(frozen=True, slots=True)
class FxpValue:
    raw: int
    format: QFormat

    def __post_init__(self):
        # out-of-range raws are clamped, never rejected
        object.__setattr__(self, "raw", self.format.saturate(int(self.raw)))

    def to_real(self) -> float:
        return self.raw * 2.0 ** (-self.format.scale_pow2)

    def resize(self, fmt: QFormat) -> "FxpValue":
        """Move the value into ``fmt``: rescale with rounding, then saturate."""
        shift = fmt.scale_pow2 - self.format.scale_pow2
        if shift >= 0:
            return FxpValue(self.raw << shift, fmt)
        return FxpValue(_shift_round(self.raw, -shift), fmt)


def round_half_away(x: Number) -> int:
    """Round to the nearest integer, ties away from zero."""
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Cannot quantize non-finite value {x!r}")
    return int(Decimal(x).to_integral_value(rounding=ROUND_HALF_UP))


def _shift_round(raw: int, bits: int) -> int:
    # divide by 2**bits, ties away from zero
    half = 1 << (bits - 1)
    if raw >= 0:
        return (raw + half) >> bits
    return -((-raw + half) >> bits)


def quantize(x: Number, fmt: QFormat) -> FxpValue:
    """Quantize a real number into ``fmt``.

    Args:
        x: Real value in the format's physical units.
        fmt: Destination format.

    Returns:
        FxpValue whose raw is ``round_half_away(x * 2**scale_pow2)`` saturated
        to the format range. Infinities saturate to the matching rail; NaN
        maps to raw 0, which every format contains.
    """
    scaled = x * (2.0**fmt.scale_pow2)
    if math.isnan(scaled):
        return FxpValue(0, fmt)
    if math.isinf(scaled):
        return FxpValue(fmt.max_raw if scaled > 0 else fmt.min_raw, fmt)
    return FxpValue(round_half_away(scaled), fmt)


def dequantize(value: FxpValue) -> float:
    return value.to_real()


def sat_add(a: FxpValue, b: FxpValue) -> FxpValue:
    if a.format != b.format:
        raise FxpFormatError(
            f"sat_add needs matching formats, got {a.format.describe()} and {b.format.describe()}"
        )
    return FxpValue(a.raw + b.raw, a.format)


def sat_mul(a: FxpValue, b: FxpValue, out_fmt: QFormat) -> FxpValue:
    """Multiply into the declared product format.

    The exact product lives at scale ``a.scale + b.scale``; it is rescaled to
    ``out_fmt`` with round-half-away-from-zero and saturated.
    """
    product_scale = a.format.scale_pow2 + b.format.scale_pow2
    raw = a.raw * b.raw
    shift = out_fmt.scale_pow2 - product_scale
    if shift >= 0:
        return FxpValue(raw << shift, out_fmt)
    return FxpValue(_shift_round(raw, -shift), out_fmt)


def div_round(num: int, den: int) -> int:
    """Integer divide with round-half-up.

    Raises:
        EmptyAggregationError: den is zero.
        ValueError: den is negative.
    """
    if den == 0:
        raise EmptyAggregationError("empty aggregation: zero denominator")
    if den < 0:
        raise ValueError(f"div_round needs a positive denominator, got {den}")
    return (2 * num + den) // (2 * den)


def div_round_array(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Vector form of div_round; callers mask out zero denominators."""
    safe = np.where(den > 0, den, 1)
    return (2 * num + safe) // (2 * safe)
