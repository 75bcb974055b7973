"""Signed fixed-point formats and integer quantization of parameters.

A value in format (b, f) is a signed integer i in [-2^(b-1), 2^(b-1)-1]
standing for the real number i * 2^(-f).  Data streams use the
all-fractional format f = b - 1 so activations cover [-1, 1); weight
formats are chosen per block from the largest weight magnitude.  Biases
are quantized straight into the accumulator scale (frac f_data + f_weight)
so adding them to a channel sum needs no alignment shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from convforge.errors import EmptyWeightsError, OutOfRangeError

# ---------------------------------------------------------------------------
# Formats
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPointFormat:
    """Two's-complement Q-format: `bits` total, `frac` fractional."""

    bits: int
    frac: int

    def __post_init__(self):
        if not 2 <= self.bits <= 32:
            raise ValueError(f"total bits must be in [2, 32], got {self.bits}")
        if not 0 <= self.frac <= self.bits - 1:
            raise ValueError(
                f"frac bits must be in [0, {self.bits - 1}], got {self.frac}"
            )

    @property
    def min_code(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def max_code(self) -> int:
        return (1 << (self.bits - 1)) - 1

    @property
    def min_real(self) -> float:
        return math.ldexp(self.min_code, -self.frac)

    @property
    def max_real(self) -> float:
        return math.ldexp(self.max_code, -self.frac)

    def __str__(self):
        return f"Q{self.bits}.{self.frac}"


def data_format(bits: int) -> FixedPointFormat:
    """The stream format: all bits after the sign are fractional."""
    return FixedPointFormat(bits=bits, frac=bits - 1)


# ---------------------------------------------------------------------------
# Scalar quantization
# ---------------------------------------------------------------------------


def quantize(x: float, fmt: FixedPointFormat) -> int:
    """Round x * 2^frac to the nearest integer (ties to even), saturating."""
    code = round(x * (1 << fmt.frac))  # Python round() is half-to-even
    if code < fmt.min_code:
        return fmt.min_code
    if code > fmt.max_code:
        return fmt.max_code
    return code


def dequantize(i: int, fmt: FixedPointFormat) -> float:
    if not fmt.min_code <= i <= fmt.max_code:
        raise OutOfRangeError(
            f"integer {i} outside {fmt} range [{fmt.min_code}, {fmt.max_code}]"
        )
    return math.ldexp(i, -fmt.frac)


_EPS = 2.0 ** -40  # nudges exact powers of two up one integer bit


def choose_weight_format(weights, bits: int) -> FixedPointFormat:
    """Pick the fractional split that fits the largest weight magnitude.

    frac = bits - 1 - max(0, ceil(log2(max|w| + eps))).  `weights` may be a
    whole WeightSet, a single block, or any iterable of reals; biases do not
    participate (they are quantized at accumulator scale).
    """
    if hasattr(weights, "blocks"):
        values = (v for blk in weights.blocks for v in blk.iter_values())
    elif hasattr(weights, "iter_values"):
        values = weights.iter_values()
    else:
        values = iter(weights)

    peak = -1.0
    for v in values:
        peak = max(peak, abs(v))
    if peak < 0.0:
        raise EmptyWeightsError("cannot choose a format for an empty weight set")

    int_bits = max(0, math.ceil(math.log2(peak + _EPS))) if peak > 0.0 else 0
    frac = max(0, bits - 1 - int_bits)
    return FixedPointFormat(bits=bits, frac=frac)


# ---------------------------------------------------------------------------
# Tensor quantization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantizedTensor:
    dims: tuple[int, int, int, int]  # (N, C, K, K)
    values: tuple  # nested [n][c][ky][kx] tuples of int
    fmt: FixedPointFormat

    def iter_values(self):
        for per_channel in self.values:
            for kernel in per_channel:
                for row in kernel:
                    yield from row


@dataclass(frozen=True)
class QuantizedBlock:
    weights: QuantizedTensor
    biases: tuple  # ints at accumulator scale
    weight_fmt: FixedPointFormat
    bias_frac: int  # f_data + f_weight
    bias_bits: int  # post-bias accumulator width the biases must fit


@dataclass(frozen=True)
class QuantizedWeights:
    blocks: tuple  # of QuantizedBlock
    data_fmt: FixedPointFormat


def quantize_weights(weights, data_fmt: FixedPointFormat,
                     weight_fmt) -> QuantizedWeights:
    """Quantize every weight and bias of a WeightSet.

    `weight_fmt` is either one FixedPointFormat applied to all blocks or a
    sequence with one format per block.  Biases land on the accumulator
    scale: bias integer = round(b * 2^(f_data + f_weight)), saturated to the
    post-bias accumulator width (unreachable for any sane bias).
    """
    from convforge.dhm_ir import accumulator_plan  # deferred, avoids a cycle

    if isinstance(weight_fmt, FixedPointFormat):
        per_block = [weight_fmt] * len(weights.blocks)
    else:
        per_block = list(weight_fmt)
        if len(per_block) != len(weights.blocks):
            raise ValueError(
                f"{len(per_block)} weight formats for "
                f"{len(weights.blocks)} blocks"
            )

    out = []
    for blk, wfmt in zip(weights.blocks, per_block):
        n, c, k, _ = blk.dims
        plan = accumulator_plan(k, c, data_fmt, wfmt)
        wq = tuple(
            tuple(
                tuple(tuple(quantize(v, wfmt) for v in row) for row in kernel)
                for kernel in per_channel
            )
            for per_channel in blk.weights
        )
        lo = -(1 << (plan.post_bias_bits - 1))
        hi = (1 << (plan.post_bias_bits - 1)) - 1
        bq = tuple(
            min(hi, max(lo, round(b * (1 << plan.f_acc)))) for b in blk.biases
        )
        out.append(
            QuantizedBlock(
                weights=QuantizedTensor(dims=(n, c, k, k), values=wq, fmt=wfmt),
                biases=bq,
                weight_fmt=wfmt,
                bias_frac=plan.f_acc,
                bias_bits=plan.post_bias_bits,
            )
        )
    return QuantizedWeights(blocks=tuple(out), data_fmt=data_fmt)


# ---------------------------------------------------------------------------
# Integer helpers shared by the simulator, the golden reference, and the
# HDL templates' width bookkeeping
# ---------------------------------------------------------------------------


def saturate(v: int, bits: int) -> int:
    lo = -(1 << (bits - 1))
    hi = (1 << (bits - 1)) - 1
    return lo if v < lo else hi if v > hi else v


def shift_round_even(v: int, s: int) -> int:
    """Arithmetic right shift by s with round-to-nearest, ties to even."""
    if s <= 0:
        return v << -s
    q = v >> s
    r = v - (q << s)
    half = 1 << (s - 1)
    if r > half or (r == half and (q & 1)):
        q += 1
    return q
