"""Hyperbolic-tangent lookup table shared by the simulator and the HDL ROM.

The activation input is a wide accumulator; its top A bits (arithmetic
shift) form a signed index.  Each index represents the real value
index * 2^(in_bits - A) * 2^(-f_acc) -- the low edge of its interval,
a convention chosen so index 0 maps to exactly 0 and tanh's odd symmetry
survives quantization everywhere except the most negative index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from convforge.quant import FixedPointFormat, quantize


@dataclass(frozen=True)
class TanhTable:
    address_bits: int
    in_bits: int
    entries: tuple  # 2^address_bits ints, ascending signed index order

    def lookup(self, acc: int) -> int:
        idx = acc >> (self.in_bits - self.address_bits)
        return self.entries[idx + (1 << (self.address_bits - 1))]


def tanh_lut(plan, data_fmt: FixedPointFormat, a_bits: int,
             in_bits: int = None) -> TanhTable:
    """Build the 2^a_bits-entry table for one block's accumulator format."""
    if in_bits is None:
        in_bits = plan.post_bias_bits
    if not 4 <= a_bits <= 12:
        raise ValueError(f"address bits must be in [4, 12], got {a_bits}")
    if a_bits > in_bits:
        raise ValueError(
            f"address bits {a_bits} exceed accumulator width {in_bits}"
        )
    half = 1 << (a_bits - 1)
    step_scale = in_bits - a_bits - plan.f_acc  # log2 of one index step
    entries = []
    for idx in range(-half, half):
        real = math.ldexp(idx, step_scale)
        entries.append(quantize(math.tanh(real), data_fmt))
    return TanhTable(address_bits=a_bits, in_bits=in_bits,
                     entries=tuple(entries))
