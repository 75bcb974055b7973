"""Golden reference: direct loop-nest evaluation in exact integer math.

This is the oracle the streaming simulator is checked against, so it
deliberately shares no machinery with the actor graph: plain nested loops
over f_n = act[b_n + sum_c conv(phi_c, w_nc)], with the same accumulator
widths, pooling order, lookup table, and boundary requantization the
hardware uses.  Kept in pure Python on purpose -- the compiled engine
accelerates only the streaming side, never the reference.
"""

from __future__ import annotations

from convforge.errors import AccumulatorOverflowError, ShapeMismatchError
from convforge.netparse import ValidatedNetwork
from convforge.quant import saturate, shift_round_even
from convforge.simulate.maps import FeatureMaps, ImageStream
from convforge.simulate.tanh import tanh_lut


def _check_width(value: int, bits: int, where: str) -> int:
    lo = -(1 << (bits - 1))
    hi = (1 << (bits - 1)) - 1
    if not lo <= value <= hi:
        raise AccumulatorOverflowError(
            f"{where}: {value} does not fit {bits} signed bits"
        )
    return value


def golden_forward(net: ValidatedNetwork, qw, img: ImageStream,
                   tanh_bits: int = 8):
    """Evaluate every block; returns one FeatureMaps per block."""
    from convforge.dhm_ir import accumulator_plan  # width schedule only

    c0, h0, w0 = net.shapes[0].in_c, net.shapes[0].in_h, net.shapes[0].in_w
    if img.shape != (c0, h0, w0):
        raise ShapeMismatchError(
            f"image shape {img.shape}, network input {(c0, h0, w0)}"
        )

    data_fmt = qw.data_fmt
    channels = [list(seq) for seq in img.channels]
    h, w = h0, w0
    results = []

    for block, shp, qblk in zip(net.blocks, net.shapes, qw.blocks):
        n_out, c_in, k = block.conv.num_outputs, shp.in_c, block.conv.kernel
        plan = accumulator_plan(k, c_in, data_fmt, qblk.weight_fmt)
        bias_on = block.conv.bias_enabled
        acc_bits = plan.final_bits(bias_on)
        conv_h, conv_w = shp.conv_h, shp.conv_w
        wq = qblk.weights.values

        acc_maps = []
        for n in range(n_out):
            grid = [0] * (conv_h * conv_w)
            for y in range(conv_h):
                for x in range(conv_w):
                    acc = 0
                    for c in range(c_in):
                        chan = channels[c]
                        kern = wq[n][c]
                        for ky in range(k):
                            row_base = (y + ky) * w + x
                            krow = kern[ky]
                            for kx in range(k):
                                acc += krow[kx] * chan[row_base + kx]
                    _check_width(acc, plan.sum_bits,
                                 f"channel sum n={n} ({y},{x})")
                    if bias_on:
                        acc = _check_width(acc + qblk.biases[n],
                                           plan.post_bias_bits,
                                           f"bias add n={n} ({y},{x})")
                    grid[y * conv_w + x] = acc
            acc_maps.append(grid)

        out_h, out_w = conv_h, conv_w
        if block.pool is not None:
            p = block.pool.kernel
            out_h, out_w = shp.out_h, shp.out_w
            pooled = []
            for grid in acc_maps:
                pg = [0] * (out_h * out_w)
                for y in range(out_h):
                    for x in range(out_w):
                        best = None
                        for dy in range(p):
                            row = (y * p + dy) * conv_w + x * p
                            for dx in range(p):
                                v = grid[row + dx]
                                if best is None or v > best:
                                    best = v
                        pg[y * out_w + x] = best
                pooled.append(pg)
            acc_maps = pooled

        if block.activation is not None:
            a_eff = min(tanh_bits, acc_bits)
            table = tanh_lut(plan, data_fmt, a_eff, in_bits=acc_bits)
            out_maps = [tuple(table.lookup(v) for v in grid)
                        for grid in acc_maps]
        else:
            shift = qblk.weight_fmt.frac
            out_maps = [
                tuple(saturate(shift_round_even(v, shift), data_fmt.bits)
                      for v in grid)
                for grid in acc_maps
            ]

        results.append(FeatureMaps(shape=(n_out, out_h, out_w),
                                   maps=tuple(out_maps)))
        channels = [list(m) for m in out_maps]
        h, w = out_h, out_w

    return results
