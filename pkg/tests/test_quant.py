"""Fixed-point formats, scalar rounding, format inference, weight tensors."""

import random

import pytest

from convforge.errors import EmptyWeightsError, OutOfRangeError
from convforge.netparse import parse_network, validate
from convforge.quant import (FixedPointFormat, choose_weight_format,
                             data_format, dequantize, quantize,
                             quantize_weights, saturate, shift_round_even)
from convforge.synth import random_weights

from conftest import TINY_TOPOLOGY


# ---------------------------------------------------------------------------
# Formats
# ---------------------------------------------------------------------------


def test_format_bounds():
    fmt = FixedPointFormat(bits=6, frac=5)
    assert fmt.min_code == -32 and fmt.max_code == 31
    assert fmt.min_real == -1.0
    assert fmt.max_real == 31 / 32
    assert str(fmt) == "Q6.5"


def test_format_validation():
    with pytest.raises(ValueError):
        FixedPointFormat(bits=1, frac=0)
    with pytest.raises(ValueError):
        FixedPointFormat(bits=33, frac=0)
    with pytest.raises(ValueError):
        FixedPointFormat(bits=8, frac=8)  # frac must leave the sign bit
    with pytest.raises(ValueError):
        FixedPointFormat(bits=8, frac=-1)


def test_data_format_uses_all_fraction_bits():
    for bits in (2, 3, 6, 16, 32):
        fmt = data_format(bits)
        assert (fmt.bits, fmt.frac) == (bits, bits - 1)


# ---------------------------------------------------------------------------
# Scalar quantization
# ---------------------------------------------------------------------------


def test_quantize_pinned_examples():
    q65 = FixedPointFormat(bits=6, frac=5)
    assert quantize(0.5, q65) == 16
    assert quantize(1.0, q65) == 31  # saturates at max code
    q32 = FixedPointFormat(bits=3, frac=2)
    assert quantize(-1.0, q32) == -4


def test_quantize_rounds_half_to_even():
    q65 = FixedPointFormat(bits=6, frac=5)
    assert quantize(1.5 / 32, q65) == 2
    assert quantize(2.5 / 32, q65) == 2
    assert quantize(-1.5 / 32, q65) == -2
    assert quantize(-2.5 / 32, q65) == -2


def test_dequantize_range_check():
    q65 = FixedPointFormat(bits=6, frac=5)
    assert dequantize(16, q65) == 0.5
    with pytest.raises(OutOfRangeError):
        dequantize(32, q65)
    with pytest.raises(OutOfRangeError):
        dequantize(-33, q65)


def test_round_trip_error_bound_small():
    rng = random.Random(99)
    for bits, frac in ((4, 3), (6, 5), (8, 2), (12, 11)):
        fmt = FixedPointFormat(bits=bits, frac=frac)
        bound = 2.0 ** -(frac + 1)
        for _ in range(2000):
            x = rng.uniform(fmt.min_real, fmt.max_real)
            err = abs(dequantize(quantize(x, fmt), fmt) - x)
            assert err <= bound + 1e-15


def test_quantize_monotonic():
    fmt = data_format(5)
    rng = random.Random(5)
    xs = sorted(rng.uniform(-1.0, fmt.max_real) for _ in range(500))
    codes = [quantize(x, fmt) for x in xs]
    assert codes == sorted(codes)


# ---------------------------------------------------------------------------
# Integer helpers shared with the simulators
# ---------------------------------------------------------------------------


def test_saturate():
    assert saturate(5, 4) == 5
    assert saturate(9, 4) == 7
    assert saturate(-9, 4) == -8
    assert saturate(-8, 4) == -8


def test_shift_round_even():
    assert shift_round_even(5, 1) == 2     # 2.5 -> even 2
    assert shift_round_even(7, 1) == 4     # 3.5 -> even 4
    assert shift_round_even(-5, 1) == -2   # -2.5 -> even -2
    assert shift_round_even(-7, 1) == -4
    assert shift_round_even(6, 1) == 3
    assert shift_round_even(3, 0) == 3
    assert shift_round_even(3, -2) == 12   # negative shift amplifies


def test_shift_round_even_matches_float_round():
    rng = random.Random(1)
    for _ in range(3000):
        v = rng.randint(-(1 << 20), 1 << 20)
        s = rng.randint(1, 12)
        # Python round() rounds half to even on exact .5 values
        want = round(v / (1 << s))
        assert shift_round_even(v, s) == want


# ---------------------------------------------------------------------------
# Weight format inference
# ---------------------------------------------------------------------------


def test_choose_weight_format_pinned():
    assert choose_weight_format([0.8], 6).frac == 5
    assert choose_weight_format([3.0], 6).frac == 3
    assert choose_weight_format([0.0, 0.0], 3).frac == 2


def test_choose_weight_format_exact_powers():
    # max |w| = 1.0 needs one integer bit: ceil(log2(1 + eps)) = 1
    assert choose_weight_format([1.0], 6).frac == 4
    assert choose_weight_format([2.0], 6).frac == 3
    assert choose_weight_format([0.5], 6).frac == 5


def test_choose_weight_format_clamps_at_zero_frac():
    fmt = choose_weight_format([1e6], 4)
    assert fmt.frac == 0


def test_choose_weight_format_empty():
    with pytest.raises(EmptyWeightsError):
        choose_weight_format([], 6)


def test_choose_weight_format_accepts_weight_containers():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=2)
    whole = choose_weight_format(ws, 6)
    assert isinstance(whole, FixedPointFormat)
    per_block = [choose_weight_format(blk, 6) for blk in ws.blocks]
    assert all(f.bits == 6 for f in per_block)


# ---------------------------------------------------------------------------
# Tensor quantization
# ---------------------------------------------------------------------------


def test_quantize_weights_round_trip_values():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=3)
    dfmt = data_format(6)
    wfmts = [choose_weight_format(blk, 6) for blk in ws.blocks]
    qw = quantize_weights(ws, dfmt, wfmts)
    assert qw.data_fmt == dfmt
    assert len(qw.blocks) == 2
    for blk, src, wf in zip(qw.blocks, ws.blocks, wfmts):
        assert blk.weight_fmt == wf
        for code, real in zip(blk.weights.iter_values(), src.iter_values()):
            assert code == quantize(real, wf)


def test_bias_quantized_at_accumulator_scale():
    from convforge.dhm_ir import accumulator_plan

    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=4)
    dfmt = data_format(6)
    wfmts = [choose_weight_format(blk, 6) for blk in ws.blocks]
    qw = quantize_weights(ws, dfmt, wfmts)
    shp = vnet.shapes[0]
    plan = accumulator_plan(vnet.net.blocks[0].conv.kernel, shp.in_c,
                            dfmt, wfmts[0])
    assert qw.blocks[0].bias_frac == plan.f_acc
    assert qw.blocks[0].bias_bits == plan.post_bias_bits
    for code, real in zip(qw.blocks[0].biases, ws.blocks[0].biases):
        assert code == round(real * (1 << plan.f_acc))


def test_quantize_weights_single_format_broadcast():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=5)
    fmt = FixedPointFormat(bits=6, frac=4)
    qw = quantize_weights(ws, data_format(6), fmt)
    assert all(blk.weight_fmt == fmt for blk in qw.blocks)


def test_quantize_weights_format_count_mismatch():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=5)
    with pytest.raises(ValueError):
        quantize_weights(ws, data_format(6), [data_format(6)] * 3)
