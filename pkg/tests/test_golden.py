"""Golden reference semantics, pinned by hand-computed examples.

These tests fix the arithmetic contract (scaling, rounding, pooling, bias,
activation addressing) with values small enough to verify on paper.  The
streaming simulator is then held to this reference in test_stream.py.
"""

import math

import pytest

from convforge.errors import ShapeMismatchError
from convforge.netparse import BlockWeights, WeightSet, validate
from convforge.quant import (FixedPointFormat, data_format, quantize,
                             quantize_weights, shift_round_even)
from convforge.simulate import golden_forward
from convforge.simulate.maps import ImageStream

from conftest import make_net


def _stream(shape, codes, dfmt):
    return ImageStream(shape=shape, channels=(tuple(codes),), fmt=dfmt)


def _pointwise_setup(weight_real, bias_real=None, tanh=False, h=2, w=2):
    """Single block, C=1, K=1, N=1 over an h x w image."""
    bias = bias_real is not None
    net = make_net((1, h, w), [(1, 1)], tanhs=[tanh], biases=[bias])
    vnet = validate(net)
    ws = WeightSet(blocks=[BlockWeights(
        weights=[[[[weight_real]]]],
        biases=[bias_real if bias else 0.0],
    )])
    dfmt = data_format(6)
    wfmt = FixedPointFormat(bits=6, frac=5)
    qw = quantize_weights(ws, dfmt, wfmt)
    return vnet, qw, dfmt


def test_pointwise_halving_requant():
    # w = 0.5 -> code 16 at f=5; requant shifts by 5: y = round_even(x/2)
    vnet, qw, dfmt = _pointwise_setup(0.5)
    img = _stream((1, 2, 2), [10, 7, -9, 31], dfmt)
    out = golden_forward(vnet, qw, img)
    want = [shift_round_even(x * 16, 5) for x in (10, 7, -9, 31)]
    assert list(out[0].maps[0]) == want
    assert want == [5, 4, -4, 16]  # 3.5 rounds to even 4


def test_pointwise_bias_lands_on_accumulator_scale():
    # f_acc = 5 + 5 = 10; bias 0.25 -> 256 at that scale
    vnet, qw, dfmt = _pointwise_setup(0.5, bias_real=0.25)
    assert qw.blocks[0].biases[0] == 256
    img = _stream((1, 2, 2), [10, 0, -10, 20], dfmt)
    out = golden_forward(vnet, qw, img)
    want = [shift_round_even(x * 16 + 256, 5) for x in (10, 0, -10, 20)]
    assert list(out[0].maps[0]) == want
    assert want[1] == 8  # pure bias: 0.25 in data codes


def test_pointwise_tanh_addressing():
    vnet, qw, dfmt = _pointwise_setup(0.5, bias_real=0.25, tanh=True)
    img = _stream((1, 2, 2), [10, 0, -10, 20], dfmt)
    out = golden_forward(vnet, qw, img, tanh_bits=8)
    # accumulator is 13 bits post-bias; index = acc >> (13 - 8)
    for got, x in zip(out[0].maps[0], (10, 0, -10, 20)):
        acc = x * 16 + 256
        idx = acc >> 5
        want = quantize(math.tanh(idx * (1 << 5) * 2.0 ** -10), dfmt)
        assert got == want


def test_identity_kernel_crops_input():
    net = make_net((1, 4, 4), [(1, 3)], biases=[False])
    vnet = validate(net)
    rows = [[0.0] * 3 for _ in range(3)]
    rows[1][1] = 1.0
    ws = WeightSet(blocks=[BlockWeights(weights=[[rows]], biases=[0.0])])
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=4))
    codes = list(range(-8, 8))  # 4x4 image
    img = _stream((1, 4, 4), codes, dfmt)
    out = golden_forward(vnet, qw, img)
    # output pixel (y, x) is input pixel (y+1, x+1)
    assert list(out[0].maps[0]) == [codes[1 * 4 + 1], codes[1 * 4 + 2],
                                    codes[2 * 4 + 1], codes[2 * 4 + 2]]


def test_max_pool_windows():
    net = make_net((1, 4, 4), [(1, 1)], pools=[2], biases=[False])
    vnet = validate(net)
    ws = WeightSet(blocks=[BlockWeights(weights=[[[[1.0]]]], biases=[0.0])])
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=4))
    codes = [1, 5, -2, 0,
             3, 2, 7, -1,
             0, 0, -3, -4,
             9, 1, -6, -5]
    img = _stream((1, 4, 4), codes, dfmt)
    out = golden_forward(vnet, qw, img)
    assert out[0].shape == (1, 2, 2)
    assert list(out[0].maps[0]) == [5, 7, 9, -3]


def test_channel_sum_accumulates():
    net = make_net((2, 2, 2), [(1, 1)], biases=[False])
    vnet = validate(net)
    ws = WeightSet(blocks=[BlockWeights(
        weights=[[[[0.5]], [[0.25]]]], biases=[0.0])])
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=5))
    img = ImageStream(shape=(2, 2, 2),
                      channels=((8, 8, 8, 8), (16, -16, 0, 4)),
                      fmt=dfmt)
    out = golden_forward(vnet, qw, img)
    want = [shift_round_even(8 * 16 + b * 8, 5)
            for b in (16, -16, 0, 4)]
    assert list(out[0].maps[0]) == want


def test_two_block_chain_requants_between_blocks():
    net = make_net((1, 3, 3), [(1, 1), (1, 1)], biases=[False, False])
    vnet = validate(net)
    ws = WeightSet(blocks=[
        BlockWeights(weights=[[[[0.5]]]], biases=[0.0]),
        BlockWeights(weights=[[[[0.5]]]], biases=[0.0]),
    ])
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=5))
    codes = [9, -9, 21, 3, 0, -32, 31, 15, -1]
    img = _stream((1, 3, 3), codes, dfmt)
    out = golden_forward(vnet, qw, img)
    mid = [shift_round_even(x * 16, 5) for x in codes]
    want = [shift_round_even(x * 16, 5) for x in mid]
    assert list(out[0].maps[0]) == mid
    assert list(out[1].maps[0]) == want


def test_shape_mismatch_rejected():
    vnet, qw, dfmt = _pointwise_setup(0.5)
    img = _stream((1, 3, 3), [0] * 9, dfmt)
    with pytest.raises(ShapeMismatchError):
        golden_forward(vnet, qw, img)


def test_feature_maps_value_accessor():
    vnet, qw, dfmt = _pointwise_setup(0.5)
    img = _stream((1, 2, 2), [10, 7, -9, 31], dfmt)
    out = golden_forward(vnet, qw, img)
    fm = out[0]
    assert fm.value(0, 0, 1) == shift_round_even(7 * 16, 5)
    assert fm.value(0, 1, 0) == shift_round_even(-9 * 16, 5)
