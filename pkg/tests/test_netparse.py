"""Topology grammar, shape validation, and the weight container."""

import struct

import pytest

from convforge.errors import (BadMagicError, ChannelMismatchError,
                              DuplicateLayerNameError,
                              MissingRequiredFieldError, ShapeUnderflowError,
                              SizeMismatchError, TopologySyntaxError,
                              TruncatedFileError, UnknownKeyError)
from convforge.netparse import (ConvSpec, PoolSpec, load_weights,
                                pack_weights, parse_network,
                                serialize_network, validate)
from convforge.synth import random_weights

from conftest import TINY_TOPOLOGY

LENET = open("samples/lenet5.prototxt").read()


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------


def test_parse_lenet_structure():
    net = parse_network(LENET)
    assert net.name == "lenet5"
    assert net.input_shape == (1, 28, 28)
    assert [b.name for b in net.blocks] == ["conv1", "conv2"]
    b0 = net.blocks[0]
    assert b0.conv.num_outputs == 20
    assert b0.conv.kernel == 5
    assert b0.pool.kernel == 2 and b0.pool.stride == 2
    assert b0.activation is not None
    assert b0.bottom == "data"
    assert b0.top == "tanh1"


def test_comments_and_whitespace_ignored():
    text = TINY_TOPOLOGY.replace(
        'name: "tiny"', '# leading comment\nname: "tiny"  # trailing'
    )
    net = parse_network(text)
    assert net.name == "tiny"
    assert len(net.blocks) == 2


def test_pool_stride_defaults_to_kernel():
    text = TINY_TOPOLOGY.replace("kernel_size: 2 stride: 2", "kernel_size: 2")
    net = parse_network(text)
    assert net.blocks[0].pool.kernel == 2
    assert net.blocks[0].pool.stride == 2


def test_unknown_key_rejected_with_position():
    text = TINY_TOPOLOGY.replace("num_output: 3", "num_output: 3 pad: 1")
    with pytest.raises(UnknownKeyError) as exc:
        parse_network(text)
    assert "pad" in str(exc.value)
    assert "line" in str(exc.value)


def test_missing_required_field():
    text = TINY_TOPOLOGY.replace("num_output: 3 ", "")
    with pytest.raises(MissingRequiredFieldError):
        parse_network(text)


def test_duplicate_layer_name():
    text = TINY_TOPOLOGY.replace('name: "c2"', 'name: "c1"')
    with pytest.raises(DuplicateLayerNameError):
        parse_network(text)


def test_even_kernel_rejected():
    text = TINY_TOPOLOGY.replace("kernel_size: 3", "kernel_size: 4")
    with pytest.raises(TopologySyntaxError):
        parse_network(text)


def test_conv_stride_fixed_at_one():
    text = TINY_TOPOLOGY.replace(
        "num_output: 3 kernel_size: 3", "num_output: 3 kernel_size: 3 stride: 2"
    )
    with pytest.raises(TopologySyntaxError):
        parse_network(text)


def test_batch_dimension_must_be_one():
    text = TINY_TOPOLOGY.replace("input_dim: 1\ninput_dim: 2",
                                 "input_dim: 4\ninput_dim: 2")
    with pytest.raises(TopologySyntaxError):
        parse_network(text)


def test_pool_must_follow_its_block():
    # pool consumes a tensor that is not the running block output
    text = TINY_TOPOLOGY.replace('bottom: "c1" top: "p1"',
                                 'bottom: "data" top: "p1"')
    with pytest.raises(TopologySyntaxError):
        parse_network(text)


def test_non_max_pool_rejected():
    text = TINY_TOPOLOGY.replace("pool: MAX", "pool: AVE")
    with pytest.raises(TopologySyntaxError):
        parse_network(text)


def test_serialize_round_trip():
    net = parse_network(LENET)
    again = parse_network(serialize_network(net))
    assert again == net

    tiny = parse_network(TINY_TOPOLOGY)
    assert parse_network(serialize_network(tiny)) == tiny


# ---------------------------------------------------------------------------
# Domain type invariants
# ---------------------------------------------------------------------------


def test_conv_spec_invariants():
    with pytest.raises(ValueError):
        ConvSpec(num_outputs=0, kernel=3)
    with pytest.raises(ValueError):
        ConvSpec(num_outputs=1, kernel=2)
    with pytest.raises(ValueError):
        ConvSpec(num_outputs=1, kernel=3, stride=2)


def test_pool_spec_invariants():
    with pytest.raises(ValueError):
        PoolSpec(kernel=2, stride=3)
    with pytest.raises(ValueError):
        PoolSpec(kernel=2, stride=2, method="AVE")


# ---------------------------------------------------------------------------
# Shape validation
# ---------------------------------------------------------------------------


def test_lenet_shape_chain():
    vnet = validate(parse_network(LENET))
    dims = [(s.in_h, s.conv_h, s.out_h) for s in vnet.shapes]
    assert dims == [(28, 24, 12), (12, 8, 4)]
    assert vnet.shapes[1].in_c == 20
    assert vnet.shapes[1].out_c == 50


def test_mult_counts():
    vnet = validate(parse_network(LENET))
    assert vnet.mult_count(0) == 20 * 1 * 25
    assert vnet.mult_count(1) == 50 * 20 * 25
    assert sum(vnet.mult_count(i) for i in range(2)) == 25500


def test_shape_underflow():
    text = TINY_TOPOLOGY.replace("input_dim: 7\ninput_dim: 7",
                                 "input_dim: 2\ninput_dim: 2")
    with pytest.raises(ShapeUnderflowError):
        validate(parse_network(text))


def test_channel_mismatch():
    text = TINY_TOPOLOGY.replace('bottom: "t1"', 'bottom: "data"')
    with pytest.raises(ChannelMismatchError):
        validate(parse_network(text))


# ---------------------------------------------------------------------------
# Weight container
# ---------------------------------------------------------------------------


def test_weight_round_trip():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=11)
    blob = pack_weights(ws)
    back = load_weights(blob, vnet)
    assert len(back.blocks) == len(ws.blocks)
    for a, b in zip(ws.blocks, back.blocks):
        assert a.dims == b.dims
        assert list(a.iter_values()) == list(b.iter_values())
        assert list(a.biases) == list(b.biases)


def test_weight_bad_magic():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    with pytest.raises(BadMagicError):
        load_weights(b"NOPE" + b"\x00" * 64, vnet)


def test_weight_truncation():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    blob = pack_weights(random_weights(vnet.net, seed=1))
    with pytest.raises(TruncatedFileError):
        load_weights(blob[:-9], vnet)


def test_weight_dims_must_match_network():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    ws = random_weights(vnet.net, seed=1)
    blob = bytearray(pack_weights(ws))
    # corrupt the first block's kernel field (third u32 after count)
    struct.pack_into("<I", blob, 4 + 4 + 8, 5)
    with pytest.raises(SizeMismatchError):
        load_weights(bytes(blob), vnet)


def test_weight_trailing_bytes_rejected():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    blob = pack_weights(random_weights(vnet.net, seed=1))
    with pytest.raises(SizeMismatchError):
        load_weights(blob + b"\x00", vnet)


def test_weight_block_count_mismatch():
    vnet = validate(parse_network(TINY_TOPOLOGY))
    one_block = TINY_TOPOLOGY.split('layer { name: "p1"')[0]
    vnet_one = validate(parse_network(one_block))
    blob = pack_weights(random_weights(vnet_one.net, seed=1))
    with pytest.raises(SizeMismatchError):
        load_weights(blob, vnet)
