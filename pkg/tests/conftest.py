"""Shared fixtures and builders for the test suite.

The random-network generator here is the backbone of the property suites:
it produces small but structurally varied networks (1-3 blocks, kernels
1/3/5, optional pool and tanh stages, bias on or off) whose shapes are
guaranteed valid by construction.
"""


import pytest

from convforge.netparse import (ActivationSpec, ConvSpec, LayerBlock,
                                Network, parse_network, validate)
from convforge.netparse import PoolSpec
from convforge.quant import choose_weight_format, data_format, quantize_weights
from convforge.synth import random_image_stream, random_weights

TINY_TOPOLOGY = """
name: "tiny"
input: "data"
input_dim: 1
input_dim: 2
input_dim: 7
input_dim: 7
layer { name: "c1" type: "Convolution" bottom: "data" top: "c1"
        convolution_param { num_output: 3 kernel_size: 3 } }
layer { name: "p1" type: "Pooling" bottom: "c1" top: "p1"
        pooling_param { pool: MAX kernel_size: 2 stride: 2 } }
layer { name: "t1" type: "TanH" bottom: "p1" top: "t1" }
layer { name: "c2" type: "Convolution" bottom: "t1" top: "c2"
        convolution_param { num_output: 2 kernel_size: 1 } }
"""


@pytest.fixture
def tiny_vnet():
    return validate(parse_network(TINY_TOPOLOGY))


def build_quantized(vnet, data_bits=6, weight_bits=6, seed=0, weights=None):
    """(quantized weights, image-ready data format) for a validated net."""
    ws = weights if weights is not None else random_weights(vnet.net, seed)
    dfmt = data_format(data_bits)
    wfmts = [choose_weight_format(blk, weight_bits) for blk in ws.blocks]
    return quantize_weights(ws, dfmt, wfmts), dfmt


def make_block(index, n, k, c_bottom, bottom, pool=None, tanh=False,
               bias=True):
    name = f"c{index}"
    top = name + ("_t" if tanh else ("_p" if pool else ""))
    return LayerBlock(
        name=name,
        conv=ConvSpec(num_outputs=n, kernel=k, bias_enabled=bias),
        pool=PoolSpec(kernel=pool, stride=pool) if pool else None,
        activation=ActivationSpec() if tanh else None,
        bottom=bottom,
        top=top,
    )


def make_net(shape, block_dims, pools=None, tanhs=None, biases=None):
    """Assemble a Network from (n, k) block dims over input `shape`."""
    pools = pools or [None] * len(block_dims)
    tanhs = tanhs if tanhs is not None else [False] * len(block_dims)
    biases = biases if biases is not None else [True] * len(block_dims)
    blocks = []
    bottom = "data"
    c = shape[0]
    for i, ((n, k), pool, tanh, bias) in enumerate(
            zip(block_dims, pools, tanhs, biases)):
        blk = make_block(i, n, k, c, bottom, pool=pool, tanh=tanh, bias=bias)
        blocks.append(blk)
        bottom = blk.top
        c = n
    return Network(name="t", input_name="data", input_shape=tuple(shape),
                   blocks=tuple(blocks))


def random_case(rng):
    """One random (validated net, data_bits, weight_bits, tanh_bits) case
    drawn from the property-suite parameter space, or None on a dud draw."""
    c = rng.randint(1, 4)
    k0 = rng.choice([1, 3, 5])
    h = rng.randint(k0, 12)
    w = rng.randint(k0, 12)
    hh, ww = h, w
    dims, pools, tanhs, biases = [], [], [], []
    for i in range(rng.randint(1, 3)):
        k = rng.choice([1, 3, 5])
        if hh - k + 1 < 1 or ww - k + 1 < 1:
            break
        conv_h, conv_w = hh - k + 1, ww - k + 1
        pool = 2 if (rng.random() < 0.4 and conv_h >= 2 and conv_w >= 2) \
            else None
        dims.append((rng.randint(1, 4), k))
        pools.append(pool)
        tanhs.append(rng.random() < 0.6)
        biases.append(rng.random() < 0.8)
        hh = conv_h // (pool or 1)
        ww = conv_w // (pool or 1)
    if not dims:
        return None
    net = make_net((c, h, w), dims, pools, tanhs, biases)
    try:
        vnet = validate(net)
    except Exception:
        return None
    return (vnet, rng.randint(3, 8), rng.randint(3, 8), rng.randint(4, 12))


def run_case(vnet, data_bits, weight_bits, tanh_bits, seed, engine=None):
    """(golden maps, plain-graph maps, specialized-graph maps) for a case."""
    from convforge.dhm_ir import expand
    from convforge.simulate import golden_forward, stream_simulate
    from convforge.specialize import specialize_graph

    qw, dfmt = build_quantized(vnet, data_bits, weight_bits, seed=seed)
    shape = (vnet.shapes[0].in_c, vnet.shapes[0].in_h, vnet.shapes[0].in_w)
    img = random_image_stream(shape, dfmt, seed=seed + 7919)
    want = golden_forward(vnet, qw, img, tanh_bits=tanh_bits)
    g = expand(vnet, qw, tanh_bits=tanh_bits)
    got_plain = stream_simulate(g, img, engine=engine)
    got_spec = stream_simulate(specialize_graph(g), img, engine=engine)
    return want, got_plain, got_spec
