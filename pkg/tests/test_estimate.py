"""Resource estimation: unit model, pinned counts, strategy comparison."""

import pytest

from convforge.dhm_ir import accumulator_plan, expand
from convforge.errors import GraphMismatchError
from convforge.estimate import (_tree_adder_widths, compare_strategies,
                                estimate, format_report)
from convforge.netparse import BlockWeights, WeightSet, validate
from convforge.quant import FixedPointFormat, data_format, quantize_weights
from convforge.specialize import specialize_graph
from convforge.synth import planted_weights, random_weights

from conftest import make_net

# ---------------------------------------------------------------------------
# adder tree shape
# ---------------------------------------------------------------------------


def test_tree_adder_widths_pinned():
    assert _tree_adder_widths(1, 8) == []
    assert _tree_adder_widths(2, 8) == [9]
    assert _tree_adder_widths(3, 8) == [9, 10]
    assert _tree_adder_widths(5, 8) == [9, 9, 10, 11]
    assert _tree_adder_widths(9, 12) == [13, 13, 13, 13, 14, 14, 15, 16]


def test_tree_has_m_minus_one_adders():
    for m in range(1, 40):
        assert len(_tree_adder_widths(m, 10)) == max(0, m - 1)


# ---------------------------------------------------------------------------
# pinned block estimate
# ---------------------------------------------------------------------------


def _pinned_graph():
    # one block: C=2 6x6 input, N=3, K=3, bias, pool 2, tanh
    net = make_net((2, 6, 6), [(3, 3)], pools=[2], tanhs=[True])
    vnet = validate(net)
    ws = random_weights(vnet.net, seed=11)
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=5))
    return expand(vnet, qw, tanh_bits=8)


def test_unspecialized_block_counts_pinned():
    r = estimate(_pinned_graph())
    assert len(r.blocks) == 1
    b = r.blocks[0]
    # plan: product 12, tree 16, sum 17, post-bias 18
    plan = accumulator_plan(3, 2, FixedPointFormat(6, 5),
                            FixedPointFormat(6, 5))
    assert (plan.product_bits, plan.tree_bits,
            plan.sum_bits, plan.post_bias_bits) == (12, 16, 17, 18)
    # 6 engines x 9 generic cells; nothing specialized yet
    assert (b.mult_zero, b.mult_one, b.mult_pow2, b.mult_generic) == \
        (0, 0, 0, 54)
    assert b.mult_units == 54 * 6 * 6
    # engines: 8 adders each ([13,13,13,13,14,14,15,16]); sums: one 17-bit
    # adder each; bias adders and pool comparators at 18 bits
    assert b.adders == {13: 24, 14: 12, 15: 6, 16: 6, 17: 3, 18: 6}
    assert b.adder_units == 6 * 111 + 3 * 17 + 3 * 18 + 3 * 18
    assert b.logic_units == b.mult_units + b.adder_units
    # memories: 2 line buffers of (K-1) rows, shared window registers,
    # one 2^8-entry ROM per output map
    assert b.line_buffer_bits == 2 * 2 * 6 * 6
    assert b.window_register_bits == 2 * 3 * 6
    assert b.tanh_rom_bits == 3 * 256 * 6
    assert b.memory_bits == 144 + 36 + 4608
    assert r.dsp_blocks == 0


def test_report_totals_and_dict():
    r = estimate(_pinned_graph())
    d = r.to_dict()
    assert d["total"]["mult_units"] == r.mult_units
    assert d["total"]["logic_units"] == r.logic_units
    assert d["total"]["dsp_blocks"] == 0
    assert d["blocks"][0]["mult"]["generic"] == 54
    assert d["blocks"][0]["adders"]["13"] == 24
    text = format_report(r)
    assert text.splitlines()[0].startswith("block")
    assert "dsp blocks: 0" in text
    assert text.endswith("\n")


# ---------------------------------------------------------------------------
# specialization never increases the estimate
# ---------------------------------------------------------------------------


def test_specialized_costs_never_higher():
    net = make_net((2, 8, 8), [(4, 3), (3, 1)], tanhs=[True, False])
    vnet = validate(net)
    dfmt = data_format(6)
    wfmt = FixedPointFormat(bits=6, frac=4)
    ws = planted_weights(vnet.net, wfmt, seed=21)
    qw = quantize_weights(ws, dfmt, wfmt)
    plain = expand(vnet, qw, tanh_bits=8)
    spec = specialize_graph(plain)
    ru, rs = estimate(plain), estimate(spec)
    assert rs.mult_units < ru.mult_units  # planted zeros guarantee savings
    assert rs.adder_units <= ru.adder_units
    assert rs.logic_units < ru.logic_units
    assert rs.memory_bits == ru.memory_bits  # buffers unaffected
    rep = compare_strategies(plain, spec)
    assert rep.mult_unit_ratio > 1.0
    assert "->" in rep.summary()


def test_specialized_class_counts_match_param_stats():
    from convforge.specialize import param_stats
    net = make_net((1, 6, 6), [(2, 3)], tanhs=[False])
    vnet = validate(net)
    dfmt = data_format(6)
    wfmt = FixedPointFormat(bits=6, frac=4)
    ws = planted_weights(vnet.net, wfmt, seed=5)
    qw = quantize_weights(ws, dfmt, wfmt)
    spec = specialize_graph(expand(vnet, qw, tanh_bits=8))
    st = param_stats(qw)
    b = estimate(spec).blocks[0]
    assert (b.mult_zero, b.mult_one, b.mult_pow2, b.mult_generic) == \
        (st.zero, st.one, st.pow2, st.other)


# ---------------------------------------------------------------------------
# strategy comparison edge cases
# ---------------------------------------------------------------------------


def test_compare_strategies_rejects_different_networks():
    g1 = _pinned_graph()
    net = make_net((2, 6, 6), [(3, 1)])  # different kernel
    vnet = validate(net)
    qw = quantize_weights(random_weights(vnet.net, seed=1), data_format(6),
                          FixedPointFormat(bits=6, frac=5))
    g2 = expand(vnet, qw, tanh_bits=8)
    with pytest.raises(GraphMismatchError):
        compare_strategies(g1, g2)


def test_all_special_weights_make_ratio_unbounded():
    net = make_net((1, 4, 4), [(1, 1)], biases=[False])
    vnet = validate(net)
    ws = WeightSet(blocks=[BlockWeights(weights=[[[[0.25]]]],
                                        biases=[0.0])])
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, FixedPointFormat(bits=6, frac=4))
    plain = expand(vnet, qw, tanh_bits=8)
    rep = compare_strategies(plain, specialize_graph(plain))
    assert rep.specialized.mult_units == 0
    assert rep.mult_unit_ratio is None
    assert "unbounded" in rep.summary()


def test_ratio_formatting():
    from convforge.estimate import StrategyReport
    assert StrategyReport._fmt(None) == "unbounded"
    assert StrategyReport._fmt(2.0) == "2.00x"
    assert StrategyReport._fmt(1.2345) == "1.23x"
