"""Lower a DhmGraph to the flat integer program the engines execute.

Both the pure-Python interpreter and the compiled one run the exact same
program: parallel integer arrays describing every actor (kind code,
parameter slice, input slot slice, output slot base, state slice).  Tokens
live in a slot array stamped with the global step that produced them, so
"fire when all operands are available" is one stamp comparison per input.

Kind codes and parameter layouts (pars is a flat int list):

  SRC  0: [img_off, npix]
  LB   1: [width, kernel, ringlen]           state: [seen, ring x ringlen]
  ENG  2: [m_cells, limit, (op, arg) x m]    op 0 mul, 1 wire, 2 shift
  SUM  3: [arity, limit, rq_flag, rq_shift, rq_lo, rq_hi]
  BIAS 4: [bias, limit, rq_flag, rq_shift, rq_lo, rq_hi]
  POOL 5: [p, in_w, cm_len, rq_flag, rq_shift, rq_lo, rq_hi]
                                             state: [x, y, colmax x cm_len]
  TANH 6: [shift, half, tab_off]
  SINK 7: []

`limit` is 2^(width-1); any accumulated value must satisfy -limit <= v
< limit or the run aborts with an overflow error.  rq_* fields requantize
a block's boundary output (shift with round-to-even, saturate) when the
block has no activation; rq_flag 0 leaves values untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

from convforge.dhm_ir import DhmGraph
from convforge.simulate.tanh import tanh_lut

K_SRC, K_LB, K_ENG, K_SUM, K_BIAS, K_POOL, K_TANH, K_SINK = range(8)

_KIND_CODE = {
    "Source": K_SRC, "LineBuffer": K_LB, "ConvEngine": K_ENG,
    "ChannelSum": K_SUM, "BiasAdd": K_BIAS, "MaxPool": K_POOL,
    "TanhLut": K_TANH, "Sink": K_SINK,
}

_OP_CODE = {"mul": 0, "wire": 1, "shift": 2}

# values above this need Python's unbounded integers; the compiled engine
# works in 64-bit words and refuses such programs
_INT64_SAFE_BITS = 62


@dataclass
class FlatProgram:
    n_actors: int
    kinds: list
    par_off: list
    in_off: list
    in_cnt: list
    out_base: list
    state_off: list
    pars: list
    in_slots: list
    tab: list
    n_slots: int
    state_len: int
    total_steps: int
    channel_pixels: int
    n_channels: int
    obs_slots: list
    obs_expect: list
    blocks_meta: list  # per block: (n_maps, out_h, out_w)
    needs_bigint: bool


def lower(g: DhmGraph) -> FlatProgram:
    c0, h0, w0 = g.input_shape
    npix = h0 * w0

    in_edges: dict = {}
    for edge in g.edges:
        in_edges.setdefault(edge.dst, []).append(edge)
    for edges in in_edges.values():
        edges.sort(key=lambda e: e.dst_port)

    kinds, par_off, in_off, in_cnt = [], [], [], []
    out_base, state_off = [], []
    pars, in_slots, tab = [], [], []
    slot_base, n_slots = [], 0
    state_len = 0
    needs_bigint = False
    tanh_tables: dict = {}  # block index -> tab offset

    for actor in g.actors:
        slot_base.append(n_slots)
        n_slots += actor.out_ports

    for actor in g.actors:
        kinds.append(_KIND_CODE[actor.kind])
        par_off.append(len(pars))
        in_off.append(len(in_slots))
        edges = in_edges.get(actor.id, [])
        for edge in edges:
            in_slots.append(slot_base[edge.src] + edge.src_port)
        in_cnt.append(len(edges))
        out_base.append(slot_base[actor.id])
        state_off.append(state_len)

        info = g.blocks[actor.block] if actor.block >= 0 else None
        p = actor.params
        if actor.kind == "Source":
            pars += [p["channel"] * npix, npix]
        elif actor.kind == "LineBuffer":
            k, w = p["kernel"], p["width"]
            ringlen = (k - 1) * w + k
            pars += [w, k, ringlen]
            state_len += 1 + ringlen
        elif actor.kind == "ConvEngine":
            cells = p["cells"]
            limit = 1 << (info.plan.tree_bits - 1)
            if info.plan.tree_bits > _INT64_SAFE_BITS:
                needs_bigint = True
            pars += [len(cells), limit]
            for _, _, op, arg in cells:
                pars += [_OP_CODE[op], arg]
        elif actor.kind in ("ChannelSum", "BiasAdd"):
            if actor.kind == "ChannelSum":
                bits = info.plan.sum_bits
                head = [p["arity"]]
            else:
                bits = info.plan.post_bias_bits
                head = [p["bias"]]
            if bits > _INT64_SAFE_BITS:
                needs_bigint = True
            pars += head + [1 << (bits - 1)] + _requant_tail(p, info)
        elif actor.kind == "MaxPool":
            cm_len = p["in_w"] // p["pool"]
            pars += [p["pool"], p["in_w"], cm_len] + _requant_tail(p, info)
            state_len += 2 + cm_len
        elif actor.kind == "TanhLut":
            key = actor.block
            if key not in tanh_tables:
                table = tanh_lut(info.plan, info.data_fmt, p["a_bits"],
                                 in_bits=p["in_bits"])
                tanh_tables[key] = len(tab)
                tab.extend(table.entries)
            pars += [p["in_bits"] - p["a_bits"], 1 << (p["a_bits"] - 1),
                     tanh_tables[key]]
        elif actor.kind == "Sink":
            pass
        else:
            raise AssertionError(f"unhandled kind {actor.kind}")

    obs_slots, obs_expect, blocks_meta = [], [], []
    for info in g.blocks:
        blocks_meta.append((info.out_c, info.out_h, info.out_w))
        for aid in info.output_ids:
            obs_slots.append(slot_base[aid])
            obs_expect.append(info.out_h * info.out_w)

    return FlatProgram(
        n_actors=len(g.actors),
        kinds=kinds, par_off=par_off, in_off=in_off, in_cnt=in_cnt,
        out_base=out_base, state_off=state_off,
        pars=pars, in_slots=in_slots, tab=tab,
        n_slots=n_slots, state_len=state_len,
        total_steps=npix, channel_pixels=npix, n_channels=c0,
        obs_slots=obs_slots, obs_expect=obs_expect,
        blocks_meta=blocks_meta,
        needs_bigint=needs_bigint,
    )


def _requant_tail(params: dict, info) -> list:
    if "requant_shift" not in params:
        return [0, 0, 0, 0]
    bits = params["requant_bits"]
    return [1, params["requant_shift"],
            -(1 << (bits - 1)), (1 << (bits - 1)) - 1]
