"""Direct-hardware-mapped actor graph: one compute unit per network actor.

A validated, quantized network expands into a flat dataflow graph with no
time multiplexing.  Per conv block the shape is fixed: C shared line
buffers (one per input channel), N*C convolution engines, N channel sums,
N bias adders, N activation lookups, plus optional max pools between bias
and activation.  Edges carry integer tokens whose widths follow the
block's AccumulatorPlan, so no intermediate value can overflow.

Convolution engines hold their kernel constants as "cells": (ky, kx, op,
arg) tuples.  Freshly expanded graphs use op "mul" for every tap; the
specialize pass rewrites cells to "wire"/"shift" ops or deletes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from convforge.quant import FixedPointFormat
from convforge.netparse import ValidatedNetwork

KINDS = ("Source", "LineBuffer", "ConvEngine", "ChannelSum", "BiasAdd",
         "TanhLut", "MaxPool", "Sink")

TANH_BITS_MIN, TANH_BITS_MAX = 4, 12


# ---------------------------------------------------------------------------
# Accumulator widths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccumulatorPlan:
    """Bit-width schedule that provably cannot overflow.

    product_bits covers one data*weight product exactly; each adder level
    adds one bit, so a K*K tree needs ceil(log2 K^2) extra and the C-way
    channel sum ceil(log2 C) more; the bias add costs one final bit.
    """

    product_bits: int
    tree_bits: int
    sum_bits: int
    post_bias_bits: int
    f_acc: int

    def final_bits(self, bias_enabled: bool) -> int:
        return self.post_bias_bits if bias_enabled else self.sum_bits


def accumulator_plan(kernel: int, in_channels: int,
                     data_fmt: FixedPointFormat,
                     weight_fmt: FixedPointFormat) -> AccumulatorPlan:
    product = data_fmt.bits + weight_fmt.bits
    tree = product + _clog2(kernel * kernel)
    total = tree + _clog2(in_channels)
    return AccumulatorPlan(
        product_bits=product,
        tree_bits=tree,
        sum_bits=total,
        post_bias_bits=total + 1,
        f_acc=data_fmt.frac + weight_fmt.frac,
    )


def _clog2(n: int) -> int:
    return (n - 1).bit_length()


# ---------------------------------------------------------------------------
# Graph types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Actor:
    id: int
    kind: str
    name: str
    block: int  # -1 for network sources
    params: dict
    out_ports: int
    out_width: int


@dataclass(frozen=True)
class Edge:
    src: int
    src_port: int
    dst: int
    dst_port: int


@dataclass(frozen=True)
class BlockInfo:
    """Everything downstream passes (simulator, emitter, estimator) need to
    reason about one block without re-deriving it from the network."""

    index: int
    name: str
    in_c: int
    in_h: int
    in_w: int
    out_c: int
    conv_h: int
    conv_w: int
    out_h: int
    out_w: int
    kernel: int
    pool: int  # pool kernel, 0 when absent
    has_tanh: bool
    bias_enabled: bool
    data_fmt: FixedPointFormat
    weight_fmt: FixedPointFormat
    plan: AccumulatorPlan
    tanh_bits: int  # effective LUT address width (0 when no activation)
    output_ids: tuple  # final actor id per output map


@dataclass(frozen=True)
class DhmGraph:
    name: str
    actors: tuple
    edges: tuple
    blocks: tuple
    input_shape: tuple  # (C, H, W)
    source_ids: tuple
    sink_ids: tuple
    specialized: bool = False

    def actor(self, actor_id: int) -> Actor:
        return self.actors[actor_id]


# ---------------------------------------------------------------------------
# Expansion
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self):
        self.actors: list = []
        self.edges: list = []

    def add(self, kind: str, name: str, block: int, params: dict,
            out_ports: int = 1, out_width: int = 0) -> int:
        actor_id = len(self.actors)
        self.actors.append(Actor(actor_id, kind, name, block, params,
                                 out_ports, out_width))
        return actor_id

    def wire(self, src: int, src_port: int, dst: int, dst_port: int):
        self.edges.append(Edge(src, src_port, dst, dst_port))


def expand(net: ValidatedNetwork, qw, tanh_bits: int = 8) -> DhmGraph:
    """Expand every block into its full actor complement.

    tanh_bits is the requested LUT address width; it is clamped to the
    accumulator width of each block.
    """
    if not TANH_BITS_MIN <= tanh_bits <= TANH_BITS_MAX:
        raise ValueError(
            f"tanh address bits must be in [{TANH_BITS_MIN}, "
            f"{TANH_BITS_MAX}], got {tanh_bits}"
        )
    if len(qw.blocks) != len(net.blocks):
        raise ValueError(
            f"{len(qw.blocks)} quantized blocks for {len(net.blocks)} "
            "network blocks"
        )

    b = _Builder()
    data_fmt = qw.data_fmt
    b_data = data_fmt.bits

    # network inputs, one stream per channel
    c0 = net.shapes[0].in_c
    feed = [(b.add("Source", f"in_c{c}", -1, {"channel": c},
                   out_width=b_data), 0)
            for c in range(c0)]

    infos = []
    for bi, (block, shp, qblk) in enumerate(
            zip(net.blocks, net.shapes, qw.blocks)):
        n_out, c_in, k = block.conv.num_outputs, shp.in_c, block.conv.kernel
        wfmt = qblk.weight_fmt
        plan = accumulator_plan(k, c_in, data_fmt, wfmt)
        bias_on = block.conv.bias_enabled
        acc_bits = plan.final_bits(bias_on)
        a_eff = min(tanh_bits, acc_bits) if block.activation else 0
        has_pool = block.pool is not None

        lbufs = []
        for c in range(c_in):
            lb = b.add("LineBuffer", f"b{bi}_lb_c{c}", bi,
                       {"channel": c, "kernel": k, "width": shp.in_w},
                       out_ports=k * k, out_width=b_data)
            src, port = feed[c]
            b.wire(src, port, lb, 0)
            lbufs.append(lb)

        engines = []
        for n in range(n_out):
            per_channel = []
            for c in range(c_in):
                cells = tuple(
                    (ky, kx, "mul", qblk.weights.values[n][c][ky][kx])
                    for ky in range(k) for kx in range(k)
                )
                eng = b.add("ConvEngine", f"b{bi}_eng_n{n}_c{c}", bi,
                            {"n": n, "channel": c, "kernel": k,
                             "cells": cells},
                            out_width=plan.tree_bits)
                for port, (ky, kx, _, _) in enumerate(cells):
                    b.wire(lbufs[c], ky * k + kx, eng, port)
                per_channel.append(eng)
            engines.append(per_channel)

        outputs = []
        for n in range(n_out):
            last_is = "sum"
            csum = b.add("ChannelSum", f"b{bi}_sum_n{n}", bi,
                         {"n": n, "arity": c_in, "in_bits": plan.tree_bits},
                         out_width=plan.sum_bits)
            for c, eng in enumerate(engines[n]):
                b.wire(eng, 0, csum, c)
            tail, tail_port = csum, 0

            if bias_on:
                bias = b.add("BiasAdd", f"b{bi}_bias_n{n}", bi,
                             {"n": n, "bias": qblk.biases[n],
                              "in_bits": plan.sum_bits},
                             out_width=plan.post_bias_bits)
                b.wire(tail, tail_port, bias, 0)
                tail, tail_port, last_is = bias, 0, "bias"

            if has_pool:
                pool = b.add("MaxPool", f"b{bi}_pool_n{n}", bi,
                             {"n": n, "pool": block.pool.kernel,
                              "in_w": shp.conv_w, "in_bits": acc_bits},
                             out_width=acc_bits)
                b.wire(tail, tail_port, pool, 0)
                tail, tail_port, last_is = pool, 0, "pool"

            if block.activation:
                tanh = b.add("TanhLut", f"b{bi}_tanh_n{n}", bi,
                             {"n": n, "a_bits": a_eff, "in_bits": acc_bits},
                             out_width=b_data)
                b.wire(tail, tail_port, tanh, 0)
                tail, tail_port = tanh, 0
            else:
                # fold the block-boundary requantizer into the final actor:
                # arithmetic shift by f_weight with round-to-even, then
                # saturate to the data format
                last = b.actors[tail]
                params = dict(last.params)
                params["requant_shift"] = wfmt.frac
                params["requant_bits"] = b_data
                b.actors[tail] = Actor(last.id, last.kind, last.name,
                                       last.block, params, last.out_ports,
                                       b_data)
            outputs.append((tail, tail_port))

        infos.append(BlockInfo(
            index=bi, name=block.name,
            in_c=shp.in_c, in_h=shp.in_h, in_w=shp.in_w,
            out_c=n_out, conv_h=shp.conv_h, conv_w=shp.conv_w,
            out_h=shp.out_h, out_w=shp.out_w,
            kernel=k, pool=block.pool.kernel if has_pool else 0,
            has_tanh=block.activation is not None,
            bias_enabled=bias_on,
            data_fmt=data_fmt, weight_fmt=wfmt, plan=plan,
            tanh_bits=a_eff,
            output_ids=tuple(a for a, _ in outputs),
        ))
        feed = outputs

    sinks = []
    for n, (src, port) in enumerate(feed):
        sink = b.add("Sink", f"out_n{n}", len(net.blocks) - 1, {"n": n},
                     out_ports=0, out_width=b_data)
        b.wire(src, port, sink, 0)
        sinks.append(sink)

    return DhmGraph(
        name=net.net.name,
        actors=tuple(b.actors),
        edges=tuple(b.edges),
        blocks=tuple(infos),
        input_shape=(c0, net.shapes[0].in_h, net.shapes[0].in_w),
        source_ids=tuple(range(c0)),
        sink_ids=tuple(sinks),
    )


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphStats:
    counts: dict  # actor kind -> count
    multiplier_cells: int
    adder_cells: int
    line_buffer_bits: int
    window_register_bits: int

    @property
    def total_actors(self) -> int:
        return sum(self.counts.values())


def graph_stats(g: DhmGraph) -> GraphStats:
    counts = {kind: 0 for kind in KINDS}
    mults = adders = 0
    for actor in g.actors:
        counts[actor.kind] += 1
        if actor.kind == "ConvEngine":
            cells = actor.params["cells"]
            mults += sum(1 for _, _, op, _ in cells if op == "mul")
            adders += max(0, len(cells) - 1)
        elif actor.kind == "ChannelSum":
            adders += actor.params["arity"] - 1
        elif actor.kind == "BiasAdd":
            adders += 1
    lb_bits = window_bits = 0
    for info in g.blocks:
        b = info.data_fmt.bits
        lb_bits += info.in_c * (info.kernel - 1) * info.in_w * b
        window_bits += info.in_c * info.kernel * b
    return GraphStats(
        counts={k: v for k, v in counts.items() if v},
        multiplier_cells=mults,
        adder_cells=adders,
        line_buffer_bits=lb_bits,
        window_register_bits=window_bits,
    )


# ---------------------------------------------------------------------------
# Deterministic text dump
# ---------------------------------------------------------------------------


def dump_graph(g: DhmGraph) -> str:
    """One actor per line, then one edge per line; stable ordering."""
    lines = [
        f"graph {g.name} input {g.input_shape[0]}x{g.input_shape[1]}"
        f"x{g.input_shape[2]} blocks {len(g.blocks)} "
        f"specialized {'yes' if g.specialized else 'no'}"
    ]
    for info in g.blocks:
        p = info.plan
        lines.append(
            f"block {info.index} {info.name} in {info.in_c}x{info.in_h}"
            f"x{info.in_w} conv {info.conv_h}x{info.conv_w} out "
            f"{info.out_c}x{info.out_h}x{info.out_w} kernel {info.kernel} "
            f"pool {info.pool} tanh {'yes' if info.has_tanh else 'no'} "
            f"bias {'yes' if info.bias_enabled else 'no'} data "
            f"{info.data_fmt} weight {info.weight_fmt} acc "
            f"{p.product_bits}/{p.tree_bits}/{p.sum_bits}/"
            f"{p.post_bias_bits} f_acc {p.f_acc} a_bits {info.tanh_bits}"
        )
    for actor in g.actors:
        parts = [f"actor {actor.id} {actor.kind} {actor.name}"]
        for key in sorted(actor.params):
            value = actor.params[key]
            if key == "cells":
                body = ";".join(f"{ky},{kx},{op},{arg}"
                                for ky, kx, op, arg in value)
                parts.append(f"cells=[{body}]")
            else:
                parts.append(f"{key}={value}")
        parts.append(f"out={actor.out_width}x{actor.out_ports}")
        lines.append(" ".join(parts))
    for edge in g.edges:
        lines.append(f"edge {edge.src}.{edge.src_port} -> "
                     f"{edge.dst}.{edge.dst_port}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Structural self-check
# ---------------------------------------------------------------------------


def _expected_input_widths(g: DhmGraph, actor: Actor) -> Optional[list]:
    """Per-port input widths an actor requires, or None for sources."""
    if actor.kind == "Source":
        return []
    info = g.blocks[actor.block]
    b_data = info.data_fmt.bits
    if actor.kind == "LineBuffer":
        return [b_data]
    if actor.kind == "ConvEngine":
        n_in = max(1, len(actor.params["cells"]))
        return [b_data] * n_in
    if actor.kind == "ChannelSum":
        return [actor.params["in_bits"]] * actor.params["arity"]
    if actor.kind in ("BiasAdd", "MaxPool", "TanhLut"):
        return [actor.params["in_bits"]]
    if actor.kind == "Sink":
        return [b_data]
    raise AssertionError(f"unhandled kind {actor.kind}")


def check_graph(g: DhmGraph) -> list:
    """Structural validation; returns a list of problem strings (empty = ok)."""
    problems = []
    inputs: dict = {}
    for edge in g.edges:
        src = g.actors[edge.src]
        if not 0 <= edge.src_port < src.out_ports:
            problems.append(f"edge {edge}: bad source port")
            continue
        key = (edge.dst, edge.dst_port)
        if key in inputs:
            problems.append(
                f"actor {edge.dst} port {edge.dst_port} driven twice"
            )
        inputs[key] = edge
        if edge.src >= edge.dst:
            problems.append(
                f"edge {edge.src}->{edge.dst} breaks topological id order"
            )

    for actor in g.actors:
        want = _expected_input_widths(g, actor)
        for port, width in enumerate(want):
            edge = inputs.get((actor.id, port))
            if edge is None:
                problems.append(
                    f"actor {actor.id} ({actor.name}) port {port} undriven"
                )
                continue
            got = g.actors[edge.src].out_width
            if got != width:
                problems.append(
                    f"edge into {actor.name}.{port}: width {got}, "
                    f"expected {width}"
                )
        extra = [p for (aid, p) in inputs if aid == actor.id
                 and p >= len(want)]
        for p in sorted(extra):
            problems.append(f"actor {actor.id} ({actor.name}) has "
                            f"unexpected input port {p}")

    for info in g.blocks:
        kinds = {}
        for actor in g.actors:
            if actor.block == info.index and actor.kind != "Sink":
                kinds[actor.kind] = kinds.get(actor.kind, 0) + 1
        want = {
            "LineBuffer": info.in_c,
            "ConvEngine": info.out_c * info.in_c,
            "ChannelSum": info.out_c,
        }
        if info.bias_enabled:
            want["BiasAdd"] = info.out_c
        if info.pool:
            want["MaxPool"] = info.out_c
        if info.has_tanh:
            want["TanhLut"] = info.out_c
        for kind, n in want.items():
            if kinds.get(kind, 0) != n:
                problems.append(
                    f"block {info.index}: {kinds.get(kind, 0)} {kind} "
                    f"actors, expected {n}"
                )
    return problems
