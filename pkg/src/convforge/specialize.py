"""Constant-multiplier strength reduction over the expanded graph.

Every convolution engine cell multiplies a tap by a compile-time constant,
so the multiplier hardware can be specialized: a zero constant deletes the
cell (and shrinks the adder tree), |c| = 1 becomes a plain wire, |c| = 2^s
becomes a fixed shift, and only the remaining constants keep a real
multiplier.  Negative signs fold into the adder tree as subtractions.
The rewrite is bit-exact and idempotent.
"""

from __future__ import annotations

from dataclasses import dataclass

from convforge.dhm_ir import Actor, DhmGraph, Edge


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultKind:
    kind: str  # zero | one | pow2 | generic
    sign: int = 1
    shift: int = 0
    constant: int = 0


def classify_weight(c: int) -> MultKind:
    if c == 0:
        return MultKind("zero")
    mag = abs(c)
    sign = 1 if c > 0 else -1
    if mag == 1:
        return MultKind("one", sign=sign)
    if mag & (mag - 1) == 0:
        return MultKind("pow2", sign=sign, shift=mag.bit_length() - 1)
    return MultKind("generic", constant=c)


# ---------------------------------------------------------------------------
# Graph rewrite
# ---------------------------------------------------------------------------


def _specialize_cells(cells) -> tuple:
    out = []
    for ky, kx, op, arg in cells:
        if op != "mul":
            out.append((ky, kx, op, arg))  # already rewritten
            continue
        mk = classify_weight(arg)
        if mk.kind == "zero":
            continue
        if mk.kind == "one":
            out.append((ky, kx, "wire", mk.sign))
        elif mk.kind == "pow2":
            out.append((ky, kx, "shift", mk.sign * mk.shift))
        else:
            out.append((ky, kx, "mul", arg))
    return tuple(out)


def specialize_graph(g: DhmGraph) -> DhmGraph:
    """Rewrite every engine's cells per classify_weight, dropping zero
    cells and their tap edges.  An engine whose cells all vanish keeps a
    single firing-cadence tap and emits constant zero."""
    in_edges: dict = {}
    for edge in g.edges:
        in_edges.setdefault(edge.dst, []).append(edge)
    for edges in in_edges.values():
        edges.sort(key=lambda e: e.dst_port)

    actors = list(g.actors)
    new_edges = []
    for edge in g.edges:
        if g.actors[edge.dst].kind != "ConvEngine":
            new_edges.append(edge)

    for actor in g.actors:
        if actor.kind != "ConvEngine":
            continue
        old_cells = actor.params["cells"]
        cells = _specialize_cells(old_cells)
        taps = in_edges.get(actor.id, [])
        if cells:
            kept = {(ky, kx) for ky, kx, _, _ in cells}
            port = 0
            k = actor.params["kernel"]
            for edge, (ky, kx, _, _) in zip(taps, old_cells):
                assert edge.src_port == ky * k + kx
                if (ky, kx) in kept:
                    new_edges.append(Edge(edge.src, edge.src_port,
                                          actor.id, port))
                    port += 1
        elif taps:
            first = taps[0]
            new_edges.append(Edge(first.src, first.src_port, actor.id, 0))
        params = dict(actor.params)
        params["cells"] = cells
        actors[actor.id] = Actor(actor.id, actor.kind, actor.name,
                                 actor.block, params, actor.out_ports,
                                 actor.out_width)

    new_edges.sort(key=lambda e: (e.dst, e.dst_port))
    return DhmGraph(
        name=g.name,
        actors=tuple(actors),
        edges=tuple(new_edges),
        blocks=g.blocks,
        input_shape=g.input_shape,
        source_ids=g.source_ids,
        sink_ids=g.sink_ids,
        specialized=True,
    )


# ---------------------------------------------------------------------------
# Parameter statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassStats:
    zero: int
    one: int
    pow2: int
    other: int

    @property
    def total(self) -> int:
        return self.zero + self.one + self.pow2 + self.other

    def percent(self, which: str) -> float:
        count = getattr(self, which)
        return round(100.0 * count / self.total, 2) if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            which: {"count": getattr(self, which),
                    "percent": self.percent(which)}
            for which in ("zero", "one", "pow2", "other")
        }


def param_stats(qw) -> ClassStats:
    """Classify every conv weight (biases excluded) of a quantized set."""
    counts = {"zero": 0, "one": 0, "pow2": 0, "generic": 0}
    for block in qw.blocks:
        for value in block.weights.iter_values():
            counts[classify_weight(value).kind] += 1
    return ClassStats(zero=counts["zero"], one=counts["one"],
                      pow2=counts["pow2"], other=counts["generic"])


def format_stats(stats: ClassStats) -> str:
    rows = [("class", "count", "percent")]
    for which in ("zero", "one", "pow2", "other"):
        rows.append((which, str(getattr(stats, which)),
                     f"{stats.percent(which):.2f}"))
    rows.append(("total", str(stats.total), "100.00" if stats.total else "0.00"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        "  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip()
        for row in rows
    ) + "\n"
