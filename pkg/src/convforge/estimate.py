"""Structural resource prediction with a vendor-neutral unit model.

Costs are deliberately simple so ordering and ratios, not absolute device
counts, carry the meaning: a surviving constant multiplier of widths
(a, b) costs a*b logic units, an adder of width w costs w units, wires and
fixed shifts cost nothing, and memories are reported raw as bits (line
buffers, shared window registers, tanh ROMs).  Max-pool comparators are
counted as adders of their operand width.  DSP blocks are zero by
construction; every multiply is marked for logic implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

from convforge.dhm_ir import DhmGraph
from convforge.errors import GraphMismatchError


def _tree_adder_widths(m: int, leaf_width: int) -> list:
    """Widths of the adders in a balanced reduction of m leaf terms,
    pairing adjacent operands left to right (the emitter's shape)."""
    widths = [leaf_width] * m
    out = []
    while len(widths) > 1:
        nxt = []
        for i in range(0, len(widths) - 1, 2):
            w = max(widths[i], widths[i + 1]) + 1
            out.append(w)
            nxt.append(w)
        if len(widths) % 2:
            nxt.append(widths[-1])
        widths = nxt
    return out


@dataclass(frozen=True)
class BlockUsage:
    index: int
    name: str
    mult_zero: int
    mult_one: int
    mult_pow2: int
    mult_generic: int
    adders: dict  # width -> count (includes pool comparators)
    line_buffer_bits: int
    window_register_bits: int
    tanh_rom_bits: int
    mult_units: int
    adder_units: int

    @property
    def logic_units(self) -> int:
        return self.mult_units + self.adder_units

    @property
    def memory_bits(self) -> int:
        return (self.line_buffer_bits + self.window_register_bits
                + self.tanh_rom_bits)


@dataclass(frozen=True)
class ResourceReport:
    blocks: tuple  # of BlockUsage
    dsp_blocks: int = 0  # identically zero: multiplies map to logic

    def _total(self, attr: str) -> int:
        return sum(getattr(b, attr) for b in self.blocks)

    @property
    def mult_generic(self) -> int:
        return self._total("mult_generic")

    @property
    def mult_units(self) -> int:
        return self._total("mult_units")

    @property
    def adder_units(self) -> int:
        return self._total("adder_units")

    @property
    def logic_units(self) -> int:
        return self._total("logic_units")

    @property
    def memory_bits(self) -> int:
        return self._total("memory_bits")

    @property
    def line_buffer_bits(self) -> int:
        return self._total("line_buffer_bits")

    def to_dict(self) -> dict:
        return {
            "blocks": [
                {
                    "name": b.name,
                    "mult": {"zero": b.mult_zero, "one": b.mult_one,
                             "pow2": b.mult_pow2, "generic": b.mult_generic},
                    "adders": {str(w): n
                               for w, n in sorted(b.adders.items())},
                    "line_buffer_bits": b.line_buffer_bits,
                    "window_register_bits": b.window_register_bits,
                    "tanh_rom_bits": b.tanh_rom_bits,
                    "mult_units": b.mult_units,
                    "adder_units": b.adder_units,
                    "logic_units": b.logic_units,
                }
                for b in self.blocks
            ],
            "total": {
                "mult_units": self.mult_units,
                "adder_units": self.adder_units,
                "logic_units": self.logic_units,
                "memory_bits": self.memory_bits,
                "dsp_blocks": self.dsp_blocks,
            },
        }


def estimate(g: DhmGraph) -> ResourceReport:
    blocks = []
    for info in g.blocks:
        b_data, b_weight = info.data_fmt.bits, info.weight_fmt.bits
        zero = one = pow2 = generic = 0
        adders: dict = {}
        adder_units = 0

        def note(width: int, count: int = 1):
            nonlocal adder_units
            if count:
                adders[width] = adders.get(width, 0) + count
                adder_units += width * count

        for actor in g.actors:
            if actor.block != info.index:
                continue
            if actor.kind == "ConvEngine":
                cells = actor.params["cells"]
                k = actor.params["kernel"]
                zero += k * k - len(cells)
                for _, _, op, arg in cells:
                    if op == "wire":
                        one += 1
                    elif op == "shift":
                        pow2 += 1
                    else:
                        generic += 1
                for w in _tree_adder_widths(len(cells),
                                            info.plan.product_bits):
                    note(w)
            elif actor.kind == "ChannelSum":
                for w in _tree_adder_widths(actor.params["arity"],
                                            info.plan.tree_bits):
                    note(w)
            elif actor.kind == "BiasAdd":
                note(info.plan.post_bias_bits)
            elif actor.kind == "MaxPool":
                note(actor.params["in_bits"])  # comparator

        rom_bits = 0
        if info.has_tanh:
            rom_bits = info.out_c * (1 << info.tanh_bits) * b_data
        blocks.append(BlockUsage(
            index=info.index, name=info.name,
            mult_zero=zero, mult_one=one, mult_pow2=pow2,
            mult_generic=generic,
            adders=adders,
            line_buffer_bits=(info.in_c * (info.kernel - 1)
                              * info.in_w * b_data),
            window_register_bits=info.in_c * info.kernel * b_data,
            tanh_rom_bits=rom_bits,
            mult_units=generic * b_data * b_weight,
            adder_units=adder_units,
        ))
    return ResourceReport(blocks=tuple(blocks))


def format_report(r: ResourceReport) -> str:
    head = ("block", "zero", "one", "pow2", "generic", "adders",
            "mult units", "adder units", "memory bits")
    rows = [head]
    for b in r.blocks:
        rows.append((b.name, str(b.mult_zero), str(b.mult_one),
                     str(b.mult_pow2), str(b.mult_generic),
                     str(sum(b.adders.values())), str(b.mult_units),
                     str(b.adder_units), str(b.memory_bits)))
    rows.append(("total", str(r._total("mult_zero")),
                 str(r._total("mult_one")), str(r._total("mult_pow2")),
                 str(r.mult_generic),
                 str(sum(sum(b.adders.values()) for b in r.blocks)),
                 str(r.mult_units), str(r.adder_units),
                 str(r.memory_bits)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in rows]
    lines.append(f"dsp blocks: {r.dsp_blocks}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Strategy comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyReport:
    unspecialized: ResourceReport
    specialized: ResourceReport
    mult_unit_ratio: object  # float, or None for unbounded
    logic_unit_ratio: object

    @staticmethod
    def _fmt(ratio) -> str:
        return "unbounded" if ratio is None else f"{ratio:.2f}x"

    def summary(self) -> str:
        return (
            f"multiplier units {self.unspecialized.mult_units} -> "
            f"{self.specialized.mult_units} "
            f"({self._fmt(self.mult_unit_ratio)}), logic units "
            f"{self.unspecialized.logic_units} -> "
            f"{self.specialized.logic_units} "
            f"({self._fmt(self.logic_unit_ratio)})"
        )


def compare_strategies(g_unspecialized: DhmGraph,
                       g_specialized: DhmGraph) -> StrategyReport:
    """Side-by-side unit costs for the same network built both ways."""
    a, b = g_unspecialized.blocks, g_specialized.blocks
    same = len(a) == len(b) and all(
        (x.in_c, x.out_c, x.kernel, x.in_h, x.in_w, x.pool,
         x.data_fmt, x.weight_fmt)
        == (y.in_c, y.out_c, y.kernel, y.in_h, y.in_w, y.pool,
            y.data_fmt, y.weight_fmt)
        for x, y in zip(a, b)
    )
    if not same:
        raise GraphMismatchError(
            "strategy comparison needs two builds of the same network"
        )
    ru, rs = estimate(g_unspecialized), estimate(g_specialized)

    def ratio(x: int, y: int):
        if y == 0:
            return None if x > 0 else 1.0
        return x / y

    return StrategyReport(
        unspecialized=ru, specialized=rs,
        mult_unit_ratio=ratio(ru.mult_units, rs.mult_units),
        logic_unit_ratio=ratio(ru.logic_units, rs.logic_units),
    )
