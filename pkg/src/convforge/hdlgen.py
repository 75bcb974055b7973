"""Structural VHDL-93 emission for the specialized actor graph.

One package file (tanh ROM constants), one file per block holding that
block's entities, and one flat top file that instantiates every actor by
direct entity instantiation.  Entities follow the pixel-flow protocol:
clk, rst_n, fv (frame envelope, passed through), data, dv.  All widths,
slice bounds, and constants are computed here in Python and written as
plain numerals, so the only `*` characters in the whole bundle are the
surviving generic constant multipliers -- a property the tests grep for.
Wide constants (bias values, saturation bounds) are emitted as binary
string literals to stay clear of the 32-bit VHDL integer range.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from convforge.dhm_ir import DhmGraph
from convforge.errors import UnsupportedActorError
from convforge.simulate.tanh import tanh_lut

_RESERVED = frozenset("""
    abs access after alias all and architecture array assert attribute begin
    block body buffer bus case component configuration constant disconnect
    downto else elsif end entity exit file for function generate generic
    group guarded if impure in inertial inout is label library linkage
    literal loop map mod nand new next nor not null of on open or others out
    package port postponed procedure process pure range record register
    reject rem report return rol ror select severity shared signal sla sll
    sra srl subtype then to transport type unaffected units until use
    variable wait when while with xnor xor
""".split())


def sanitize_identifier(name: str, used=None) -> str:
    out = []
    prev_us = True  # also strips leading underscores/digits
    for ch in name.lower():
        if ch.isalnum():
            out.append(ch)
            prev_us = False
        elif not prev_us:
            out.append("_")
            prev_us = True
    ident = "".join(out).rstrip("_") or "u"
    if not ident[0].isalpha():
        ident = "u_" + ident
    if ident in _RESERVED:
        ident = "u_" + ident
    if used is not None:
        base, n = ident, 1
        while ident in used:
            n += 1
            ident = f"{base}{n}"
        used.add(ident)
    return ident


def _bin(value: int, width: int) -> str:
    return '"' + format(value & ((1 << width) - 1), f"0{width}b") + '"'


@dataclass(frozen=True)
class EmitOptions:
    top: Optional[str] = None  # defaults to the sanitized graph name
    stamp: bool = False  # adds a generation-time comment (non-deterministic)


@dataclass(frozen=True)
class HdlBundle:
    files: tuple  # ordered (name, text) pairs
    top_entity: str
    ports: tuple  # (name, direction, width) triples for the top entity

    def file_text(self, name: str) -> str:
        for fname, text in self.files:
            if fname == name:
                return text
        raise KeyError(name)

    def manifest_text(self) -> str:
        rows = [("port", "dir", "width")]
        rows += [(n, d, str(w)) for n, d, w in self.ports]
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        return "\n".join(
            "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
            for row in rows
        ) + "\n"


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


_HEADER = """library ieee;
use ieee.std_logic_1164.all;
use ieee.numeric_std.all;
"""


def emit(g: DhmGraph, opts: EmitOptions = None) -> HdlBundle:
    opts = opts or EmitOptions()
    for actor in g.actors:
        if actor.kind not in ("Source", "LineBuffer", "ConvEngine",
                              "ChannelSum", "BiasAdd", "TanhLut", "MaxPool",
                              "Sink"):
            raise UnsupportedActorError(
                f"no template for actor kind {actor.kind!r}"
            )

    top = sanitize_identifier(opts.top or g.name)
    stamp_line = ""
    if opts.stamp:
        stamp_line = ("-- generated "
                      + time.strftime("%Y-%m-%d %H:%M:%S") + "\n")

    files = [(f"{top}_pkg.vhd", _emit_package(g, top, stamp_line))]
    used_names = {f"{top}_pkg", top}
    for info in g.blocks:
        fname = sanitize_identifier(info.name, used_names)
        files.append((f"{fname}.vhd",
                      _emit_block_file(g, info, top, stamp_line)))
    top_text, ports = _emit_top(g, top, stamp_line)
    files.append((f"{top}.vhd", top_text))
    return HdlBundle(files=tuple(files), top_entity=top, ports=tuple(ports))


def _emit_package(g: DhmGraph, top: str, stamp: str) -> str:
    out = [f"-- {top}: shared constants (activation ROM tables)", stamp,
           _HEADER]
    out.append(f"package {top}_pkg is")
    for info in g.blocks:
        if not info.has_tanh:
            continue
        table = tanh_lut(info.plan, info.data_fmt, info.tanh_bits,
                         in_bits=info.plan.final_bits(info.bias_enabled))
        n = len(table.entries)
        b = info.data_fmt.bits
        out.append(f"  type {top}_b{info.index}_rom_t is array (0 to {n - 1})"
                   f" of std_logic_vector({b - 1} downto 0);")
        out.append(f"  constant {top}_b{info.index}_tanh_rom : "
                   f"{top}_b{info.index}_rom_t := (")
        body = [f"    {_bin(v, b)}" for v in table.entries]
        out.append(",\n".join(body))
        out.append("  );")
    out.append(f"end {top}_pkg;")
    return "\n".join(line for line in out if line != "") + "\n"


def _fold_requant(lines: list, src: str, width: int, shift: int,
                  out_bits: int, prefix: str):
    """Statements mapping a wide signed signal to the data format with
    round-to-even and saturation; appends constants and a process."""
    hi = (1 << (out_bits - 1)) - 1
    lo = -(1 << (out_bits - 1))
    lines.append(f"  constant {prefix}_max : signed({width - 1} downto 0) "
                 f":= {_bin(hi, width)};")
    lines.append(f"  constant {prefix}_min : signed({width - 1} downto 0) "
                 f":= {_bin(lo, width)};")
    lines.append(f"  constant {prefix}_max_out : "
                 f"std_logic_vector({out_bits - 1} downto 0) := "
                 f"{_bin(hi, out_bits)};")
    lines.append(f"  constant {prefix}_min_out : "
                 f"std_logic_vector({out_bits - 1} downto 0) := "
                 f"{_bin(lo, out_bits)};")
    if shift > 0:
        lines.append(f"  constant {prefix}_half : unsigned({shift - 1} "
                     f"downto 0) := {_bin(1 << (shift - 1), shift)};")
    body = [f"  {prefix}_p : process ({src})",
            f"    variable q : signed({width - 1} downto 0);"]
    if shift > 0:
        body.append(f"    variable r : unsigned({shift - 1} downto 0);")
    body.append("  begin")
    if shift > 0:
        body.append(f"    q := shift_right({src}, {shift});")
        body.append(f"    r := unsigned(std_logic_vector("
                    f"{src}({shift - 1} downto 0)));")
        body.append(f"    if r > {prefix}_half or (r = {prefix}_half "
                    f"and q(0) = '1') then")
        body.append("      q := q + 1;")
        body.append("    end if;")
    else:
        body.append(f"    q := {src};")
    body.append(f"    if q > {prefix}_max then")
    body.append(f"      dout <= {prefix}_max_out;")
    body.append(f"    elsif q < {prefix}_min then")
    body.append(f"      dout <= {prefix}_min_out;")
    body.append("    else")
    body.append(f"      dout <= std_logic_vector(resize(q, {out_bits}));")
    body.append("    end if;")
    body.append(f"  end process {prefix}_p;")
    return body


def _entity_decl(name: str, ports: list) -> list:
    lines = [f"entity {name} is", "  port ("]
    for i, (pname, pdir, ptype) in enumerate(ports):
        sep = ";" if i < len(ports) - 1 else ""
        lines.append(f"    {pname} : {pdir} {ptype}{sep}")
    lines.append("  );")
    lines.append(f"end {name};")
    return lines


def _slv(width: int) -> str:
    return f"std_logic_vector({width - 1} downto 0)"


def _adder_tree(terms: list, prefix: str):
    """Balanced reduction over (expr, width) terms; returns
    (declarations, statements, root_expr, root_width).  Adjacent pairing,
    matching the estimator's width accounting."""
    decls, stmts = [], []
    level = 0
    while len(terms) > 1:
        nxt = []
        for i in range(0, len(terms) - 1, 2):
            (ea, wa), (eb, wb) = terms[i], terms[i + 1]
            w = max(wa, wb) + 1
            name = f"{prefix}_l{level}_{i // 2}"
            decls.append(f"  signal {name} : signed({w - 1} downto 0);")
            stmts.append(f"  {name} <= resize({ea}, {w}) "
                         f"+ resize({eb}, {w});")
            nxt.append((name, w))
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
        level += 1
    return decls, stmts, terms[0][0], terms[0][1]


def _emit_block_file(g: DhmGraph, info, top: str, stamp: str) -> str:
    bi = info.index
    sections = [f"-- block {bi} ({info.name}): "
                f"{info.in_c}x{info.in_h}x{info.in_w} -> "
                f"{info.out_c}x{info.out_h}x{info.out_w}, kernel "
                f"{info.kernel}"]
    if stamp:
        sections.append(stamp.rstrip("\n"))

    requant_on = None  # kind carrying the boundary requantizer
    if not info.has_tanh:
        requant_on = "MaxPool" if info.pool else (
            "BiasAdd" if info.bias_enabled else "ChannelSum")

    sections.append(_emit_lbuf(info, top))
    for actor in g.actors:
        if actor.block == bi and actor.kind == "ConvEngine":
            sections.append(_emit_engine(actor, info, top))
    sections.append(_emit_csum(info, top, requant_on == "ChannelSum"))
    if info.bias_enabled:
        sections.append(_emit_bias(info, top, requant_on == "BiasAdd"))
    if info.pool:
        sections.append(_emit_pool(info, top, requant_on == "MaxPool"))
    if info.has_tanh:
        sections.append(_emit_tanh(info, top))
    return "\n\n".join(sections) + "\n"


def _emit_lbuf(info, top: str) -> str:
    b = info.data_fmt.bits
    k, w = info.kernel, info.in_w
    name = f"{top}_b{info.index}_lbuf"
    ringlen = (k - 1) * w + k
    taps_w = k * k * b

    lines = [_HEADER]
    lines += _entity_decl(name, [
        ("clk", "in", "std_logic"),
        ("rst_n", "in", "std_logic"),
        ("fv", "in", "std_logic"),
        ("din", "in", _slv(b)),
        ("din_dv", "in", "std_logic"),
        ("taps", "out", _slv(taps_w)),
        ("dout_dv", "out", "std_logic"),
    ])
    lines.append(f"architecture rtl of {name} is")
    if ringlen > 1:
        lines.append(f"  type ring_t is array (0 to {ringlen - 2}) of "
                     f"{_slv(b)};")
        lines.append("  signal ring : ring_t;")
    lines.append(f"  signal cnt_x : integer range 0 to {w - 1};")
    lines.append(f"  signal cnt_y : integer range 0 to {k - 1};")
    lines.append("begin")
    lines.append("  step : process (clk)")
    lines.append("  begin")
    lines.append("    if rising_edge(clk) then")
    lines.append("      if rst_n = '0' then")
    lines.append("        cnt_x <= 0;")
    lines.append("        cnt_y <= 0;")
    lines.append("      elsif din_dv = '1' then")
    if ringlen == 2:
        lines.append("        ring(0) <= din;")
    elif ringlen > 2:
        lines.append("        ring(0) <= din;")
        lines.append(f"        ring(1 to {ringlen - 2}) <= "
                     f"ring(0 to {ringlen - 3});")
    lines.append(f"        if cnt_x = {w - 1} then")
    lines.append("          cnt_x <= 0;")
    lines.append(f"          if cnt_y < {k - 1} then")
    lines.append("            cnt_y <= cnt_y + 1;")
    lines.append("          end if;")
    lines.append("        else")
    lines.append("          cnt_x <= cnt_x + 1;")
    lines.append("        end if;")
    lines.append("      end if;")
    lines.append("    end if;")
    lines.append("  end process step;")
    for ky in range(k):
        for kx in range(k):
            d = (k - 1 - ky) * w + (k - 1 - kx)
            hi = (ky * k + kx + 1) * b - 1
            lo = (ky * k + kx) * b
            src = "din" if d == 0 else f"ring({d - 1})"
            lines.append(f"  taps({hi} downto {lo}) <= {src};")
    lines.append(f"  dout_dv <= din_dv when cnt_x >= {k - 1} and "
                 f"cnt_y >= {k - 1} else '0';")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_engine(actor, info, top: str) -> str:
    b = info.data_fmt.bits
    bw = info.weight_fmt.bits
    k = actor.params["kernel"]
    pw = info.plan.product_bits
    tree = info.plan.tree_bits
    cells = actor.params["cells"]
    name = f"{top}_{actor.name}"

    lines = [_HEADER]
    lines += _entity_decl(name, [
        ("clk", "in", "std_logic"),
        ("rst_n", "in", "std_logic"),
        ("fv", "in", "std_logic"),
        ("taps", "in", _slv(k * k * b)),
        ("din_dv", "in", "std_logic"),
        ("dout", "out", _slv(tree)),
        ("dout_dv", "out", "std_logic"),
    ])
    lines.append(f"architecture rtl of {name} is")
    if any(op == "mul" for _, _, op, _ in cells):
        # documented toolchain hook: constant products stay in logic cells
        lines.append("  -- synthesis: map the constant multiplications "
                     "below to logic cells,")
        lines.append("  -- not DSP blocks; attach the consuming "
                     "toolchain's no-dsp attribute")
        lines.append("  -- to this entity (the widths are LUT-friendly "
                     "by construction).")

    decls, stmts, terms = [], [], []
    for j, (ky, kx, op, arg) in enumerate(cells):
        hi = (ky * k + kx + 1) * b - 1
        lo = (ky * k + kx) * b
        tap = f"t_{j}"
        decls.append(f"  signal {tap} : signed({b - 1} downto 0);")
        stmts.append(f"  {tap} <= signed(taps({hi} downto {lo}));")
        term = f"m_{j}"
        decls.append(f"  signal {term} : signed({pw - 1} downto 0);")
        if op == "mul":
            decls.append(f"  constant c_{j} : signed({bw - 1} downto 0) "
                         f":= {_bin(arg, bw)};")
            # the one place a multiplier survives; mapped to logic cells,
            # never DSP, by the consuming toolchain
            stmts.append(f"  {term} <= {tap} * c_{j};")
        elif op == "wire":
            body = f"resize({tap}, {pw})"
            stmts.append(f"  {term} <= {'-' if arg < 0 else ''}{body};")
        else:  # shift
            s = abs(arg)
            body = f"shift_left(resize({tap}, {pw}), {s})"
            stmts.append(f"  {term} <= {'-' if arg < 0 else ''}{body};")
        terms.append((term, pw))

    if terms:
        tdecls, tstmts, root, root_w = _adder_tree(terms, "a")
        decls += tdecls
        stmts += tstmts
        stmts.append(f"  dout <= std_logic_vector(resize({root}, {tree}));")
    else:
        stmts.append("  dout <= (others => '0');")
    lines += decls
    lines.append("begin")
    lines += stmts
    lines.append("  dout_dv <= din_dv;")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_csum(info, top: str, requant: bool) -> str:
    c = info.in_c
    tree = info.plan.tree_bits
    total = info.plan.sum_bits
    b = info.data_fmt.bits
    name = f"{top}_b{info.index}_csum"
    out_bits = b if requant else total

    ports = [("clk", "in", "std_logic"), ("rst_n", "in", "std_logic"),
             ("fv", "in", "std_logic")]
    ports += [(f"din_{j}", "in", _slv(tree)) for j in range(c)]
    ports += [("din_dv", "in", "std_logic"),
              ("dout", "out", _slv(out_bits)),
              ("dout_dv", "out", "std_logic")]

    lines = [_HEADER]
    lines += _entity_decl(name, ports)
    lines.append(f"architecture rtl of {name} is")
    terms = [(f"signed(din_{j})", tree) for j in range(c)]
    decls, stmts, root, root_w = _adder_tree(terms, "s")
    if root_w == tree:  # single channel: no adders, pass through
        decls.append(f"  signal s_root : signed({total - 1} downto 0);")
        stmts.append(f"  s_root <= resize({root}, {total});")
        root, root_w = "s_root", total
    lines += decls
    if requant:
        body = _fold_requant(lines, root, root_w,
                             info.weight_fmt.frac, b, "rq")
        lines.append("begin")
        lines += stmts
        lines += body
    else:
        lines.append("begin")
        lines += stmts
        lines.append(f"  dout <= std_logic_vector(resize({root}, "
                     f"{total}));")
    lines.append("  dout_dv <= din_dv;")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_bias(info, top: str, requant: bool) -> str:
    total = info.plan.sum_bits
    post = info.plan.post_bias_bits
    b = info.data_fmt.bits
    name = f"{top}_b{info.index}_bias"
    out_bits = b if requant else post

    lines = [_HEADER]
    lines.append(f"entity {name} is")
    lines.append("  generic (")
    lines.append(f"    bias_c : {_slv(post)}")
    lines.append("  );")
    lines.append("  port (")
    lines.append("    clk : in std_logic;")
    lines.append("    rst_n : in std_logic;")
    lines.append("    fv : in std_logic;")
    lines.append(f"    din : in {_slv(total)};")
    lines.append("    din_dv : in std_logic;")
    lines.append(f"    dout : out {_slv(out_bits)};")
    lines.append("    dout_dv : out std_logic")
    lines.append("  );")
    lines.append(f"end {name};")
    lines.append(f"architecture rtl of {name} is")
    lines.append(f"  signal acc : signed({post - 1} downto 0);")
    if requant:
        body = _fold_requant(lines, "acc", post, info.weight_fmt.frac, b,
                             "rq")
        lines.append("begin")
        lines.append(f"  acc <= resize(signed(din), {post}) "
                     "+ signed(bias_c);")
        lines += body
    else:
        lines.append("begin")
        lines.append(f"  acc <= resize(signed(din), {post}) "
                     "+ signed(bias_c);")
        lines.append("  dout <= std_logic_vector(acc);")
    lines.append("  dout_dv <= din_dv;")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_pool(info, top: str, requant: bool) -> str:
    p = info.pool
    w = info.conv_w
    wb = info.plan.final_bits(info.bias_enabled)
    b = info.data_fmt.bits
    cm = w // p
    name = f"{top}_b{info.index}_pool"
    out_bits = b if requant else wb

    lines = [_HEADER]
    lines += _entity_decl(name, [
        ("clk", "in", "std_logic"),
        ("rst_n", "in", "std_logic"),
        ("fv", "in", "std_logic"),
        ("din", "in", _slv(wb)),
        ("din_dv", "in", "std_logic"),
        ("dout", "out", _slv(out_bits)),
        ("dout_dv", "out", "std_logic"),
    ])
    lines.append(f"architecture rtl of {name} is")

    if p == 1:  # degenerate window: every pixel is its own maximum
        if requant:
            lines.append(f"  signal best : signed({wb - 1} downto 0);")
            body = _fold_requant(lines, "best", wb, info.weight_fmt.frac,
                                 b, "rq")
            lines.append("begin")
            lines.append("  best <= signed(din);")
            lines += body
        else:
            lines.append("begin")
            lines.append("  dout <= din;")
        lines.append("  dout_dv <= din_dv;")
        lines.append("end rtl;")
        return "\n".join(lines)

    lines.append(f"  type col_t is array (0 to {cm - 1}) of {_slv(wb)};")
    lines.append("  signal colmax : col_t;")
    lines.append(f"  signal xcnt : integer range 0 to {w - 1};")
    lines.append(f"  signal px : integer range 0 to {p - 1};")
    lines.append(f"  signal py : integer range 0 to {p - 1};")
    lines.append(f"  signal col : integer range 0 to {cm};")
    lines.append(f"  signal best : signed({wb - 1} downto 0);")
    if requant:
        body = _fold_requant(lines, "best", wb, info.weight_fmt.frac, b,
                             "rq")
    lines.append("begin")
    lines.append("  step : process (clk)")
    lines.append("  begin")
    lines.append("    if rising_edge(clk) then")
    lines.append("      if rst_n = '0' then")
    lines.append("        xcnt <= 0;")
    lines.append("        px <= 0;")
    lines.append("        py <= 0;")
    lines.append("        col <= 0;")
    lines.append("      elsif din_dv = '1' then")
    lines.append(f"        if col <= {cm - 1} then")
    lines.append("          if px = 0 and py = 0 then")
    lines.append("            colmax(col) <= din;")
    lines.append("          elsif signed(din) > signed(colmax(col)) then")
    lines.append("            colmax(col) <= din;")
    lines.append("          end if;")
    lines.append("        end if;")
    lines.append(f"        if xcnt = {w - 1} then")
    lines.append("          xcnt <= 0;")
    lines.append("          px <= 0;")
    lines.append("          col <= 0;")
    lines.append(f"          if py = {p - 1} then")
    lines.append("            py <= 0;")
    lines.append("          else")
    lines.append("            py <= py + 1;")
    lines.append("          end if;")
    lines.append("        else")
    lines.append("          xcnt <= xcnt + 1;")
    lines.append(f"          if px = {p - 1} then")
    lines.append("            px <= 0;")
    lines.append("            col <= col + 1;")
    lines.append("          else")
    lines.append("            px <= px + 1;")
    lines.append("          end if;")
    lines.append("        end if;")
    lines.append("      end if;")
    lines.append("    end if;")
    lines.append("  end process step;")
    lines.append("  pick : process (din, colmax, col)")
    lines.append("  begin")
    lines.append(f"    if col <= {cm - 1} and "
                 "signed(colmax(col)) > signed(din) then")
    lines.append("      best <= signed(colmax(col));")
    lines.append("    else")
    lines.append("      best <= signed(din);")
    lines.append("    end if;")
    lines.append("  end process pick;")
    if requant:
        lines += body
    else:
        lines.append("  dout <= std_logic_vector(best);")
    lines.append(f"  dout_dv <= din_dv when px = {p - 1} and py = {p - 1} "
                 "else '0';")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_tanh(info, top: str) -> str:
    a = info.tanh_bits
    wb = info.plan.final_bits(info.bias_enabled)
    b = info.data_fmt.bits
    half = 1 << (a - 1)
    name = f"{top}_b{info.index}_tanh"

    lines = [_HEADER, f"use work.{top}_pkg.all;"]
    lines += _entity_decl(name, [
        ("clk", "in", "std_logic"),
        ("rst_n", "in", "std_logic"),
        ("fv", "in", "std_logic"),
        ("din", "in", _slv(wb)),
        ("din_dv", "in", "std_logic"),
        ("dout", "out", _slv(b)),
        ("dout_dv", "out", "std_logic"),
    ])
    lines.append(f"architecture rtl of {name} is")
    lines.append("begin")
    lines.append(f"  dout <= {top}_b{info.index}_tanh_rom(to_integer("
                 f"signed(din({wb - 1} downto {wb - a}))) + {half});")
    lines.append("  dout_dv <= din_dv;")
    lines.append("end rtl;")
    return "\n".join(lines)


def _emit_top(g: DhmGraph, top: str, stamp: str):
    b_in = g.blocks[0].data_fmt.bits
    b_out = g.blocks[-1].data_fmt.bits
    c0 = g.input_shape[0]
    n_out = len(g.sink_ids)

    ports = [("clk", "in", 1), ("rst_n", "in", 1), ("in_fv", "in", 1),
             ("in_dv", "in", 1)]
    ports += [(f"in_data_{c}", "in", b_in) for c in range(c0)]
    ports += [(f"out_data_{n}", "out", b_out) for n in range(n_out)]
    ports += [("out_dv", "out", 1), ("out_fv", "out", 1)]

    producer = {}
    for edge in g.edges:
        producer[(edge.dst, edge.dst_port)] = (edge.src, edge.src_port)

    def feed_names(actor_id: int, port: int = 0):
        """(data signal, dv signal) driving the given input port."""
        src_id, _ = producer[(actor_id, port)]
        src = g.actors[src_id]
        if src.kind == "Source":
            return f"in_data_{src.params['channel']}", "in_dv"
        if src.kind == "LineBuffer":
            return f"s_{src.name}_taps", f"s_{src.name}_dv"
        return f"s_{src.name}", f"s_{src.name}_dv"

    lines = [f"-- {top}: flat direct-mapped network, one entity per actor"]
    if stamp:
        lines.append(stamp.rstrip("\n"))
    lines.append(_HEADER)
    decl = [f"entity {top} is", "  port ("]
    for i, (pname, pdir, width) in enumerate(ports):
        ptype = "std_logic" if width == 1 else _slv(width)
        sep = ";" if i < len(ports) - 1 else ""
        decl.append(f"    {pname} : {pdir} {ptype}{sep}")
    decl.append("  );")
    decl.append(f"end {top};")
    lines += decl

    lines.append(f"architecture structural of {top} is")
    for actor in g.actors:
        if actor.kind in ("Source", "Sink"):
            continue
        if actor.kind == "LineBuffer":
            k = actor.params["kernel"]
            width = k * k * actor.out_width
            lines.append(f"  signal s_{actor.name}_taps : {_slv(width)};")
        else:
            lines.append(f"  signal s_{actor.name} : "
                         f"{_slv(actor.out_width)};")
        lines.append(f"  signal s_{actor.name}_dv : std_logic;")
    lines.append("begin")

    for actor in g.actors:
        if actor.kind in ("Source", "Sink"):
            continue
        ent = (f"{top}_{actor.name}" if actor.kind == "ConvEngine"
               else f"{top}_b{actor.block}_"
                    + {"LineBuffer": "lbuf", "ChannelSum": "csum",
                       "BiasAdd": "bias", "MaxPool": "pool",
                       "TanhLut": "tanh"}[actor.kind])
        label = f"u_{actor.name}"
        lines.append(f"  {label} : entity work.{ent}")
        if actor.kind == "BiasAdd":
            info = g.blocks[actor.block]
            lines.append("    generic map (")
            lines.append(f"      bias_c => {_bin(actor.params['bias'], info.plan.post_bias_bits)}")
            lines.append("    )")
        lines.append("    port map (")
        maps = [("clk", "clk"), ("rst_n", "rst_n"), ("fv", "in_fv")]
        if actor.kind == "LineBuffer":
            data, dv = feed_names(actor.id)
            maps += [("din", data), ("din_dv", dv),
                     ("taps", f"s_{actor.name}_taps"),
                     ("dout_dv", f"s_{actor.name}_dv")]
        elif actor.kind == "ConvEngine":
            data, dv = feed_names(actor.id)
            maps += [("taps", data), ("din_dv", dv),
                     ("dout", f"s_{actor.name}"),
                     ("dout_dv", f"s_{actor.name}_dv")]
        elif actor.kind == "ChannelSum":
            arity = actor.params["arity"]
            dv = None
            for j in range(arity):
                data, dv_j = feed_names(actor.id, j)
                maps.append((f"din_{j}", data))
                if dv is None:
                    dv = dv_j
            maps += [("din_dv", dv), ("dout", f"s_{actor.name}"),
                     ("dout_dv", f"s_{actor.name}_dv")]
        else:  # BiasAdd, MaxPool, TanhLut
            data, dv = feed_names(actor.id)
            maps += [("din", data), ("din_dv", dv),
                     ("dout", f"s_{actor.name}"),
                     ("dout_dv", f"s_{actor.name}_dv")]
        for i, (formal, actual) in enumerate(maps):
            sep = "," if i < len(maps) - 1 else ""
            lines.append(f"      {formal} => {actual}{sep}")
        lines.append("    );")

    out_dv_src = None
    for n, sink_id in enumerate(g.sink_ids):
        data, dv = feed_names(sink_id)
        lines.append(f"  out_data_{n} <= {data};")
        if out_dv_src is None:
            out_dv_src = dv
    lines.append(f"  out_dv <= {out_dv_src};")
    lines.append("  out_fv <= in_fv;")
    lines.append("end structural;")
    return "\n".join(lines) + "\n", ports


# ---------------------------------------------------------------------------
# Lint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LintViolation:
    code: str
    file: str
    line: int
    message: str


@dataclass(frozen=True)
class LintReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def _legal_identifier(name: str) -> bool:
    if not name or not name[0].isalpha():
        return False
    if "__" in name or name.endswith("_"):
        return False
    if name.lower() in _RESERVED:
        return False
    return all(ch.isalnum() or ch == "_" for ch in name)


def lint_bundle(bundle: HdlBundle) -> LintReport:
    """Structural self-checks over the emitted text: design-unit balance,
    instantiation targets, signal-assignment targets, identifier legality,
    duplicate instance labels."""
    import re

    violations = []
    declared_entities = set()
    for fname, text in bundle.files:
        for m in re.finditer(r"^entity\s+(\w+)\s+is", text, re.M):
            declared_entities.add(m.group(1))

    for fname, text in bundle.files:
        lines = text.split("\n")

        # design-unit balance
        for unit_kind in ("entity", "architecture", "package"):
            if unit_kind == "architecture":
                pat = re.compile(r"^architecture\s+(\w+)\s+of\s+\w+\s+is")
            else:
                pat = re.compile(rf"^{unit_kind}\s+(\w+)\s+is")
            for i, line in enumerate(lines):
                m = pat.match(line)
                if not m:
                    continue
                unit = m.group(1)
                closer = re.compile(rf"^end\s+{unit}\s*;")
                if not any(closer.match(l) for l in lines[i + 1:]):
                    violations.append(LintViolation(
                        "UnbalancedDesignUnit", fname, i + 1,
                        f"{unit_kind} {unit} has no matching end"
                    ))
                if not _legal_identifier(unit):
                    violations.append(LintViolation(
                        "IllegalIdentifier", fname, i + 1,
                        f"{unit_kind} name {unit!r} is not a legal "
                        "VHDL-93 identifier"
                    ))

        # instantiations reference emitted entities; labels unique
        labels_seen = set()
        for i, line in enumerate(lines):
            m = re.match(r"^\s*(\w+)\s*:\s*entity\s+work\.(\w+)", line)
            if not m:
                continue
            label, target = m.group(1), m.group(2)
            if target not in declared_entities:
                violations.append(LintViolation(
                    "UndeclaredEntity", fname, i + 1,
                    f"instantiation of unknown entity {target}"
                ))
            if label in labels_seen:
                violations.append(LintViolation(
                    "DuplicateLabel", fname, i + 1,
                    f"instance label {label} reused"
                ))
            labels_seen.add(label)

        # signal assignment targets must be declared signals or out ports
        known = set()
        for m in re.finditer(r"^\s*signal\s+(\w+)\s*:", text, re.M):
            known.add(m.group(1))
            if not _legal_identifier(m.group(1)):
                violations.append(LintViolation(
                    "IllegalIdentifier", fname, 0,
                    f"signal name {m.group(1)!r} illegal"
                ))
        for m in re.finditer(r"^\s*(\w+)\s*:\s*(?:in|out)\s", text, re.M):
            known.add(m.group(1))
        for m in re.finditer(r"^\s*constant\s+(\w+)\s*:", text, re.M):
            known.add(m.group(1))
        for i, line in enumerate(lines):
            m = re.match(r"^\s*(\w+)(?:\(\d+\s+downto\s+\d+\))?\s*<=", line)
            if m and m.group(1) not in known:
                violations.append(LintViolation(
                    "UndeclaredSignal", fname, i + 1,
                    f"assignment to undeclared signal {m.group(1)}"
                ))

    return LintReport(violations=tuple(violations))
