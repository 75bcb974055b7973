"""Command-line driver wiring the whole pipeline.

Subcommands::

    check     parse + validate a topology, print the shape chain
    stats     multiplier-class breakdown of the quantized weights
    graph     dump the expanded (and by default specialized) actor graph
    emit      write the VHDL bundle to a directory
    estimate  resource report (logic units, memory bits, zero DSP blocks)
    simulate  golden reference vs streaming graph, bit-exactness verdict

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
When no weight or image file is supplied, seeded synthetic data is used so
every subcommand works on a bare topology file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from convforge import __version__
from convforge.dhm_ir import check_graph, dump_graph, expand, graph_stats
from convforge.errors import ConvforgeError
from convforge.estimate import (compare_strategies, estimate, format_report)
from convforge.hdlgen import EmitOptions, emit, lint_bundle
from convforge.netparse import load_weights, parse_network, validate
from convforge.quant import choose_weight_format, data_format, quantize_weights
from convforge.simulate import (compare, golden_forward, load_image,
                                stream_simulate)
from convforge.specialize import format_stats, param_stats, specialize_graph
from convforge.synth import random_image_stream, random_weights

_FORMAT_VERSIONS = "topology v1, weights HWF1, images HIM1/P5/P6, VHDL-93"


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _read_topology(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConvforgeError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return validate(parse_network(text))
    except ConvforgeError as exc:
        raise ConvforgeError(f"{path}: {exc}") from exc


def _read_weights(args, vnet):
    if args.weights:
        try:
            blob = Path(args.weights).read_bytes()
        except OSError as exc:
            raise ConvforgeError(
                f"{args.weights}: {exc.strerror or exc}"
            ) from exc
        try:
            return load_weights(blob, vnet)
        except ConvforgeError as exc:
            raise ConvforgeError(f"{args.weights}: {exc}") from exc
    return random_weights(vnet.net, seed=args.seed)


def _quantize(args, ws):
    dfmt = data_format(args.data_bits)
    wfmts = [choose_weight_format(blk, args.weight_bits) for blk in ws.blocks]
    return quantize_weights(ws, dfmt, wfmts)


def _build_graph(args, vnet, qw):
    g = expand(vnet, qw, tanh_bits=args.tanh_bits)
    if not getattr(args, "no_specialize", False):
        g = specialize_graph(g)
    return g


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_check(args) -> int:
    vnet = _read_topology(args.topology)
    c, h, w = vnet.net.input_shape
    print(f"network {vnet.net.name}: input {c}x{h}x{w}")
    chain = [h]
    for block, shp in zip(vnet.net.blocks, vnet.shapes):
        line = (f"  block {block.name}: conv "
                f"{shp.out_c}x{shp.conv_h}x{shp.conv_w}")
        chain.append(shp.conv_h)
        if block.pool:
            line += f", pool {shp.out_c}x{shp.out_h}x{shp.out_w}"
            chain.append(shp.out_h)
        if block.activation:
            line += ", tanh"
        print(line)
    print("chain: " + " -> ".join(str(v) for v in chain))
    if args.weights:
        _read_weights(args, vnet)
        print(f"weights: ok ({len(vnet.net.blocks)} blocks)")
    print("OK")
    return 0


def _cmd_stats(args) -> int:
    vnet = _read_topology(args.topology)
    qw = _quantize(args, _read_weights(args, vnet))
    stats = param_stats(qw)
    if args.json:
        print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(format_stats(stats))
    return 0


def _cmd_graph(args) -> int:
    vnet = _read_topology(args.topology)
    qw = _quantize(args, _read_weights(args, vnet))
    g = _build_graph(args, vnet, qw)
    problems = check_graph(g)
    if problems:
        for p in problems:
            print(f"error: {p}", file=sys.stderr)
        return 1
    sys.stdout.write(dump_graph(g))
    stats = graph_stats(g)
    print(f"actors: {sum(stats.counts.values())}  "
          f"multiplier cells: {stats.multiplier_cells}  "
          f"adder cells: {stats.adder_cells}")
    return 0
    return 0


def _cmd_emit(args) -> int:
    vnet = _read_topology(args.topology)
    qw = _quantize(args, _read_weights(args, vnet))
    g = _build_graph(args, vnet, qw)
    bundle = emit(g, EmitOptions(stamp=args.stamp))
    report = lint_bundle(bundle)
    if not report.ok:
        for v in report.violations:
            print(f"error: {v.file}:{v.line}: [{v.code}] {v.message}",
                  file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for fname, text in bundle.files:
        with open(out / fname, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {out / fname}")
    print(f"top entity: {bundle.top_entity}")
    sys.stdout.write(bundle.manifest_text())
    return 0


def _cmd_estimate(args) -> int:
    vnet = _read_topology(args.topology)
    qw = _quantize(args, _read_weights(args, vnet))
    if args.compare:
        plain = expand(vnet, qw, tanh_bits=args.tanh_bits)
        rep = compare_strategies(plain, specialize_graph(plain))
        print(rep.summary())
        return 0
    g = _build_graph(args, vnet, qw)
    report = estimate(g)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(format_report(report))
    return 0


def _cmd_simulate(args) -> int:
    vnet = _read_topology(args.topology)
    qw = _quantize(args, _read_weights(args, vnet))
    dfmt = qw.data_fmt
    shape = (vnet.shapes[0].in_c, vnet.shapes[0].in_h, vnet.shapes[0].in_w)
    if args.image:
        try:
            blob = Path(args.image).read_bytes()
        except OSError as exc:
            raise ConvforgeError(
                f"{args.image}: {exc.strerror or exc}"
            ) from exc
        try:
            img = load_image(blob, dfmt)
        except ConvforgeError as exc:
            raise ConvforgeError(f"{args.image}: {exc}") from exc
    else:
        img = random_image_stream(shape, dfmt, seed=args.seed)

    want = golden_forward(vnet, qw, img, tanh_bits=args.tanh_bits)
    g = _build_graph(args, vnet, qw)
    engine = None if args.engine == "auto" else args.engine
    got = stream_simulate(g, img, engine=engine)
    diff = compare(want, got)
    for i, (fm, d) in enumerate(zip(want, diff.max_diffs)):
        n, h, w = fm.shape
        print(f"block {i}: {n}x{h}x{w}  max diff {d}")
    if diff.equal:
        print("BIT-EXACT: yes")
        return 0
    print("BIT-EXACT: no")
    print(diff.summary(), file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(sub, fmt=True, weights=True, spec=False):
    sub.add_argument("topology", help="topology text file")
    if fmt:
        sub.add_argument("--data-bits", type=int, default=6, metavar="B",
                         help="stream data width in bits (default 6)")
        sub.add_argument("--weight-bits", type=int, default=6, metavar="B",
                         help="weight width in bits (default 6)")
        sub.add_argument("--tanh-bits", type=int, default=8, metavar="A",
                         help="tanh LUT address bits (default 8)")
    if weights:
        sub.add_argument("--weights", metavar="FILE",
                         help="weight container; synthetic when omitted")
        sub.add_argument("--seed", type=int, default=0,
                         help="seed for synthetic weights and images")
    if spec:
        sub.add_argument("--no-specialize", action="store_true",
                         help="keep every multiplier generic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convforge",
        description="CNN-to-VHDL transpiler with direct hardware mapping",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"convforge {__version__} ({_FORMAT_VERSIONS})",
    )
    subs = parser.add_subparsers(dest="command", required=True,
                                 metavar="SUBCOMMAND")

    sub = subs.add_parser("check", help="parse and validate a topology")
    _add_common(sub, fmt=False)
    sub.set_defaults(func=_cmd_check)

    sub = subs.add_parser("stats", help="multiplier-class statistics")
    _add_common(sub)
    sub.add_argument("--json", action="store_true")
    sub.set_defaults(func=_cmd_stats)

    sub = subs.add_parser("graph", help="dump the actor graph")
    _add_common(sub, spec=True)
    sub.set_defaults(func=_cmd_graph)

    sub = subs.add_parser("emit", help="write the VHDL bundle")
    _add_common(sub, spec=True)
    sub.add_argument("--out", required=True, metavar="DIR",
                     help="output directory")
    sub.add_argument("--stamp", action="store_true",
                     help="stamp files with the generation time "
                          "(breaks determinism)")
    sub.set_defaults(func=_cmd_emit)

    sub = subs.add_parser("estimate", help="resource usage report")
    _add_common(sub, spec=True)
    sub.add_argument("--json", action="store_true")
    sub.add_argument("--compare", action="store_true",
                     help="report specialized vs unspecialized side by side")
    sub.set_defaults(func=_cmd_estimate)

    sub = subs.add_parser("simulate",
                          help="verify stream simulation against the "
                               "golden reference")
    _add_common(sub, spec=True)
    sub.add_argument("--image", metavar="FILE",
                     help="input image (P5/P6/HIM1); synthetic when omitted")
    sub.add_argument("--engine", choices=("auto", "pure", "compiled"),
                     default="auto", help="stream engine selection")
    sub.set_defaults(func=_cmd_simulate)

    return parser


def _check_ranges(parser, args) -> None:
    for attr, lo, hi in (("data_bits", 2, 32), ("weight_bits", 2, 32),
                         ("tanh_bits", 4, 12)):
        value = getattr(args, attr, None)
        if value is not None and not lo <= value <= hi:
            flag = "--" + attr.replace("_", "-")
            parser.error(f"{flag} must be in [{lo}, {hi}], got {value}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_ranges(parser, args)
    try:
        return args.func(args)
    except ConvforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:  # e.g. compiled engine unavailable
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:  # output piped into a pager that quit early
        import os
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
