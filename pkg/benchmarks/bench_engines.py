"""Timing comparison of the two stream engines on the same program.

Builds a mid-sized network once, lowers it once, then repeatedly pushes
the same image through the pure-Python interpreter and (when built) the
compiled one.  Both run the identical flat program, so the ratio reported
at the end is the interpreter overhead alone.

Run from the repository root:

    python3 benchmarks/bench_engines.py
    python3 benchmarks/bench_engines.py --size large --repeats 5
"""

import argparse
import statistics
import time

from convforge.dhm_ir import expand
from convforge.netparse import (ActivationSpec, ConvSpec, LayerBlock,
                                Network, PoolSpec, validate)
from convforge.quant import data_format, quantize_weights
from convforge.simulate.engines import compiled_available, run_program
from convforge.simulate.lower import lower
from convforge.specialize import specialize_graph
from convforge.synth import random_image_stream, random_weights

SIZES = {
    "small": ((1, 16, 16), [("c0", 4, 3, True, 2), ("c1", 4, 3, True, 0)]),
    "medium": ((1, 28, 28), [("c0", 8, 5, True, 2), ("c1", 12, 5, True, 2)]),
    "large": ((3, 32, 32), [("c0", 16, 5, True, 2), ("c1", 16, 5, True, 2),
                            ("c2", 10, 3, True, 0)]),
}


def build_network(shape, dims):
    blocks = []
    bottom = "data"
    for name, n, k, tanh, pool in dims:
        blocks.append(LayerBlock(
            name=name,
            conv=ConvSpec(num_outputs=n, kernel=k),
            pool=PoolSpec(kernel=pool, stride=pool) if pool else None,
            activation=ActivationSpec() if tanh else None,
            bottom=bottom,
            top=name,
        ))
        bottom = name
    return Network(name="bench", input_name="data", input_shape=shape,
                   blocks=tuple(blocks))


def time_engine(prog, flat, engine, repeats):
    runs = []
    for _ in range(repeats):
        start = time.perf_counter()
        run_program(prog, flat, engine)
        runs.append(time.perf_counter() - start)
    return min(runs), statistics.median(runs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", choices=sorted(SIZES), default="medium")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    shape, dims = SIZES[args.size]
    vnet = validate(build_network(shape, dims))
    ws = random_weights(vnet.net, seed=args.seed)
    dfmt = data_format(6)
    qw = quantize_weights(ws, dfmt, data_format(6))
    g = specialize_graph(expand(vnet, qw, tanh_bits=8))
    prog = lower(g)
    img = random_image_stream(shape, dfmt, seed=args.seed + 1)
    flat = [v for seq in img.channels for v in seq]

    n_actors = len(g.actors)
    print(f"network: {args.size}  input {shape[0]}x{shape[1]}x{shape[2]}  "
          f"actors {n_actors}  steps {shape[1] * shape[2]}")

    best_pure, med_pure = time_engine(prog, flat, "pure", args.repeats)
    print(f"pure     best {best_pure * 1e3:9.2f} ms   "
          f"median {med_pure * 1e3:9.2f} ms")

    if not compiled_available():
        print("compiled engine not built; install with the Cython "
              "extension to compare")
        return

    best_c, med_c = time_engine(prog, flat, "compiled", args.repeats)
    print(f"compiled best {best_c * 1e3:9.2f} ms   "
          f"median {med_c * 1e3:9.2f} ms")
    print(f"speedup: {best_pure / best_c:.1f}x (best over best)")

    pure_out = run_program(prog, flat, "pure")
    comp_out = run_program(prog, flat, "compiled")
    assert pure_out == comp_out, "engines disagree; do not trust timings"
    print("outputs: identical")


if __name__ == "__main__":
    main()
