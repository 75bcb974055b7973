"""Streaming simulation of the actor graph, observed at block boundaries."""

from __future__ import annotations

from convforge.dhm_ir import DhmGraph
from convforge.errors import DeadlockDetectedError, ShapeMismatchError
from convforge.simulate.engines import run_program
from convforge.simulate.lower import lower
from convforge.simulate.maps import FeatureMaps, ImageStream


def stream_simulate(g: DhmGraph, img: ImageStream,
                    engine: str = None):
    """Push the image through the graph one pixel per step; returns one
    FeatureMaps per block, same layout as golden_forward."""
    if img.shape != g.input_shape:
        raise ShapeMismatchError(
            f"image shape {img.shape}, graph input {g.input_shape}"
        )
    if img.fmt != g.blocks[0].data_fmt:
        raise ShapeMismatchError(
            f"image format {img.fmt}, graph data format "
            f"{g.blocks[0].data_fmt}"
        )

    prog = lower(g)
    flat = []
    for seq in img.channels:
        flat.extend(seq)
    collected = run_program(prog, flat, engine)

    results = []
    idx = 0
    for bi, (n_maps, out_h, out_w) in enumerate(prog.blocks_meta):
        maps = []
        for n in range(n_maps):
            got, want = collected[idx], prog.obs_expect[idx]
            if len(got) != want:
                raise DeadlockDetectedError(
                    f"block {bi} map {n} emitted {len(got)} of {want} "
                    "expected outputs after the input drained; an upstream "
                    "actor never fired"
                )
            maps.append(tuple(got))
            idx += 1
        results.append(FeatureMaps(shape=(n_maps, out_h, out_w),
                                   maps=tuple(maps)))
    return results
