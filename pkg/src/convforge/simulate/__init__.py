"""Streaming execution, golden reference, and bit-exact comparison."""

from convforge.simulate.engines import (
    compiled_available,
    default_engine,
    run_program,
)
from convforge.simulate.golden import golden_forward
from convforge.simulate.image_io import load_image, pack_him, pack_pgm
from convforge.simulate.lower import FlatProgram, lower
from convforge.simulate.maps import (
    DiffReport,
    FeatureMaps,
    ImageStream,
    compare,
    dump_maps,
)
from convforge.simulate.stream import stream_simulate
from convforge.simulate.tanh import TanhTable, tanh_lut

__all__ = [
    "DiffReport", "FeatureMaps", "FlatProgram", "ImageStream", "TanhTable",
    "compare", "compiled_available", "default_engine", "dump_maps",
    "golden_forward", "load_image", "lower", "pack_him", "pack_pgm",
    "run_program", "stream_simulate", "tanh_lut",
]
