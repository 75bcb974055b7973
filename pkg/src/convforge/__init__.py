"""convforge: CNN-to-VHDL transpiler with direct hardware mapping.

Pipeline: parse a trained-network description, quantize its parameters to
fixed point, expand every layer into a one-actor-per-compute-unit dataflow
graph, specialize each constant multiplier to a wire / shift / adder
structure, then emit VHDL-93, estimate resources, or verify the graph
bit-exactly against a pure golden reference by streaming simulation.
"""

__version__ = "0.1.0"

from convforge.dhm_ir import (
    AccumulatorPlan,
    DhmGraph,
    accumulator_plan,
    check_graph,
    dump_graph,
    expand,
    graph_stats,
)
from convforge.errors import ConvforgeError
from convforge.estimate import (
    ResourceReport,
    StrategyReport,
    compare_strategies,
    estimate,
    format_report,
)
from convforge.hdlgen import EmitOptions, HdlBundle, emit, lint_bundle
from convforge.netparse import (
    Network,
    ValidatedNetwork,
    WeightSet,
    load_weights,
    pack_weights,
    parse_network,
    serialize_network,
    validate,
)
from convforge.quant import (
    FixedPointFormat,
    choose_weight_format,
    data_format,
    dequantize,
    quantize,
    quantize_weights,
)
from convforge.simulate import (
    ImageStream,
    compare,
    golden_forward,
    load_image,
    stream_simulate,
    tanh_lut,
)
from convforge.specialize import (
    ClassStats,
    classify_weight,
    param_stats,
    specialize_graph,
)
from convforge.synth import planted_weights, random_image_stream, random_weights

__all__ = [
    "AccumulatorPlan",
    "ClassStats",
    "ConvforgeError",
    "DhmGraph",
    "EmitOptions",
    "FixedPointFormat",
    "HdlBundle",
    "ImageStream",
    "Network",
    "ResourceReport",
    "StrategyReport",
    "ValidatedNetwork",
    "WeightSet",
    "__version__",
    "accumulator_plan",
    "check_graph",
    "choose_weight_format",
    "classify_weight",
    "compare",
    "compare_strategies",
    "data_format",
    "dequantize",
    "dump_graph",
    "emit",
    "estimate",
    "expand",
    "format_report",
    "golden_forward",
    "graph_stats",
    "lint_bundle",
    "load_image",
    "load_weights",
    "pack_weights",
    "param_stats",
    "parse_network",
    "planted_weights",
    "quantize",
    "quantize_weights",
    "random_image_stream",
    "random_weights",
    "serialize_network",
    "specialize_graph",
    "stream_simulate",
    "tanh_lut",
    "validate",
]
