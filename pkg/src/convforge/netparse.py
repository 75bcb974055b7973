"""Topology parsing, shape validation, and the binary weight container.

Topology files use a closed subset of the prototxt idiom::

    name: "lenet"
    input: "data"
    input_dim: 1          # batch, must be 1
    input_dim: 1          # channels
    input_dim: 28         # height
    input_dim: 28         # width
    layer {
      name: "conv1"
      type: "Convolution"
      bottom: "data"
      top: "conv1"
      convolution_param { num_output: 20 kernel_size: 5 }
    }
    layer {
      name: "pool1"
      type: "Pooling"
      bottom: "conv1"
      top: "pool1"
      pooling_param { pool: MAX kernel_size: 2 stride: 2 }
    }
    layer { name: "tanh1" type: "TanH" bottom: "pool1" top: "tanh1" }

Layer types are limited to Convolution / Pooling / TanH.  A Convolution
declaration opens a new block; Pooling and TanH attach to the block whose
running output they consume, in conv -> pool -> tanh order.  Any key not
listed above is rejected.  `#` starts a line comment.

Weight containers are little-endian binary: magic ``HWF1``, u32 block
count, then per block u32 N, u32 C, u32 K, N*C*K*K float64 weights in
[n][c][ky][kx] row-major order, and N float64 biases.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from typing import Optional

from convforge.errors import (
    BadMagicError,
    ChannelMismatchError,
    DuplicateLayerNameError,
    MissingRequiredFieldError,
    ShapeUnderflowError,
    SizeMismatchError,
    TopologySyntaxError,
    TruncatedFileError,
    UnknownKeyError,
)

# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvSpec:
    """Convolution parameters: N output maps, odd KxK kernel, stride 1."""

    num_outputs: int
    kernel: int
    stride: int = 1
    bias_enabled: bool = True

    def __post_init__(self):
        if self.num_outputs < 1:
            raise ValueError("num_outputs must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be odd and >= 1")
        if self.stride != 1:
            raise ValueError("conv stride is fixed at 1")


@dataclass(frozen=True)
class PoolSpec:
    """Non-overlapping max pooling: kernel == stride."""

    kernel: int = 2
    stride: int = 2
    method: str = "MAX"

    def __post_init__(self):
        if self.kernel < 1:
            raise ValueError("pool kernel must be >= 1")
        if self.kernel != self.stride:
            raise ValueError("pool kernel must equal stride")
        if self.method != "MAX":
            raise ValueError("only MAX pooling is supported")


@dataclass(frozen=True)
class ActivationSpec:
    kind: str = "TANH"

    def __post_init__(self):
        if self.kind != "TANH":
            raise ValueError("only TANH activation is supported")


@dataclass(frozen=True)
class LayerBlock:
    """One conv block with optional pool and activation stages.

    ``bottom`` is the tensor the conv stage consumes; ``top`` is the name of
    the block's final output tensor (after pool/activation).
    """

    name: str
    conv: ConvSpec
    pool: Optional[PoolSpec]
    activation: Optional[ActivationSpec]
    bottom: str
    top: str


@dataclass(frozen=True)
class Network:
    name: str
    input_name: str
    input_shape: tuple[int, int, int]  # (channels, height, width)
    blocks: tuple[LayerBlock, ...]

    def __post_init__(self):
        c, h, w = self.input_shape
        if min(c, h, w) < 1:
            raise ValueError("input dimensions must be >= 1")
        if not self.blocks:
            raise ValueError("network needs at least one block")


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>\#[^\n]*)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<number>-?[0-9]+)
      | (?P<string>"(?:[^"\\\n]|\\.)*")
      | (?P<punct>[{}:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | number | string | punct | eof
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise TopologySyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), line, m.start() - line_start + 1))
        line += m.group().count("\n")
        nl = m.group().rfind("\n")
        if nl >= 0:
            line_start = m.start() + nl + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._i = 0

    def peek(self) -> _Token:
        return self._tokens[self._i]

    def next(self) -> _Token:
        tok = self._tokens[self._i]
        if tok.kind != "eof":
            self._i += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise TopologySyntaxError(
                f"expected {want}, got {tok.text!r}" if tok.kind != "eof"
                else f"expected {want}, got end of input",
                tok.line,
                tok.column,
            )
        return tok


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOP_KEYS = ("name", "input", "input_dim", "layer")
_LAYER_KEYS = ("name", "type", "bottom", "top", "convolution_param", "pooling_param")
_CONV_KEYS = ("num_output", "kernel_size")
_POOL_KEYS = ("pool", "kernel_size", "stride")


def _err(msg: str, tok: _Token, cls=TopologySyntaxError):
    raise cls(msg, tok.line, tok.column)


def _parse_string(ts: _TokenStream) -> str:
    ts.expect("punct", ":")
    tok = ts.expect("string")
    return tok.text[1:-1]


def _parse_int(ts: _TokenStream) -> tuple[int, _Token]:
    ts.expect("punct", ":")
    tok = ts.expect("number")
    return int(tok.text), tok


@dataclass
class _RawLayer:
    name: str
    type: str
    bottom: str
    top: str
    conv_param: Optional[dict]
    pool_param: Optional[dict]
    tok: _Token  # position of the `layer` keyword, for error reporting


def _parse_param_group(ts: _TokenStream, allowed, group: str) -> dict:
    ts.expect("punct", "{")
    fields: dict = {}
    while True:
        tok = ts.peek()
        if tok.kind == "punct" and tok.text == "}":
            ts.next()
            return fields
        if tok.kind != "ident":
            _err(f"expected a key or '}}' in {group}", tok)
        if tok.text not in allowed:
            _err(f"unknown key {tok.text!r} in {group}", tok, UnknownKeyError)
        key = ts.next().text
        if key in fields:
            _err(f"duplicate key {key!r} in {group}", tok)
        if key == "pool":
            ts.expect("punct", ":")
            val = ts.expect("ident")
            if val.text != "MAX":
                _err(f"unsupported pool method {val.text!r} (only MAX)", val)
            fields[key] = val.text
        else:
            value, vtok = _parse_int(ts)
            if value < 1:
                _err(f"{key} must be >= 1", vtok)
            fields[key] = value


def _parse_layer(ts: _TokenStream, layer_tok: _Token) -> _RawLayer:
    ts.expect("punct", "{")
    fields: dict = {}
    while True:
        tok = ts.peek()
        if tok.kind == "punct" and tok.text == "}":
            ts.next()
            break
        if tok.kind != "ident":
            _err("expected a key or '}' in layer", tok)
        if tok.text not in _LAYER_KEYS:
            _err(f"unknown key {tok.text!r} in layer", tok, UnknownKeyError)
        key = ts.next().text
        if key in fields:
            _err(f"duplicate key {key!r} in layer", tok)
        if key == "convolution_param":
            fields[key] = (_parse_param_group(ts, _CONV_KEYS, key), tok)
        elif key == "pooling_param":
            fields[key] = (_parse_param_group(ts, _POOL_KEYS, key), tok)
        else:
            fields[key] = (_parse_string(ts), tok)

    for req in ("name", "type", "bottom", "top"):
        if req not in fields:
            _err(f"layer is missing required field {req!r}",
                 layer_tok, MissingRequiredFieldError)
    return _RawLayer(
        name=fields["name"][0],
        type=fields["type"][0],
        bottom=fields["bottom"][0],
        top=fields["top"][0],
        conv_param=fields.get("convolution_param", (None, None))[0],
        pool_param=fields.get("pooling_param", (None, None))[0],
        tok=layer_tok,
    )


def parse_network(text: str) -> Network:
    """Parse topology text into a Network, preserving declaration order."""
    ts = _TokenStream(_tokenize(text))
    if ts.peek().kind == "eof":
        tok = ts.peek()
        _err("empty topology", tok)

    net_name = "cnn"
    input_name: Optional[str] = None
    input_dims: list[int] = []
    raw_layers: list[_RawLayer] = []

    while ts.peek().kind != "eof":
        tok = ts.peek()
        if tok.kind != "ident":
            _err("expected a top-level key", tok)
        if tok.text not in _TOP_KEYS:
            _err(f"unknown top-level key {tok.text!r}", tok, UnknownKeyError)
        key = ts.next().text
        if key == "name":
            net_name = _parse_string(ts)
        elif key == "input":
            input_name = _parse_string(ts)
        elif key == "input_dim":
            value, vtok = _parse_int(ts)
            if len(input_dims) == 4:
                _err("more than 4 input_dim values", vtok)
            if len(input_dims) == 0 and value != 1:
                _err("batch dimension must be 1", vtok)
            input_dims.append(value)
        else:
            raw_layers.append(_parse_layer(ts, tok))

    eof = ts.peek()
    if input_name is None:
        _err("missing input declaration", eof, MissingRequiredFieldError)
    if len(input_dims) != 4:
        _err("expected exactly 4 input_dim values", eof, MissingRequiredFieldError)
    if not raw_layers:
        _err("topology declares no layers", eof, MissingRequiredFieldError)

    seen_names: set[str] = set()
    for raw in raw_layers:
        if raw.name in seen_names:
            _err(f"duplicate layer name {raw.name!r}", raw.tok, DuplicateLayerNameError)
        seen_names.add(raw.name)

    blocks = _assemble_blocks(raw_layers)
    return Network(
        name=net_name,
        input_name=input_name,
        input_shape=(input_dims[1], input_dims[2], input_dims[3]),
        blocks=tuple(blocks),
    )


@dataclass
class _OpenBlock:
    name: str
    conv: ConvSpec
    bottom: str
    top: str
    pool: Optional[PoolSpec] = None
    activation: Optional[ActivationSpec] = None

    def close(self) -> LayerBlock:
        return LayerBlock(self.name, self.conv, self.pool, self.activation,
                          self.bottom, self.top)


def _assemble_blocks(raw_layers: list[_RawLayer]) -> list[LayerBlock]:
    blocks: list[LayerBlock] = []
    current: Optional[_OpenBlock] = None

    for raw in raw_layers:
        if raw.type == "Convolution":
            if raw.conv_param is None:
                _err(f"layer {raw.name!r} needs convolution_param",
                     raw.tok, MissingRequiredFieldError)
            if raw.pool_param is not None:
                _err(f"layer {raw.name!r}: unexpected pooling_param", raw.tok,
                     UnknownKeyError)
            for req in ("num_output", "kernel_size"):
                if req not in raw.conv_param:
                    _err(f"layer {raw.name!r} is missing {req}",
                         raw.tok, MissingRequiredFieldError)
            k = raw.conv_param["kernel_size"]
            if k % 2 == 0:
                _err(f"layer {raw.name!r}: kernel_size must be odd", raw.tok)
            if current is not None:
                blocks.append(current.close())
            current = _OpenBlock(
                name=raw.name,
                conv=ConvSpec(num_outputs=raw.conv_param["num_output"], kernel=k),
                bottom=raw.bottom,
                top=raw.top,
            )
        elif raw.type == "Pooling":
            if current is None:
                _err(f"pooling layer {raw.name!r} before any convolution", raw.tok)
            if current.pool is not None or current.activation is not None:
                _err(f"layer {raw.name!r}: block {current.name!r} cannot take "
                     "another pooling stage here", raw.tok)
            if raw.bottom != current.top:
                _err(f"layer {raw.name!r} consumes {raw.bottom!r} but the open "
                     f"block produces {current.top!r}", raw.tok)
            param = raw.pool_param if raw.pool_param is not None else {}
            kernel = param.get("kernel_size", 2)
            stride = param.get("stride", kernel)
            if kernel != stride:
                _err(f"layer {raw.name!r}: pool kernel must equal stride", raw.tok)
            current.pool = PoolSpec(kernel=kernel, stride=stride)
            current.top = raw.top
        elif raw.type == "TanH":
            if raw.conv_param is not None or raw.pool_param is not None:
                _err(f"layer {raw.name!r}: unexpected parameter group", raw.tok,
                     UnknownKeyError)
            if current is None:
                _err(f"activation layer {raw.name!r} before any convolution", raw.tok)
            if current.activation is not None:
                _err(f"layer {raw.name!r}: block {current.name!r} already has an "
                     "activation", raw.tok)
            if raw.bottom != current.top:
                _err(f"layer {raw.name!r} consumes {raw.bottom!r} but the open "
                     f"block produces {current.top!r}", raw.tok)
            current.activation = ActivationSpec()
            current.top = raw.top
        else:
            _err(f"unsupported layer type {raw.type!r}", raw.tok)

    assert current is not None
    blocks.append(current.close())
    return blocks


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def serialize_network(net: Network) -> str:
    """Emit topology text that parses back to a structurally equal Network."""
    c, h, w = net.input_shape
    out = [f'name: "{net.name}"', f'input: "{net.input_name}"']
    for dim in (1, c, h, w):
        out.append(f"input_dim: {dim}")
    for block in net.blocks:
        stages = 1 + (block.pool is not None) + (block.activation is not None)
        conv_top = block.top if stages == 1 else block.name
        out.append("layer {")
        out.append(f'  name: "{block.name}"')
        out.append('  type: "Convolution"')
        out.append(f'  bottom: "{block.bottom}"')
        out.append(f'  top: "{conv_top}"')
        out.append("  convolution_param {")
        out.append(f"    num_output: {block.conv.num_outputs}")
        out.append(f"    kernel_size: {block.conv.kernel}")
        out.append("  }")
        out.append("}")
        running = conv_top
        if block.pool is not None:
            last = block.activation is None
            pool_top = block.top if last else f"{block.name}__pool"
            out.append("layer {")
            out.append(f'  name: "{block.name}__pool"')
            out.append('  type: "Pooling"')
            out.append(f'  bottom: "{running}"')
            out.append(f'  top: "{pool_top}"')
            out.append("  pooling_param {")
            out.append("    pool: MAX")
            out.append(f"    kernel_size: {block.pool.kernel}")
            out.append(f"    stride: {block.pool.stride}")
            out.append("  }")
            out.append("}")
            running = pool_top
        if block.activation is not None:
            out.append("layer {")
            out.append(f'  name: "{block.name}__tanh"')
            out.append('  type: "TanH"')
            out.append(f'  bottom: "{running}"')
            out.append(f'  top: "{block.top}"')
            out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Shape validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockShapes:
    """Propagated dimensions for one block."""

    in_c: int
    in_h: int
    in_w: int
    out_c: int
    conv_h: int  # after the conv stage
    conv_w: int
    out_h: int  # after the optional pool stage
    out_w: int


@dataclass(frozen=True)
class ValidatedNetwork:
    net: Network
    shapes: tuple[BlockShapes, ...]

    @property
    def blocks(self) -> tuple[LayerBlock, ...]:
        return self.net.blocks

    def mult_count(self, index: int) -> int:
        """Constant multiplications needed by block `index` (N*C*K*K)."""
        block, shp = self.net.blocks[index], self.shapes[index]
        return block.conv.num_outputs * shp.in_c * block.conv.kernel ** 2


def validate(net: Network) -> ValidatedNetwork:
    """Propagate shapes through every block and check channel chaining."""
    c, h, w = net.input_shape
    producer = net.input_name
    shapes = []
    for block in net.blocks:
        if block.bottom != producer:
            raise ChannelMismatchError(
                f"block {block.name!r} consumes {block.bottom!r} but the "
                f"previous stage produces {producer!r}"
            )
        k = block.conv.kernel
        conv_h, conv_w = h - k + 1, w - k + 1
        if conv_h < 1 or conv_w < 1:
            raise ShapeUnderflowError(
                f"block {block.name!r}: {h}x{w} input is smaller than the "
                f"{k}x{k} kernel"
            )
        out_h, out_w = conv_h, conv_w
        if block.pool is not None:
            p = block.pool.kernel
            out_h, out_w = conv_h // p, conv_w // p
            if out_h < 1 or out_w < 1:
                raise ShapeUnderflowError(
                    f"block {block.name!r}: {conv_h}x{conv_w} map is smaller "
                    f"than the {p}x{p} pooling window"
                )
        shapes.append(BlockShapes(c, h, w, block.conv.num_outputs,
                                  conv_h, conv_w, out_h, out_w))
        c, h, w = block.conv.num_outputs, out_h, out_w
        producer = block.top
    return ValidatedNetwork(net=net, shapes=tuple(shapes))


# ---------------------------------------------------------------------------
# Weight container
# ---------------------------------------------------------------------------

WEIGHT_MAGIC = b"HWF1"


@dataclass
class BlockWeights:
    """Real-valued parameters for one block, [n][c][ky][kx] plus biases[n]."""

    weights: list  # nested lists of float
    biases: list

    @property
    def dims(self) -> tuple[int, int, int, int]:
        n = len(self.weights)
        c = len(self.weights[0])
        k = len(self.weights[0][0])
        return (n, c, k, k)

    def iter_values(self):
        for per_channel in self.weights:
            for kernel in per_channel:
                for row in kernel:
                    yield from row


@dataclass
class WeightSet:
    blocks: list  # of BlockWeights


def load_weights(data: bytes, net: ValidatedNetwork) -> WeightSet:
    """Decode a weight container and check it against the validated network."""
    if len(data) < 4 or data[:4] != WEIGHT_MAGIC:
        raise BadMagicError(
            f"bad weight file magic {data[:4]!r}, expected {WEIGHT_MAGIC!r}"
        )
    offset = 4

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise TruncatedFileError(
                f"weight file ends at byte {len(data)}, "
                f"needed {offset + size}"
            )
        values = struct.unpack_from(fmt, data, offset)
        offset += size
        return values

    (block_count,) = take("<I")
    if block_count != len(net.blocks):
        raise SizeMismatchError(
            f"weight file has {block_count} blocks, network has "
            f"{len(net.blocks)}"
        )

    blocks = []
    for index, (block, shp) in enumerate(zip(net.blocks, net.shapes)):
        n, c, k = take("<III")
        want = (block.conv.num_outputs, shp.in_c, block.conv.kernel)
        if (n, c, k) != want:
            raise SizeMismatchError(
                f"block {index} ({block.name!r}): file declares "
                f"N={n} C={c} K={k}, network needs N={want[0]} C={want[1]} "
                f"K={want[2]}"
            )
        flat = take(f"<{n * c * k * k}d")
        weights = []
        pos = 0
        for _ in range(n):
            per_channel = []
            for _ in range(c):
                kernel = [list(flat[pos + r * k: pos + (r + 1) * k])
                          for r in range(k)]
                pos += k * k
                per_channel.append(kernel)
            weights.append(per_channel)
        biases = list(take(f"<{n}d"))
        blocks.append(BlockWeights(weights=weights, biases=biases))

    if offset != len(data):
        raise SizeMismatchError(
            f"weight file has {len(data) - offset} trailing bytes"
        )
    return WeightSet(blocks=blocks)


def pack_weights(ws: WeightSet) -> bytes:
    """Inverse of load_weights."""
    out = [WEIGHT_MAGIC, struct.pack("<I", len(ws.blocks))]
    for block in ws.blocks:
        n, c, k, _ = block.dims
        out.append(struct.pack("<III", n, c, k))
        flat = list(block.iter_values())
        out.append(struct.pack(f"<{len(flat)}d", *flat))
        out.append(struct.pack(f"<{len(block.biases)}d", *block.biases))
    return b"".join(out)
