"""Image ingestion: portable graymap/pixmap (P5/P6) and the raw container.

PNM samples v in [0, maxval], maxval <= 255, map to reals 2v/(maxval+1) - 1
so the stream lands in [-1, 1).  The raw container ("HIM1") is little
endian: magic, u32 C, u32 H, u32 W, then C*H*W float64 pixels already in
[-1, 1), channel-major row-major.  Both are quantized to the data format
on load.
"""

from __future__ import annotations

import struct

from convforge.errors import (
    BadMagicError,
    OutOfRangeError,
    TruncatedFileError,
)
from convforge.quant import FixedPointFormat, quantize
from convforge.simulate.maps import ImageStream

IMAGE_MAGIC = b"HIM1"


def load_image(data: bytes, fmt: FixedPointFormat) -> ImageStream:
    if data[:4] == IMAGE_MAGIC:
        return _load_him(data, fmt)
    if data[:2] in (b"P5", b"P6"):
        return _load_pnm(data, fmt)
    raise BadMagicError(
        f"unrecognized image magic {data[:4]!r} (want P5, P6, or HIM1)"
    )


# ---------------------------------------------------------------------------
# PNM
# ---------------------------------------------------------------------------


def _pnm_header_fields(data: bytes, count: int) -> tuple:
    """Read `count` whitespace-separated integers after the magic,
    skipping `#` comments; returns (values, offset past single whitespace)."""
    pos = 2
    values = []
    while len(values) < count:
        if pos >= len(data):
            raise TruncatedFileError("image header ends early")
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            values.append(int(data[start:pos]))
        else:
            raise BadMagicError(f"unexpected byte {ch!r} in image header")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise TruncatedFileError("image header not terminated")
    return values, pos + 1


def _load_pnm(data: bytes, fmt: FixedPointFormat) -> ImageStream:
    planes = 1 if data[:2] == b"P5" else 3
    (w, h, maxval), pos = _pnm_header_fields(data, 3)
    if maxval < 1 or maxval > 255:
        raise OutOfRangeError(
            f"maxval {maxval} unsupported (one byte per sample only)"
        )
    need = w * h * planes
    raster = data[pos:pos + need]
    if len(raster) < need:
        raise TruncatedFileError(
            f"image raster has {len(raster)} bytes, needs {need}"
        )
    scale = 2.0 / (maxval + 1)
    channels = []
    for c in range(planes):
        channels.append(tuple(
            quantize(raster[i * planes + c] * scale - 1.0, fmt)
            for i in range(w * h)
        ))
    return ImageStream(shape=(planes, h, w), channels=tuple(channels),
                       fmt=fmt)


# ---------------------------------------------------------------------------
# Raw container
# ---------------------------------------------------------------------------


def _load_him(data: bytes, fmt: FixedPointFormat) -> ImageStream:
    if len(data) < 16:
        raise TruncatedFileError("image header ends early")
    c, h, w = struct.unpack_from("<III", data, 4)
    if min(c, h, w) < 1:
        raise OutOfRangeError(f"bad image dimensions {c}x{h}x{w}")
    need = 16 + c * h * w * 8
    if len(data) < need:
        raise TruncatedFileError(
            f"image file has {len(data)} bytes, needs {need}"
        )
    reals = struct.unpack_from(f"<{c * h * w}d", data, 16)
    for v in reals:
        if not -1.0 <= v < 1.0:
            raise OutOfRangeError(f"pixel {v} outside [-1, 1)")
    channels = []
    for ch in range(c):
        base = ch * h * w
        channels.append(tuple(
            quantize(reals[base + i], fmt) for i in range(h * w)
        ))
    return ImageStream(shape=(c, h, w), channels=tuple(channels), fmt=fmt)


def pack_him(shape: tuple, reals) -> bytes:
    """Build a raw-container byte string from channel-major real pixels."""
    c, h, w = shape
    flat = list(reals)
    if len(flat) != c * h * w:
        raise ValueError(f"{len(flat)} pixels for shape {shape}")
    return (IMAGE_MAGIC + struct.pack("<III", c, h, w)
            + struct.pack(f"<{len(flat)}d", *flat))


def pack_pgm(width: int, height: int, samples, maxval: int = 255) -> bytes:
    """Build a P5 graymap from integer samples in [0, maxval]."""
    body = bytes(samples)
    if len(body) != width * height:
        raise ValueError(f"{len(body)} samples for {width}x{height}")
    return b"P5\n%d %d\n%d\n" % (width, height, maxval) + body
