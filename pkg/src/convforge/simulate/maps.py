"""Integer pixel streams and feature maps, plus the bit-exact differ."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from convforge.errors import OutOfRangeError, ShapeMismatchError
from convforge.quant import FixedPointFormat


@dataclass(frozen=True)
class ImageStream:
    """Input pixels, one row-major integer sequence per channel."""

    shape: tuple  # (C, H, W)
    channels: tuple  # per channel: tuple of H*W ints in data format
    fmt: FixedPointFormat

    def __post_init__(self):
        c, h, w = self.shape
        if len(self.channels) != c:
            raise ShapeMismatchError(
                f"{len(self.channels)} channel sequences for shape {self.shape}"
            )
        for ch, seq in enumerate(self.channels):
            if len(seq) != h * w:
                raise ShapeMismatchError(
                    f"channel {ch} has {len(seq)} pixels, expected {h * w}"
                )
            for v in seq:
                if not self.fmt.min_code <= v <= self.fmt.max_code:
                    raise OutOfRangeError(
                        f"pixel value {v} outside {self.fmt} range"
                    )

    def pixel(self, c: int, y: int, x: int) -> int:
        return self.channels[c][y * self.shape[2] + x]


@dataclass(frozen=True)
class FeatureMaps:
    """One block's output: N maps of H'*W' integers, row-major."""

    shape: tuple  # (N, H, W)
    maps: tuple  # per map: tuple of H*W ints

    def value(self, n: int, y: int, x: int) -> int:
        return self.maps[n][y * self.shape[2] + x]


@dataclass(frozen=True)
class DiffReport:
    max_diffs: tuple  # per block
    first_mismatch: Optional[tuple]  # (block, map, y, x, a, b) or None

    @property
    def equal(self) -> bool:
        return all(d == 0 for d in self.max_diffs)

    def summary(self) -> str:
        if self.equal:
            return "equal (max diff 0 in every block)"
        blk, n, y, x, a, b = self.first_mismatch
        return (f"first mismatch at block {blk} map {n} ({y},{x}): "
                f"{a} vs {b}; per-block max diffs "
                f"{', '.join(str(d) for d in self.max_diffs)}")


def compare(a, b) -> DiffReport:
    """Per-block max absolute difference between two FeatureMaps lists."""
    if len(a) != len(b):
        raise ShapeMismatchError(f"{len(a)} blocks vs {len(b)}")
    max_diffs = []
    first = None
    for blk, (fa, fb) in enumerate(zip(a, b)):
        if fa.shape != fb.shape:
            raise ShapeMismatchError(
                f"block {blk}: shape {fa.shape} vs {fb.shape}"
            )
        worst = 0
        _, h, w = fa.shape
        for n, (ma, mb) in enumerate(zip(fa.maps, fb.maps)):
            for i, (va, vb) in enumerate(zip(ma, mb)):
                d = abs(va - vb)
                if d:
                    if first is None:
                        first = (blk, n, i // w, i % w, va, vb)
                    if d > worst:
                        worst = d
        max_diffs.append(worst)
    return DiffReport(max_diffs=tuple(max_diffs), first_mismatch=first)


def dump_maps(maps_list) -> str:
    """Plain-text trace of every block's outputs, for external cross-checks."""
    lines = []
    for blk, fm in enumerate(maps_list):
        n, h, w = fm.shape
        lines.append(f"block {blk} maps {n} size {h}x{w}")
        for j in range(n):
            for y in range(h):
                row = " ".join(str(fm.value(j, y, x)) for x in range(w))
                lines.append(f"  map {j} row {y}: {row}")
    return "\n".join(lines) + "\n"
