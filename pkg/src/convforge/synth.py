"""Seeded synthetic stimulus: random weight sets and input images.

Used by the command line when no weight or image file is given, and by the
test harnesses.  Everything is driven by `random.Random(seed)` so results
are reproducible across runs and platforms.
"""

from __future__ import annotations

import random

from convforge.netparse import BlockWeights, Network, WeightSet
from convforge.quant import FixedPointFormat, quantize
from convforge.simulate.maps import ImageStream


def random_weights(net: Network, seed: int = 0,
                   scale: float = 1.0) -> WeightSet:
    """Uniform random weights in (-scale, scale), biases a quarter as wide,
    shaped to fit every block of the network."""
    rng = random.Random(seed)
    c_in = net.input_shape[0]
    blocks = []
    for block in net.blocks:
        n, k = block.conv.num_outputs, block.conv.kernel
        weights = tuple(
            tuple(
                tuple(
                    tuple(rng.uniform(-scale, scale) for _ in range(k))
                    for _ in range(k)
                )
                for _ in range(c_in)
            )
            for _ in range(n)
        )
        biases = tuple(
            rng.uniform(-scale / 4.0, scale / 4.0) for _ in range(n)
        )
        blocks.append(BlockWeights(weights=weights, biases=biases))
        c_in = n
    return WeightSet(blocks=tuple(blocks))


def random_image(shape, seed: int = 0):
    """Per-channel flat tuples of reals in [-1, 1), row major."""
    rng = random.Random(seed)
    c, h, w = shape
    return tuple(
        tuple(rng.uniform(-1.0, 1.0) for _ in range(h * w))
        for _ in range(c)
    )


def random_image_stream(shape, fmt: FixedPointFormat,
                        seed: int = 0) -> ImageStream:
    """A quantized random input frame ready for streaming."""
    planes = random_image(shape, seed)
    channels = tuple(
        tuple(quantize(v, fmt) for v in plane) for plane in planes
    )
    return ImageStream(shape=tuple(shape), channels=channels, fmt=fmt)


# ---------------------------------------------------------------------------
# Planted-class weights
# ---------------------------------------------------------------------------


def _planted_code(rng: random.Random, cls: str, fmt: FixedPointFormat) -> int:
    """An integer weight code of exactly the requested multiplier class."""
    if cls == "zero":
        return 0
    sign = rng.choice((-1, 1))
    if cls == "one":
        return sign
    if cls == "pow2":
        top = fmt.bits - 2  # 2^top still fits the signed range
        return sign * (1 << rng.randint(1, max(1, top)))
    while True:  # generic: magnitude >= 3, not a power of two
        mag = rng.randint(3, fmt.max_code)
        if mag & (mag - 1):
            return sign * mag


def planted_weights(net: Network, fmt: FixedPointFormat,
                    fractions=(0.40, 0.20, 0.20, 0.20),
                    seed: int = 0) -> WeightSet:
    """Weights whose post-quantization class mix is exactly `fractions` of
    (zero, one, pow2, generic), up to integer rounding of the counts.

    The reals returned are exact multiples of 2^-frac, so quantizing them
    at `fmt` reproduces the planted codes bit for bit.
    """
    if fmt.bits < 3:
        raise ValueError("planted classes need at least 3 weight bits")
    rng = random.Random(seed)
    c_in = net.input_shape[0]
    dims = []
    total = 0
    for block in net.blocks:
        n, k = block.conv.num_outputs, block.conv.kernel
        dims.append((n, c_in, k))
        total += n * c_in * k * k
        c_in = n

    classes = ("zero", "one", "pow2", "generic")
    counts = [int(frac * total) for frac in fractions]
    counts[0] += total - sum(counts)  # remainder lands on the first class
    deck = [cls for cls, cnt in zip(classes, counts) for _ in range(cnt)]
    rng.shuffle(deck)

    step = 2.0 ** -fmt.frac
    it = iter(deck)
    blocks = []
    for n, c, k in dims:
        weights = tuple(
            tuple(
                tuple(
                    tuple(_planted_code(rng, next(it), fmt) * step
                          for _ in range(k))
                    for _ in range(k)
                )
                for _ in range(c)
            )
            for _ in range(n)
        )
        biases = tuple(rng.uniform(-0.25, 0.25) for _ in range(n))
        blocks.append(BlockWeights(weights=weights, biases=biases))
    return WeightSet(blocks=tuple(blocks))
