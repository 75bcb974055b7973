"""Exception hierarchy for the whole toolchain.

Every domain failure raises a subclass of :class:`ConvforgeError`, so the
CLI can map any of them to exit code 1 with a one-line message.
"""


class ConvforgeError(Exception):
    """Base class for all tool-level errors."""


# --- topology text parsing -------------------------------------------------


class TopologySyntaxError(ConvforgeError):
    """Malformed topology text; carries line/column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}:{column}: {message}")
        self.line = line
        self.column = column


class UnknownKeyError(TopologySyntaxError):
    """A key outside the supported grammar subset."""


class DuplicateLayerNameError(TopologySyntaxError):
    """Two layers declared with the same name."""


class MissingRequiredFieldError(TopologySyntaxError):
    """A required field is absent from a declaration."""


# --- shape validation ------------------------------------------------------


class ShapeUnderflowError(ConvforgeError):
    """A propagated spatial dimension would drop below 1."""


class ChannelMismatchError(ConvforgeError):
    """Adjacent blocks do not chain (names or channel counts disagree)."""


# --- weight container ------------------------------------------------------


class BadMagicError(ConvforgeError):
    """Weight file does not start with the expected magic bytes."""


class TruncatedFileError(ConvforgeError):
    """Weight file ends before all declared elements were read."""


class SizeMismatchError(ConvforgeError):
    """Element counts in the weight file disagree with the network."""


# --- quantization ----------------------------------------------------------


class EmptyWeightsError(ConvforgeError):
    """Weight format inference was asked to run over an empty weight set."""


class OutOfRangeError(ConvforgeError):
    """An integer is outside its fixed-point format's representable range."""


# --- simulation ------------------------------------------------------------


class DeadlockDetectedError(ConvforgeError):
    """No actor can fire but sinks have not produced all expected tokens."""


class AccumulatorOverflowError(ConvforgeError):
    """A simulated value escaped its planned bit-width (internal bug guard)."""


class ShapeMismatchError(ConvforgeError):
    """Two feature-map sets being compared have different shapes."""


# --- graph / reporting -----------------------------------------------------


class GraphMismatchError(ConvforgeError):
    """Strategy comparison was given graphs of different networks."""


class UnsupportedActorError(ConvforgeError):
    """The HDL emitter met an actor kind it has no template for."""
