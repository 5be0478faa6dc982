"""Floor quantizer on an exact rational lattice.

Real vectors are mapped to integer lattice coordinates at a spacing held as
an exact rational, so every floor is computed in integer arithmetic and two
hosts (or two runs) can never disagree about a boundary value.
"""

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction

import numpy as np

# Lattice coordinates live in int64 downstream; values past this limit would
# leave no headroom for the mass sums the consensus layer accumulates.
INT_LIMIT = 2**62

# Nominal wire widths used for communication-cost accounting.
PAYLOAD_BITS_PER_ENTRY = 64
PIECE_HEADER_BITS = 64


def _to_fraction(value):
    if isinstance(value, QuantizationLevel):
        return value.delta
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(Decimal(value))
        except InvalidOperation:
            return Fraction(value)  # accepts "1/1000"
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


@dataclass(frozen=True)
class QuantizationLevel:
    """Lattice spacing of the quantizer, stored as an exact rational.

    Strings are parsed exactly: ``QuantizationLevel("1e-3")`` is 1/1000, not
    the nearest binary float. Floats are converted to their exact binary
    value, which is also a valid rational spacing.
    """

    delta: Fraction

    def __post_init__(self):
        delta = _to_fraction(self.delta)
        if delta <= 0:
            raise ValueError(f"quantization level must be positive, got {delta}")
        object.__setattr__(self, "delta", delta)

    @property
    def as_float(self):
        return float(self.delta)

    @property
    def spec_string(self):
        """Canonical "numerator/denominator" form; round-trips exactly."""
        return f"{self.delta.numerator}/{self.delta.denominator}"

    def __str__(self):
        return self.spec_string


@dataclass(frozen=True)
class QuantizedVector:
    """Integer lattice coordinates together with their spacing."""

    values: np.ndarray
    level: QuantizationLevel

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.int64))


def quantize_floor(values, level):
    """Quantize a real vector to lattice coordinates by element-wise floor.

    Each coordinate ``v`` maps to ``floor(v / delta)``, evaluated exactly:
    the float is expanded to its integer ratio and the floor is taken with
    integer arithmetic, so results never depend on floating-point rounding.

    Parameters
    ----------
    values : array_like of float
        Finite real inputs (any shape).
    level : QuantizationLevel
        Lattice spacing.

    Returns
    -------
    QuantizedVector
        ``0 <= v - delta * out < delta`` holds coordinate-wise.
    """
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    num = level.delta.numerator
    den = level.delta.denominator
    out = np.empty(arr.size, dtype=np.int64)
    flat = arr.ravel()
    for j in range(flat.size):
        a, b = flat[j].as_integer_ratio()  # exact: flat[j] == a / b, b > 0
        q = (a * den) // (b * num)
        if not -INT_LIMIT < q < INT_LIMIT:
            raise OverflowError(
                f"quantized magnitude {q} exceeds the integer range; "
                f"use a coarser level than {level}"
            )
        out[j] = q
    return QuantizedVector(out.reshape(arr.shape), level)


def dequantize(quantized):
    """Map lattice coordinates back to real values (``values * delta``).

    Each entry is the float nearest ``v * delta`` that still lies inside the
    lattice cell ``[v*delta, (v+1)*delta)``: correct rounding can land half
    an ulp below the exact product, and nudging such entries up one float
    keeps re-quantization the exact identity.
    """
    num = quantized.level.delta.numerator
    den = quantized.level.delta.denominator
    flat = quantized.values.ravel()
    out = np.empty(flat.size, dtype=float)
    for j in range(flat.size):
        v = int(flat[j])
        f = v * num / den
        fa, fb = f.as_integer_ratio()
        if fa * den < v * num * fb:  # f < v*delta exactly
            g = float(np.nextafter(f, np.inf))
            ga, gb = g.as_integer_ratio()
            if ga * den < (v + 1) * num * gb:  # still inside the cell
                f = g
        out[j] = f
    return out.reshape(quantized.values.shape)


def floor_to_lattice(values, level):
    """Round real values down onto the lattice (quantize then dequantize).

    This is the value a receiver reconstructs after a quantized transmission.
    """
    return dequantize(quantize_floor(values, level))
