"""Parametric emulation of reduced-precision binary floating-point formats.

A format is described by its exponent and mantissa widths.  All emulation is
carried out on IEEE double values constrained to the target grid: `quantize`
rounds a double to the nearest representable value of the format
(round-to-nearest, ties-to-even, gradual underflow, overflow to infinity),
and `qop`/`qfunc` emulate correctly-rounded low-precision arithmetic by
computing each elementary operation in double precision and rounding the
result back onto the grid.

The double carrier makes `qop` exactly correctly rounded for formats with at
most 24 mantissa bits (the intermediate precision is then more than twice the
target precision, so the double rounding is innocuous).  Wider formats are
rejected by `qop`/`qfunc`.  No claim is made that any particular accelerator
rounds its kernels this way; this is the strictest reproducible contract.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "PrecisionFormat",
    "BF16",
    "FP16",
    "FP32",
    "FORMATS",
    "quantize",
    "quantize_array",
    "ulp",
    "qop",
    "qfunc",
    "grid_values",
]


@dataclass(frozen=True)
class PrecisionFormat:
    """A binary floating-point format with the IEEE field layout.

    `exponent_bits` fixes the dynamic range, `mantissa_bits` the number of
    stored fraction bits (one extra implicit leading bit applies to normal
    values).  Subnormals are fully supported; the all-ones exponent is
    reserved for infinities as in IEEE-754.
    """

    exponent_bits: int
    mantissa_bits: int
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not 2 <= self.exponent_bits <= 11:
            raise ValueError(f"exponent_bits must be in [2, 11], got {self.exponent_bits}")
        if not 1 <= self.mantissa_bits <= 52:
            raise ValueError(f"mantissa_bits must be in [1, 52], got {self.mantissa_bits}")
        if not self.name:
            object.__setattr__(self, "name", f"E{self.exponent_bits}M{self.mantissa_bits}")

    @cached_property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @cached_property
    def max_exponent(self) -> int:
        # Largest binade of normal values (the all-ones exponent field is inf).
        return self.bias

    @cached_property
    def min_exponent(self) -> int:
        return 1 - self.bias

    @cached_property
    def max_finite(self) -> float:
        return math.ldexp((1 << (self.mantissa_bits + 1)) - 1,
                          self.max_exponent - self.mantissa_bits)

    @cached_property
    def min_normal(self) -> float:
        return math.ldexp(1.0, self.min_exponent)

    @cached_property
    def subnormal_spacing(self) -> float:
        return math.ldexp(1.0, self.min_exponent - self.mantissa_bits)

    def __str__(self) -> str:
        return self.name


BF16 = PrecisionFormat(8, 7, "bf16")
FP16 = PrecisionFormat(5, 10, "fp16")
FP32 = PrecisionFormat(8, 23, "fp32")

FORMATS = {"bf16": BF16, "fp16": FP16, "fp32": FP32}


def _binade(x: float) -> int:
    # Exponent e with 2**e <= |x| < 2**(e+1); exact, unlike floor(log2).
    _, e2 = math.frexp(abs(x))
    return e2 - 1


def quantize(x: float, fmt: PrecisionFormat) -> float:
    """Round `x` to the nearest value representable in `fmt`.

    Round-to-nearest, ties-to-even.  Magnitudes beyond the format's overflow
    threshold map to signed infinity, subnormals underflow gradually, the
    sign of zero is preserved, and NaN propagates.  Idempotent.
    """
    if x != x or math.isinf(x):
        return x
    if x == 0.0:
        return math.copysign(0.0, x)
    e = _binade(x)
    if e > fmt.max_exponent:
        return math.copysign(math.inf, x)
    e = max(e, fmt.min_exponent)
    # Scaling by a power of two is exact, so round() sees the true scaled value.
    scaled = math.ldexp(abs(x), fmt.mantissa_bits - e)
    n = round(scaled)
    if n == 0:
        return math.copysign(0.0, x)
    try:
        value = math.ldexp(n, e - fmt.mantissa_bits)
    except OverflowError:
        return math.copysign(math.inf, x)
    if value > fmt.max_finite:
        return math.copysign(math.inf, x)
    return math.copysign(value, x)


def quantize_array(xs, fmt: PrecisionFormat) -> np.ndarray:
    """Vectorized `quantize` over an array of doubles."""
    x = np.asarray(xs, dtype=np.float64)
    out = x.copy()
    mask = np.isfinite(x) & (x != 0.0)
    if not mask.any():
        return out
    ax = np.abs(x[mask])
    _, e2 = np.frexp(ax)
    e = e2.astype(np.int64) - 1
    over = e > fmt.max_exponent
    e = np.maximum(e, fmt.min_exponent)
    with np.errstate(over="ignore"):
        scaled = np.ldexp(ax, (fmt.mantissa_bits - e).astype(np.int32))
        n = np.rint(scaled)  # ties to even
        vals = np.ldexp(n, (e - fmt.mantissa_bits).astype(np.int32))
    vals[vals > fmt.max_finite] = np.inf
    vals[over] = np.inf
    out[mask] = np.copysign(vals, x[mask])
    return out


def ulp(x: float, fmt: PrecisionFormat) -> float:
    """Grid spacing of `fmt` at the binade of `x`: 2**(e - mantissa_bits).

    Zero and the subnormal range return the fixed subnormal spacing.
    """
    if not math.isfinite(x):
        raise ValueError("ulp is defined for finite values only")
    if x == 0.0:
        return fmt.subnormal_spacing
    e = _binade(x)
    if e < fmt.min_exponent:
        return fmt.subnormal_spacing
    if e > fmt.max_exponent:
        raise ValueError(f"{x!r} lies beyond the finite range of {fmt}")
    return math.ldexp(1.0, e - fmt.mantissa_bits)


_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def _check_narrow(fmt: PrecisionFormat) -> None:
    if fmt.mantissa_bits > 24:
        raise ValueError(
            f"{fmt} has too many mantissa bits for the double carrier "
            "to guarantee correct rounding (max 24)"
        )


def qop(a: float, b: float, op: str, fmt: PrecisionFormat) -> float:
    """One correctly-rounded arithmetic operation in `fmt`.

    `op` is one of add/sub/mul/div.  Operands are expected to be
    representable in `fmt` already; the exact real result is rounded back
    onto the grid.  Division by zero yields signed infinity, inf - inf NaN.
    """
    _check_narrow(fmt)
    try:
        exact = _OPS[op](a, b)
    except ZeroDivisionError:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(1.0, a) * math.copysign(1.0, b) * math.inf
    return quantize(exact, fmt)


def qfunc(x: float, f: str, fmt: PrecisionFormat) -> float:
    """Evaluate `f` (exp, negate or sqrt) in double precision, then quantize."""
    _check_narrow(fmt)
    if f == "negate":
        return quantize(-x, fmt)
    if f == "exp":
        try:
            y = math.exp(x)
        except OverflowError:
            y = math.inf
    elif f == "sqrt":
        y = math.sqrt(x)
    else:
        raise ValueError(f"unsupported function {f!r}")
    return quantize(y, fmt)


def _pos_grid(fmt: PrecisionFormat, lo: float, hi: float, budget: list) -> list:
    """Ascending positive representable values in [lo, hi]; lo > 0 assumed."""
    out = []

    def emit(v):
        out.append(v)
        budget[0] -= 1
        if budget[0] < 0:
            raise ValueError("interval contains too many representable values")

    q = fmt.subnormal_spacing
    if lo < fmt.min_normal:
        k0 = max(1, math.ceil(lo / q))
        k1 = min((1 << fmt.mantissa_bits) - 1, math.floor(min(hi, fmt.min_normal) / q))
        for k in range(k0, k1 + 1):
            emit(k * q)
    if hi < fmt.min_normal:
        return out
    hi = min(hi, fmt.max_finite)
    e_lo = max(_binade(max(lo, fmt.min_normal)), fmt.min_exponent)
    e_hi = min(_binade(hi), fmt.max_exponent)
    base = 1 << fmt.mantissa_bits
    for e in range(e_lo, e_hi + 1):
        # Values n * 2**(e - M) with n in [2**M, 2**(M+1)); a bound is scaled
        # (exactly) only within its own binade, so ldexp cannot overflow.
        n0 = base
        if lo > 0.0 and _binade(lo) == e:
            n0 = max(base, math.ceil(math.ldexp(lo, fmt.mantissa_bits - e)))
        n1 = 2 * base - 1
        if _binade(hi) == e:
            n1 = min(n1, math.floor(math.ldexp(hi, fmt.mantissa_bits - e)))
        for n in range(n0, n1 + 1):
            emit(math.ldexp(n, e - fmt.mantissa_bits))
    return out


def grid_values(fmt: PrecisionFormat, lo: float, hi: float,
                max_count: int = 1 << 20) -> list:
    """All finite representable values of `fmt` in [lo, hi], ascending.

    Raises if the interval holds more than `max_count` grid points.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("interval bounds must be finite")
    if lo > hi:
        raise ValueError("empty interval")
    budget = [max_count]
    out = []
    if lo < 0.0:
        neg = _pos_grid(fmt, max(-hi, fmt.subnormal_spacing), -lo, budget)
        out.extend(-v for v in reversed(neg))
    if lo <= 0.0 <= hi:
        out.append(0.0)
    if hi > 0.0:
        out.extend(_pos_grid(fmt, max(lo, fmt.subnormal_spacing), hi, budget))
    return out
