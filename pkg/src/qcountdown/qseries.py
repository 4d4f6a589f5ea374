"""Numeric kernel: scalar backends and q-product machinery.

Two scalar backends live behind one interface.  The exact backend holds a
``fractions.Fraction`` and carries no error; the float backend holds a double
together with a conservatively propagated absolute-error bound.  Every
distribution and total-variation formula in the package is written once,
generic in :class:`Scalar`.

Infinite products ``prod_{i>=a} (1-x^i)`` are truncated with a certified tail
bound ``x^(N+1)/(1-x)`` (the first Bonferroni inequality), never with a
"last factor is close to 1" heuristic.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

__all__ = [
    "DomainError",
    "ResourceError",
    "Scalar",
    "ScalarLike",
    "TruncatedProduct",
    "DEFAULT_TOL",
    "PRODUCT_CUTOFF_CAP",
    "g_finite",
    "g_infinite",
    "one_minus_tail_product",
    "one_minus_tail_interval",
    "q_binomial",
    "technical_identity_gap",
]


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(RuntimeError):
    """A computation would exceed its configured budget."""


#: One unit roundoff charged per float arithmetic operation.
_EPS = sys.float_info.epsilon

#: Default certified-truncation tolerance for infinite products.
DEFAULT_TOL = 1e-12

#: Hard cap on the number of factors in a truncated infinite product.
PRODUCT_CUTOFF_CAP = 10**7

_RATIONAL_RE = re.compile(r"^[+-]?\d+(/\d+)?$")

ScalarLike = Union["Scalar", int, Fraction, float, str]


@dataclass(frozen=True)
class Scalar:
    """A number on the exact-rational or error-tracked float backend.

    Exact scalars hold a ``Fraction`` with ``err == 0``.  Float scalars hold a
    double ``value`` with a certified bound ``err`` on the absolute distance
    to the mathematically intended value.  Mixed-backend arithmetic promotes
    to float, charging one conversion roundoff.
    """

    value: Union[Fraction, float]
    err: float = 0.0

    def __post_init__(self) -> None:
        v = self.value
        if isinstance(v, bool):
            raise TypeError("bool is not a scalar value")
        if isinstance(v, int):
            object.__setattr__(self, "value", Fraction(v))
        elif isinstance(v, Fraction):
            pass
        elif isinstance(v, float):
            if not math.isfinite(v):
                raise DomainError(f"non-finite scalar value {v!r}")
        else:
            raise TypeError(f"unsupported scalar value type {type(v).__name__}")
        if self.is_exact:
            if self.err != 0.0:
                raise ValueError("exact scalars carry no error bound")
        elif not (self.err >= 0.0 and math.isfinite(self.err)):
            raise ValueError(f"invalid error bound {self.err!r}")

    # -- construction -----------------------------------------------------

    @staticmethod
    def wrap(x: ScalarLike) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        if isinstance(x, str):
            return Scalar.parse(x)
        return Scalar(x)

    @staticmethod
    def exact(num: Union[int, Fraction], den: int | None = None) -> "Scalar":
        if den is not None:
            return Scalar(Fraction(num, den))
        return Scalar(Fraction(num))

    @staticmethod
    def parse(text: str) -> "Scalar":
        """Parse a literal: ``p/q`` or a bare integer is exact, else float."""
        stripped = text.strip()
        if _RATIONAL_RE.match(stripped):
            return Scalar(Fraction(stripped))
        try:
            return Scalar(float(stripped))
        except ValueError:
            raise ValueError(f"cannot parse scalar literal {text!r}") from None

    # -- predicates and views ---------------------------------------------

    @property
    def is_exact(self) -> bool:
        return isinstance(self.value, Fraction)

    @property
    def backend(self) -> str:
        return "exact" if self.is_exact else "float"

    @property
    def hi(self) -> Union[Fraction, float]:
        """Certified upper end of the value interval."""
        return self.value if self.is_exact else self.value + self.err

    @property
    def lo(self) -> Union[Fraction, float]:
        """Certified lower end of the value interval."""
        return self.value if self.is_exact else self.value - self.err

    def certified_lt(self, other: ScalarLike) -> bool:
        return self.hi < Scalar.wrap(other).lo

    def certified_le(self, other: ScalarLike) -> bool:
        return self.hi <= Scalar.wrap(other).lo

    def __float__(self) -> float:
        return float(self.value)

    def __bool__(self) -> bool:
        return self.value != 0

    # -- arithmetic --------------------------------------------------------

    def _float_parts(self) -> tuple[float, float]:
        if self.is_exact:
            f = float(self.value)
            return f, abs(f) * _EPS
        return self.value, self.err

    def __add__(self, other: ScalarLike) -> "Scalar":
        o = Scalar.wrap(other)
        if self.is_exact and o.is_exact:
            return Scalar(self.value + o.value)
        a, ea = self._float_parts()
        b, eb = o._float_parts()
        v = a + b
        return Scalar(v, ea + eb + abs(v) * _EPS)

    def __radd__(self, other: ScalarLike) -> "Scalar":
        return Scalar.wrap(other).__add__(self)

    def __sub__(self, other: ScalarLike) -> "Scalar":
        o = Scalar.wrap(other)
        if self.is_exact and o.is_exact:
            return Scalar(self.value - o.value)
        a, ea = self._float_parts()
        b, eb = o._float_parts()
        v = a - b
        return Scalar(v, ea + eb + abs(v) * _EPS)

    def __rsub__(self, other: ScalarLike) -> "Scalar":
        return Scalar.wrap(other).__sub__(self)

    def __neg__(self) -> "Scalar":
        if self.is_exact:
            return Scalar(-self.value)
        return Scalar(-self.value, self.err)

    def __abs__(self) -> "Scalar":
        if self.is_exact:
            return Scalar(abs(self.value))
        return Scalar(abs(self.value), self.err)

    def __mul__(self, other: ScalarLike) -> "Scalar":
        o = Scalar.wrap(other)
        if self.is_exact and o.is_exact:
            return Scalar(self.value * o.value)
        a, ea = self._float_parts()
        b, eb = o._float_parts()
        v = a * b
        return Scalar(v, ea * abs(b) + eb * abs(a) + ea * eb + abs(v) * _EPS)

    def __rmul__(self, other: ScalarLike) -> "Scalar":
        return Scalar.wrap(other).__mul__(self)

    def __truediv__(self, other: ScalarLike) -> "Scalar":
        o = Scalar.wrap(other)
        if self.is_exact and o.is_exact:
            if o.value == 0:
                raise ZeroDivisionError("scalar division by exact zero")
            return Scalar(self.value / o.value)
        a, ea = self._float_parts()
        b, eb = o._float_parts()
        if abs(b) <= eb:
            raise DomainError("scalar division by an interval containing zero")
        v = a / b
        return Scalar(v, (ea + abs(v) * eb) / (abs(b) - eb) + abs(v) * _EPS)

    def __rtruediv__(self, other: ScalarLike) -> "Scalar":
        return Scalar.wrap(other).__truediv__(self)

    def __pow__(self, n: int) -> "Scalar":
        if not isinstance(n, int) or isinstance(n, bool):
            raise TypeError("scalar exponents must be integers")
        if n < 0:
            return (Scalar.wrap(1) / self) ** (-n)
        if self.is_exact:
            return Scalar(self.value**n)
        # Squaring keeps the tracked error to O(log n) operations.
        result = Scalar(1.0)
        base = self
        e = n
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    # -- comparisons (on raw values; use certified_* for proofs) -----------

    def _cmp_value(self, other: ScalarLike):
        return Scalar.wrap(other).value

    def __lt__(self, other: ScalarLike) -> bool:
        return self.value < self._cmp_value(other)

    def __le__(self, other: ScalarLike) -> bool:
        return self.value <= self._cmp_value(other)

    def __gt__(self, other: ScalarLike) -> bool:
        return self.value > self._cmp_value(other)

    def __ge__(self, other: ScalarLike) -> bool:
        return self.value >= self._cmp_value(other)

    # -- serialization -----------------------------------------------------

    def __str__(self) -> str:
        if self.is_exact:
            return f"{self.value.numerator}/{self.value.denominator}"
        return repr(self.value)

    def to_json(self) -> dict:
        out: dict = {"value": str(self), "backend": self.backend}
        if not self.is_exact:
            out["err"] = self.err
        return out


def _one_like(x: Scalar) -> Scalar:
    return Scalar(Fraction(1)) if x.is_exact else Scalar(1.0)


def _check_open_unit(x: Scalar, name: str = "x") -> None:
    if not (0 < x.value < 1):
        raise DomainError(f"{name} must lie in (0, 1), got {x.value!r}")


@dataclass(frozen=True)
class TruncatedProduct:
    """A certified truncation of ``prod_{i>=a} (1-x^i)``.

    The true infinite product lies in ``[value*(1 - tail_bound_hi), value]``;
    ``tail_bound_hi`` is ``x^(cutoff_index+1)/(1-x)``, the Bonferroni bound on
    the mass of the omitted factors.
    """

    value: Scalar
    tail_bound_hi: Scalar
    cutoff_index: int

    def interval(self) -> tuple[Scalar, Scalar]:
        return self.value * (1 - self.tail_bound_hi), self.value

    def as_scalar(self) -> Scalar:
        """Fold the truncation interval into a float-backend scalar."""
        lo, hi = self.interval()
        lf, le = lo._float_parts()
        hf, he = hi._float_parts()
        center = (lf + hf) / 2.0
        halfwidth = (hf - lf) / 2.0
        return Scalar(center, halfwidth + le + he + abs(center) * 4 * _EPS)


def g_finite(x: ScalarLike, a: int, b: int) -> Scalar:
    """Finite q-product ``prod_{i=a}^{b} (1-x^i)``; 1 when the range is empty."""
    xs = Scalar.wrap(x)
    _check_open_unit(xs)
    if a < 1:
        raise DomainError(f"product start index must be >= 1, got {a}")
    acc = _one_like(xs)
    if b < a:
        return acc
    xp = xs**a
    for _ in range(a, b + 1):
        acc = acc * (1 - xp)
        xp = xp * xs
    return acc


def g_infinite(
    x: ScalarLike,
    a: int = 1,
    tol: ScalarLike = DEFAULT_TOL,
    cap: int = PRODUCT_CUTOFF_CAP,
) -> TruncatedProduct:
    """Certified truncation of the infinite product ``prod_{i>=a} (1-x^i)``.

    The cutoff ``N`` is minimal (and at least ``a-1``) with
    ``x^(N+1)/(1-x) < tol``.
    """
    xs = Scalar.wrap(x)
    ts = Scalar.wrap(tol)
    _check_open_unit(xs)
    if a < 1:
        raise DomainError(f"product start index must be >= 1, got {a}")
    if not ts.value > 0:
        raise DomainError("tolerance must be positive")
    one_minus_x = 1 - xs
    threshold = ts * one_minus_x
    xp = xs**a  # tracks x^(N+1)
    n_cut = a - 1
    while not (xp.hi < threshold.lo if not xp.is_exact else xp.value < threshold.value):
        n_cut += 1
        xp = xp * xs
        if n_cut - a > cap:
            raise ResourceError(
                f"truncated product needs more than {cap} factors "
                f"(x={xs.value!r}, tol={ts.value!r})"
            )
    value = g_finite(xs, a, n_cut)
    return TruncatedProduct(value=value, tail_bound_hi=xp / one_minus_x, cutoff_index=n_cut)


def one_minus_tail_product(
    x: ScalarLike,
    a: int,
    rel_tol: float = 1e-17,
    cap: int = PRODUCT_CUTOFF_CAP,
) -> Scalar:
    """``1 - prod_{i>=a} (1-x^i)`` on the float backend, without cancellation.

    Evaluated as ``-expm1(sum log1p(-x^i))`` so the result keeps full relative
    precision even when the product is within one ulp of 1.  The tracked error
    bound covers roundoff and the certified truncation of the log-sum.
    """
    xs = Scalar.wrap(x)
    _check_open_unit(xs)
    if a < 1:
        raise DomainError(f"product start index must be >= 1, got {a}")
    xf = float(xs.value)
    log_sum = 0.0
    xi = xf**a
    n_terms = 0
    # Omitted log terms are <= x^(N+1)/((1-x)(1-x^(N+1))); stop once that is
    # negligible relative to the leading term x^a.
    while xi > rel_tol * (xf**a) and xi > 0.0:
        log_sum += math.log1p(-xi)
        xi *= xf
        n_terms += 1
        if n_terms > cap:
            raise ResourceError("log-product truncation exceeded its factor cap")
    tail = xi / ((1.0 - xf) * (1.0 - xi)) if xi > 0.0 else 0.0
    result = -math.expm1(log_sum)
    err_in = abs(log_sum) * (n_terms + 2) * 2 * _EPS + tail
    err = err_in + 2 * _EPS * abs(result)
    base_err = 0.0
    if not xs.is_exact and xs.err:
        # d/dx [1 - prod] <= sum_i i x^(i-1) <= a x^(a-1)/(1-x)^2-ish; be blunt.
        base_err = xs.err * (a * xf ** (a - 1) / (1.0 - xf) ** 2 + 1.0)
    return Scalar(result, err + base_err)


def one_minus_tail_interval(x: Fraction, a: int, width_goal: Fraction) -> tuple[Fraction, Fraction]:
    """Exact-rational interval certified to contain ``1 - prod_{i>=a}(1-x^i)``."""
    if not (0 < x < 1):
        raise DomainError(f"x must lie in (0, 1), got {x!r}")
    if width_goal <= 0:
        raise DomainError("interval width goal must be positive")
    tp = g_infinite(Scalar(x), a, Scalar(width_goal / 2))
    p_trunc = tp.value.value
    tb = tp.tail_bound_hi.value
    return 1 - p_trunc, 1 - p_trunc * (1 - tb)


def q_binomial(n: int, k: int, q: int) -> int:
    """Gaussian binomial coefficient: the number of k-dim subspaces of F_q^n."""
    if q < 2:
        raise DomainError(f"q must be at least 2, got {q}")
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if k < 0 or k > n:
        return 0
    k = min(k, n - k)
    acc = Fraction(1)
    for i in range(k):
        acc *= Fraction(q ** (n - i) - 1, q ** (i + 1) - 1)
    if acc.denominator != 1:
        raise AssertionError("q-binomial did not reduce to an integer")
    return acc.numerator


def technical_identity_gap(
    x: ScalarLike, y: ScalarLike, m: int, n: int, big_k: int
) -> Scalar:
    """Gap between ``prod_{i=m}^{n} 1/(1-y x^i)`` and its K-term expansion.

    The expansion is ``sum_{k=0}^{K} y^k x^{mk}
    prod_{i=n-m+1}^{n-m+k}(1-x^i) / prod_{i=1}^{k}(1-x^i)``; the signed gap
    tends to zero geometrically in K with ratio ``|y| x^m``.
    """
    xs = Scalar.wrap(x)
    ys = Scalar.wrap(y)
    if not abs(xs.value) < 1:
        raise DomainError(f"|x| must be < 1, got {xs.value!r}")
    if not abs(ys.value) < 1:
        raise DomainError(f"|y| must be < 1, got {ys.value!r}")
    if not 0 <= m <= n:
        raise DomainError(f"need 0 <= m <= n, got m={m}, n={n}")
    if big_k < 1:
        raise DomainError(f"expansion order must be >= 1, got {big_k}")

    lhs = _one_like(xs)
    xp = xs**m
    for _ in range(m, n + 1):
        lhs = lhs / (1 - ys * xp)
        xp = xp * xs
    # term_{k+1} = term_k * y x^m (1 - x^(n-m+k+1)) / (1 - x^(k+1))
    term = _one_like(xs)
    total = term
    step = ys * (xs**m)
    num_p = xs ** (n - m + 1)
    den_p = xs
    for _ in range(big_k):
        term = term * step * (1 - num_p) / (1 - den_p)
        total = total + term
        num_p = num_p * xs
        den_p = den_p * xs
    return lhs - total
