"""Exact laws of the countdown process: partial sums, coranks, modes.

Every pmf here has infinite or parameter-dependent support, so the stored
prefix always carries a certified bound on the mass beyond it.  On the exact
backend the probabilities are rationals and the bounds are exact; on the float
backend the scalar error tracking covers roundoff and folded truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .qseries import (
    DEFAULT_TOL,
    DomainError,
    ResourceError,
    Scalar,
    ScalarLike,
    g_finite,
    g_infinite,
)

__all__ = [
    "CriticalPoint",
    "ModeReport",
    "Pmf",
    "RnTailReport",
    "corank_pmf",
    "corank_prob",
    "critical_x",
    "death_prob",
    "law_rn",
    "law_s",
    "mode_of_s",
    "partial_sum_prob",
    "pmf_partial_sum",
    "rn_tail_bound_check",
]

_KMAX_CAP = 200_000

#: relative truncation used for infinite-product constants folded into floats
_INNER_TOL = 1e-16


def _wrap_x(x: ScalarLike) -> Scalar:
    xs = Scalar.wrap(x)
    if not 0 < xs.value < 1:
        raise DomainError(f"x must lie in (0, 1), got {xs.value!r}")
    return xs


def _zero_like(x: Scalar) -> Scalar:
    return Scalar(Fraction(0)) if x.is_exact else Scalar(0.0)


@dataclass(frozen=True)
class Pmf:
    """A pmf on {0, 1, 2, ...} stored up to a cutoff with a certified tail.

    ``probs[k]`` is P(k); ``tail_mass_hi`` bounds the total mass beyond the
    stored support from above.
    """

    probs: tuple[Scalar, ...]
    tail_mass_hi: Scalar
    params: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, k: int) -> Scalar:
        if 0 <= k < len(self.probs):
            return self.probs[k]
        if self.probs:
            return _zero_like(self.probs[0])
        return Scalar(Fraction(0))

    @property
    def support_max(self) -> int:
        return len(self.probs) - 1

    def sum_probs(self) -> Scalar:
        total = Scalar(Fraction(0))
        for p in self.probs:
            total = total + p
        return total

    def shift(self, j: int) -> "Pmf":
        """The law of X + j (j >= 0): probabilities move up by j."""
        if j < 0:
            raise ValueError("only nonnegative shifts are defined on Z_+ pmfs")
        zero = _zero_like(self.probs[0]) if self.probs else Scalar(Fraction(0))
        return Pmf(
            probs=(zero,) * j + self.probs,
            tail_mass_hi=self.tail_mass_hi,
            params={**self.params, "shifted_by": j},
        )

    def max_prob(self) -> tuple[int, Scalar]:
        k_best = max(range(len(self.probs)), key=lambda k: self.probs[k].value)
        return k_best, self.probs[k_best]

    def to_json(self) -> dict:
        return {
            "params": {k: str(v) if isinstance(v, Scalar) else v for k, v in self.params.items()},
            "probs": [p.to_json() for p in self.probs],
            "tailBound": self.tail_mass_hi.to_json(),
        }

    def csv_rows(self):
        """Rows (k, prob, cumulative, err)."""
        cum = Scalar(Fraction(0))
        for k, p in enumerate(self.probs):
            cum = cum + p
            yield k, str(p), str(cum), (0.0 if p.is_exact else p.err)


# ---------------------------------------------------------------------------
# partial sums of geometric delays
# ---------------------------------------------------------------------------


def _euler_from(x: Scalar, a: int) -> Scalar:
    """``prod_{i>=a}(1-x^i)`` folded onto the float backend."""
    return g_infinite(x, a, Scalar(_INNER_TOL)).as_scalar()


def partial_sum_prob(x: ScalarLike, m: int, n: int | None, j: int) -> Scalar:
    """P(Z_m + ... + Z_n = j); ``n=None`` means the full tail sum.

    The closed form is ``x^(mj) * prod_{i=n-m+1}^{n-m+j}(1-x^i)
    * prod_{i=m}^{n}(1-x^i) / prod_{i=1}^{j}(1-x^i)``.
    """
    xs = _wrap_x(x)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if n is not None and n < m - 1:
        raise DomainError(f"need n >= m-1, got m={m}, n={n}")
    if j < 0:
        return _zero_like(xs)
    if n is not None and n == m - 1:  # empty sum
        one = Scalar(Fraction(1)) if xs.is_exact else Scalar(1.0)
        return one if j == 0 else _zero_like(xs)
    if n is None:
        const = _euler_from(xs, m)
        middle = Scalar.wrap(1)
    else:
        const = g_finite(xs, m, n)
        middle = g_finite(xs, n - m + 1, n - m + j) if j > 0 else Scalar.wrap(1)
    return (xs ** (m * j)) * middle * const / g_finite(xs, 1, j)


def pmf_partial_sum(
    x: ScalarLike,
    m: int,
    n: int | None,
    k_max: int | None = None,
    tol: ScalarLike = DEFAULT_TOL,
) -> Pmf:
    """The law of ``Z_m + ... + Z_n`` with a certified tail bound.

    Specializations: ``m=1`` gives S_n (or S when ``n=None``); ``m=n+1`` with
    ``n=None`` gives R_n.  When ``k_max`` is omitted the support is extended
    until the certified tail drops below ``tol``.
    """
    xs = _wrap_x(x)
    tol_s = Scalar.wrap(tol)
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if n is not None and n < m - 1:
        raise DomainError(f"need n >= m-1, got m={m}, n={n}")
    params = {"kind": "partial-sum", "x": str(xs), "m": m, "n": n}

    if n is not None and n == m - 1:
        one = Scalar(Fraction(1)) if xs.is_exact else Scalar(1.0)
        return Pmf(probs=(one,), tail_mass_hi=_zero_like(xs), params=params)

    probs: list[Scalar] = []
    p = partial_sum_prob(xs, m, n, 0)
    x_m = xs**m
    num_p = xs ** (n - m + 1) if n is not None else None
    den_p = xs
    k = 0

    def tail_bound_after(k_idx: int, p_k: Scalar) -> Scalar | None:
        rho_den = 1 - (xs ** (k_idx + 1))
        rho = x_m / rho_den
        if not rho.value < 1:
            return None
        return p_k * rho / (1 - rho)

    while True:
        probs.append(p)
        tail = tail_bound_after(k, p)
        if k_max is not None:
            if k >= k_max:
                break
        elif tail is not None and tail.hi < tol_s.value:
            break
        if k > _KMAX_CAP:
            raise ResourceError("pmf support grew past its cap before certification")
        ratio = x_m / (1 - den_p)
        if n is not None:
            ratio = ratio * (1 - num_p)
            num_p = num_p * xs
        den_p = den_p * xs
        p = p * ratio
        k += 1

    tail = tail_bound_after(k, probs[-1])
    if tail is None:
        raise ResourceError("tail ratio not yet below 1 at the requested k_max")
    return Pmf(probs=tuple(probs), tail_mass_hi=tail, params=params)


def law_s(x: ScalarLike, n: int | None, **kw) -> Pmf:
    """Law of the hitting time S_n (or S when ``n=None``)."""
    return pmf_partial_sum(x, 1, n, **kw)


def law_rn(x: ScalarLike, n: int, **kw) -> Pmf:
    """Law of the residual R_n = S - S_n."""
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    return pmf_partial_sum(x, n + 1, None, **kw)


# ---------------------------------------------------------------------------
# corank / countdown height laws
# ---------------------------------------------------------------------------


def corank_prob(x: ScalarLike, n: int | None, t: int, k: int) -> Scalar:
    """P(height = k at time t) for the countdown process truncated at n.

    Finite n in the chain regime (t >= -n) uses the product form; for
    t < -n the height is deterministically -t.  ``n=None`` is the full
    process.
    """
    xs = _wrap_x(x)
    if k < 0:
        return _zero_like(xs)
    one = Scalar(Fraction(1)) if xs.is_exact else Scalar(1.0)
    if n is None:
        if t + k < 0:
            return _zero_like(xs)
        return (
            (xs ** (k * (t + k)))
            * _euler_from(xs, k + 1)
            / g_finite(xs, 1, t + k)
        )
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if t < -n:
        return one if k == -t else _zero_like(xs)
    if k > n or t + k < 0:
        return _zero_like(xs)
    return (
        (xs ** (k * (t + k)))
        * g_finite(xs, n - k + 1, n + t)
        * g_finite(xs, k + 1, n)
        / g_finite(xs, 1, t + k)
    )


def corank_pmf(
    x: ScalarLike,
    n: int | None,
    t: int,
    k_max: int | None = None,
    tol: ScalarLike = DEFAULT_TOL,
) -> Pmf:
    """The full height law at time t, with certified tail."""
    xs = _wrap_x(x)
    tol_s = Scalar.wrap(tol)
    params = {"kind": "corank", "x": str(xs), "n": n, "t": t}
    zero = _zero_like(xs)

    if n is not None:
        if n < 0:
            raise DomainError(f"n must be nonnegative, got {n}")
        if t < -n:
            upto = max(-t, k_max or 0)
            probs = [zero] * (upto + 1)
            probs[-t] = Scalar(Fraction(1)) if xs.is_exact else Scalar(1.0)
            return Pmf(probs=tuple(probs), tail_mass_hi=zero, params=params)
        upto = n if k_max is None else min(k_max, n)
        probs = [corank_prob(xs, n, t, k) for k in range(upto + 1)]
        if upto >= n:
            tail = zero
        elif xs.is_exact:
            total = sum(p.value for p in probs)
            tail = Scalar(max(Fraction(0), 1 - total))
        else:
            tail = _corank_tail_bound(xs, t, upto, probs[-1])
        return Pmf(probs=tuple(probs), tail_mass_hi=tail, params=params)

    # infinite process
    k_start = max(0, -t)
    probs = [zero] * k_start
    k = k_start
    p = corank_prob(xs, None, t, k)
    while True:
        probs.append(p)
        tail = _corank_tail_bound(xs, t, k, p)
        if k_max is not None:
            if k >= k_max:
                break
        elif tail is not None and tail.hi < tol_s.value:
            break
        if k > _KMAX_CAP:
            raise ResourceError("corank pmf support grew past its cap")
        ratio = (xs ** (t + 2 * k + 1)) / ((1 - xs ** (k + 1)) * (1 - xs ** (t + k + 1)))
        p = p * ratio
        k += 1
    tail = _corank_tail_bound(xs, t, k, probs[-1])
    if tail is None:
        raise ResourceError("corank tail ratio not below 1 at requested k_max")
    return Pmf(probs=tuple(probs), tail_mass_hi=tail, params=params)


def _corank_tail_bound(xs: Scalar, t: int, k: int, p_k: Scalar) -> Scalar | None:
    """Geometric domination of the mass above k, from the one-step ratio."""
    rho = (xs ** (t + 2 * k + 1)) / ((1 - xs ** (k + 1)) * (1 - xs ** (t + k + 1)))
    if not rho.value < 1:
        return None
    return p_k * rho / (1 - rho)


def death_prob(x: ScalarLike, n: int, t: int, k: int) -> Scalar:
    """P(death at time t from height k) = P(S_n - S_{k-1} = t + k)."""
    xs = _wrap_x(x)
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if k < 1:
        raise DomainError(f"death height must be >= 1, got {k}")
    one = Scalar(Fraction(1)) if xs.is_exact else Scalar(1.0)
    if t + k < 0:
        return _zero_like(xs)
    if k > n:  # empty delay sum: the death above the cutoff is deterministic
        return one if t + k == 0 else _zero_like(xs)
    return partial_sum_prob(xs, k, n, t + k)


# ---------------------------------------------------------------------------
# mode structure and critical parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeReport:
    mode: int
    mode_prob: Scalar
    tie_with_next: bool

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "modeProb": self.mode_prob.to_json(),
            "tieWithNext": self.tie_with_next,
        }


def mode_of_s(x: ScalarLike) -> ModeReport:
    """Mode of the hitting-time law S.

    The successive-ratio P(S=k+1)/P(S=k) = x/(1-x^(k+1)) is decreasing, so
    the mode is the first k where it drops below 1, i.e. where
    x^(k+1) < 1 - x.  A tie (ratio exactly 1) is reported on the smaller k.
    """
    xs = _wrap_x(x)
    k = 0
    tie = False
    while True:
        lhs = xs ** (k + 1)
        rhs = 1 - xs
        if xs.is_exact:
            if lhs.value < rhs.value:
                break
            if lhs.value == rhs.value:
                tie = True
                break
        else:
            gap = lhs - rhs
            if abs(gap.value) <= gap.err:
                tie = True
                break
            if gap.value < 0:
                break
        k += 1
        if k > 10**6:
            raise ResourceError("mode search ran away; x is too close to 1")
    return ModeReport(mode=k, mode_prob=partial_sum_prob(xs, 1, None, k), tie_with_next=tie)


@dataclass(frozen=True)
class CriticalPoint:
    k: int
    x: Scalar
    y: float

    def to_json(self) -> dict:
        return {"k": self.k, "x": self.x.to_json(), "y": self.y}


def critical_x(k: int, tol: float = 1e-15) -> CriticalPoint:
    """The tie point x_k: the unique root of x^(k+1) = 1 - x in (0, 1).

    x -> x^(k+1) + x - 1 is strictly increasing on (0, 1), so bisection
    converges unconditionally; ``y = -1/log(x_k)`` is reported alongside.
    """
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if mid == lo or mid == hi:  # hit float resolution
            break
        if mid ** (k + 1) + mid - 1.0 < 0.0:
            lo = mid
        else:
            hi = mid
    mid = (lo + hi) / 2.0
    return CriticalPoint(k=k, x=Scalar(mid, hi - lo), y=-1.0 / math.log(mid))


# ---------------------------------------------------------------------------
# residual tail check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RnTailReport:
    x: Scalar
    n: int
    exact: Scalar
    proof_bound: Scalar
    stated_bound: Scalar

    @property
    def holds_proof(self) -> bool:
        return self.exact.hi <= self.proof_bound.lo

    @property
    def holds_stated(self) -> bool:
        return self.exact.hi <= self.stated_bound.lo

    def to_json(self) -> dict:
        return {
            "x": self.x.to_json(),
            "n": self.n,
            "exact": self.exact.to_json(),
            "proofBound": self.proof_bound.to_json(),
            "statedBound": self.stated_bound.to_json(),
            "holdsProof": self.holds_proof,
            "holdsStated": self.holds_stated,
        }


def rn_tail_bound_check(x: ScalarLike, n: int) -> RnTailReport:
    """P(R_n > 1) against both tail bounds.

    The statement's bound is x^(2n)/(1-x)^2; the proof actually delivers the
    sharper (x^(n+1)/(1-x))^2.  Both are evaluated and compared.

    The exact value equals 1 - P(R_n=0) - P(R_n=1); it is summed directly as
    sum_{k>=2} P(R_n=k) so that tiny values survive cancellation.
    """
    xs = _wrap_x(x)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    q0 = _euler_from(xs, n + 1)
    x_step = xs ** (n + 1)
    # T_k = x^((n+1)k) * q0 / prod_{i<=k}(1-x^i), summed from k = 2
    term = (x_step**2) * q0 / g_finite(xs, 1, 2)
    total = term
    k = 2
    while True:
        rho = x_step / (1 - xs ** (k + 1))
        if rho.value < 1:
            tail = term * rho / (1 - rho)
            if tail.hi < max(float(total.value) * 1e-14, 1e-300):
                total = Scalar(float(total.value), total.err + float(tail.hi))
                break
        k += 1
        if k > _KMAX_CAP:
            raise ResourceError("R_n tail summation did not certify")
        term = term * x_step / (1 - xs**k)
        total = total + term
    omx = 1 - xs
    proof = (x_step / omx) ** 2
    stated = (xs ** (2 * n)) / (omx * omx)
    return RnTailReport(x=xs, n=n, exact=total, proof_bound=proof, stated_bound=stated)
