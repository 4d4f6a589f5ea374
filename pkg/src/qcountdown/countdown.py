"""The countdown process: deterministic paths and their stochastic driver.

A finitely supported sequence of nonnegative integer delays ``z`` determines a
unique path that walks down the diagonal ``height = -t``, spends ``z_i`` extra
time units at height ``i``, and is absorbed at 0.  The map between delays and
paths is a bijection; the stochastic layer feeds it independent geometric
delays ``P(Z_i >= k) = x^(ik)`` and exposes the equivalent Markov chain that
stays at height ``i`` with probability ``x^i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .qseries import DomainError, ResourceError, Scalar, ScalarLike, g_infinite

__all__ = [
    "ChainState",
    "DelaySequence",
    "MalformedTrajectoryError",
    "Trajectory",
    "chain_step",
    "death_time",
    "hitting_time",
    "phi",
    "phi_inverse",
    "sample_delays",
]


class MalformedTrajectoryError(ValueError):
    """A height sequence violates the countdown step structure."""


@dataclass(frozen=True)
class DelaySequence:
    """Finitely supported delays ``(z_1, z_2, ...)``, stored sparsely.

    ``pairs`` holds only the nonzero coordinates as sorted ``(index, value)``
    tuples with ``index >= 1``; this keeps a single far-out delay (a one at a
    huge index) O(1) in memory.
    """

    pairs: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self) -> None:
        seen = set()
        for i, v in self.pairs:
            if i < 1:
                raise ValueError(f"delay indices start at 1, got {i}")
            if v < 0:
                raise ValueError(f"delays are nonnegative, got z_{i} = {v}")
            if i in seen:
                raise ValueError(f"duplicate delay index {i}")
            seen.add(i)
        cleaned = tuple(sorted((i, v) for i, v in self.pairs if v > 0))
        object.__setattr__(self, "pairs", cleaned)

    @staticmethod
    def from_list(values) -> "DelaySequence":
        """Build from a dense prefix ``[z_1, z_2, ...]``."""
        return DelaySequence(tuple((i + 1, v) for i, v in enumerate(values)))

    @staticmethod
    def zero() -> "DelaySequence":
        return DelaySequence(())

    def get(self, i: int) -> int:
        for j, v in self.pairs:
            if j == i:
                return v
        return 0

    @property
    def max_index(self) -> int:
        """Largest index with a nonzero delay; 0 for the zero sequence."""
        return self.pairs[-1][0] if self.pairs else 0

    def total(self) -> int:
        return sum(v for _, v in self.pairs)

    def tail_sum(self, k: int) -> int:
        """``z_k + z_{k+1} + ...``"""
        return sum(v for i, v in self.pairs if i >= k)

    def to_list(self) -> list[int]:
        out = [0] * self.max_index
        for i, v in self.pairs:
            out[i - 1] = v
        return out


@dataclass(frozen=True)
class Trajectory:
    """A countdown path restricted to the window ``t_min..t_max`` inclusive."""

    t_min: int
    heights: tuple[int, ...]

    @property
    def t_max(self) -> int:
        return self.t_min + len(self.heights) - 1

    def height_at(self, t: int) -> int:
        if not self.t_min <= t <= self.t_max:
            raise IndexError(f"time {t} outside window [{self.t_min}, {self.t_max}]")
        return self.heights[t - self.t_min]

    def points(self) -> list[tuple[int, int]]:
        return [(self.t_min + i, h) for i, h in enumerate(self.heights)]

    def to_json(self) -> dict:
        return {"tMin": self.t_min, "points": [[t, h] for t, h in self.points()]}


@dataclass(frozen=True)
class ChainState:
    """Height and clock of the pure-death countdown chain."""

    height: int
    time: int

    def __post_init__(self) -> None:
        if self.height < 0:
            raise ValueError(f"chain height must be nonnegative, got {self.height}")


def _death_times(z: DelaySequence, k_max: int) -> list[int]:
    """Death times d_k = (z_k + z_{k+1} + ...) - k for k = 1..k_max."""
    suffix = 0
    by_index = dict(z.pairs)
    out = [0] * (k_max + 1)
    for k in range(k_max, 0, -1):
        suffix += by_index.get(k, 0)
        out[k] = suffix - k
    return out[1:]


def phi(z: DelaySequence, window: tuple[int, int]) -> Trajectory:
    """Render the countdown path of ``z`` on an inclusive time window.

    The height at time t equals the number of heights whose death happens at
    time >= t; below the support the path is the diagonal ``height = -t``.
    """
    t_min, t_max = window
    if t_min > t_max:
        raise ValueError(f"empty window {window}")
    m = z.max_index
    deaths = _death_times(z, m)
    heights = []
    for t in range(t_min, t_max + 1):
        above_support = max(0, -t - m)
        within = sum(1 for d in deaths if d >= t)
        heights.append(within + above_support)
    return Trajectory(t_min=t_min, heights=tuple(heights))


def phi_inverse(traj: Trajectory) -> DelaySequence:
    """Recover the delays from a path that covers its whole nontrivial part.

    The window must start on the diagonal (``height == -t_min``) and end at
    height 0; then ``1 + z_i`` is the number of window times at height ``i``.
    """
    hs = traj.heights
    if traj.heights[0] != -traj.t_min:
        raise MalformedTrajectoryError(
            f"trajectory must start on the diagonal: height {hs[0]} at t={traj.t_min}"
        )
    if hs[-1] != 0:
        raise MalformedTrajectoryError("trajectory must reach height 0 in the window")
    for a, b in zip(hs, hs[1:]):
        if a - b not in (0, 1):
            raise MalformedTrajectoryError(f"illegal step from height {a} to {b}")
    counts: dict[int, int] = {}
    for h in hs:
        if h >= 1:
            counts[h] = counts.get(h, 0) + 1
    return DelaySequence(tuple((i, c - 1) for i, c in counts.items() if c - 1 > 0))


def hitting_time(z: DelaySequence) -> int:
    """First time the path of ``z`` reaches height 0: the sum of all delays."""
    return z.total()


def death_time(z: DelaySequence, k: int) -> int:
    """The unique time t with height k at t and k-1 at t+1."""
    if k < 1:
        raise DomainError(f"death height must be >= 1, got {k}")
    return z.tail_sum(k) - k


def _geometric(u: float, stay: float) -> int:
    """Quantile transform: number of failures before success prob 1-stay."""
    if u >= 1.0:
        return 0
    return int(math.log(1.0 - u) / math.log(stay)) if u > 0.0 else 0


@lru_cache(maxsize=64)
def _all_zero_tail_prob(xf: float) -> float:
    return float(g_infinite(Scalar(xf), 1, 1e-16).value.value)


def sample_delays(
    x: ScalarLike,
    n_cutoff: int | None,
    rng: np.random.Generator,
    max_levels: int = 10**6,
) -> DelaySequence:
    """Sample ``(Z_1, Z_2, ...)`` with ``P(Z_i >= k) = x^(ik)``.

    With a finite cutoff, coordinates above it are zero.  With
    ``n_cutoff=None`` the full sequence is sampled exactly: at each level one
    Bernoulli draw decides whether any delay remains above it (probability
    ``1 - prod_{i>L}(1-x^i)``), and conditioned on that the next coordinate is
    drawn from its tilted law.  No truncation bias is introduced.
    """
    xs = Scalar.wrap(x)
    xf = float(xs.value)
    if not 0 < xf < 1:
        raise DomainError(f"x must lie in (0, 1), got {xf!r}")

    pairs: list[tuple[int, int]] = []
    if n_cutoff is not None:
        if n_cutoff < 0:
            raise DomainError(f"cutoff must be nonnegative, got {n_cutoff}")
        for i in range(1, n_cutoff + 1):
            z = _geometric(rng.random(), xf**i)
            if z > 0:
                pairs.append((i, z))
        return DelaySequence(tuple(pairs))

    # q_level = P(all Z_i = 0 for i > level)
    q_level = _all_zero_tail_prob(xf)
    level = 0
    conditioned = False  # true when we know some delay exists above `level`
    while level < max_levels:
        if not conditioned:
            if rng.random() < q_level:
                break  # tail above `level` is all zero
            conditioned = True
        stay = xf ** (level + 1)
        q_next = q_level / (1.0 - stay)
        p_zero = (1.0 - stay) * (1.0 - q_next) / (1.0 - q_level)
        if rng.random() < p_zero:
            # Z_{level+1} = 0, and the tail above level+1 is still nonzero.
            level += 1
            q_level = q_next
            continue
        # Z_{level+1} >= 1: memorylessness gives 1 + an ordinary geometric,
        # and the tail above level+1 is unconditioned again.
        z = 1 + _geometric(rng.random(), stay)
        pairs.append((level + 1, z))
        level += 1
        q_level = q_next
        conditioned = False
    else:
        raise ResourceError("delay sampling exceeded its level cap")
    return DelaySequence(tuple(pairs))


def chain_step(state: ChainState, x: ScalarLike, rng: np.random.Generator) -> ChainState:
    """One transition: stay at height i with probability x^i, else drop to i-1.

    Height 0 is absorbing since x^0 = 1.
    """
    xs = Scalar.wrap(x)
    xf = float(xs.value)
    if not 0 < xf < 1:
        raise DomainError(f"x must lie in (0, 1), got {xf!r}")
    h = state.height
    if h > 0 and rng.random() >= xf**h:
        h -= 1
    return ChainState(height=h, time=state.time + 1)
