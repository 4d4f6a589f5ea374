import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcountdown.qseries import (
    DomainError,
    Scalar,
    g_finite,
    g_infinite,
    one_minus_tail_product,
    q_binomial,
    technical_identity_gap,
)

HALF = Scalar.exact(1, 2)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def brute_force_rank_counts_f2_2x2():
    """Rank counts of all 16 matrices in F_2^{2x2} by explicit case analysis."""
    counts = {0: 0, 1: 0, 2: 0}
    for a, b, c, d in itertools.product(range(2), repeat=4):
        if a == b == c == d == 0:
            counts[0] += 1
        elif (a * d - b * c) % 2 != 0:
            counts[2] += 1
        else:
            counts[1] += 1
    return counts


def truncated_euler_product(x: float, a: int, tol: float) -> float:
    """Plain direct product with cutoff x^(N+1)/(1-x) < tol."""
    p = 1.0
    i = a
    while x**i / (1 - x) >= tol:
        p *= 1 - x**i
        i += 1
    return p


def count_subspaces_f3_4_dim2() -> int:
    """Count 2-dim subspaces of F_3^4 as distinct row spaces of 2x4 matrices."""

    def rref(rows):
        rows = [list(r) for r in rows]
        pivot_row = 0
        for col in range(4):
            piv = next(
                (r for r in range(pivot_row, 2) if rows[r][col] % 3 != 0), None
            )
            if piv is None:
                continue
            rows[pivot_row], rows[piv] = rows[piv], rows[pivot_row]
            inv = pow(rows[pivot_row][col], -1, 3)
            rows[pivot_row] = [(v * inv) % 3 for v in rows[pivot_row]]
            for r in range(2):
                if r != pivot_row and rows[r][col] % 3:
                    f = rows[r][col]
                    rows[r] = [(v - f * w) % 3 for v, w in zip(rows[r], rows[pivot_row])]
            pivot_row += 1
            if pivot_row == 2:
                break
        return tuple(tuple(r) for r in rows), pivot_row

    spaces = set()
    for entries in itertools.product(range(3), repeat=8):
        canon, rank = rref([entries[:4], entries[4:]])
        if rank == 2:
            spaces.add(canon)
    return len(spaces)


# ---------------------------------------------------------------------------
# Scalar backends
# ---------------------------------------------------------------------------


def test_exact_arithmetic_stays_exact():
    a = Scalar.exact(3, 8)
    b = Scalar.exact(1, 3)
    assert (a * b).value == Fraction(1, 8)
    assert (a + b).value == Fraction(17, 24)
    assert (a / b).value == Fraction(9, 8)
    assert (a - b).err == 0.0
    assert (a**5).value == Fraction(3, 8) ** 5


def test_float_error_propagation_is_conservative():
    a = Scalar(0.1, 1e-10)
    b = Scalar(0.3, 2e-10)
    s = a + b
    assert s.err >= 3e-10
    p = a * b
    assert p.err >= 0.3 * 1e-10 + 0.1 * 2e-10
    q = a / b
    assert abs(q.value - 1 / 3) < 1e-9
    assert q.err > 0


def test_mixed_backend_promotes_to_float():
    s = Scalar.exact(1, 2) + Scalar(0.25)
    assert not s.is_exact
    assert s.value == 0.75


def test_parse_literal_selects_backend():
    assert Scalar.parse("3/8").is_exact
    assert Scalar.parse("7").is_exact
    assert not Scalar.parse("0.375").is_exact
    assert str(Scalar.parse("3/8")) == "3/8"
    with pytest.raises(ValueError):
        Scalar.parse("not-a-number")


def test_division_by_uncertain_zero_rejected():
    with pytest.raises(DomainError):
        Scalar(1.0) / Scalar(1e-12, 1e-10)


@given(
    st.fractions(min_value=0, max_value=1),
    st.fractions(min_value=0, max_value=1),
)
def test_exact_add_mul_match_fraction_semantics(a, b):
    sa, sb = Scalar(a), Scalar(b)
    assert (sa + sb).value == a + b
    assert (sa * sb).value == a * b


@given(st.floats(min_value=-10, max_value=10), st.integers(min_value=0, max_value=40))
def test_float_pow_within_tracked_error(base, n):
    s = Scalar(base) ** n
    true = base**n
    assert abs(s.value - true) <= s.err + abs(true) * 1e-12


# ---------------------------------------------------------------------------
# g_finite
# ---------------------------------------------------------------------------


def test_g_finite_direct_value():
    assert g_finite(HALF, 1, 2).value == Fraction(3, 8)


def test_g_finite_empty_product():
    assert g_finite(HALF, 3, 2).value == 1


def test_g_finite_matches_gl2_count():
    # 6 of the 16 matrices in F_2^{2x2} are nonsingular.
    counts = brute_force_rank_counts_f2_2x2()
    assert counts[2] == 6
    assert g_finite(HALF, 1, 2).value == Fraction(counts[2], 16)


def test_g_finite_domain_errors():
    with pytest.raises(DomainError):
        g_finite(Scalar.exact(2), 1, 3)
    with pytest.raises(DomainError):
        g_finite(HALF, 0, 3)


@given(
    st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100)),
    st.integers(min_value=0, max_value=12),
)
def test_g_finite_recurrence_exact(x, n):
    xs = Scalar(x)
    lhs = g_finite(xs, 1, n) * (1 - xs ** (n + 1))
    assert lhs.value == g_finite(xs, 1, n + 1).value


# ---------------------------------------------------------------------------
# g_infinite
# ---------------------------------------------------------------------------


def test_g_infinite_euler_value_at_half():
    expected = truncated_euler_product(0.5, 1, 1e-12)
    got = g_infinite(Scalar(0.5), 1, 1e-12)
    assert math.isclose(float(got.value), expected, rel_tol=1e-11)
    assert math.isclose(float(got.value), 0.288788095087, rel_tol=1e-10)
    assert float(got.tail_bound_hi) < 1e-12


def test_g_infinite_ratio_identity():
    g1 = g_infinite(Scalar(0.5), 1, 1e-13).as_scalar()
    g2 = g_infinite(Scalar(0.5), 2, 1e-13).as_scalar()
    assert abs(g2.value - g1.value / 0.5) < 1e-11
    assert math.isclose(g2.value, 0.577576190174, rel_tol=1e-10)


def test_g_infinite_all_factors_omitted():
    # x^a/(1-x) already below tol: the empty product is a valid truncation.
    tp = g_infinite(Scalar(0.5), 60, 1e-12)
    assert tp.value.value == 1.0
    assert tp.cutoff_index == 59
    assert float(tp.tail_bound_hi) < 1e-12


def test_g_infinite_interval_brackets_truth():
    tp = g_infinite(Scalar(0.5), 1, 1e-6)
    lo, hi = tp.interval()
    truth = truncated_euler_product(0.5, 1, 1e-16)
    assert float(lo) <= truth <= float(hi)


def test_g_infinite_exact_backend_interval():
    tp = g_infinite(Scalar.exact(1, 2), 1, Scalar.exact(1, 10**9))
    assert tp.value.is_exact
    lo, hi = tp.interval()
    truth = truncated_euler_product(0.5, 1, 1e-16)
    assert float(lo.value) <= truth <= float(hi.value)


@pytest.mark.parametrize("a", [1, 2, 5, 9])
@pytest.mark.parametrize("x", [0.2, 0.5, 0.8])
def test_one_minus_product_sandwich(x, a):
    # Bonferroni sandwich shifted to start index a.
    tol = 1e-13
    one_minus = 1 - float(g_infinite(Scalar(x), a, tol).as_scalar().value)
    upper = x**a / (1 - x) + tol
    lower = x**a / (1 - x) - x ** (2 * a + 1) / (1 - x) ** 2 - tol
    assert lower <= one_minus <= upper


@pytest.mark.parametrize("x,a", [(0.5, 1), (0.5, 30), (0.1, 17), (0.9, 4)])
def test_one_minus_tail_product_agrees_and_stays_positive(x, a):
    r = one_minus_tail_product(Scalar(x), a)
    assert r.value > 0
    # consistency with the plain truncated product where that has precision;
    # the naive difference only carries ~1e-16/naive relative accuracy
    naive = 1 - truncated_euler_product(x, a, 1e-16)
    if naive > 1e-7:
        assert math.isclose(r.value, naive, rel_tol=1e-7)
    # Bonferroni sandwich, always
    assert x**a / (1 - x) - x ** (2 * a + 1) / (1 - x) ** 2 - r.err <= r.value
    assert r.value <= x**a / (1 - x) + r.err


def test_one_minus_tail_product_deep_tail_keeps_relative_precision():
    # naive evaluation underflows to 0 here; the stable path must not
    r = one_minus_tail_product(Scalar(0.1), 20)
    assert math.isclose(r.value, 0.1**20 / 0.9, rel_tol=1e-6)


# ---------------------------------------------------------------------------
# q_binomial
# ---------------------------------------------------------------------------


def test_q_binomial_counts_lines_of_f2_squared():
    # 1-dim subspaces of F_2^2, one per nonzero vector up to scaling
    nonzero = [(a, b) for a in range(2) for b in range(2) if (a, b) != (0, 0)]
    assert q_binomial(2, 1, 2) == len(nonzero) == 3


def test_q_binomial_trivial_and_out_of_range():
    assert q_binomial(7, 0, 3) == 1
    assert q_binomial(5, -1, 2) == 0
    assert q_binomial(5, 6, 2) == 0


def test_q_binomial_subspace_enumeration_oracle():
    assert q_binomial(4, 2, 3) == count_subspaces_f3_4_dim2() == 130


@given(
    st.integers(min_value=0, max_value=14),
    st.integers(min_value=0, max_value=14),
    st.sampled_from([2, 3, 4, 5, 8, 9]),
)
def test_q_binomial_symmetry(n, k, q):
    assert q_binomial(n, k, q) == q_binomial(n, n - k, q)


# ---------------------------------------------------------------------------
# technical identity
# ---------------------------------------------------------------------------


def test_gap_base_case_is_pure_geometric_tail():
    gap = technical_identity_gap(HALF, HALF, 0, 0, 30)
    assert gap.value == Fraction(1, 2**30)


def test_gap_exact_rationals_tiny():
    gap = technical_identity_gap(Scalar.exact(1, 3), HALF, 1, 3, 60)
    assert abs(float(gap.value)) < 1e-15


def test_gap_single_factor_float():
    gap = technical_identity_gap(Scalar(0.4), Scalar(0.4), 2, 2, 50)
    assert abs(gap.value) < 1e-15


def test_gap_domain_errors():
    with pytest.raises(DomainError):
        technical_identity_gap(Scalar(1.5), HALF, 0, 1, 10)
    with pytest.raises(DomainError):
        technical_identity_gap(HALF, Scalar.exact(1), 0, 1, 10)
    with pytest.raises(DomainError):
        technical_identity_gap(HALF, HALF, 3, 1, 10)


@settings(deadline=None)
@given(
    st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(2, 5)]),
    st.sampled_from([Fraction(1, 4), Fraction(1, 2)]),
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=0, max_value=3),
)
def test_gap_decreases_geometrically(x, y, m, extra):
    n = m + extra
    gaps = [technical_identity_gap(Scalar(x), Scalar(y), m, n, k).value for k in (5, 6, 15)]
    assert gaps[0] >= gaps[1] >= gaps[2] >= 0
    # tail ratio bound: gap(K+1)/gap(K) <= y x^m / (1 - x^(K+1))
    if gaps[0] > 0:
        rho = y * x**m / (1 - x**6)
        assert gaps[1] <= gaps[0] * rho
