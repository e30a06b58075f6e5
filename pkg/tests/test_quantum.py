from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hs

from qdebate.linalg import NotPositiveSemidefinite, four_squares, ldl, psd_completion
from qdebate.quantum import (
    ACCEPT,
    CONTINUE,
    RESTART,
    OperationElement,
    RotationTracker,
    StructuralError,
    Superoperator,
    apply_exact,
    apply_sampled,
    canonical_direction,
    check_completeness,
    completeness_residual,
    format_rational,
    gram,
    identity,
    min_q1_probability,
    parse_rational,
    q1_probability,
    rational_sqrt,
    rotate,
)

fractions = hs.fractions(min_value=-3, max_value=3, max_denominator=12)


def half_split():
    h = identity(2, Fraction(1, 2))
    return Superoperator((OperationElement(h, CONTINUE), OperationElement(h, ACCEPT),
                          OperationElement(h, RESTART), OperationElement(h, RESTART)))


def test_rational_literals():
    assert parse_rational("-3/10") == Fraction(-3, 10)
    assert parse_rational(" 7 ") == 7
    assert format_rational(Fraction(6, 4)) == "3/2"
    assert format_rational(5) == "5"
    with pytest.raises(ZeroDivisionError):
        parse_rational("1/0")
    with pytest.raises(ValueError):
        parse_rational("0.5")


def test_element_shape_is_checked():
    with pytest.raises(StructuralError):
        OperationElement(((1, 0),))
    with pytest.raises(ValueError):
        OperationElement(identity(2), "explode")
    with pytest.raises(StructuralError):
        completeness_residual([OperationElement(identity(2)), OperationElement(identity(3))])


def test_completeness_exact():
    assert check_completeness(half_split())
    bad = Superoperator((OperationElement(identity(2, Fraction(1, 2))),))
    assert not check_completeness(bad)
    assert completeness_residual(bad.elements) == ((Fraction(3, 4), 0), (0, Fraction(3, 4)))


def test_apply_exact_preserves_norm():
    v = (Fraction(3), Fraction(4))
    branches = apply_exact(v, half_split())
    assert sum(p for _, _, p in branches) == 25
    assert branches[1][1] == (Fraction(3, 2), 2)
    with pytest.raises(StructuralError):
        apply_exact((1, 2, 3), half_split())


def test_apply_sampled_frequencies():
    rng = np.random.default_rng(3)
    counts = [0] * 4
    for _ in range(4000):
        i, _ = apply_sampled((1, 0), half_split(), rng)
        counts[i] += 1
    assert all(abs(c - 1000) < 150 for c in counts)


def test_rational_sqrt():
    assert rational_sqrt(Fraction(9, 16)) == Fraction(3, 4)
    assert rational_sqrt(Fraction(2)) is None
    assert rational_sqrt(Fraction(-1)) is None


@given(hs.lists(fractions, min_size=1, max_size=5))
def test_canonical_direction_reconstructs(v):
    u, scale = canonical_direction(v)
    assert all(isinstance(x, int) for x in u)
    assert tuple(scale * x for x in u) == tuple(Fraction(x) for x in v)
    if any(v):
        assert next(x for x in u if x) > 0


@given(hs.lists(hs.lists(fractions, min_size=3, max_size=3), min_size=3, max_size=3))
def test_gram_matches_transpose_product(rows):
    m = tuple(tuple(r) for r in rows)
    expected = tuple(tuple(sum(m[k][i] * m[k][j] for k in range(3)) for j in range(3)) for i in range(3))
    assert gram(m) == expected


@given(hs.lists(hs.lists(fractions, min_size=3, max_size=3), min_size=3, max_size=3))
def test_psd_completion_closes_any_gram(rows):
    # residual of a contraction scaled well inside the unit ball is PSD
    m = tuple(tuple(x / 10 for x in r) for r in rows)
    residual = completeness_residual([OperationElement(m)])
    aux = psd_completion(residual)
    op = Superoperator((OperationElement(m),) + tuple(OperationElement(a, RESTART) for a in aux))
    assert check_completeness(op)


def test_ldl_rejects_indefinite():
    with pytest.raises(NotPositiveSemidefinite):
        ldl(((Fraction(1), Fraction(2)), (Fraction(2), Fraction(1))))
    low, diag = ldl(((Fraction(4), Fraction(2)), (Fraction(2), Fraction(2))))
    assert diag == [4, 1] and low[1][0] == Fraction(1, 2)


@given(hs.fractions(min_value=0, max_value=50, max_denominator=30))
def test_four_squares(q):
    assert sum(x * x for x in four_squares(q)) == q


def test_rotation_registers():
    t = rotate(rotate(RotationTracker(), 1, 3), -1, 3)
    assert t.steps == 0 and q1_probability(t) == 0
    t = rotate(RotationTracker(), -1, 2)
    with mpmath.workprec(200):
        expected = mpmath.sin(-2 * mpmath.sqrt(2) * mpmath.pi) ** 2
    assert abs(q1_probability(t) - expected) < mpmath.mpf(2) ** -120
    with pytest.raises(ValueError):
        rotate(t, 0, 1)
    with pytest.raises(ValueError):
        rotate(t, 1, -1)


def test_min_q1_probability_is_a_minimum():
    m = min_q1_probability(10)
    values = [q1_probability(RotationTracker(k)) for k in range(1, 11)]
    assert m == min(values) and m > 0
