"""Exact and sampled semantics of small quantum registers.

Two register flavours are supported and never mixed on one register:

* rational state vectors acted on by superoperators whose operation
  elements have rational entries, and
* qubits driven only by rotations through integer multiples of
  ``unit * sqrt(2) * pi``, tracked as an integer step count.

Amplitudes are :class:`fractions.Fraction` values, which are always kept
in lowest terms with a positive denominator.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath

CONTINUE = "continue"
RESTART = "restart"
ACCEPT = "accept"
REJECT = "reject"
ACTIONS = (CONTINUE, RESTART, ACCEPT, REJECT)

Matrix = tuple[tuple[Fraction, ...], ...]
Vector = tuple[Fraction, ...]


class StructuralError(ValueError):
    """Raised when matrices or vectors have incompatible shapes."""


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


def parse_rational(text: str) -> Fraction:
    """Parse ``"num/den"`` or an integer literal into a Fraction.

    >>> parse_rational("-3/10")
    Fraction(-3, 10)
    """
    match = _RATIONAL_RE.match(text)
    if match is None:
        raise ValueError(f"not a rational literal: {text!r}")
    num, den = match.group(1), match.group(2)
    if den is not None and int(den) == 0:
        raise ZeroDivisionError(f"zero denominator in {text!r}")
    return Fraction(int(num), int(den) if den is not None else 1)


def format_rational(value: Fraction | int) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def as_matrix(rows: Sequence[Sequence]) -> Matrix:
    mat = tuple(tuple(Fraction(x) for x in row) for row in rows)
    if not mat or any(len(row) != len(mat) for row in mat):
        raise StructuralError("operation element must be a non-empty square matrix")
    return mat


def identity(dim: int, scale: Fraction | int = 1) -> Matrix:
    scale = Fraction(scale)
    return tuple(
        tuple(scale if i == j else Fraction(0) for j in range(dim)) for i in range(dim)
    )


def mat_vec(mat: Matrix, vec: Vector) -> Vector:
    if len(mat[0]) != len(vec):
        raise StructuralError(f"{len(mat)}x{len(mat[0])} matrix applied to {len(vec)}-vector")
    return tuple(sum((a * b for a, b in zip(row, vec) if a and b), Fraction(0)) for row in mat)


def gram(mat: Matrix) -> Matrix:
    """Return ``M^T M`` (entries are real, so the adjoint is the transpose)."""
    n = len(mat)
    acc = [[Fraction(0)] * n for _ in range(n)]
    # elements are sparse: accumulate row outer products over non-zero entries only
    for row in mat:
        nz = [(i, x) for i, x in enumerate(row) if x]
        for i, a in nz:
            out = acc[i]
            for j, b in nz:
                out[j] += a * b
    return tuple(tuple(r) for r in acc)


def squared_norm(vec: Vector) -> Fraction:
    return sum((x * x for x in vec), Fraction(0))


@dataclass(frozen=True)
class OperationElement:
    matrix: Matrix
    action: str = CONTINUE
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", as_matrix(self.matrix))
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")

    @property
    def dim(self) -> int:
        return len(self.matrix)


@dataclass(frozen=True)
class Superoperator:
    elements: tuple[OperationElement, ...]
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise StructuralError("a superoperator needs at least one operation element")

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    @property
    def outcomes(self) -> range:
        return range(len(self.elements))

    def action(self, outcome: int) -> str:
        return self.elements[outcome].action


def completeness_residual(elements: Sequence[OperationElement]) -> Matrix:
    """``I - sum E_i^T E_i`` computed exactly."""
    dims = {e.dim for e in elements}
    if len(dims) != 1:
        raise StructuralError(f"operation elements of mixed dimension {sorted(dims)}")
    dim = dims.pop()
    # integer arithmetic over a common denominator; Fractions only at the end
    den = 1
    for element in elements:
        for row in element.matrix:
            for x in row:
                den = math.lcm(den, x.denominator)
    acc = [[0] * dim for _ in range(dim)]
    for element in elements:
        for row in element.matrix:
            nz = [(i, x.numerator * (den // x.denominator)) for i, x in enumerate(row) if x]
            for i, a in nz:
                out = acc[i]
                for j, b in nz:
                    out[j] += a * b
    den2 = den * den
    return tuple(
        tuple(Fraction(den2 * (i == j) - acc[i][j], den2) for j in range(dim)) for i in range(dim)
    )


def check_completeness(s: Superoperator) -> bool:
    """True iff the operation elements satisfy ``sum E^T E = I`` exactly."""
    residual = completeness_residual(s.elements)
    return all(x == 0 for row in residual for x in row)


def apply_exact(v: Sequence, s: Superoperator) -> list[tuple[int, Vector, Fraction]]:
    """All measurement branches ``(i, E_i v, |E_i v|^2)``; vectors stay unnormalized."""
    v = tuple(Fraction(x) for x in v)
    if len(v) != s.dim:
        raise StructuralError(f"register of size {len(v)} vs superoperator of size {s.dim}")
    out = []
    for i, element in enumerate(s.elements):
        w = mat_vec(element.matrix, v)
        out.append((i, w, squared_norm(w)))
    return out


def rational_sqrt(q: Fraction) -> Fraction | None:
    """Exact square root of a non-negative rational, or None if irrational."""
    if q < 0:
        return None
    rn, rd = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if rn * rn == q.numerator and rd * rd == q.denominator:
        return Fraction(rn, rd)
    return None


def apply_sampled(v: Sequence, s: Superoperator, rng) -> tuple[int, Vector]:
    """Measure once: pick outcome ``i`` with probability ``p_i / <v|v>``.

    The post-measurement vector is normalized exactly when its squared norm
    is the square of a rational; otherwise it is returned unnormalized (its
    direction is what matters for later sampling).
    """
    branches = apply_exact(v, s)
    total = sum(b[2] for b in branches)
    if total == 0:
        raise ContractViolation("cannot sample from a zero-norm register")
    r = Fraction(rng.random()) * total
    acc = Fraction(0)
    chosen = branches[-1]
    for branch in branches:
        acc += branch[2]
        if branch[2] > 0 and r < acc:
            chosen = branch
            break
    i, w, p = chosen
    root = rational_sqrt(p)
    if root:
        w = tuple(x / root for x in w)
    return i, w


def canonical_direction(v: Sequence[Fraction]) -> tuple[tuple[int, ...], Fraction]:
    """Split ``v`` as ``scale * u`` with ``u`` a primitive integer vector.

    The first non-zero entry of ``u`` is positive; for the zero vector ``u``
    is all zeros and ``scale`` is 0.
    """
    v = [Fraction(x) for x in v]
    if not any(v):
        return tuple(0 for _ in v), Fraction(0)
    lcm = 1
    for x in v:
        lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    sign = 1 if next(x for x in ints if x) > 0 else -1
    u = tuple(sign * x // g for x in ints)
    return u, Fraction(sign * g, lcm)


# --- rotation qubits ---------------------------------------------------------

DEFAULT_PRECISION_BITS = 128


def precision_bits() -> int:
    """Working precision for sin^2 evaluation (``QDL_PRECISION_BITS``, >= 64)."""
    return max(64, int(os.environ.get("QDL_PRECISION_BITS", DEFAULT_PRECISION_BITS)))


@dataclass(frozen=True)
class RotationTracker:
    """A qubit rotated only by multiples of ``unit * sqrt(2) * pi``.

    ``steps`` is the net signed number of unit rotations since the qubit
    was last in state q0.
    """

    steps: int = 0
    unit: Fraction = field(default=Fraction(1))


def rotate(t: RotationTracker, direction: int, units: int) -> RotationTracker:
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if units < 0:
        raise ValueError("units must be non-negative")
    return RotationTracker(t.steps + direction * units, t.unit)


@lru_cache(maxsize=65536)
def _sin2(steps: int, unit: Fraction, bits: int):
    with mpmath.workprec(bits + 32):
        angle = mpmath.mpf(unit.numerator) / unit.denominator * steps * mpmath.sqrt(2) * mpmath.pi
        value = mpmath.sin(angle) ** 2
    with mpmath.workprec(bits):
        return +value


def q1_probability(t: RotationTracker, bits: int | None = None):
    """Probability of observing q1, ``sin^2(steps * unit * sqrt(2) * pi)``.

    Returns the exact integer 0 when ``steps == 0``; otherwise an
    :class:`mpmath.mpf` evaluated at ``bits`` of precision.
    """
    if t.steps == 0:
        return 0
    return _sin2(t.steps, Fraction(t.unit), bits or precision_bits())


@lru_cache(maxsize=1024)
def min_q1_probability(max_steps: int, unit: Fraction = Fraction(1), bits: int | None = None):
    """``min over 1 <= |k| <= max_steps`` of ``sin^2(k * unit * sqrt(2) * pi)``."""
    bits = bits or precision_bits()
    return min(_sin2(k, Fraction(unit), bits) for k in range(1, max_steps + 1))


# --- register programs used in transition tables --------------------------------


@dataclass(frozen=True)
class RotationStep:
    """Rotate each qubit ``q`` by ``units[q]`` signed unit rotations (one outcome)."""

    units: tuple[int, ...]
    name: str = ""

    @property
    def outcomes(self) -> range:
        return range(1)

    def action(self, outcome: int) -> str:
        return CONTINUE


@dataclass(frozen=True)
class Measure:
    """Measure one rotation qubit in the {q0, q1} basis.

    Outcome 0 is q0 (the qubit collapses back to zero steps); outcome 1 is
    q1 and triggers ``on_q1``.
    """

    qubit: int
    on_q1: str = CONTINUE
    name: str = ""

    @property
    def outcomes(self) -> range:
        return range(2)

    def action(self, outcome: int) -> str:
        return CONTINUE if outcome == 0 else self.on_q1


@dataclass(frozen=True)
class CoinFlip:
    """A classical fair die with ``len(actions)`` equiprobable outcomes."""

    actions: tuple[str, ...] = (CONTINUE, CONTINUE)
    name: str = ""

    @property
    def outcomes(self) -> range:
        return range(len(self.actions))

    def action(self, outcome: int) -> str:
        return self.actions[outcome]


FAIR_COIN_4 = Superoperator(
    tuple(
        OperationElement(identity(4, Fraction(1, 2)), CONTINUE, label)
        for label in ("heads1", "heads2", "tails1", "tails2")
    ),
    name="fair-coin",
)
