"""Syntactic differentials, partial derivatives, Jacobians, determinants and
term evaluation."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .analysis import free_vars
from .polynomial import NestedDifferential, PrimedInput
from .syntax import (
    ONE,
    ZERO,
    Const,
    Differential,
    Plus,
    Term,
    TermMatrix,
    Times,
    Var,
    term_sum,
)

NumericState = Mapping[Var, object]


class MissingVariable(KeyError):
    pass


class NonSquare(ValueError):
    def __init__(self, rows: int, cols: int):
        super().__init__(f"matrix is {rows}x{cols}, not square")
        self.rows, self.cols = rows, cols


def differential(e: Term, constants=frozenset()) -> Term:
    """Expand ``(e)'`` by the four rewrite rules.

    Variables in ``constants`` are treated like rational constants, which is
    how parameters are handled when differentiating along a state trace.
    """
    match e:
        case Const():
            return ZERO
        case Var():
            if e.primed:
                raise PrimedInput(f"differential of differential variable {e}")
            return ZERO if e in constants else e.prime()
        case Plus(left=a, right=b):
            return Plus(differential(a, constants), differential(b, constants))
        case Times(left=a, right=b):
            return Plus(
                Times(differential(a, constants), b),
                Times(a, differential(b, constants)),
            )
        case Differential():
            raise NestedDifferential("nested differential")
    raise TypeError(f"not a term: {e!r}")


def expand_differentials(e: Term) -> Term:
    """Replace every ``Differential`` node by its expansion."""
    match e:
        case Differential(arg=a):
            return differential(expand_differentials(a))
        case Plus(left=a, right=b):
            return Plus(expand_differentials(a), expand_differentials(b))
        case Times(left=a, right=b):
            return Times(expand_differentials(a), expand_differentials(b))
    return e


def partial(e: Term, x: Var) -> Term:
    match e:
        case Plus(left=a, right=b):
            return Plus(partial(a, x), partial(b, x))
        case Const():
            return ZERO
        case Times(left=a, right=b):
            return Plus(Times(partial(a, x), b), Times(a, partial(b, x)))
        case Var():
            return ONE if e == x else ZERO
        case Differential():
            raise NestedDifferential("partial derivative of a differential")
    raise TypeError(f"not a term: {e!r}")


def jacobian(es: Sequence[Term], xs: Sequence[Var]) -> TermMatrix:
    return tuple(tuple(partial(e, x) for x in xs) for e in es)


def mat_shape(m: TermMatrix) -> tuple[int, int]:
    rows = len(m)
    cols = len(m[0]) if rows else 0
    if any(len(r) != cols for r in m):
        raise ValueError("ragged matrix")
    return rows, cols


def _minor(m: TermMatrix, i: int, j: int) -> TermMatrix:
    return tuple(tuple(a for c, a in enumerate(row) if c != j) for r, row in enumerate(m) if r != i)


def determinant(m: TermMatrix) -> Term:
    """Cofactor expansion along the first row, no simplification."""
    rows, cols = mat_shape(m)
    if rows != cols:
        raise NonSquare(rows, cols)
    if rows == 0:
        return ONE
    if rows == 1:
        return m[0][0]
    parts = []
    for j in range(cols):
        sign = Const(1 if j % 2 == 0 else -1)
        parts.append(Times(sign, Times(m[0][j], determinant(_minor(m, 0, j)))))
    return term_sum(parts)


def numeric_det(values) -> float:
    import numpy as np

    return float(np.linalg.det(np.asarray(values, dtype=float))) if len(values) else 1.0


def exact_det(values: Sequence[Sequence[Fraction]]) -> Fraction:
    """Fraction-exact determinant by Gaussian elimination."""
    a = [list(map(Fraction, r)) for r in values]
    n = len(a)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                for c in range(col, n):
                    a[r][c] -= f * a[col][c]
    return det


def eval_term(e: Term, s: NumericState, exact: bool | None = None):
    """Evaluate ``e`` in state ``s``.

    Rational arithmetic when ``exact`` (default: when every value is a
    Fraction or int), float otherwise.  A differential evaluates as the sum
    over its unprimed free variables v of s(v') times the partial derivative.
    """
    if exact is None:
        exact = all(isinstance(v, (int, Fraction)) for v in s.values())
    return _eval(e, s, exact)


def _eval(e: Term, s: NumericState, exact: bool):
    match e:
        case Const(value=c):
            return c if exact else float(c)
        case Var():
            try:
                v = s[e]
            except KeyError:
                raise MissingVariable(str(e)) from None
            return Fraction(v) if exact else float(v)
        case Plus(left=a, right=b):
            return _eval(a, s, exact) + _eval(b, s, exact)
        case Times(left=a, right=b):
            return _eval(a, s, exact) * _eval(b, s, exact)
        case Differential(arg=a):
            fv = free_vars(a)
            if any(v.primed for v in fv):
                raise PrimedInput("differential of a term with differential variables")
            total = Fraction(0) if exact else 0.0
            for v in sorted(fv):
                vp = v.prime()
                if vp not in s:
                    raise MissingVariable(str(vp))
                total += _eval(vp, s, exact) * _eval(partial(a, v), s, exact)
            return total
    raise TypeError(f"not a term: {e!r}")


def eval_matrix(m: TermMatrix, s: NumericState, exact: bool | None = None):
    return [[eval_term(a, s, exact) for a in row] for row in m]
