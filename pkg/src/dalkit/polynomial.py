"""Canonical multivariate polynomials over exact rationals.

A ``Ring`` fixes an ordered variable universe and a monomial order; a
``Poly`` is a dict from exponent tuples to nonzero ``Fraction`` coefficients.
Primed variables are ordinary indeterminates here.
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, Mapping, Sequence

from .syntax import (
    MINUS_ONE,
    ZERO,
    Const,
    Differential,
    Plus,
    Term,
    Times,
    Var,
)

Monomial = tuple[int, ...]

ORDERS = ("lex", "grlex", "grevlex", "block")


class NestedDifferential(ValueError):
    """A Differential node reached an operation that needs expanded input."""


class PrimedInput(ValueError):
    """A primed variable reached an operation that forbids it."""


def _grevlex_key(m: Monomial):
    return (sum(m), tuple(-e for e in reversed(m)))


class Ring:
    """Variable universe plus monomial order.

    ``block`` is a two-block elimination order: the first ``split`` variables
    form the dominant block, each block compared by grevlex.
    """

    __slots__ = ("vars", "order", "split", "index", "key")

    def __init__(self, variables: Sequence[Var], order: str = "grevlex", split: int | None = None):
        if order not in ORDERS:
            raise ValueError(f"unknown monomial order {order!r}")
        self.vars = tuple(variables)
        if len(set(self.vars)) != len(self.vars):
            raise ValueError("duplicate variables in ring")
        self.order = order
        self.index = {v: i for i, v in enumerate(self.vars)}
        if order == "block":
            if split is None:
                split = sum(1 for v in self.vars if v.primed)
            self.split = split
            k = split

            def key(m):
                return (_grevlex_key(m[:k]), _grevlex_key(m[k:]))

        else:
            self.split = None
            if order == "lex":
                key = lambda m: m  # noqa: E731
            elif order == "grlex":
                key = lambda m: (sum(m), m)  # noqa: E731
            else:
                key = _grevlex_key
        self.key = key

    def __eq__(self, other):
        return (
            isinstance(other, Ring)
            and self.vars == other.vars
            and self.order == other.order
            and self.split == other.split
        )

    def __hash__(self):
        return hash((self.vars, self.order, self.split))

    def __repr__(self):
        return f"Ring({[str(v) for v in self.vars]}, {self.order!r})"

    @property
    def nvars(self) -> int:
        return len(self.vars)

    def zero(self) -> Poly:
        return Poly(self, {})

    def one(self) -> Poly:
        return self.const(1)

    def const(self, c) -> Poly:
        c = Fraction(c)
        return Poly(self, {(0,) * self.nvars: c} if c else {})

    def var(self, v: Var) -> Poly:
        i = self.index[v]
        m = [0] * self.nvars
        m[i] = 1
        return Poly(self, {tuple(m): Fraction(1)})

    def from_term(self, e: Term) -> Poly:
        return from_term(e, self)


def default_ring(variables: Iterable[Var], order: str = "grevlex") -> Ring:
    """Primed variables first, then unprimed, each group sorted by name."""
    vs = set(variables)
    primed = sorted((v for v in vs if v.primed), key=lambda v: v.name)
    plain = sorted((v for v in vs if not v.primed), key=lambda v: v.name)
    return Ring(primed + plain, order, split=len(primed) if order == "block" else None)


class Poly:
    __slots__ = ("ring", "terms", "_lead")

    def __init__(self, ring: Ring, terms: Mapping[Monomial, Fraction]):
        self.ring = ring
        self.terms = {m: c for m, c in terms.items() if c}
        self._lead = None

    # -- basic protocol
    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.ring.vars == other.ring.vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == self.ring.const(other).terms
        return NotImplemented

    def __hash__(self):
        return hash((self.ring.vars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        from .printer import print_term

        return f"Poly({print_term(self.to_term())})"

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def const_value(self) -> Fraction | None:
        if not self.terms:
            return Fraction(0)
        if self.is_const():
            return next(iter(self.terms.values()))
        return None

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            if other.ring is not self.ring and other.ring != self.ring:
                raise ValueError("polynomials over different rings")
            return other
        return self.ring.const(other)

    # -- arithmetic
    def __add__(self, other) -> Poly:
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(self.ring, out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> Poly:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Poly:
        return self._coerce(other) - self

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            c = Fraction(other)
            return Poly(self.ring, {m: c * a for m, a in self.terms.items()})
        other = self._coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> Poly:
        if n < 0:
            raise ValueError("negative exponent")
        out = self.ring.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def mul_term(self, mono: Monomial, coeff: Fraction) -> Poly:
        return Poly(
            self.ring,
            {tuple(a + b for a, b in zip(m, mono)): c * coeff for m, c in self.terms.items()},
        )

    # -- order-dependent structure
    def lead(self) -> tuple[Monomial, Fraction]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        if self._lead is None:
            m = max(self.terms, key=self.ring.key)
            self._lead = (m, self.terms[m])
        return self._lead

    @property
    def lm(self) -> Monomial:
        return self.lead()[0]

    @property
    def lc(self) -> Fraction:
        return self.lead()[1]

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda mc: self.ring.key(mc[0]), reverse=True)

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, v: Var) -> int:
        i = self.ring.index[v]
        return max((m[i] for m in self.terms), default=-1)

    def variables(self) -> frozenset[Var]:
        used = set()
        for m in self.terms:
            for i, e in enumerate(m):
                if e:
                    used.add(self.ring.vars[i])
        return frozenset(used)

    def monic(self) -> Poly:
        if not self.terms:
            return self
        return self * (1 / self.lc)

    def primitive(self) -> Poly:
        """Integer coefficients with gcd 1 and positive leading coefficient."""
        if not self.terms:
            return self
        den = reduce(lambda a, b: a * b // gcd(a, b), (c.denominator for c in self.terms.values()), 1)
        nums = [int(c * den) for c in self.terms.values()]
        g = reduce(gcd, nums, 0) or 1
        scale = Fraction(den, g)
        if self.lc < 0:
            scale = -scale
        return self * scale

    def content_monomial(self) -> Monomial:
        """Largest monomial dividing every term."""
        if not self.terms:
            return (0,) * self.ring.nvars
        ms = list(self.terms)
        return tuple(min(col) for col in zip(*ms))

    # -- calculus and evaluation
    def diff(self, v: Var) -> Poly:
        i = self.ring.index.get(v)
        if i is None:
            return self.ring.zero()
        out: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            if m[i]:
                m2 = list(m)
                m2[i] -= 1
                m2 = tuple(m2)
                out[m2] = out.get(m2, 0) + c * m[i]
        return Poly(self.ring, out)

    def subs(self, v: Var, g: Poly) -> Poly:
        i = self.ring.index.get(v)
        if i is None:
            return self
        g = self._coerce(g)
        out = self.ring.zero()
        powers = {0: self.ring.one()}
        for m, c in self.terms.items():
            k = m[i]
            if k not in powers:
                powers[k] = g**k
            rest = list(m)
            rest[i] = 0
            out = out + powers[k].mul_term(tuple(rest), c)
        return out

    def eval(self, values: Mapping[Var, object]):
        """Evaluate; exact if every value read is rational, float otherwise."""
        from .calculus import MissingVariable

        used = self.variables()
        for v in used:
            if v not in values:
                raise MissingVariable(str(v))
        exact = all(isinstance(values[v], (int, Fraction)) for v in used)
        total = Fraction(0) if exact else 0.0
        for m, c in self.terms.items():
            t = c if exact else float(c)
            for i, e in enumerate(m):
                if e:
                    t = t * values[self.ring.vars[i]] ** e
            total = total + t
        return total

    def to_ring(self, ring: Ring) -> Poly:
        out = {}
        for m, c in self.terms.items():
            nm = [0] * ring.nvars
            for i, e in enumerate(m):
                if e:
                    v = self.ring.vars[i]
                    if v not in ring.index:
                        raise ValueError(f"variable {v} missing from target ring")
                    nm[ring.index[v]] = e
            out[tuple(nm)] = c
        return Poly(ring, out)

    def to_term(self) -> Term:
        """Canonical term: monomials in decreasing order, ``c * x * x * y``."""
        if not self.terms:
            return ZERO
        out: Term | None = None
        for m, c in self.sorted_terms():
            if out is None:
                out = _monomial_term(self.ring, m, c)
            elif c < 0:
                out = Plus(out, Times(MINUS_ONE, _monomial_term(self.ring, m, -c)))
            else:
                out = Plus(out, _monomial_term(self.ring, m, c))
        return out


def _monomial_term(ring: Ring, m: Monomial, c: Fraction) -> Term:
    factors: list[Term] = []
    for i, e in enumerate(m):
        factors.extend([ring.vars[i]] * e)
    if not factors:
        return Const(c)
    if c == -1:
        out: Term = Times(MINUS_ONE, factors[0])
    elif c != 1:
        out = Times(Const(c), factors[0])
    else:
        out = factors[0]
    for f in factors[1:]:
        out = Times(out, f)
    return out


def from_term(e: Term, ring: Ring) -> Poly:
    match e:
        case Const(value=c):
            return ring.const(c)
        case Var():
            if e not in ring.index:
                raise ValueError(f"variable {e} not in ring")
            return ring.var(e)
        case Plus(left=a, right=b):
            return from_term(a, ring) + from_term(b, ring)
        case Times(left=a, right=b):
            return from_term(a, ring) * from_term(b, ring)
        case Differential():
            raise NestedDifferential("expand differentials before normalizing")
    raise TypeError(f"not a term: {e!r}")


def term_vars(e: Term) -> frozenset[Var]:
    from .analysis import free_vars

    return free_vars(e)


def normalize(e: Term, ring: Ring | None = None, order: str = "grevlex") -> Poly:
    if ring is None:
        ring = default_ring(term_vars(e), order)
    return from_term(e, ring)


def normalize_all(terms: Sequence[Term], order: str = "grevlex", extra: Iterable[Var] = ()) -> list[Poly]:
    vs: set[Var] = set(extra)
    for t in terms:
        vs |= term_vars(t)
    ring = default_ring(vs, order)
    return [from_term(t, ring) for t in terms]


def poly_equal(e: Term, g: Term) -> bool:
    return normalize(Plus(e, Times(MINUS_ONE, g))).is_zero()


def canonical(e: Term) -> Term:
    """Expanded canonical term for ``e``."""
    return normalize(e).to_term()


__all__ = [
    "Monomial",
    "NestedDifferential",
    "Poly",
    "PrimedInput",
    "Ring",
    "canonical",
    "default_ring",
    "from_term",
    "normalize",
    "normalize_all",
    "poly_equal",
]
