"""Buchberger's algorithm with the product and chain criteria."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .polynomial import Monomial, Poly, Ring


class ResourceLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class Budget:
    max_pairs: int = 50_000
    max_degree: int = 12


def _divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


def _coprime(a: Monomial, b: Monomial) -> bool:
    return all(not (x and y) for x, y in zip(a, b))


def reduce_full(p: Poly, basis: Sequence[Poly]) -> Poly:
    """Complete reduction of ``p`` modulo ``basis`` (the normal form)."""
    ring = p.ring
    key = ring.key
    work = dict(p.terms)
    rem: dict[Monomial, Fraction] = {}
    leads = [(g.lm, g.lc, g) for g in basis if g]
    while work:
        m = max(work, key=key)
        c = work.pop(m)
        for lm, lc, g in leads:
            if _divides(lm, m):
                q = tuple(a - b for a, b in zip(m, lm))
                f = c / lc
                for gm, gc in g.terms.items():
                    if gm == lm:
                        continue
                    t = tuple(a + b for a, b in zip(gm, q))
                    v = work.get(t, 0) - f * gc
                    if v:
                        work[t] = v
                    else:
                        work.pop(t, None)
                break
        else:
            rem[m] = c
    return Poly(ring, rem)


def reduce_with_quotients(p: Poly, basis: Sequence[Poly]) -> tuple[list[Poly], Poly]:
    """Division with recorded quotients: p = sum q_i g_i + r."""
    ring = p.ring
    qs = [ring.zero() for _ in basis]
    work = p
    rem = ring.zero()
    while work:
        m, c = work.lead()
        for i, g in enumerate(basis):
            if g and _divides(g.lm, m):
                q = tuple(a - b for a, b in zip(m, g.lm))
                f = c / g.lc
                qs[i] = qs[i] + Poly(ring, {q: f})
                work = work - g.mul_term(q, f)
                break
        else:
            rem = rem + Poly(ring, {m: c})
            work = work - Poly(ring, {m: c})
    return qs, rem


def s_polynomial(f: Poly, g: Poly) -> Poly:
    lcm = _lcm(f.lm, g.lm)
    a = tuple(x - y for x, y in zip(lcm, f.lm))
    b = tuple(x - y for x, y in zip(lcm, g.lm))
    return f.mul_term(a, 1 / f.lc) - g.mul_term(b, 1 / g.lc)


def groebner_basis(polys: Sequence[Poly], budget: Budget = Budget()) -> list[Poly]:
    """Reduced Groebner basis (monic, sorted by leading monomial)."""
    polys = [p for p in polys if p]
    if not polys:
        return []
    ring: Ring = polys[0].ring
    key = ring.key
    basis: list[Poly] = []
    pairs: list = []
    treated: set[tuple[int, int]] = set()
    counter = 0

    def push(i: int, j: int):
        nonlocal counter
        lcm = _lcm(basis[i].lm, basis[j].lm)
        heapq.heappush(pairs, (sum(lcm), key(lcm), counter, i, j))
        counter += 1

    def add(p: Poly):
        basis.append(p.monic())
        k = len(basis) - 1
        for i in range(k):
            if basis[i] is not None:
                push(i, k)

    for p in polys:
        r = reduce_full(p, [b for b in basis if b is not None])
        if r:
            add(r)

    processed = 0
    while pairs:
        _, _, _, i, j = heapq.heappop(pairs)
        treated.add((i, j))
        processed += 1
        if processed > budget.max_pairs:
            raise ResourceLimit(f"pair budget of {budget.max_pairs} exceeded")
        f, g = basis[i], basis[j]
        if _coprime(f.lm, g.lm):
            continue
        lcm = _lcm(f.lm, g.lm)
        # chain criterion: some third element divides the lcm and both
        # companion pairs are already handled
        chain = False
        for k, h in enumerate(basis):
            if k in (i, j) or not _divides(h.lm, lcm):
                continue
            if (min(i, k), max(i, k)) in treated and (min(j, k), max(j, k)) in treated:
                chain = True
                break
        if chain:
            continue
        r = reduce_full(s_polynomial(f, g), basis)
        if r:
            if r.degree() > budget.max_degree:
                raise ResourceLimit(f"degree cap {budget.max_degree} exceeded")
            add(r)
            if r.is_const():
                break
    return interreduce(basis)


def interreduce(basis: Sequence[Poly]) -> list[Poly]:
    gs = [g.monic() for g in basis if g]
    if any(g.is_const() for g in gs):
        return [gs[0].ring.one()]
    # drop elements whose leading monomial is divisible by another's
    minimal: list[Poly] = []
    for g in sorted(gs, key=lambda p: p.ring.key(p.lm)):
        if not any(_divides(h.lm, g.lm) for h in minimal):
            minimal.append(g)
    out = []
    for idx, g in enumerate(minimal):
        others = minimal[:idx] + minimal[idx + 1 :]
        out.append(reduce_full(g, others).monic())
    return sorted(out, key=lambda p: p.ring.key(p.lm))


def in_ideal(p: Poly, basis: Sequence[Poly]) -> bool:
    """Membership test; ``basis`` must already be a Groebner basis."""
    return not reduce_full(p, basis)


def is_groebner(basis: Sequence[Poly]) -> bool:
    for a in range(len(basis)):
        for b in range(a + 1, len(basis)):
            if reduce_full(s_polynomial(basis[a], basis[b]), basis):
                return False
    return True


def elimination_ideal(polys: Sequence[Poly], eliminate: Sequence, budget: Budget = Budget()) -> list[Poly]:
    """Basis elements free of the variables in ``eliminate``; the ring must
    use an order that eliminates them (``lex`` or ``block`` with them first)."""
    gb = groebner_basis(polys, budget)
    idx = [polys[0].ring.index[v] for v in eliminate if v in polys[0].ring.index] if polys else []
    return [g for g in gb if all(all(m[i] == 0 for i in idx) for m in g.terms)]
