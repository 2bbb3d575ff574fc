from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import strategies as st

from dalkit.syntax import (
    And,
    Assign,
    Box,
    Choice,
    Const,
    Dap,
    Differential,
    Forall,
    Leq,
    Not,
    Plus,
    Refines,
    Seq,
    Star,
    Test,
    Times,
    Var,
)

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"

NAMES = ["x", "y", "z", "v", "w", "m"]


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


# ---------------------------------------------------------------- hypothesis trees

consts = st.builds(
    lambda n, d: Const(Fraction(n, d)),
    st.integers(-20, 20),
    st.integers(1, 6),
)
plain_vars = st.sampled_from(NAMES).map(Var)
any_vars = st.builds(Var, st.sampled_from(NAMES), st.booleans())


def terms(allow_diff: bool = True, leaves=None):
    leaves = leaves if leaves is not None else st.one_of(consts, any_vars)

    def extend(children):
        opts = [st.builds(Plus, children, children), st.builds(Times, children, children)]
        if allow_diff:
            opts.append(st.builds(Differential, children))
        return st.one_of(*opts)

    return st.recursive(leaves, extend, max_leaves=8)


def var_tuples():
    return st.lists(plain_vars, min_size=1, max_size=3, unique=True).map(tuple)


@st.composite
def formulas_and_programs(draw, depth: int = 3):
    """A formula; programs appear inside boxes and refinements."""
    return draw(_formula(depth))


def _formula(depth: int):
    t = terms()
    base = st.builds(Leq, t, t)
    if depth <= 0:
        return base
    sub = st.deferred(lambda: _formula(depth - 1))
    prog = st.deferred(lambda: _program(depth - 1))
    return st.one_of(
        base,
        st.builds(Not, sub),
        st.builds(And, sub, sub),
        st.builds(Forall, plain_vars, sub),
        st.builds(Box, prog, sub),
        st.builds(Refines, prog, prog, var_tuples()),
    )


def _program(depth: int):
    base = st.one_of(
        st.builds(Assign, plain_vars, terms()),
        st.builds(Dap, var_tuples(), st.builds(Leq, terms(), terms())),
    )
    if depth <= 0:
        return base
    sub = st.deferred(lambda: _program(depth - 1))
    form = st.deferred(lambda: _formula(depth - 1))
    return st.one_of(
        base,
        st.builds(Test, form),
        st.builds(Dap, var_tuples(), form),
        st.builds(Choice, sub, sub),
        st.builds(Seq, sub, sub),
        st.builds(Star, sub),
    )


programs = st.deferred(lambda: _program(3))
formulas = st.deferred(lambda: _formula(3))
