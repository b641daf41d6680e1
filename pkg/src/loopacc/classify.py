"""Lvalue closure set, per-variable monotonicity, per-lvalue classification
(trivial / inductive / displacing) and the a-solvability verdict.

Index comparisons are lexicographic; validity checks go through the
simplifier first and fall back to the SMT backend, degrading to
None/Unclassifiable (never to an unsound answer) when the backend cannot
decide.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .expr import (
    BoolConst, Formula, Rel, Sel, Var, conj, disj, free_vars, lval_set,
)
from .loop import Loop, UpdateSubstitution, build_up
from .simplify import simplify_formula


class LvalueClass(enum.Enum):
    TRIVIAL = "trivial"
    INDUCTIVE = "inductive"
    DISPLACING = "displacing"
    UNCLASSIFIABLE = "unclassifiable"


class Monotonicity(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    BOTH = "both"  # no index on the variable changes
    NONE = "none"


def lex_lt(u: tuple, v: tuple) -> Formula:
    """u < v in the lexicographic order on equal-length index vectors."""
    cases = []
    for i in range(len(u)):
        prefix = [Rel("=", u[j], v[j]) for j in range(i)]
        cases.append(conj(prefix + [Rel("<", u[i], v[i])]))
    return disj(cases)


def lex_le(u: tuple, v: tuple) -> Formula:
    eq = conj(Rel("=", a, b) for a, b in zip(u, v))
    return disj([lex_lt(u, v), eq])


def _validity(f: Formula, session) -> bool | None:
    g = simplify_formula(f)
    if g == BoolConst(True):
        return True
    if g == BoolConst(False):
        return False
    if session is None:
        return None
    return session.is_valid(g)


def compute_L(loop: Loop) -> list[Sel]:
    """Least set containing the rhs lvalues and closed under lvalues of index
    vectors; deterministic order for reproducible reports."""
    out: list[Sel] = []
    seen: set[Sel] = set()
    queue: list[Sel] = []
    for r in loop.rhs:
        for lv in sorted(lval_set(r), key=_lv_key):
            queue.append(lv)
    while queue:
        lv = queue.pop(0)
        if lv in seen:
            continue
        seen.add(lv)
        out.append(lv)
        for ix in lv.idx:
            for sub in sorted(lval_set(ix), key=_lv_key):
                queue.append(sub)
    return out


def _lv_key(lv: Sel) -> str:
    from .sexpr import to_text

    return to_text(lv)


def monotonicity(loop: Loop, x: Var, up: UpdateSubstitution | None = None,
                 session=None) -> Monotonicity:
    """Direction of x's written indices under one iteration (Both when there
    is nothing to compare, e.g. scalars and unwritten variables)."""
    up = up or build_up(loop)
    writes = loop.writes_to(x)
    inc_parts, dec_parts = [], []
    for lv, _ in writes:
        upped = tuple(up.apply(ix) for ix in lv.idx)
        inc_parts.append(lex_le(lv.idx, upped))
        dec_parts.append(lex_le(upped, lv.idx))
    inc = _validity(conj(inc_parts), session)
    dec = _validity(conj(dec_parts), session)
    if inc and dec:
        return Monotonicity.BOTH
    if inc:
        return Monotonicity.INCREASING
    if dec:
        return Monotonicity.DECREASING
    return Monotonicity.NONE


@dataclass
class Classification:
    label: LvalueClass
    justification: str = ""


def classify_lvalue(loop: Loop, lv: Sel, direction: Monotonicity,
                    up: UpdateSubstitution | None = None, session=None) -> Classification:
    """Strongest applicable label, trivial first.  Inductive membership uses
    semantic index equality (up(r) is rarely syntactically identical to a
    written index); displacing flips the strict comparison for decreasing
    variables."""
    from .sexpr import to_text

    up = up or build_up(loop)
    written = loop.written_vars()
    if not (free_vars(lv) & written):
        return Classification(LvalueClass.TRIVIAL, "reads no written variable")
    x = lv.arr
    upped = tuple(up.apply(ix) for ix in lv.idx)
    for wlv, _ in loop.writes_to(x):
        eq = conj(Rel("=", a, b) for a, b in zip(wlv.idx, upped))
        if _validity(eq, session):
            just = f"{x.name}[up(r)] = {to_text(wlv)} is written"
            return Classification(LvalueClass.INDUCTIVE, just)
    writes = loop.writes_to(x)
    if direction == Monotonicity.NONE:
        return Classification(LvalueClass.UNCLASSIFIABLE, f"{x.name} is not monotonic")
    sides = []
    if direction in (Monotonicity.INCREASING, Monotonicity.BOTH):
        sides.append(("r' < up(r)", lambda w: lex_lt(w, upped)))
    if direction in (Monotonicity.DECREASING, Monotonicity.BOTH):
        sides.append(("r' > up(r)", lambda w: lex_lt(upped, w)))
    inconclusive = False
    for name, mk in sides:
        verdict = _validity(conj(mk(wlv.idx) for wlv, _ in writes), session)
        if verdict:
            return Classification(LvalueClass.DISPLACING,
                                  f"{name} valid for every write to {x.name}")
        if verdict is None:
            inconclusive = True
    if inconclusive:
        return Classification(LvalueClass.UNCLASSIFIABLE, "backend inconclusive")
    return Classification(LvalueClass.UNCLASSIFIABLE, "neither trivial, inductive nor displacing")


@dataclass
class SolvabilityVerdict:
    a_solvable: bool
    monotone: dict[Var, Monotonicity] = field(default_factory=dict)
    closure: list[Sel] = field(default_factory=list)
    labels: dict[Sel, Classification] = field(default_factory=dict)
    rhs_tags: list[str] = field(default_factory=list)  # per rhs: "a" or "b"
    reason: str = ""


def check_a_solvable(loop: Loop, session=None) -> SolvabilityVerdict:
    """Monotonic + full classification of the closure + per-rhs condition:
    (a) only trivial/inductive reads or (b) only displacing reads (trivial
    lvalues count as displacing)."""
    from .sexpr import to_text

    up = build_up(loop)
    verdict = SolvabilityVerdict(False)
    for x in sorted(loop.variables(), key=lambda v: v.name):
        verdict.monotone[x] = monotonicity(loop, x, up, session)
        if verdict.monotone[x] == Monotonicity.NONE:
            verdict.reason = f"{x.name} is not monotonic"
            return verdict
    closure = compute_L(loop)
    verdict.closure = closure
    for lv in closure:
        c = classify_lvalue(loop, lv, verdict.monotone[lv.arr], up, session)
        verdict.labels[lv] = c
        if c.label == LvalueClass.UNCLASSIFIABLE:
            verdict.reason = f"{to_text(lv)} is unclassifiable: {c.justification}"
            return verdict
    for pos, r in enumerate(loop.rhs, start=1):
        labels = {verdict.labels[lv].label for lv in lval_set(r)}
        if labels <= {LvalueClass.TRIVIAL, LvalueClass.INDUCTIVE}:
            verdict.rhs_tags.append("a")
        elif labels <= {LvalueClass.TRIVIAL, LvalueClass.DISPLACING}:
            verdict.rhs_tags.append("b")
        else:
            verdict.reason = f"mixed inductive/displacing in Lval(r_{pos})"
            return verdict
    verdict.a_solvable = True
    return verdict
