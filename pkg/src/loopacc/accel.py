"""Accelerated transitions: a formula over the loop variables, their primed
copies and the counter n that holds exactly of (s, s', n) when s reaches s' in
n > 0 iterations.

The guard is characterized through monotonicity: an atom that holds after the
body whenever it held before only needs to hold at iteration n-1; an atom
preserved forward only needs to hold at iteration 0.  Anything else fails the
acceleration (no quantified fallback is ever emitted).
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import (
    And, Bin, BoolConst, Const, Expr, Formula, Not, Or, Rel, Sel, Var,
    conj, free_vars, lval_set, substitute, substitute_lvalues, sv,
)
from .arrayform import ArrayFormError, closed_form_array
from .classify import LvalueClass, classify_lvalue
from .closedform import ClosedFormError, ClosedFormTable, ClosedForms, Failure, closed_forms_all
from .loop import Loop, UpdateSubstitution, build_up
from .recurrence import N
from .simplify import simplify, simplify_formula


def primed(x: Var) -> Var:
    return Var(x.name + "'", x.arity)


@dataclass
class AcceleratedTransition:
    loop: Loop
    formula: Formula  # over V, V' and n; includes n > 0
    closed_forms: dict[Var, object]  # x -> x^(n) expression / lambda
    guard_formula: Formula

    def variables(self) -> set[Var]:
        return free_vars(self.formula)


def _guard_atoms(guard: Formula) -> list[Formula]:
    if isinstance(guard, And):
        out = []
        for a in guard.args:
            out.extend(_guard_atoms(a))
        return out
    if isinstance(guard, BoolConst) and guard.value:
        return []
    return [guard]


def _closed_form_for(lv: Sel, loop: Loop, table: ClosedFormTable,
                     up: UpdateSubstitution, session) -> Expr | None:
    """Closed form for a guard lvalue: table hit, else trivial, else
    displacing via substituted indices (recursively); None when unresolvable."""
    if lv in table:
        return table.of(lv)
    if not (free_vars(lv) & loop.written_vars()):
        return lv
    direction = None
    from .classify import monotonicity

    direction = monotonicity(loop, lv.arr, up, session)
    c = classify_lvalue(loop, lv, direction, up, session)
    if c.label == LvalueClass.TRIVIAL:
        return lv
    if c.label == LvalueClass.DISPLACING:
        mapping = {}
        for ix in lv.idx:
            for sub in lval_set(ix):
                cf = _closed_form_for(sub, loop, table, up, session)
                if cf is None:
                    return None
                mapping[sub] = cf
        return Sel(lv.arr, tuple(simplify(substitute_lvalues(ix, mapping)) for ix in lv.idx))
    return None


def guard_characterize(loop: Loop, table: ClosedFormTable,
                       up: UpdateSubstitution | None = None,
                       session=None) -> Formula | Failure:
    """Per guard atom psi: if psi[up] => psi is valid, emit psi at iteration
    n-1 (its lvalues replaced by closed forms at n-1); if psi => psi[up] is
    valid, emit psi unchanged; otherwise fail."""
    up = up or build_up(loop)
    out = []
    for atom in _guard_atoms(loop.guard):
        post = up.apply(atom)
        post_implies_pre = _validity(Or((Not(post), atom)), session)
        if post_implies_pre:
            mapping = {}
            failed = None
            for lv in lval_set(atom):
                cf = _closed_form_for(lv, loop, table, up, session)
                if cf is None:
                    failed = lv
                    break
                mapping[lv] = cf
            if failed is not None:
                return Failure("guard", f"no closed form for guard lvalue {failed!r}")
            shifted = substitute_lvalues(atom, mapping)
            shifted = substitute(shifted, {N: Bin("-", sv(N), Const(1))})
            out.append(simplify_formula(shifted))
            continue
        pre_implies_post = _validity(Or((Not(atom), post)), session)
        if pre_implies_post:
            out.append(simplify_formula(atom))
            continue
        if post_implies_pre is None or pre_implies_post is None:
            return Failure("guard", "backend inconclusive on guard monotonicity")
        return Failure("guard", f"guard atom is not monotonic: {atom!r}")
    return conj(out)


def _validity(f: Formula, session) -> bool | None:
    g = simplify_formula(f)
    if g == BoolConst(True):
        return True
    if g == BoolConst(False):
        return False
    if session is None:
        return None
    return session.is_valid(g)


def accelerate(loop: Loop, session=None,
               forms: ClosedForms | Failure | None = None) -> AcceleratedTransition | Failure:
    """n > 0, the guard characterization, and x' = x^(n) for every loop
    variable (unwritten variables keep x' = x so models stay total)."""
    from .loop import validate_loop

    validation = validate_loop(loop, session)
    if not validation.ok:
        detail = "inconclusive" if validation.inconclusive else f"pair {validation.violation}"
        return Failure("validation", f"(Distinct) not established: {detail}")
    if forms is None:
        forms = closed_forms_all(loop, session)
    if isinstance(forms, Failure):
        return forms
    up = build_up(loop)
    guard = guard_characterize(loop, forms.table, up, session)
    if isinstance(guard, Failure):
        return guard
    conjuncts: list[Formula] = [Rel(">", sv(N), Const(0))]
    conjuncts.extend(_guard_atoms(guard))
    closed: dict[Var, object] = {}
    for x in sorted(loop.variables(), key=lambda v: v.name):
        xp = primed(x)
        if x not in loop.written_vars():
            closed[x] = x if x.arity else sv(x)
            conjuncts.append(Rel("=", xp, x) if x.arity else Rel("=", sv(xp), sv(x)))
            continue
        try:
            cf = closed_form_array(loop, x, forms.table, up)
        except (ArrayFormError, ClosedFormError) as exc:
            return Failure("array-closed-form", str(exc))
        closed[x] = cf
        if x.arity:
            conjuncts.append(Rel("=", xp, cf))
        else:
            conjuncts.append(Rel("=", sv(xp), cf))
    return AcceleratedTransition(loop, conj(conjuncts), closed, guard)


# ---------------------------------------------------------------------------
# reachability encoding


class EncodeError(Exception):
    pass


def flatten_literals(f: Formula) -> list[Formula]:
    """Conjunction to a flat literal list; disjunctive structure is rejected
    (CNF splitting is out of scope)."""
    if isinstance(f, BoolConst):
        return [] if f.value else [f]
    if isinstance(f, And):
        out = []
        for a in f.args:
            out.extend(flatten_literals(a))
        return out
    if isinstance(f, Rel):
        return [f]
    if isinstance(f, Not) and isinstance(f.arg, Rel):
        return [f]
    raise EncodeError(f"not a literal conjunction: {f!r}")


def encode_reachability(pre: list[Formula], transition: AcceleratedTransition,
                        post: list[Formula]) -> list[Formula]:
    """pre /\\ accelerated formula /\\ post[x/x'] as a flat literal list for
    the lambda theory solver; post is stated over unprimed variables and
    renamed to the primed final state."""
    lits: list[Formula] = []
    for f in pre:
        lits.extend(flatten_literals(f))
    lits.extend(flatten_literals(transition.formula))
    rename = {}
    for x in sorted(transition.loop.variables(), key=lambda v: v.name):
        rename[x] = primed(x) if x.arity else sv(primed(x))
    for f in post:
        renamed = substitute(f, rename)
        lits.extend(flatten_literals(renamed))
    return lits
