"""Single-path loop representation, the (Distinct) check, construction of the
update substitution, and the concrete interpreter that serves as brute-force
oracle for every closed form.

Loops are  while guard do (lv_1, ..., lv_m) <- (rhs_1, ..., rhs_m)  with all
updates applied simultaneously; no two lvalues may alias the same cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import (
    BoolConst, EvalError, Expr, FiniteFn, Formula, Ite, Lam, Rel, Sel, State,
    Var, beta_reduce, conj, disj, eval_expr, eval_formula, free_vars,
    fresh_var, is_lvalue, is_rvalue, substitute, sv,
)
from .simplify import simplify, simplify_formula


class LoopError(Exception):
    pass


@dataclass(frozen=True)
class Loop:
    guard: Formula
    lvalues: tuple[Sel, ...]
    rhs: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.lvalues) != len(self.rhs):
            raise LoopError("lvalue and rhs vectors must have equal length")
        for lv in self.lvalues:
            if not is_lvalue(lv):
                raise LoopError(f"not an lvalue: {lv!r}")
        for r in self.rhs:
            if not is_rvalue(r):
                raise LoopError(f"not an rvalue: {r!r}")
        if len(set(self.lvalues)) != len(self.lvalues):
            raise LoopError("syntactically duplicate lvalues")

    def rhs_of(self, lv: Sel) -> Expr:
        for l, r in zip(self.lvalues, self.rhs):
            if l == lv:
                return r
        raise KeyError(f"no update for {lv!r}")

    def written_vars(self) -> set[Var]:
        return {lv.arr for lv in self.lvalues}

    def writes_to(self, x: Var) -> list[tuple[Sel, Expr]]:
        return [(l, r) for l, r in zip(self.lvalues, self.rhs) if l.arr == x]

    def variables(self) -> set[Var]:
        out = free_vars(self.guard)
        for l, r in zip(self.lvalues, self.rhs):
            out |= free_vars(l) | free_vars(r)
        return out


@dataclass(frozen=True)
class UpdateSubstitution:
    """x -> up_x for written variables; unwritten variables map to themselves."""

    mapping: tuple[tuple[Var, object], ...]

    def of(self, x: Var):
        for k, v in self.mapping:
            if k == x:
                return v
        return x if x.arity > 0 else sv(x)

    def as_dict(self) -> dict:
        return dict(self.mapping)

    def apply(self, e, reduce: bool = True):
        out = substitute(e, self.as_dict())
        return beta_reduce(out) if reduce else out


def build_up(loop: Loop) -> UpdateSubstitution:
    """The read-over-write substitution: scalars collapse to their right-hand
    side, arrays become a fresh-parameter lambda with one ite case per write
    (case order is irrelevant under (Distinct))."""
    mapping = []
    for x in sorted(loop.written_vars(), key=lambda v: v.name):
        writes = loop.writes_to(x)
        if x.arity == 0:
            mapping.append((x, writes[0][1]))
            continue
        avoid = set()
        for lv, r in writes:
            avoid |= free_vars(lv) | free_vars(r)
        params = []
        base = "jklm"[x.arity - 1] if x.arity <= 4 else "j"
        for d in range(x.arity):
            params.append(fresh_var(base if x.arity == 1 else f"{base}{d}", 0))
        body: Expr = Sel(x, tuple(sv(p) for p in params))
        for lv, r in reversed(writes):
            cond = conj(Rel("=", sv(p), ix) for p, ix in zip(params, lv.idx))
            body = Ite(cond, r, body)
        mapping.append((x, Lam(tuple(params), body)))
    return UpdateSubstitution(tuple(mapping))


def up_pow(loop: Loop, e, n: int, up: UpdateSubstitution | None = None):
    """Symbolic n-fold update followed by beta reduction and simplification;
    second oracle at small n."""
    up = up or build_up(loop)
    for _ in range(n):
        e = up.apply(e)
    return simplify(e)


# ---------------------------------------------------------------------------
# (Distinct)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    inconclusive: bool = False
    violation: tuple[int, int] | None = None

    def __bool__(self):
        return self.ok


def validate_loop(loop: Loop, session=None) -> ValidationResult:
    """(Distinct): for each pair of updates to the same variable, the index
    vectors must be provably different (disequality valid)."""
    for i in range(len(loop.lvalues)):
        for j in range(i + 1, len(loop.lvalues)):
            li, lj = loop.lvalues[i], loop.lvalues[j]
            if li.arr != lj.arr:
                continue
            diseq = disj(Rel("!=", a, b) for a, b in zip(li.idx, lj.idx))
            verdict = _validity(diseq, session)
            if verdict is None:
                return ValidationResult(False, inconclusive=True, violation=(i, j))
            if not verdict:
                return ValidationResult(False, violation=(i, j))
    return ValidationResult(True)


def _validity(f: Formula, session) -> bool | None:
    g = simplify_formula(f)
    if g == BoolConst(True):
        return True
    if g == BoolConst(False):
        return False
    if session is None:
        return None
    return session.is_valid(g)


# ---------------------------------------------------------------------------
# interpreter


@dataclass(frozen=True)
class WriteEvent:
    iteration: int  # 1-based
    position: int  # index into loop.lvalues
    var: Var
    point: tuple[int, ...]


@dataclass
class RunResult:
    state: State
    completed: int
    stuck_at: int | None  # iterations completed when the guard first failed
    writes: list[WriteEvent] = field(default_factory=list)


def step(loop: Loop, s: State, iteration: int = 1, log: list | None = None) -> State | None:
    """One transition: None when the guard fails.  Uses direct cell updates,
    which agree with evaluating the update substitution (read-over-write)."""
    if not eval_formula(loop.guard, s):
        return None
    pending = []
    for pos, (lv, r) in enumerate(zip(loop.lvalues, loop.rhs)):
        point = tuple(eval_expr(i, s) for i in lv.idx)
        value = eval_expr(r, s)
        pending.append((pos, lv.arr, point, value))
    seen = set()
    for _, x, point, _ in pending:
        if (x, point) in seen:
            raise LoopError(f"aliasing update to {x.name}{list(point)}; (Distinct) violated")
        seen.add((x, point))
    updates: dict[Var, object] = {}
    for pos, x, point, value in pending:
        if x.arity == 0:
            updates[x] = value
        else:
            fn = updates.get(x, s[x])
            if not isinstance(fn, FiniteFn):
                raise EvalError(f"{x.name} is not bound to a finite-support function")
            updates[x] = fn.store(point, value)
        if log is not None:
            log.append(WriteEvent(iteration, pos, x, point))
    return s.bind(updates)


def run_n(loop: Loop, s: State, n: int, trace: bool = True) -> RunResult:
    """Iterate step up to n times, reporting where the guard first failed."""
    log: list[WriteEvent] | None = [] if trace else None
    cur = s
    for it in range(1, n + 1):
        nxt = step(loop, cur, iteration=it, log=log)
        if nxt is None:
            return RunResult(cur, it - 1, stuck_at=it - 1, writes=log or [])
        cur = nxt
    return RunResult(cur, n, stuck_at=None, writes=log or [])
