"""Client side of the ground-solver protocol: a subprocess speaking SMT-LIB2
over stdin/stdout.  The bundled solver (``loopacc-smt``) is the default; any
compatible external solver can be used via ``--backend`` / LOOPACC_BACKEND.

Every emitted query is quantifier-free linear integer arithmetic plus arrays
(nested one-dimensional, full-index selects only) and divisibility, encoded as
``(_ divisible k)`` by default or with fresh quotient variables in
``quotient`` mode.  Lambdas must be abstracted away before reaching here.
"""

from __future__ import annotations

import os
import queue
import shlex
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field

from .expr import (
    And, Bin, BoolConst, Const, FiniteFn, Formula, Ite, Lam, Not, Or, Rel,
    Sel, Var, arity_of, fresh_var,
)
from .sexpr import to_text

ENV_BACKEND = "LOOPACC_BACKEND"
DEFAULT_TIMEOUT = 2.0


class BackendError(Exception):
    pass


class EncodingUnsupported(BackendError):
    """Formula outside the backend fragment (e.g. non-constant divisor)."""


def default_command(timeout: float) -> list[str]:
    return [sys.executable, "-m", "loopacc.solver.server", "--timeout", str(timeout)]


def resolve_command(backend: str | None, timeout: float) -> list[str]:
    if backend is None:
        backend = os.environ.get(ENV_BACKEND)
    if backend is None:
        return default_command(timeout)
    return shlex.split(backend)


# ---------------------------------------------------------------------------
# encoding


def smt_symbol(name: str) -> str:
    if name and all(c.isalnum() or c in "~!@$%^&*_+=<>.?/-" for c in name):
        return name
    return "|" + name + "|"


def sort_text(arity: int) -> str:
    return "Int" if arity == 0 else f"(Array Int {sort_text(arity - 1)})"


class Encoder:
    def __init__(self, div_encoding: str = "divisible"):
        if div_encoding not in ("divisible", "quotient"):
            raise ValueError(div_encoding)
        self.div_encoding = div_encoding
        self.extra_decls: list[Var] = []
        self.extra_asserts: list[str] = []

    def term(self, e) -> str:
        if isinstance(e, Const):
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if isinstance(e, Bin):
            if e.op == "div":
                from .simplify import as_int_const

                d = as_int_const(e.right)
                if d is None or d == 0:
                    raise EncodingUnsupported("division by a non-constant")
                # floor(e/d): euclidean div with positive divisor
                if d > 0:
                    return f"(div {self.term(e.left)} {d})"
                return f"(div (- {self.term(e.left)}) {-d})"
            return f"({e.op} {self.term(e.left)} {self.term(e.right)})"
        if isinstance(e, Sel):
            if isinstance(e.arr, Lam):
                raise EncodingUnsupported("lambda in backend query")
            if e.arr.arity == 0:
                return smt_symbol(e.arr.name)
            out = smt_symbol(e.arr.name)
            for i in e.idx:
                out = f"(select {out} {self.term(i)})"
            return out
        if isinstance(e, Ite):
            return f"(ite {self.formula(e.cond)} {self.term(e.then)} {self.term(e.other)})"
        raise EncodingUnsupported(f"term {e!r}")

    def formula(self, f: Formula, negated: bool = False) -> str:
        if isinstance(f, BoolConst):
            return "false" if f.value == negated else "true"
        if isinstance(f, Not):
            return self.formula(f.arg, not negated)
        if isinstance(f, And):
            parts = " ".join(self.formula(a, negated) for a in f.args)
            return f"({'or' if negated else 'and'} {parts})"
        if isinstance(f, Or):
            parts = " ".join(self.formula(a, negated) for a in f.args)
            return f"({'and' if negated else 'or'} {parts})"
        if isinstance(f, Rel):
            return self.atom(f, negated)
        raise EncodingUnsupported(f"formula {f!r}")

    def atom(self, f: Rel, negated: bool) -> str:
        if f.op == "divides":
            from .simplify import as_int_const

            d = as_int_const(f.left)
            if d is None:
                raise EncodingUnsupported("divisibility by a non-constant")
            if d == 0:
                body = f"(= {self.term(f.right)} 0)"
                return f"(not {body})" if negated else body
            if self.div_encoding == "divisible":
                body = f"((_ divisible {abs(d)}) {self.term(f.right)})"
                return f"(not {body})" if negated else body
            # quotient mode: satisfiability-side encoding with fresh variables
            q = fresh_var("q")
            self.extra_decls.append(q)
            if not negated:
                return f"(= {self.term(f.right)} (* {abs(d)} {smt_symbol(q.name)}))"
            r = fresh_var("rm")
            self.extra_decls.append(r)
            self.extra_asserts.append(f"(<= 1 {smt_symbol(r.name)})")
            self.extra_asserts.append(f"(<= {smt_symbol(r.name)} {abs(d) - 1})")
            return (f"(= {self.term(f.right)} (+ (* {abs(d)} {smt_symbol(q.name)})"
                    f" {smt_symbol(r.name)}))")
        ops = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "=": "=", "!=": "distinct"}
        neg = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "distinct", "!=": "="}
        op = neg[f.op] if negated else ops[f.op]
        if f.op in ("=", "!=") and (arity_of(f.left) > 0 or arity_of(f.right) > 0):
            if not (isinstance(f.left, Var) and isinstance(f.right, Var)):
                raise EncodingUnsupported("array literal sides must be variables here")
            return f"({op} {smt_symbol(f.left.name)} {smt_symbol(f.right.name)})"
        return f"({op} {self.term(f.left)} {self.term(f.right)})"


# ---------------------------------------------------------------------------
# model values


@dataclass
class Model:
    scalars: dict[str, int] = field(default_factory=dict)
    arrays: dict[str, FiniteFn] = field(default_factory=dict)

    def value(self, x: Var):
        if x.arity == 0:
            return self.scalars.get(x.name, 0)
        return self.arrays.get(x.name, FiniteFn.const(x.arity, 0))

    def as_state(self, variables) -> "State":
        from .expr import State

        return State({x: self.value(x) for x in variables})


@dataclass
class SatResult:
    status: str  # sat | unsat | unknown
    model: Model | None = None
    diagnostic: str = ""


# ---------------------------------------------------------------------------
# session


class BackendSession:
    """One subprocess per session; push/pop-scoped queries; not thread-safe --
    use one session per thread."""

    def __init__(self, backend: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                 div_encoding: str = "divisible", smt_log: str | None = None):
        self.timeout = timeout
        self.div_encoding = div_encoding
        self.command = resolve_command(backend, timeout)
        self.proc: subprocess.Popen | None = None
        self.declared: dict[str, int] = {}
        self._log = open(smt_log, "a") if smt_log else None
        self._cache: dict = {}
        self._lines: queue.Queue = queue.Queue()

    # -- low-level protocol --

    def _ensure(self):
        if self.proc is None or self.proc.poll() is not None:
            self.proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True,
            )
            self.declared = {}
            self._lines = queue.Queue()
            t = threading.Thread(target=_pump, args=(self.proc.stdout, self._lines), daemon=True)
            t.start()
            self._send("(set-option :produce-models true)")
            self._send("(set-logic ALL)")

    def _send(self, line: str):
        self._ensure()
        if self._log:
            self._log.write(line + "\n")
            self._log.flush()
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except BrokenPipeError as exc:
            raise BackendError(f"backend died: {exc}") from exc

    def _read_line(self, budget: float) -> str:
        deadline = time.monotonic() + budget
        out = ""
        while True:
            remain = deadline - time.monotonic()
            if remain <= 0:
                self.close()
                raise BackendError("backend timed out")
            try:
                ch = self._lines.get(timeout=min(remain, 0.2))
            except queue.Empty:
                continue
            if ch is None:
                raise BackendError("backend closed its output")
            out += ch
            if out.strip() and _balanced(out):
                if self._log:
                    self._log.write("; <- " + out.strip().replace("\n", " ") + "\n")
                    self._log.flush()
                return out.strip()

    def close(self):
        if self.proc is not None:
            try:
                self.proc.kill()
            except OSError:
                pass
            self.proc = None
        if self._log:
            self._log.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- queries --

    def declare(self, variables):
        self._ensure()
        for x in sorted(set(variables), key=lambda v: v.name):
            if x.name in self.declared:
                if self.declared[x.name] != x.arity:
                    raise BackendError(f"{x.name} redeclared with different arity")
                continue
            self.declared[x.name] = x.arity
            self._send(f"(declare-const {smt_symbol(x.name)} {sort_text(x.arity)})")

    def check(self, formulas, want_model: bool = True) -> SatResult:
        """Satisfiability of the conjunction within a fresh push/pop scope.
        Declarations stay in the outer scope so they survive the pop."""
        from .expr import free_vars

        formulas = list(formulas)
        try:
            self._ensure()
            enc = Encoder(self.div_encoding)
            texts = [enc.formula(f) for f in formulas]
            for f in formulas:
                self.declare(free_vars(f))
            self.declare(enc.extra_decls)
            self._send("(push 1)")
            try:
                for t in enc.extra_asserts + texts:
                    self._send(f"(assert {t})")
                self._send("(check-sat)")
                status = self._read_line(self.timeout + 10.0)
                if status == "sat" and want_model:
                    self._send("(get-model)")
                    model = self._parse_model(self._read_line(self.timeout + 10.0))
                    return SatResult("sat", model)
                if status in ("sat", "unsat"):
                    return SatResult(status)
                return SatResult("unknown", diagnostic=status)
            finally:
                if self.proc is not None and self.proc.poll() is None:
                    self._send("(pop 1)")
        except (BackendError, EncodingUnsupported) as exc:
            return SatResult("unknown", diagnostic=str(exc))

    def is_valid(self, f: Formula) -> bool | None:
        """Validity via unsatisfiability of the negation; None when unknown.
        Simplification discharges most queries without a round trip."""
        from .simplify import simplify_formula

        g = simplify_formula(f)
        if g == BoolConst(True):
            return True
        if g == BoolConst(False):
            return False
        key = (to_text(g), "valid")
        if key in self._cache:
            return self._cache[key]
        res = self.check([Not(g)], want_model=False)
        out = {"unsat": True, "sat": False}.get(res.status)
        self._cache[key] = out
        return out

    # -- model parsing --

    def _parse_model(self, text: str) -> Model:
        from .solver.server import parse_forms

        forms = parse_forms(text)
        if len(forms) == 1 and isinstance(forms[0], list):
            forms = forms[0]
        if forms and forms[0] == "model":  # older printers prefix with 'model'
            forms = forms[1:]
        model = Model()
        for form in forms:
            if not (isinstance(form, list) and len(form) >= 5 and form[0] == "define-fun"):
                continue
            name, args, sort, body = form[1], form[2], form[3], form[4]
            if args:
                continue  # not one of ours
            if sort == "Int":
                model.scalars[name] = _int_value(body)
            else:
                arity = _sort_arity(sort)
                model.arrays[name] = _array_value(body, arity)
        return model


def _pump(stream, out: queue.Queue):
    for line in iter(stream.readline, ""):
        out.put(line)
    out.put(None)


def _balanced(text: str) -> bool:
    from .solver.server import balanced

    return balanced(text)


def _sort_arity(sort) -> int:
    if sort == "Int":
        return 0
    if isinstance(sort, list) and len(sort) == 3 and sort[0] == "Array":
        return 1 + _sort_arity(sort[2])
    raise BackendError(f"unsupported sort in model: {sort!r}")


def _int_value(body) -> int:
    if isinstance(body, str):
        return int(body)
    if isinstance(body, list) and len(body) == 2 and body[0] == "-":
        return -_int_value(body[1])
    raise BackendError(f"unsupported integer value: {body!r}")


def _array_value(body, arity: int) -> FiniteFn:
    default, overrides = _array_parts(body, arity)
    return FiniteFn.const(arity, default, overrides)


def _array_parts(body, arity: int):
    if arity == 0:
        return _int_value(body), {}
    if isinstance(body, list) and body and body[0] == "store":
        default, overrides = _array_parts(body[1], arity)
        idx = _int_value(body[2])
        subdefault, sub = _array_parts(body[3], arity - 1)
        overrides = dict(overrides)
        if arity == 1:
            overrides[(idx,)] = subdefault
        else:
            if subdefault != default:
                raise BackendError("nested array with non-uniform default")
            for k, v in sub.items():
                overrides[(idx,) + k] = v
        return default, overrides
    if (isinstance(body, list) and len(body) == 2 and isinstance(body[0], list)
            and body[0][:2] == ["as", "const"]):
        default, _ = _array_parts(body[1], arity - 1)
        return default, {}
    raise BackendError(f"unsupported array value: {body!r}")
