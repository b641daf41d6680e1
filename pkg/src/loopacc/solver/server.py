"""SMT-LIB2 server over stdin/stdout backed by the bundled ground solver.

Supports the fragment the acceleration pipeline emits: quantifier-free linear
integer arithmetic with ite, floor div by constants, ((_ divisible k) t),
(possibly nested) integer arrays with full-index selects, and array equality
between array constants.  Run as ``loopacc-smt`` or ``python -m
loopacc.solver.server``.
"""

from __future__ import annotations

import argparse
import sys
import time

from ..expr import (
    And, Bin, BoolConst, Const, FiniteFn, Ite, Not, Or, Rel, Sel, State, Var, sv,
)
from .ground import check
from .presburger import SolverTimeout, Unsupported


class SmtError(Exception):
    pass


def tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SmtError("unterminated |symbol|")
            yield ("sym", text[i + 1: j])
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield ("str", text[i + 1: j])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();|"':
                j += 1
            yield text[i:j]
            i = j


def parse_forms(text: str):
    out, stack = [], []
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SmtError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            if isinstance(tok, tuple):
                tok = tok[1] if tok[0] == "sym" else ("str", tok[1])
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise SmtError("unbalanced '('")
    return out


def balanced(text: str) -> bool:
    depth = 0
    in_bar = in_str = False
    for c in text:
        if in_bar:
            in_bar = c != "|"
        elif in_str:
            in_str = c != '"'
        elif c == "|":
            in_bar = True
        elif c == '"':
            in_str = True
        elif c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
    return depth <= 0 and not in_bar and not in_str


def parse_sort(form) -> int:
    """Arity of a sort: Int -> 0, (Array Int S) -> 1 + arity(S)."""
    if form == "Int":
        return 0
    if isinstance(form, list) and len(form) == 3 and form[0] == "Array":
        if form[1] != "Int":
            raise SmtError("array index sort must be Int")
        return 1 + parse_sort(form[2])
    raise SmtError(f"unsupported sort {form!r}")


def sort_text(arity: int) -> str:
    return "Int" if arity == 0 else f"(Array Int {sort_text(arity - 1)})"


class Session:
    def __init__(self, timeout: float | None = None):
        self.decls: dict[str, int] = {}
        self.stack: list[list] = [[]]
        self.model: State | None = None
        self.timeout = timeout
        self.print_success = False

    # -- term parsing ----------------------------------------------------------

    def var(self, name: str) -> Var:
        if name not in self.decls:
            raise SmtError(f"undeclared symbol {name}")
        return Var(name, self.decls[name])

    def parse_term(self, form):
        if isinstance(form, str):
            if form.lstrip("-").isdigit() and form not in ("-",):
                return Const(int(form))
            v = self.var(form)
            if v.arity != 0:
                raise SmtError(f"array {form} used as an integer")
            return sv(v)
        if not form:
            raise SmtError("empty term")
        head = form[0]
        if head == "-" and len(form) == 2:
            return Bin("-", Const(0), self.parse_term(form[1]))
        if head in ("+", "*"):
            args = [self.parse_term(a) for a in form[1:]]
            if not args:
                raise SmtError(f"({head}) needs arguments")
            out = args[0]
            for a in args[1:]:
                out = Bin(head, out, a)
            return out
        if head == "-":
            args = [self.parse_term(a) for a in form[1:]]
            out = args[0]
            for a in args[1:]:
                out = Bin("-", out, a)
            return out
        if head == "div":
            if len(form) != 3:
                raise SmtError("div is binary")
            # SMT-LIB div is euclidean; the client encodes floor division as
            # euclidean div with positive divisor, so plain floor matches here
            return Bin("div", self.parse_term(form[1]), self.parse_term(form[2]))
        if head == "ite":
            return Ite(self.parse_formula(form[1]), self.parse_term(form[2]),
                       self.parse_term(form[3]))
        if head == "select":
            arr, idx = self.parse_select(form)
            if len(idx) != arr.arity:
                raise SmtError("partial array select")
            return Sel(arr, tuple(idx))
        raise SmtError(f"unsupported term {form!r}")

    def parse_select(self, form):
        inner = form[1]
        if isinstance(inner, list) and inner and inner[0] == "select":
            arr, idx = self.parse_select(inner)
        else:
            if not isinstance(inner, str):
                raise SmtError(f"unsupported array term {inner!r}")
            arr, idx = self.var(inner), []
        return arr, idx + [self.parse_term(a) for a in form[2:]]

    def parse_formula(self, form):
        if form == "true":
            return BoolConst(True)
        if form == "false":
            return BoolConst(False)
        if isinstance(form, str):
            raise SmtError(f"boolean variables are not supported: {form}")
        head = form[0]
        if head in ("and", "or"):
            parts = tuple(self.parse_formula(a) for a in form[1:])
            if not parts:
                return BoolConst(head == "and")
            if len(parts) == 1:
                return parts[0]
            return And(parts) if head == "and" else Or(parts)
        if head == "not":
            return Not(self.parse_formula(form[1]))
        if head == "=>":
            parts = [self.parse_formula(a) for a in form[1:]]
            out = parts[-1]
            for a in reversed(parts[:-1]):
                out = Or((Not(a), out))
            return out
        if head in ("<", "<=", ">", ">="):
            if len(form) != 3:
                raise SmtError(f"{head} must be binary")
            return Rel(head, self.parse_term(form[1]), self.parse_term(form[2]))
        if head in ("=", "distinct"):
            op = "=" if head == "=" else "!="
            sides = form[1:]
            if len(sides) != 2:
                raise SmtError(f"{head} must be binary")
            parsed = []
            for s in sides:
                if isinstance(s, str) and s in self.decls and self.decls[s] > 0:
                    parsed.append(self.var(s))
                else:
                    parsed.append(self.parse_term(s))
            a, b = parsed
            if isinstance(a, Var) != isinstance(b, Var):
                raise SmtError("array compared with integer")
            return Rel(op, a, b)
        if isinstance(head, list) and len(head) == 3 and head[0] == "_" and head[1] == "divisible":
            k = int(head[2])
            return Rel("divides", Const(k), self.parse_term(form[1]))
        raise SmtError(f"unsupported formula {form!r}")

    # -- commands ---------------------------------------------------------------

    def asserts(self):
        return [f for frame in self.stack for f in frame]

    def command(self, form) -> str | None:
        head = form[0] if isinstance(form, list) and form else form
        if head in ("set-logic", "set-info"):
            return self._ok()
        if head == "set-option":
            if len(form) >= 3 and form[1] == ":print-success":
                self.print_success = form[2] == "true"
            return self._ok()
        if head == "declare-const":
            name, sort = form[1], form[2]
            self.decls[name] = parse_sort(sort)
            return self._ok()
        if head == "declare-fun":
            name, args, sort = form[1], form[2], form[3]
            if args:
                raise SmtError("only 0-ary declare-fun is supported")
            self.decls[name] = parse_sort(sort)
            return self._ok()
        if head == "assert":
            self.stack[-1].append(self.parse_formula(form[1]))
            return self._ok()
        if head == "push":
            k = int(form[1]) if len(form) > 1 else 1
            for _ in range(k):
                self.stack.append([])
            return self._ok()
        if head == "pop":
            k = int(form[1]) if len(form) > 1 else 1
            for _ in range(k):
                if len(self.stack) == 1:
                    raise SmtError("pop on empty stack")
                self.stack.pop()
            return self._ok()
        if head == "reset":
            self.__init__(self.timeout)
            return self._ok()
        if head == "check-sat":
            return self.check_sat()
        if head == "get-model":
            return self.format_model()
        if head == "get-value":
            return self.get_value(form[1])
        if head == "echo":
            return form[1][1] if isinstance(form[1], tuple) else str(form[1])
        if head == "exit":
            return None
        raise SmtError(f"unsupported command {head!r}")

    def _ok(self):
        return "success" if self.print_success else ""

    def check_sat(self) -> str:
        self.model = None
        declared = {Var(n, a): a for n, a in self.decls.items()}
        deadline = time.monotonic() + self.timeout if self.timeout else None
        try:
            status, model = check(self.asserts(), declared, deadline=deadline)
        except (Unsupported, SolverTimeout):
            return "unknown"
        if status == "sat":
            self.model = model
            return "sat"
        return "unsat"

    def format_model(self) -> str:
        if self.model is None:
            raise SmtError("no model available")
        lines = ["("]
        for name in sorted(self.decls):
            ar = self.decls[name]
            v = Var(name, ar)
            val = self.model.get(v)
            if ar == 0:
                val = 0 if val is None else val
                lines.append(f"  (define-fun {smt_sym(name)} () Int {smt_int(val)})")
            else:
                fn = val if isinstance(val, FiniteFn) else FiniteFn.const(ar, 0)
                lines.append(
                    f"  (define-fun {smt_sym(name)} () {sort_text(ar)} {array_text(fn)})"
                )
        lines.append(")")
        return "\n".join(lines)

    def get_value(self, forms) -> str:
        if self.model is None:
            raise SmtError("no model available")
        from ..expr import eval_expr

        parts = []
        for f in forms:
            term = self.parse_term(f)
            parts.append(f"({term_text(f)} {smt_int(eval_expr(term, self.model))})")
        return "(" + " ".join(parts) + ")"


def smt_int(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def smt_sym(name: str) -> str:
    if all(c.isalnum() or c in "~!@$%^&*_+=<>.?/-" for c in name):
        return name
    return f"|{name}|"


def term_text(form) -> str:
    if isinstance(form, list):
        return "(" + " ".join(term_text(f) for f in form) + ")"
    return str(form)


def array_text(fn: FiniteFn) -> str:
    """Nested (store ... ((as const sort) default) ...) text for a
    constant-background finite function."""
    if any(fn.coeffs):
        raise SmtError("cannot print non-constant array background")
    return _array_text(fn.arity, fn.base, fn.override_map())


def _array_text(arity: int, default: int, overrides: dict) -> str:
    if arity == 0:
        return smt_int(overrides.get((), default))
    base = f"((as const {sort_text(arity)}) {_array_text(arity - 1, default, {})})"
    groups: dict[int, dict] = {}
    for point, v in sorted(overrides.items()):
        groups.setdefault(point[0], {})[point[1:]] = v
    out = base
    for first, rest in sorted(groups.items()):
        out = f"(store {out} {smt_int(first)} {_array_text(arity - 1, default, rest)})"
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="loopacc-smt", description=__doc__)
    ap.add_argument("--timeout", type=float, default=None,
                    help="seconds per check-sat before answering unknown")
    args = ap.parse_args(argv)
    session = Session(timeout=args.timeout)
    buf = ""
    for line in sys.stdin:
        buf += line
        if not balanced(buf):
            continue
        try:
            forms = parse_forms(buf)
        except SmtError as exc:
            print(f'(error "{exc}")', flush=True)
            buf = ""
            continue
        buf = ""
        for form in forms:
            try:
                out = session.command(form)
            except SmtError as exc:
                print(f'(error "{exc}")', flush=True)
                continue
            except Exception as exc:  # never die mid-protocol
                print(f'(error "internal: {exc}")', flush=True)
                continue
            if out is None:
                return 0
            if out:
                print(out, flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
