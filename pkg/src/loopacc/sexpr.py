"""Textual s-expression syntax for expressions and formulas, used by all CLI
I/O and by the backend protocol layer.

Grammar (EBNF-ish; see README for the full write-up):

    expr    ::= INT | SYMBOL                      ; SYMBOL must be scalar
              | "(" op expr expr ")"              ; op in + - * div
              | "(select" array expr* ")"         ; full index vector
              | "(ite" formula expr expr ")"
    array   ::= SYMBOL | "(lambda" "(" SYMBOL* ")" expr ")"
    formula ::= "true" | "false"
              | "(" relop expr expr ")"           ; relop in < <= > >= =
              | "(distinct" expr expr ")"         ; inequality
              | "(divides" expr expr ")"          ; divisor first
              | "(and" formula* ")" | "(or" formula* ")" | "(not" formula ")"
              | "(=>" formula formula ")" | "(<=>" formula formula ")"

``=>`` and ``<=>`` are parsed as sugar (desugared to not/or/and), so printing
always round-trips.  Parsing requires an arity environment mapping names to
dimensions; lambda parameters shadow it with scalars.
"""

from __future__ import annotations

from .expr import (
    And, ArityMismatch, Bin, BoolConst, Const, ExprError, Formula, Ite, Lam,
    Not, Or, Rel, Sel, Var, conj, disj,
)


class ParseError(ExprError):
    def __init__(self, msg, pos=None):
        super().__init__(f"{msg}" + (f" at offset {pos}" if pos is not None else ""))
        self.pos = pos


# ---------------------------------------------------------------------------
# generic s-expression reader


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
            yield c, i
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            yield text[i:j], i
            i = j


def read_all(text: str) -> list:
    """Parse every top-level form; atoms are str, lists are Python lists."""
    out, stack = [], []
    for tok, pos in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", pos)
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ParseError("unbalanced '('")
    return out


def read_one(text: str):
    forms = read_all(text)
    if len(forms) != 1:
        raise ParseError(f"expected a single form, got {len(forms)}")
    return forms[0]


def _is_int(tok: str) -> bool:
    return tok.lstrip("-").isdigit() and tok not in ("-", "")


# ---------------------------------------------------------------------------
# printing


def to_text(e) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Bin):
        return f"({e.op} {to_text(e.left)} {to_text(e.right)})"
    if isinstance(e, Sel):
        if not e.idx and isinstance(e.arr, Var):
            return e.arr.name
        inner = " ".join(to_text(i) for i in e.idx)
        return f"(select {to_text(e.arr)} {inner})"
    if isinstance(e, Ite):
        return f"(ite {to_text(e.cond)} {to_text(e.then)} {to_text(e.other)})"
    if isinstance(e, Lam):
        params = " ".join(p.name for p in e.params)
        return f"(lambda ({params}) {to_text(e.body)})"
    if isinstance(e, BoolConst):
        return "true" if e.value else "false"
    if isinstance(e, Rel):
        op = {"!=": "distinct"}.get(e.op, e.op)
        return f"({op} {to_text(e.left)} {to_text(e.right)})"
    if isinstance(e, Not):
        return f"(not {to_text(e.arg)})"
    if isinstance(e, And):
        return "(and " + " ".join(to_text(a) for a in e.args) + ")" if e.args else "true"
    if isinstance(e, Or):
        return "(or " + " ".join(to_text(a) for a in e.args) + ")" if e.args else "false"
    raise TypeError(f"not printable: {e!r}")


# ---------------------------------------------------------------------------
# parsing to the AST

_REL = {"<", "<=", ">", ">=", "="}
_ARITH = {"+", "-", "*", "div"}


class ArityEnv:
    """Name -> arity scope chain; lambda parameters shadow outer bindings."""

    def __init__(self, base: dict[str, int] | None = None, parent=None):
        self.base = dict(base or {})
        self.parent = parent

    def lookup(self, name: str) -> int | None:
        if name in self.base:
            return self.base[name]
        if self.parent is not None:
            return self.parent.lookup(name)
        return None

    def child(self, names: dict[str, int]) -> "ArityEnv":
        return ArityEnv(names, self)


def parse_expr(form, env: ArityEnv, nondet_sink=None):
    if isinstance(form, str):
        if _is_int(form):
            return Const(int(form))
        ar = env.lookup(form)
        if ar is None:
            raise ParseError(f"undeclared variable '{form}'")
        if ar != 0:
            raise ParseError(f"array '{form}' used without an index")
        return Sel(Var(form, 0), ())
    if not form:
        raise ParseError("empty form")
    head = form[0]
    if head in _ARITH:
        if len(form) != 3:
            raise ParseError(f"({head} ...) takes two arguments")
        return Bin(head, parse_expr(form[1], env, nondet_sink),
                   parse_expr(form[2], env, nondet_sink))
    if head == "select":
        if len(form) < 2:
            raise ParseError("(select ...) needs an array")
        arr = parse_array(form[1], env, nondet_sink)
        idx = tuple(parse_expr(x, env, nondet_sink) for x in form[2:])
        ar = arr.arity if isinstance(arr, Var) else len(arr.params)
        if len(idx) != ar:
            raise ParseError(f"select on arity-{ar} array with {len(idx)} indices")
        return Sel(arr, idx)
    if head == "ite":
        if len(form) != 4:
            raise ParseError("(ite guard then else)")
        return Ite(parse_formula(form[1], env, nondet_sink),
                   parse_expr(form[2], env, nondet_sink),
                   parse_expr(form[3], env, nondet_sink))
    if head == "nondet":
        if nondet_sink is None:
            raise ParseError("(nondet lo hi) is only allowed in init/post blocks")
        if len(form) != 3:
            raise ParseError("(nondet lo hi)")
        lo = parse_expr(form[1], env, nondet_sink)
        hi = parse_expr(form[2], env, nondet_sink)
        return nondet_sink(lo, hi)
    raise ParseError(f"unknown expression head '{head}'")


def parse_array(form, env: ArityEnv, nondet_sink=None):
    if isinstance(form, str):
        ar = env.lookup(form)
        if ar is None:
            raise ParseError(f"undeclared variable '{form}'")
        return Var(form, ar)
    if form and form[0] == "lambda":
        if len(form) != 3 or not isinstance(form[1], list):
            raise ParseError("(lambda (params...) body)")
        names = []
        for p in form[1]:
            if not isinstance(p, str) or _is_int(p):
                raise ParseError("lambda parameters must be symbols")
            names.append(p)
        if len(set(names)) != len(names):
            raise ParseError("duplicate lambda parameters")
        inner = env.child({p: 0 for p in names})
        body = parse_expr(form[2], inner, nondet_sink)
        return Lam(tuple(Var(p, 0) for p in names), body)
    raise ParseError(f"not an array expression: {form!r}")


def parse_formula(form, env: ArityEnv, nondet_sink=None) -> Formula:
    if form == "true":
        return BoolConst(True)
    if form == "false":
        return BoolConst(False)
    if isinstance(form, str):
        raise ParseError(f"expected a formula, got atom '{form}'")
    if not form:
        raise ParseError("empty formula")
    head = form[0]
    if head in _REL or head == "distinct":
        if len(form) != 3:
            raise ParseError(f"({head} ...) takes two arguments")
        op = "!=" if head == "distinct" else head
        # array literal when both sides are array expressions of arity > 0
        def _side_arity(side):
            if isinstance(side, str) and not _is_int(side):
                a = env.lookup(side)
                return a if a is not None else 0
            if isinstance(side, list) and side and side[0] == "lambda":
                return len(side[1])
            return 0

        if op in ("=", "!=") and (_side_arity(form[1]) > 0 or _side_arity(form[2]) > 0):
            l = parse_array(form[1], env, nondet_sink)
            r = parse_array(form[2], env, nondet_sink)
            la = l.arity if isinstance(l, Var) else len(l.params)
            ra = r.arity if isinstance(r, Var) else len(r.params)
            if la != ra:
                raise ArityMismatch(f"array literal with arities {la} and {ra}")
            return Rel(op, l, r)
        return Rel(op, parse_expr(form[1], env, nondet_sink),
                   parse_expr(form[2], env, nondet_sink))
    if head == "divides":
        if len(form) != 3:
            raise ParseError("(divides d e)")
        return Rel("divides", parse_expr(form[1], env, nondet_sink),
                   parse_expr(form[2], env, nondet_sink))
    if head == "and":
        return conj(parse_formula(a, env, nondet_sink) for a in form[1:])
    if head == "or":
        return disj(parse_formula(a, env, nondet_sink) for a in form[1:])
    if head == "not":
        if len(form) != 2:
            raise ParseError("(not f)")
        return Not(parse_formula(form[1], env, nondet_sink))
    if head == "=>":
        if len(form) != 3:
            raise ParseError("(=> f g)")
        return Or((Not(parse_formula(form[1], env, nondet_sink)),
                   parse_formula(form[2], env, nondet_sink)))
    if head == "<=>":
        if len(form) != 3:
            raise ParseError("(<=> f g)")
        a = parse_formula(form[1], env, nondet_sink)
        b = parse_formula(form[2], env, nondet_sink)
        return Or((And((a, b)), And((Not(a), Not(b)))))
    raise ParseError(f"unknown formula head '{head}'")
