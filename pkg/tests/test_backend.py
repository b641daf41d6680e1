"""Ground solver and protocol layer: Cooper search against brute-force
enumeration, array reasoning, the SMT-LIB server loop, and model parsing."""

import itertools
import random
import subprocess
import sys

import pytest

from loopacc.backend import BackendSession
from loopacc.expr import (
    And, Bin, Const, Ite, Not, Or, Rel, Sel, State, Var, eval_formula, sv,
)
from loopacc.solver.ground import check
from loopacc.solver.presburger import Unsupported


def _rand_poly(rnd, xs):
    e = Const(rnd.randint(-4, 4))
    for x in xs:
        c = rnd.randint(-3, 3)
        if c:
            e = Bin("+", e, Bin("*", Const(c), sv(x)))
    return e


def _rand_formula(rnd, xs, depth):
    if depth == 0 or rnd.random() < 0.45:
        if rnd.random() < 0.2:
            return Rel("divides", Const(rnd.choice([2, 3, 4])), _rand_poly(rnd, xs))
        op = rnd.choice(["<", "<=", ">", ">=", "=", "!="])
        return Rel(op, _rand_poly(rnd, xs), _rand_poly(rnd, xs))
    roll = rnd.random()
    if roll < 0.3:
        return Not(_rand_formula(rnd, xs, depth - 1))
    parts = tuple(_rand_formula(rnd, xs, depth - 1) for _ in range(2))
    return And(parts) if roll < 0.65 else Or(parts)


def test_cooper_vs_enumeration():
    # variables bounded by explicit range conjuncts, so enumeration is complete
    rnd = random.Random(3)
    B = 4
    xs = [Var("x"), Var("y"), Var("z")]
    for trial in range(250):
        k = rnd.randint(1, 3)
        vs = xs[:k]
        f = _rand_formula(rnd, vs, 2)
        ranges = [Rel(">=", sv(x), Const(-B)) for x in vs] + \
                 [Rel("<=", sv(x), Const(B)) for x in vs]
        status, model = check([f] + ranges, {x: 0 for x in vs})
        enum_sat = False
        for point in itertools.product(range(-B, B + 1), repeat=k):
            s = State(dict(zip(vs, point)))
            if eval_formula(f, s):
                enum_sat = True
                break
        assert (status == "sat") == enum_sat, f"trial {trial}: {f}"
        if status == "sat":
            assert eval_formula(f, model)


def test_cooper_unbounded_models():
    x, y = Var("x"), Var("y")
    status, m = check([Rel(">", sv(x), Const(100000)),
                       Rel("divides", Const(7), sv(x)),
                       Rel("=", sv(y), Bin("*", Const(3), sv(x)))], {x: 0, y: 0})
    assert status == "sat"
    assert m[x] > 100000 and m[x] % 7 == 0 and m[y] == 3 * m[x]


def test_nonlinear_is_unsupported():
    x, y = Var("x"), Var("y")
    with pytest.raises(Unsupported):
        check([Rel("=", Bin("*", sv(x), sv(y)), Const(6))], {x: 0, y: 0})


def test_array_congruence():
    a = Var("a", 1)
    i, j = Var("i"), Var("j")
    status, _ = check([
        Rel("=", sv(i), sv(j)),
        Rel("!=", Sel(a, (sv(i),)), Sel(a, (sv(j),))),
    ], {a: 1, i: 0, j: 0})
    assert status == "unsat"


def test_array_equality_chain():
    a, b, c = Var("a", 1), Var("b", 1), Var("c", 1)
    status, _ = check([
        Rel("=", a, b), Rel("=", b, c),
        Rel("=", Sel(a, (Const(0),)), Const(1)),
        Rel("=", Sel(c, (Const(0),)), Const(2)),
    ], {a: 1, b: 1, c: 1})
    assert status == "unsat"


def test_array_disequality_realized():
    a, b = Var("a", 1), Var("b", 1)
    status, m = check([Rel("!=", a, b)], {a: 1, b: 1})
    assert status == "sat"
    assert not m[a].same_function(m[b])


def test_ite_and_div_terms():
    x, v = Var("x"), Var("v")
    status, m = check([
        Rel("=", sv(v), Ite(Rel(">", sv(x), Const(0)), Bin("div", sv(x), Const(2)), Const(-1))),
        Rel("=", sv(x), Const(9)),
    ], {x: 0, v: 0})
    assert status == "sat" and m[v] == 4


class TestServerProtocol:
    def run_script(self, script: str) -> list[str]:
        out = subprocess.run([sys.executable, "-m", "loopacc.solver.server"],
                             input=script, capture_output=True, text=True, timeout=60)
        return [l for l in out.stdout.splitlines() if l.strip()]

    def test_push_pop(self):
        lines = self.run_script(
            "(declare-const x Int)(assert (> x 0))(check-sat)"
            "(push 1)(assert (< x 0))(check-sat)(pop 1)(check-sat)(exit)")
        assert lines == ["sat", "unsat", "sat"]

    def test_divisible_and_model(self):
        lines = self.run_script(
            "(declare-const x Int)(assert ((_ divisible 4) x))(assert (> x 5))"
            "(check-sat)(get-value (x))(exit)")
        assert lines[0] == "sat"
        val = int(lines[1].strip("()").split()[1])
        assert val % 4 == 0 and val > 5

    def test_error_recovery(self):
        lines = self.run_script("(frobnicate)(declare-const x Int)(check-sat)(exit)")
        assert lines[0].startswith("(error")
        assert lines[-1] == "sat"

    def test_quoted_symbols(self):
        lines = self.run_script(
            "(declare-const |i'| Int)(assert (= |i'| 3))(check-sat)(get-model)(exit)")
        assert lines[0] == "sat"
        assert any("i'" in l and "3" in l for l in lines)


class TestBackendSession:
    def test_validity_cache_and_check(self, session):
        i, k = Var("i"), Var("k")
        f = Or((Not(Rel("<", sv(i), sv(k))), Rel("<=", sv(i), Bin("-", sv(k), Const(1)))))
        assert session.is_valid(f) is True
        assert session.is_valid(f) is True  # cached path
        assert session.is_valid(Rel("<", sv(i), sv(k))) is False

    def test_model_arrays_2dim(self, session):
        m2 = Var("m", 2)
        r = session.check([Rel("=", Sel(m2, (Const(1), Const(2))), Const(5)),
                           Rel("=", Sel(m2, (Const(1), Const(3))), Const(7))])
        assert r.status == "sat"
        fn = r.model.arrays["m"]
        assert fn((1, 2)) == 5 and fn((1, 3)) == 7

    def test_unknown_on_nonlinear(self, session):
        x, y = Var("x"), Var("y")
        r = session.check([Rel("=", Bin("*", sv(x), sv(y)), Const(6))])
        assert r.status == "unknown"

    def test_timeout_recovery(self):
        # a dead backend must surface as unknown, and the session must recover
        with BackendSession(timeout=2.0) as s:
            i = Var("i")
            assert s.check([Rel("=", sv(i), Const(1))]).status == "sat"
            s.proc.kill()
            r = s.check([Rel("=", sv(i), Const(2))])
            assert r.status in ("sat", "unknown")  # restarted or reported


def test_smt_log_written(tmp_path):
    log = tmp_path / "dialogue.smt2"
    with BackendSession(timeout=5.0, smt_log=str(log)) as s:
        s.check([Rel("=", sv(Var("x")), Const(3))])
    text = log.read_text()
    assert "(check-sat)" in text and "(declare-const x Int)" in text
    assert "; <- sat" in text


def test_quotient_mode_validity():
    # divisibility through the fresh-quotient encoding, both polarities on the
    # negated (satisfiability) side of validity queries
    from loopacc.expr import Or

    with BackendSession(timeout=5.0, div_encoding="quotient") as s:
        x = Var("x")
        f = Or((Not(Rel("divides", Const(2), sv(x))),
                Rel("divides", Const(2), Bin("*", Const(3), sv(x)))))
        assert s.is_valid(f) is True  # 2 | x implies 2 | 3x
        g = Or((Not(Rel("divides", Const(4), sv(x))),
                Rel("divides", Const(8), sv(x))))
        assert s.is_valid(g) is False  # x = 4 is a counterexample


def test_model_parse_store_chain():
    text = ("((define-fun x () Int (- 7))")
    text += "(define-fun a () (Array Int Int) (store ((as const (Array Int Int)) 1) 2 9)))"
    s = BackendSession()
    m = s._parse_model(text)
    assert m.scalars["x"] == -7
    assert m.arrays["a"]((2,)) == 9 and m.arrays["a"]((5,)) == 1
