"""Textual syntax: print/parse round trips and parse errors with positions."""

import random

import pytest

from loopacc.expr import And, Lam, Not, Or, Rel, Var
from loopacc.sexpr import ArityEnv, ParseError, parse_expr, parse_formula, read_one, to_text

from test_expr import AR, SC, gen_expr, gen_formula

ENV = ArityEnv({v.name: 0 for v in SC} | {v.name: 1 for v in AR}
               | {f"p{k}": 0 for k in range(3)} | {"n": 0, "j": 0, "c": 0})


def test_round_trip_fuzz():
    rnd = random.Random(5)
    for _ in range(600):
        e = gen_expr(rnd, 3, SC, AR)
        text = to_text(e)
        back = parse_expr(read_one(text), ENV)
        assert back == e, text
    for _ in range(600):
        f = gen_formula(rnd, 3, SC, AR)
        text = to_text(f)
        back = parse_formula(read_one(text), ENV)
        assert back == f, text


def test_lambda_round_trip():
    text = "(lambda (c) (ite (= c (+ i 1)) (select a i) (select a c)))"
    from loopacc.sexpr import parse_array

    lam = parse_array(read_one(text), ENV)
    assert isinstance(lam, Lam)
    assert to_text(lam) == text


def test_implication_desugars():
    f = parse_formula(read_one("(=> (< i k) (<= i k))"), ENV)
    assert isinstance(f, Or) and isinstance(f.args[0], Not)


def test_iff_desugars():
    f = parse_formula(read_one("(<=> true false)"), ENV)
    assert isinstance(f, Or) and all(isinstance(a, And) for a in f.args)


def test_malformed_paren_has_position():
    with pytest.raises(ParseError):
        read_one("(+ i 1))")


def test_undeclared_variable():
    with pytest.raises(ParseError):
        parse_expr(read_one("(+ zz 1)"), ENV)


def test_array_used_without_index():
    with pytest.raises(ParseError):
        parse_expr(read_one("(+ a 1)"), ENV)


def test_select_arity_checked():
    with pytest.raises(ParseError):
        parse_expr(read_one("(select a i k)"), ENV)


def test_array_literal_parses():
    f = parse_formula(read_one("(= a b)"), ENV)
    assert isinstance(f, Rel) and isinstance(f.left, Var) and f.left.arity == 1


def test_comments_ignored():
    f = parse_formula(read_one("; note\n(and true (< i k)) ; trailing"), ENV)
    assert f == parse_formula(read_one("(and true (< i k))"), ENV)
