"""Problem files and the command-line front end."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from loopacc.expr import Rel, Var, sv
from loopacc.problem import parse_problem
from loopacc.sexpr import ParseError, to_text

EXAMPLES = Path(__file__).resolve().parent.parent / "examples_problems"

SWAP_TEXT = """
(declare (i 0) (k 0) (a 1))
(loop
  (guard (< i k))
  (update
    ((lhs i) (rhs (+ i 1)))
    ((lhs (select a (+ i 1))) (rhs (select a i)))
    ((lhs (select a i)) (rhs (select a (+ i 1))))))
"""


class TestParseProblem:
    def test_swap_structure(self):
        pf = parse_problem(SWAP_TEXT, is_path=False)
        assert pf.declarations == {"i": 0, "k": 0, "a": 1}
        assert len(pf.loop.lvalues) == 3
        assert pf.loop.guard == Rel("<", sv(Var("i")), sv(Var("k")))

    def test_round_trip_via_printer(self):
        pf = parse_problem(SWAP_TEXT, is_path=False)
        for lv, r in zip(pf.loop.lvalues, pf.loop.rhs):
            from loopacc.sexpr import ArityEnv, parse_expr, read_one

            env = pf.env()
            assert parse_expr(read_one(to_text(lv)), env) == lv
            assert parse_expr(read_one(to_text(r)), env) == r

    def test_malformed_paren(self):
        with pytest.raises(ParseError):
            parse_problem("(declare (i 0)", is_path=False)

    def test_guard_disjunction_rejected(self):
        bad = """(declare (i 0))
        (loop (guard (or (< i 3) (> i 5))) (update ((lhs i) (rhs (+ i 1)))))"""
        with pytest.raises(ParseError):
            parse_problem(bad, is_path=False)

    def test_guard_divisibility_rejected(self):
        bad = """(declare (i 0))
        (loop (guard (divides 2 i)) (update ((lhs i) (rhs (+ i 1)))))"""
        with pytest.raises(ParseError):
            parse_problem(bad, is_path=False)

    def test_reserved_n_rejected(self):
        with pytest.raises(ParseError):
            parse_problem("(declare (n 0)) (loop (guard (< n 3)) (update ((lhs n) (rhs n))))",
                          is_path=False)

    def test_undeclared_variable_rejected(self):
        bad = "(declare (i 0)) (loop (guard (< i z)) (update ((lhs i) (rhs i))))"
        with pytest.raises(ParseError):
            parse_problem(bad, is_path=False)

    def test_lambda_rhs_rejected(self):
        bad = """(declare (i 0) (a 1))
        (loop (guard (< i 3))
          (update ((lhs i) (rhs (select (lambda (c) c) i)))))"""
        with pytest.raises(ParseError):
            parse_problem(bad, is_path=False)

    def test_nondet_hoisting(self):
        text = """(declare (i 0) (k 0))
        (init (= i (nondet 0 k)))
        (loop (guard (< i k)) (update ((lhs i) (rhs (+ i 1)))))"""
        pf = parse_problem(text, is_path=False)
        assert len(pf.nondets) == 1
        nd = pf.nondets[0]
        assert pf.declarations[nd.name] == 0
        assert len(pf.init) == 3  # range conjuncts + the equation

    def test_nondet_outside_init_post_rejected(self):
        bad = """(declare (i 0))
        (loop (guard (< i 3)) (update ((lhs i) (rhs (nondet 0 3)))))"""
        with pytest.raises(ParseError):
            parse_problem(bad, is_path=False)


def run_cli(*argv) -> tuple[int, str]:
    proc = subprocess.run([sys.executable, "-m", "loopacc.cli", *argv],
                          capture_output=True, text=True, timeout=120)
    return proc.returncode, proc.stdout


class TestCli:
    def test_classify_swap(self):
        code, out = run_cli("classify", str(EXAMPLES / "swap.loop"))
        assert code == 0
        assert "a-solvable: yes" in out
        assert "displacing" in out and "inductive" in out

    def test_classify_json(self):
        code, out = run_cli("classify", str(EXAMPLES / "swap.loop"), "--json")
        data = json.loads(out)
        assert data["schema"] == 1 and data["a_solvable"] is True
        assert data["rhs_tags"] == ["a", "a", "b"]

    def test_closed_form_array_flag(self):
        code, out = run_cli("closed-form", str(EXAMPLES / "swap.loop"), "--array", "a")
        assert code == 0 and "a^(n) = (lambda" in out

    def test_closed_form_check_flag(self):
        code, out = run_cli("closed-form", str(EXAMPLES / "swap.loop"), "--check", "n=5")
        assert code == 0 and "oracle check" in out and "ok" in out

    def test_accelerate_decrement(self):
        code, out = run_cli("accelerate", str(EXAMPLES / "decrement.loop"), "--json")
        data = json.loads(out)
        assert code == 0
        assert data["formula"].startswith("(and (> n 0)")

    def test_check_exit_codes(self):
        code, out = run_cli("check", str(EXAMPLES / "overview.loop"))
        assert code == 0 and out.startswith("unsafe")
        code, out = run_cli("check", str(EXAMPLES / "hoare13.loop"))
        assert code == 1 and out.strip() == "safe-bounded"
        code, out = run_cli("check", str(EXAMPLES / "mixing.loop"))
        assert code == 2 and out.startswith("unknown")

    def test_check_json_witness_reverified(self):
        code, out = run_cli("check", str(EXAMPLES / "overview.loop"), "--json")
        data = json.loads(out)
        assert data["result"] == "unsafe"
        assert data["reverified"] is True
        assert data["witness"]["n"] == 10000

    def test_oracle_fixed_seed_deterministic(self):
        code1, out1 = run_cli("oracle", "--fuzz", "3", "--seed", "11", "--json")
        code2, out2 = run_cli("oracle", "--fuzz", "3", "--seed", "11", "--json")
        assert code1 == code2 == 0
        d1, d2 = json.loads(out1), json.loads(out2)
        assert [r["checked"] for r in d1["reports"]] == [r["checked"] for r in d2["reports"]]

    def test_oracle_file_mode(self):
        code, out = run_cli("oracle", str(EXAMPLES / "swap.loop"), "--n-max", "5")
        assert code == 0 and "1/1 ok" in out

    def test_parse_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.loop"
        bad.write_text("(declare (i 0)")
        code, _ = run_cli("classify", str(bad))
        assert code == 2

    def test_check_requires_post_block(self):
        code, out = run_cli("check", str(EXAMPLES / "decrement.loop"))
        assert code == 2

    def test_two_dim_closed_form(self):
        code, out = run_cli("closed-form", str(EXAMPLES / "twodim.loop"), "--array", "m")
        assert code == 0
        assert "m^(n) = (lambda (c0" in out
        assert "divides 2" in out  # stride-2 dimension needs divisibility

    def test_decreasing_loop_check(self):
        code, out = run_cli("check", str(EXAMPLES / "countdown.loop"))
        assert code == 1 and out.strip() == "safe-bounded"

    def test_oracle_two_dim_file(self):
        code, out = run_cli("oracle", str(EXAMPLES / "twodim.loop"), "--n-max", "6")
        assert code == 0 and "1/1 ok" in out
