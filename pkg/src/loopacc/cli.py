"""Command-line front end.

    loopacc classify FILE
    loopacc closed-form FILE [--array X] [--show-rec] [--check n=K]
    loopacc accelerate FILE
    loopacc check FILE [--backend CMD] [--timeout S] [--smt-log F]
    loopacc oracle [FILE | --fuzz K] [--n-max M] [--seed S]

`check` prints unsafe / safe-bounded / unknown with exit codes 0 / 1 / 2.
Every command accepts --json for a machine-readable report (schema 1).  The
backend defaults to the bundled solver; --backend or LOOPACC_BACKEND selects
an external SMT-LIB2 solver command.
"""

from __future__ import annotations

import argparse
import json
import sys

from .accel import accelerate, encode_reachability
from .arrayform import ArrayFormError, closed_form_array
from .backend import BackendSession, DEFAULT_TIMEOUT
from .classify import check_a_solvable
from .closedform import Failure, closed_forms_all
from .gen import GenConfig, gen_loop
from .lamsolve import finite_fn_expr, solve, verify_model
from .loop import build_up, validate_loop
from .oracle import check_loop
from .problem import parse_problem
from .sexpr import ParseError, to_text

SCHEMA = 1


def _session(args) -> BackendSession:
    return BackendSession(backend=getattr(args, "backend", None),
                          timeout=getattr(args, "timeout", DEFAULT_TIMEOUT),
                          smt_log=getattr(args, "smt_log", None))


def _emit(args, human: str, payload: dict) -> None:
    if args.json:
        payload["schema"] = SCHEMA
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(human)


def cmd_classify(args) -> int:
    pf = parse_problem(args.file)
    with _session(args) as ses:
        val = validate_loop(pf.loop, ses)
        verdict = check_a_solvable(pf.loop, ses)
    rows = []
    for lv in verdict.closure:
        c = verdict.labels.get(lv)
        rows.append((to_text(lv), c.label.value if c else "-", c.justification if c else ""))
    width = max((len(r[0]) for r in rows), default=6)
    lines = [f"distinct: {'ok' if val.ok else ('inconclusive' if val.inconclusive else 'violated')}"]
    lines.append(f"a-solvable: {'yes' if verdict.a_solvable else 'no'}"
                 + (f"  ({verdict.reason})" if verdict.reason else ""))
    lines.append(f"{'lvalue'.ljust(width)}  {'class'.ljust(12)}  justification")
    for name, label, just in rows:
        lines.append(f"{name.ljust(width)}  {label.ljust(12)}  {just}")
    if verdict.rhs_tags:
        lines.append("rhs conditions: " + " ".join(
            f"r_{i + 1}:({t})" for i, t in enumerate(verdict.rhs_tags)))
    payload = {
        "distinct": val.ok,
        "a_solvable": verdict.a_solvable,
        "reason": verdict.reason,
        "monotonicity": {x.name: m.value for x, m in verdict.monotone.items()},
        "lvalues": [{"lvalue": a, "class": b, "justification": c} for a, b, c in rows],
        "rhs_tags": verdict.rhs_tags,
    }
    _emit(args, "\n".join(lines), payload)
    return 0 if verdict.a_solvable else 1


def cmd_closed_form(args) -> int:
    pf = parse_problem(args.file)
    with _session(args) as ses:
        forms = closed_forms_all(pf.loop, ses)
        if isinstance(forms, Failure):
            _emit(args, f"failure({forms.phase}): {forms.detail}",
                  {"ok": False, "phase": forms.phase, "detail": forms.detail})
            return 1
        up = build_up(pf.loop)
        lines = []
        payload: dict = {"ok": True, "lvalues": {}, "arrays": {}}
        if args.show_rec:
            lines.append("rec system:")
            for r, e in forms.system:
                lv = forms.system.sigma.lvalue(r)
                lines.append(f"  rec[{to_text(lv)}]' = {to_text(e)}")
            lines.append("solution:")
            payload["rec"] = {}
            for lv, r in forms.system.sigma.pairs:
                th = forms.solution.of(r)
                lines.append(f"  theta(rec[{to_text(lv)}]) = {to_text(th)}")
                payload["rec"][to_text(lv)] = to_text(th)
        lines.append("closed forms (lvalues):")
        for lv, e in forms.table.items():
            lines.append(f"  {to_text(lv)} -> {to_text(e)}")
            payload["lvalues"][to_text(lv)] = to_text(e)
        targets = []
        if args.array:
            targets = [x for x in pf.loop.variables() if x.name == args.array]
            if not targets:
                print(f"unknown array '{args.array}'", file=sys.stderr)
                return 2
        else:
            targets = sorted((x for x in pf.loop.written_vars() if x.arity > 0),
                             key=lambda v: v.name)
        for x in targets:
            try:
                lam = closed_form_array(pf.loop, x, forms.table, up)
            except ArrayFormError as exc:
                _emit(args, f"failure(array-closed-form): {exc}",
                      {"ok": False, "phase": "array-closed-form", "detail": str(exc)})
                return 1
            lines.append(f"{x.name}^(n) = {to_text(lam)}")
            payload["arrays"][x.name] = to_text(lam)
        if args.check is not None:
            n_max = int(args.check.split("=", 1)[1]) if "=" in args.check else int(args.check)
            rep = check_loop(pf.loop, loop_id=str(args.file), seeds=10, n_max=n_max, session=ses)
            lines.append(f"oracle check (n<={n_max}): "
                         + ("ok" if rep.ok else f"{len(rep.mismatches)} mismatches"))
            payload["oracle"] = rep.to_json()
            if not rep.ok:
                _emit(args, "\n".join(lines), payload)
                return 1
    _emit(args, "\n".join(lines), payload)
    return 0


def cmd_accelerate(args) -> int:
    pf = parse_problem(args.file)
    with _session(args) as ses:
        t = accelerate(pf.loop, ses)
    if isinstance(t, Failure):
        _emit(args, f"failure({t.phase}): {t.detail}",
              {"ok": False, "phase": t.phase, "detail": t.detail})
        return 1
    human = to_text(t.formula)
    payload = {"ok": True, "formula": human,
               "closed_forms": {x.name: to_text(e) for x, e in t.closed_forms.items()},
               "guard": to_text(t.guard_formula)}
    _emit(args, human, payload)
    return 0


def cmd_check(args) -> int:
    pf = parse_problem(args.file)
    if pf.post is None:
        print("check needs a (post ...) block naming the reachability target",
              file=sys.stderr)
        return 2
    with _session(args) as ses:
        t = accelerate(pf.loop, ses)
        if isinstance(t, Failure):
            _emit(args, f"unknown ({t.phase}: {t.detail})",
                  {"result": "unknown", "phase": t.phase, "detail": t.detail})
            return 2
        lits = encode_reachability(pf.init, t, pf.post)
        res = solve(lits, ses)
        if res.status == "model":
            model = res.model
            witness = {k: v for k, v in sorted(model.scalars.items())
                       if not k.startswith(("arr!", "i*"))}
            arrays = {k: to_text(finite_fn_expr(v)) for k, v in sorted(model.arrays.items())}
            derived = {k: (to_text(v) if not isinstance(v, int) else v)
                       for k, v in sorted(model.derived.items())}
            verified = verify_model(model, lits, ses)
            human = "unsafe\n" + "\n".join(f"  {k} = {v}" for k, v in witness.items())
            _emit(args, human, {"result": "unsafe", "witness": witness,
                                "arrays": arrays, "derived": derived,
                                "reverified": verified, "lemmas": res.lemmas})
            return 0
        if res.status == "unsat":
            _emit(args, "safe-bounded", {"result": "safe-bounded", "lemmas": res.lemmas})
            return 1
        _emit(args, f"unknown ({res.diagnostic})",
              {"result": "unknown", "detail": res.diagnostic, "lemmas": res.lemmas})
        return 2


def cmd_oracle(args) -> int:
    reports = []
    with _session(args) as ses:
        if args.fuzz:
            cfg = GenConfig(scalars_only=args.scalars_only,
                            force_dim=args.dim)
            for k in range(args.fuzz):
                g = gen_loop(args.seed + k, cfg)
                reports.append(check_loop(g.loop, loop_id=f"gen[{args.seed + k}]",
                                          seeds=args.states, n_max=args.n_max,
                                          session=ses, seed0=args.seed))
        else:
            if not args.file:
                print("oracle needs FILE or --fuzz K", file=sys.stderr)
                return 2
            pf = parse_problem(args.file)
            reports.append(check_loop(pf.loop, loop_id=str(args.file),
                                      seeds=args.states, n_max=args.n_max,
                                      session=ses, seed0=args.seed))
    bad = [r for r in reports if not r.ok]
    lines = []
    for r in reports:
        status = "ok" if r.ok else (f"failure({r.failure.phase})" if r.failure
                                    else f"{len(r.mismatches)} mismatches")
        lines.append(f"{r.loop_id}: {status}  [{r.checked} checks, {r.elapsed:.2f}s]")
    lines.append(f"total: {len(reports) - len(bad)}/{len(reports)} ok")
    _emit(args, "\n".join(lines),
          {"reports": [r.to_json() for r in reports], "ok": not bad})
    return 0 if not bad else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loopacc", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_file=True):
        if needs_file:
            p.add_argument("file", help="problem file (s-expression syntax)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--backend", default=None,
                       help="external SMT-LIB2 solver command (default: bundled)")
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                       help="seconds per backend query")
        p.add_argument("--smt-log", default=None, help="dump the SMT dialogue to a file")

    p = sub.add_parser("classify", help="lvalue classes and a-solvability")
    common(p)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("closed-form", help="closed forms for lvalues and arrays")
    common(p)
    p.add_argument("--array", default=None, help="emit the lambda for one array")
    p.add_argument("--show-rec", action="store_true", help="print the recurrence system")
    p.add_argument("--check", default=None, metavar="n=K",
                   help="compare against the interpreter up to n=K")
    p.set_defaults(fn=cmd_closed_form)

    p = sub.add_parser("accelerate", help="emit the accelerated transition")
    common(p)
    p.set_defaults(fn=cmd_accelerate)

    p = sub.add_parser("check", help="reachability: unsafe / safe-bounded / unknown")
    common(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("oracle", help="differential testing against the interpreter")
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--backend", default=None)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    p.add_argument("--smt-log", default=None)
    p.add_argument("--fuzz", type=int, default=0, metavar="K",
                   help="generate and test K random a-solvable loops")
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=10, help="random states per loop")
    p.add_argument("--scalars-only", action="store_true")
    p.add_argument("--dim", type=int, default=None, help="force array dimension")
    p.set_defaults(fn=cmd_oracle)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
