"""Decision procedure with model search for quantifier-free linear integer
arithmetic with divisibility, based on Cooper's elimination.

Formulas here are NNF tuple trees over linear atoms:

    True / False
    ("and", [f...]) | ("or", [f...])
    ("gt", poly)          poly > 0
    ("div", d, poly)      d | poly, d >= 2
    ("ndiv", d, poly)     d does not divide poly

A poly is a dict mapping variable names to int coefficients, with the constant
term under the key None.  Satisfiability search walks Cooper's candidate
substitutions depth-first instead of materializing the eliminated formula, so
a satisfying assignment falls out of the successful branch; exhausting every
candidate at a level is a proof of unsatisfiability for that subproblem.
"""

from __future__ import annotations

import time
from math import gcd


class Unsupported(Exception):
    """Non-linear or otherwise out-of-fragment input."""


class SolverTimeout(Exception):
    pass


# ---------------------------------------------------------------------------
# polynomials


def padd(p, q, sign=1):
    out = dict(p)
    for k, v in q.items():
        nv = out.get(k, 0) + sign * v
        if nv:
            out[k] = nv
        else:
            out.pop(k, None)
    return out


def pscale(p, k):
    if k == 0:
        return {}
    return {key: v * k for key, v in p.items()}


def pconst(p):
    return p.get(None, 0)


def pvars(p):
    return [k for k in p if k is not None]


def peval(p, m):
    return pconst(p) + sum(c * m[v] for v, c in p.items() if v is not None)


# ---------------------------------------------------------------------------
# formula helpers


def fand(parts):
    out = []
    for f in parts:
        if f is False:
            return False
        if f is True:
            continue
        if isinstance(f, tuple) and f[0] == "and":
            out.extend(f[1])
        else:
            out.append(f)
    if not out:
        return True
    if len(out) == 1:
        return out[0]
    return ("and", out)


def f_or(parts):
    out = []
    for f in parts:
        if f is True:
            return True
        if f is False:
            continue
        if isinstance(f, tuple) and f[0] == "or":
            out.extend(f[1])
        else:
            out.append(f)
    if not out:
        return False
    if len(out) == 1:
        return out[0]
    return ("or", out)


def gt_atom(p):
    vs = pvars(p)
    if not vs:
        return pconst(p) > 0
    g = 0
    for v in vs:
        g = gcd(g, abs(p[v]))
    if g > 1:
        # g*q + c > 0  <=>  q >= ceil((1-c)/g)  <=>  g'*q - ... keep exact: q > floor((-c)/g) ... tighten
        c = pconst(p)
        q = {v: p[v] // g for v in vs}
        # g*q > -c  <=>  q >= floor(-c/g) + 1 = -((c)//g)... use: q > (-c - 1) // g ... careful:
        # g*q >= -c + 1  <=>  q >= ceil((1 - c) / g)
        bound = -((c - 1) // g)  # ceil((1-c)/g)
        q[None] = -bound + 1  # q - bound + 1 > 0  <=>  q >= bound
        if not q[None]:
            del q[None]
        return ("gt", q)
    return ("gt", p)


def div_atom(d, p, neg=False):
    d = abs(d)
    if d == 0:
        # 0 | p  <=>  p = 0
        eq = fand([gt_atom(padd({None: 1}, p)), gt_atom(padd({None: 1}, pscale(p, -1)))])
        return fnot(eq) if neg else eq
    p = {k: v % d for k, v in p.items()}
    p = {k: v for k, v in p.items() if v}
    if d == 1 or not pvars(p):
        ok = pconst(p) % d == 0
        return (not ok) if neg else ok
    return ("ndiv" if neg else "div", d, p)


def fnot(f):
    if f is True:
        return False
    if f is False:
        return True
    tag = f[0]
    if tag == "and":
        return f_or([fnot(x) for x in f[1]])
    if tag == "or":
        return fand([fnot(x) for x in f[1]])
    if tag == "gt":
        # not(p > 0)  <=>  -p >= 0  <=>  -p + 1 > 0
        return gt_atom(padd({None: 1}, pscale(f[1], -1)))
    if tag == "div":
        return div_atom(f[1], f[2], neg=True)
    if tag == "ndiv":
        return div_atom(f[1], f[2])
    raise TypeError(f"bad formula {f!r}")


def feval(f, m) -> bool:
    if f is True or f is False:
        return f
    tag = f[0]
    if tag == "and":
        return all(feval(x, m) for x in f[1])
    if tag == "or":
        return any(feval(x, m) for x in f[1])
    if tag == "gt":
        return peval(f[1], m) > 0
    if tag == "div":
        return peval(f[2], m) % f[1] == 0
    if tag == "ndiv":
        return peval(f[2], m) % f[1] != 0
    raise TypeError(f"bad formula {f!r}")


def fvars(f, out=None):
    if out is None:
        out = set()
    if f is True or f is False:
        return out
    tag = f[0]
    if tag in ("and", "or"):
        for x in f[1]:
            fvars(x, out)
    elif tag == "gt":
        out.update(pvars(f[1]))
    else:
        out.update(pvars(f[2]))
    return out


def subst_var(f, x, p):
    """f[x := p] with renormalization."""
    if f is True or f is False:
        return f
    tag = f[0]
    if tag == "and":
        return fand([subst_var(g, x, p) for g in f[1]])
    if tag == "or":
        return f_or([subst_var(g, x, p) for g in f[1]])
    if tag == "gt":
        q = f[1]
        if x not in q:
            return f
        c = q[x]
        q = {k: v for k, v in q.items() if k != x}
        return gt_atom(padd(q, pscale(p, c)))
    d = f[1]
    q = f[2]
    if x not in q:
        return f
    c = q[x]
    q = {k: v for k, v in q.items() if k != x}
    return div_atom(d, padd(q, pscale(p, c)), neg=(tag == "ndiv"))


def _lcm(a, b):
    return a * b // gcd(a, b)


def _atoms_on(f, x, acc):
    if f is True or f is False:
        return
    tag = f[0]
    if tag in ("and", "or"):
        for g in f[1]:
            _atoms_on(g, x, acc)
    elif tag == "gt":
        if x in f[1]:
            acc.append(("gt", f[1]))
    else:
        if x in f[2]:
            acc.append((tag, f[1], f[2]))


class PresburgerSolver:
    """find_model returns a dict name->int satisfying the formula, or None if
    unsatisfiable.  Complete for the linear fragment; raises Unsupported or
    SolverTimeout otherwise."""

    def __init__(self, deadline: float | None = None, branch_limit: int = 2_000_000):
        self.deadline = deadline
        self.budget = branch_limit

    def _tick(self):
        self.budget -= 1
        if self.budget <= 0:
            raise SolverTimeout("branch budget exhausted")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise SolverTimeout("timeout")

    def find_model(self, f) -> dict | None:
        return self._search(f, sorted(fvars(f)))

    def _pick(self, f, xs):
        # fewest atom occurrences first, then smallest coefficient lcm
        counts = {x: 0 for x in xs}
        lams = {x: 1 for x in xs}

        def walk(g):
            if g is True or g is False:
                return
            tag = g[0]
            if tag in ("and", "or"):
                for h in g[1]:
                    walk(h)
                return
            p = g[1] if tag == "gt" else g[2]
            for v, c in p.items():
                if v in counts:
                    counts[v] += 1
                    lams[v] = _lcm(lams[v], abs(c))

        walk(f)
        return min(xs, key=lambda x: (lams[x] != 1, counts[x], x))

    def _search(self, f, xs) -> dict | None:
        self._tick()
        if f is False:
            return None
        if not xs:
            return {} if f is True or feval(f, {}) else None
        if f is True:
            return {x: 0 for x in xs}
        x = self._pick(f, xs)
        rest = [y for y in xs if y != x]
        if x not in fvars(f):
            m = self._search(f, rest)
            return None if m is None else {**m, x: 0}

        atoms = []
        _atoms_on(f, x, atoms)
        lam = 1
        for a in atoms:
            p = a[1] if a[0] == "gt" else a[2]
            lam = _lcm(lam, abs(p[x]))

        # scale every atom so x's coefficient is +-lam, then read it as xh=lam*x
        def scaled(g):
            if g is True or g is False:
                return g
            tag = g[0]
            if tag in ("and", "or"):
                parts = [scaled(h) for h in g[1]]
                return fand(parts) if tag == "and" else f_or(parts)
            p = g[1] if tag == "gt" else g[2]
            if x not in p:
                return g
            k = lam // abs(p[x])
            if tag == "gt":
                return ("gt", pscale(p, k))
            return (tag, g[1] * k, pscale(p, k))

        fs = scaled(f)
        delta = lam
        for a in _collect_atoms(fs, x):
            if a[0] in ("div", "ndiv"):
                delta = _lcm(delta, a[1])

        lower_terms = []  # xh > -t  for atoms  s*xh + t > 0 with s=+1  (b = -t)
        for a in _collect_atoms(fs, x):
            if a[0] == "gt":
                p = a[1]
                if p[x] > 0:
                    b = pscale({k: v for k, v in p.items() if k != x}, -1)
                    if b not in lower_terms:
                        lower_terms.append(b)

        # candidates: b + j for each lower bound, plus the minus-infinity case
        for j in range(1, delta + 1):
            for b in lower_terms:
                self._tick()
                cand = padd(b, {None: j})
                # fs[xh := cand] where xh has coefficient +-lam: for an atom with
                # s*xh we add s*cand; but xh = lam*x so x = cand/lam must divide.
                g = _subst_xhat(fs, x, cand, lam)
                m = self._search(g, rest)
                if m is not None:
                    xh = peval(cand, m)
                    if xh % lam == 0:
                        m2 = {**m, x: xh // lam}
                        if feval(f, m2):
                            return m2
        # minus infinity: lower-bound atoms false, upper-bound atoms true
        fminf = _minus_inf(fs, x)
        for j in range(1, delta + 1):
            self._tick()
            g = _subst_xhat(fminf, x, {None: j}, lam)
            m = self._search(g, rest)
            if m is not None:
                # concrete xh: strictly below every bound term, congruent to j
                bounds = [peval(b, m) for b in _bound_terms(fs, x)]
                top = (min(bounds) - 1) if bounds else j
                xh = top - ((top - j) % delta)
                if xh % lam == 0:
                    m2 = {**m, x: xh // lam}
                    if feval(f, m2):
                        return m2
        return None


def _collect_atoms(f, x):
    acc = []
    _atoms_on(f, x, acc)
    return acc


def _subst_xhat(f, x, cand, lam):
    """Substitute xh := cand into atoms scaled to coefficient +-lam (xh = lam*x),
    conjoining the lam | xh constraint."""
    def go(g):
        if g is True or g is False:
            return g
        tag = g[0]
        if tag in ("and", "or"):
            parts = [go(h) for h in g[1]]
            return fand(parts) if tag == "and" else f_or(parts)
        p = g[1] if tag == "gt" else g[2]
        if x not in p:
            return g
        s = 1 if p[x] > 0 else -1
        q = {k: v for k, v in p.items() if k != x}
        q = padd(q, pscale(cand, s))
        if tag == "gt":
            return gt_atom(q)
        return div_atom(g[1], q, neg=(tag == "ndiv"))

    body = go(f)
    if lam == 1:
        return body
    return fand([body, div_atom(lam, cand)])


def _minus_inf(f, x):
    def go(g):
        if g is True or g is False:
            return g
        tag = g[0]
        if tag in ("and", "or"):
            parts = [go(h) for h in g[1]]
            return fand(parts) if tag == "and" else f_or(parts)
        if tag == "gt":
            p = g[1]
            if x not in p:
                return g
            return False if p[x] > 0 else True
        return g

    return go(f)


def _bound_terms(f, x):
    """Terms whose values xh must stay strictly below in the minus-infinity
    case: -t for lower bounds xh + t > 0, t for upper bounds -xh + t > 0."""
    out = []
    for a in _collect_atoms(f, x):
        if a[0] == "gt":
            p = a[1]
            t = {k: v for k, v in p.items() if k != x}
            out.append(pscale(t, -1 if p[x] > 0 else 1))
    return out
