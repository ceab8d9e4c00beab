"""Exact symbolic scalars.

Expressions are plain sympy objects.  This module adds what the rest of the
package needs on top: a canonical normal form, formal function symbols whose
derivatives are again named formal symbols (with optional rewrite rules such as
a field equation), fraction-free linear solving with inconsistency witnesses,
and a small infix parser for problem files.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import sympy as sp

Expr = sp.Expr

__all__ = [
    "Expr", "var", "vars_", "declared", "normalize", "is_zero", "equal",
    "differentiate", "evaluate", "lambdify", "FunctionSymbol",
    "AffineSolution", "solve_linear", "NonAffine", "Inconsistent",
    "UnknownVariable", "ParseError", "parse", "irreducible_factors",
]


class UnknownVariable(KeyError):
    pass


class NonAffine(ValueError):
    def __init__(self, constraint, unknown):
        super().__init__(f"constraint is not affine in {unknown}: {constraint}")
        self.constraint = constraint
        self.unknown = unknown


class Inconsistent(ValueError):
    """Raised by solve_linear.

    ``conditions`` lists every expression that must vanish for the system to be
    solvable; ``witness`` maps constraint positions to multipliers whose
    combination eliminates all unknowns and leaves ``conditions[0]``.
    """

    def __init__(self, conditions, witness):
        super().__init__(f"inconsistent linear system, requires {conditions[0]} = 0")
        self.conditions = conditions
        self.witness = witness


_declared: set[str] = set()


def var(name: str) -> sp.Symbol:
    _declared.add(name)
    return sp.Symbol(name)


def vars_(names: Iterable[str]) -> list[sp.Symbol]:
    return [var(n) for n in names]


def declared(name: str) -> bool:
    return name in _declared


# --------------------------------------------------------------------------
# formal functions

class FunctionSymbol:
    """A formal function of ``arity`` arguments.

    Applying it gives an opaque sympy atom.  Its partial derivatives are new
    formal atoms keyed by the sorted multiset of differentiated slots, so mixed
    partials commute by construction.  Rewrite rules express a derivative as a
    linear combination of other derivatives and are applied during
    normalization until nothing matches.
    """

    def __init__(self, name: str, arity: int = 1):
        self.name = name
        self.arity = arity
        self.rules: list[tuple[tuple[int, ...], dict[tuple[int, ...], Expr]]] = []
        self._classes: dict[tuple[int, ...], type] = {}

    def __repr__(self):
        return f"FunctionSymbol({self.name!r}, {self.arity})"

    def _cls(self, orders: tuple[int, ...]):
        orders = tuple(sorted(orders))
        cls = self._classes.get(orders)
        if cls is None:
            owner = self
            label = self.name if not orders else f"{self.name}_{''.join(map(str, orders))}"

            def fdiff(obj, argindex=1):
                return owner._cls(orders + (argindex,))(*obj.args)

            cls = type(label, (sp.Function,), {
                "nargs": self.arity, "fdiff": fdiff,
                "_formal": self, "_orders": orders,
            })
            self._classes[orders] = cls
        return cls

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self.name} takes {self.arity} arguments")
        return self._cls(())(*map(sp.sympify, args))

    def derivative(self, orders: Sequence[int], *args):
        """The formal partial derivative in the (1-based) slots ``orders``."""
        return self._cls(tuple(orders))(*map(sp.sympify, args))

    def add_rule(self, orders: Sequence[int], replacement: Mapping[Sequence[int], Expr]):
        """Register ``D_orders f = sum c * D_o f``.

        Coefficients must not depend on the arguments.  Any derivative whose
        slot multiset contains ``orders`` is rewritten, the surplus slots being
        carried over to every term on the right.
        """
        orders = tuple(sorted(orders))
        rep = {tuple(sorted(o)): sp.sympify(c) for o, c in replacement.items()}
        for o in rep:
            if _contains(o, orders) and len(o) >= len(orders):
                raise ValueError("rule would not terminate")
        self.rules.append((orders, rep))

    def _rewrite(self, atom):
        have = atom._orders
        for orders, rep in self.rules:
            if _contains(have, orders):
                extra = _minus(have, orders)
                return sp.Add(*[c * self._cls(o + extra)(*atom.args) for o, c in rep.items()])
        return None


def _contains(big, small):
    b = list(big)
    for s in small:
        if s in b:
            b.remove(s)
        else:
            return False
    return True


def _minus(big, small):
    b = list(big)
    for s in small:
        b.remove(s)
    return tuple(b)


def _apply_rules(expr):
    for _ in range(200):
        hits = {}
        for a in expr.atoms(sp.Function):
            fs = getattr(type(a), "_formal", None)
            if fs is not None and fs.rules:
                new = fs._rewrite(a)
                if new is not None:
                    hits[a] = new
        if not hits:
            return expr
        expr = sp.expand(expr.xreplace(hits))
    raise RuntimeError("rewrite rules did not reach a fixed point")


# --------------------------------------------------------------------------
# normal form

def _has_denominator(e) -> bool:
    for p in e.atoms(sp.Pow):
        if p.exp.is_negative:
            return True
    return False


def normalize(expr) -> Expr:
    """Canonical form: expanded polynomial, or cancelled quotient of two."""
    e = sp.sympify(expr)
    if e.is_Number:
        return e
    if _has_denominator(e):
        e = sp.cancel(sp.together(e))
    else:
        e = sp.expand(e)
    if any(getattr(type(a), "_formal", None) is not None and type(a)._formal.rules
           for a in e.atoms(sp.Function)):
        e = _apply_rules(e)
        if _has_denominator(e):
            e = sp.cancel(sp.together(e))
    return e


def is_zero(expr) -> bool:
    return normalize(expr) == 0


def equal(a, b) -> bool:
    return is_zero(sp.sympify(a) - sp.sympify(b))


def _as_symbol(v):
    if isinstance(v, sp.Symbol):
        return v
    if isinstance(v, str):
        if v not in _declared:
            raise UnknownVariable(v)
        return sp.Symbol(v)
    raise TypeError(f"not a variable: {v!r}")


def differentiate(expr, v) -> Expr:
    return normalize(sp.diff(sp.sympify(expr), _as_symbol(v)))


def evaluate(expr, values: Mapping):
    """Evaluate at a point; exact if all values are exact."""
    sub = {(_as_symbol(k) if isinstance(k, str) else k): sp.sympify(x) for k, x in values.items()}
    out = sp.sympify(expr).xreplace(sub)
    out = normalize(out)
    if out.free_symbols:
        raise UnknownVariable(f"unassigned: {sorted(map(str, out.free_symbols))}")
    return out


def lambdify(names: Sequence[str], exprs, module: str = "numpy"):
    return sp.lambdify([sp.Symbol(n) for n in names], exprs, modules=module)


# --------------------------------------------------------------------------
# linear solving

@dataclass
class AffineSolution:
    unknowns: list[sp.Symbol]
    particular: dict[sp.Symbol, Expr]
    basis: list[dict[sp.Symbol, Expr]]
    guards: list[Expr] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def general(self, params: Sequence) -> dict[sp.Symbol, Expr]:
        out = dict(self.particular)
        for t, b in zip(params, self.basis):
            for u in self.unknowns:
                out[u] = out[u] + t * b[u]
        return {u: normalize(x) for u, x in out.items()}


def irreducible_factors(exprs: Iterable) -> list[Expr]:
    """Distinct non-constant irreducible factors of numerators and denominators."""
    out: list[Expr] = []
    for e in exprs:
        num, den = sp.fraction(sp.together(sp.sympify(e)))
        for part in (num, den):
            if part.is_Number:
                continue
            for f, _ in sp.factor_list(part)[1]:
                if f.is_Number:
                    continue
                if sp.Poly(f).LC() < 0:
                    f = -f
                if not any(f == g for g in out):
                    out.append(f)
    return sorted(out, key=sp.default_sort_key)


def _affine_row(c, unknowns):
    row = []
    for u in unknowns:
        a = sp.diff(c, u)
        if any(sp.diff(a, w) != 0 for w in unknowns if a.has(w)):
            raise NonAffine(c, u)
        row.append(normalize(a))
    const = normalize(c.xreplace({u: 0 for u in unknowns}))
    return row, const


def _cost(e):
    return 0 if e.is_Number else sp.count_ops(e) + 1


def solve_linear(constraints: Sequence, unknowns: Sequence) -> AffineSolution:
    """Solve ``c = 0`` for every constraint, affine in ``unknowns``.

    Forward elimination is fraction free (Bareiss): every entry stays a
    polynomial in the coefficients after clearing row denominators.  Pivots
    that are not constants are reported back as ``guards`` (assumed nonzero).
    """
    unknowns = [_as_symbol(u) for u in unknowns]
    cons = [sp.sympify(c) for c in constraints]
    m, nu = len(cons), len(unknowns)
    rows = []
    for i, c in enumerate(cons):
        row, const = _affine_row(c, unknowns)
        ent = row + [-const] + [sp.Integer(1 if j == i else 0) for j in range(m)]
        den = sp.Integer(1)
        for x in ent:
            d = sp.fraction(sp.together(x))[1]
            if d != 1:
                den = sp.lcm(den, d)
        if den != 1:
            ent = [normalize(x * den) for x in ent]
        rows.append(ent)

    width = nu + 1 + m
    pivcols: list[int] = []
    guards: list[Expr] = []
    prev = sp.Integer(1)
    r = 0
    for col in range(nu):
        if r >= m:
            break
        cands = [i for i in range(r, m) if rows[i][col] != 0]
        if not cands:
            continue
        best = min(cands, key=lambda i: _cost(rows[i][col]))
        rows[r], rows[best] = rows[best], rows[r]
        piv = rows[r][col]
        if not piv.is_Number:
            guards.append(piv)
        for i in range(r + 1, m):
            a = rows[i][col]
            new = []
            for j in range(width):
                x = piv * rows[i][j] - a * rows[r][j]
                if prev != 1:
                    x = sp.cancel(x / prev)
                new.append(normalize(x))
            rows[i] = new
        prev = piv
        pivcols.append(col)
        r += 1

    conds, wit = [], None
    for i in range(r, m):
        rhs = rows[i][nu]
        if rhs != 0:
            conds.append(rhs)
            if wit is None:
                wit = {k: rows[i][nu + 1 + k] for k in range(m) if rows[i][nu + 1 + k] != 0}
    if conds:
        # normalize each condition to a primitive polynomial for readability
        conds = [sp.factor_terms(sp.numer(sp.together(c))) for c in conds]
        raise Inconsistent(conds, wit)

    free = [c for c in range(nu) if c not in pivcols]

    def back(rhs_of, free_vals):
        vals = dict(free_vals)
        for k in reversed(range(r)):
            col = pivcols[k]
            s = rhs_of(k)
            for j in range(col + 1, nu):
                if rows[k][j] != 0:
                    s = s - rows[k][j] * vals[j]
            vals[col] = normalize(s / rows[k][col])
        return vals

    part = back(lambda k: rows[k][nu], {c: sp.Integer(0) for c in free})
    particular = {unknowns[j]: part[j] for j in range(nu)}
    basis = []
    for f in free:
        vals = back(lambda k: sp.Integer(0), {c: sp.Integer(1 if c == f else 0) for c in free})
        basis.append({unknowns[j]: vals[j] for j in range(nu)})
    return AffineSolution(unknowns, particular, basis, guards)


# --------------------------------------------------------------------------
# parser

class ParseError(ValueError):
    def __init__(self, msg, text, pos):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line, self.col = line, col


_IDX = r"(\{[^}]*\}|[A-Za-z0-9]+)"
_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:\.\d+)?)"
    rf"|(?P<name>[A-Za-z][A-Za-z0-9]*(?:\^{_IDX}_{_IDX}|_{_IDX})?)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)
_NAMEPARTS = re.compile(rf"^([A-Za-z][A-Za-z0-9]*)(?:\^{_IDX}_{_IDX}|_{_IDX})?$")


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", text, pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _split_idx(s):
    if s is None:
        return None
    if s.startswith("{"):
        return [t for t in re.split(r"[\s,]+", s[1:-1]) if t]
    return [s]


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}", self.text, tok[2])
        self.i += 1
        return tok

    def expr(self):
        terms = [(1, self.term())]
        while self.peek()[1] in ("+", "-"):
            sign = 1 if self.take()[1] == "+" else -1
            terms.append((sign, self.term()))
        return ("add", terms)

    def term(self):
        factors = [("*", self.unary())]
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            factors.append((op, self.unary()))
        return ("mul", factors)

    def unary(self):
        if self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            inner = self.unary()
            return ("neg", inner) if op == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", sp.Rational(val))
        if kind == "name":
            if self.peek()[1] == "(":
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                return ("call", val, args, pos)
            m = _NAMEPARTS.match(val)
            base, sup, sub, only_sub = m.groups()
            if only_sub is not None:
                sub = only_sub
            return ("name", base, _split_idx(sup), _split_idx(sub), pos)
        if val == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected {val or 'end of input'!r}", self.text, pos)


def _free_indices(node, indices):
    tag = node[0]
    if tag == "name":
        found = set()
        for part in (node[2], node[3]):
            for t in part or ():
                if t in indices:
                    found.add(t)
        return found
    if tag == "num":
        return set()
    if tag == "call":
        return set().union(*(_free_indices(a, indices) for a in node[2]))
    if tag == "add":
        return set().union(*(_free_indices(t, indices) for _, t in node[1]))
    if tag == "mul":
        return set().union(*(_free_indices(f, indices) for _, f in node[1]))
    if tag == "pow":
        return _free_indices(node[1], indices) | _free_indices(node[2], indices)
    if tag == "neg":
        return _free_indices(node[1], indices)
    return set()


def parse(text: str, symbols: Mapping[str, Expr] | None = None,
          functions: Mapping[str, Callable] | None = None,
          indices: Mapping[str, Sequence] | None = None) -> Expr:
    """Parse an infix expression.

    ``p^1_2`` names the variable ``p1_2`` and ``a_3`` names ``a_3``; a bare
    ``^`` is a power.  Index letters declared in ``indices`` are substituted
    inside such names, and every additive term is summed over the index
    letters it mentions (so ``p^mu_i*v^i_mu`` is a full contraction).
    """
    symbols = dict(symbols or {})
    funcs = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}
    funcs.update(functions or {})
    indices = {k: list(v) for k, v in (indices or {}).items()}
    p = _Parser(text)
    tree = p.expr()
    if p.peek()[0] != "end":
        raise ParseError(f"unexpected {p.peek()[1]!r}", text, p.peek()[2])

    def ev(node, env):
        tag = node[0]
        if tag == "num":
            return node[1]
        if tag == "name":
            _, base, sup, sub, pos = node

            def fill(part):
                if part is None:
                    return ""
                return "".join(str(env[t]) if t in env else t for t in part)

            name = base + fill(sup) + ("_" + fill(sub) if sub is not None else "")
            if name in symbols:
                return symbols[name]
            return var(name)
        if tag == "call":
            _, fname, args, pos = node
            if fname not in funcs:
                raise ParseError(f"unknown function {fname!r}", text, pos)
            return funcs[fname](*[ev(a, env) for a in args])
        if tag == "neg":
            return -ev(node[1], env)
        if tag == "pow":
            return ev(node[1], env) ** ev(node[2], env)
        if tag == "mul":
            out = sp.Integer(1)
            for op, f in node[1]:
                v = ev(f, env)
                out = out * v if op == "*" else out / v
            return out
        if tag == "add":
            total = sp.Integer(0)
            for sign, t in node[1]:
                free = sorted(_free_indices(t, indices) - set(env))
                if not free:
                    total += sign * ev(t, env)
                    continue
                for combo in itertools.product(*(indices[k] for k in free)):
                    total += sign * ev(t, {**env, **dict(zip(free, combo))})
            return total
        raise AssertionError(tag)

    return ev(tree, {})
