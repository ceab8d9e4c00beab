"""Sparse exterior algebra on a single chart.

Forms and multivectors are maps from strictly increasing index tuples to
coefficients.  The pairing of a decomposable k-vector with a k-form is the
determinant of the evaluation matrix; both interior products are derived from
it through

    <Y, X _| mu> = <X ^ Y, mu>        (X _| mu, deg X <= deg mu)
    <X |_ mu, nu> = <X, mu ^ nu>      (X |_ mu, deg X >= deg mu)

so no sign is written down per degree.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Mapping, Sequence

import sympy as sp

from .symcore import normalize, var

__all__ = [
    "Chart", "Form", "Multivector", "sort_sign", "wedge", "ext_d",
    "interior_mv_form", "interior_form_mv", "pair", "decomposable",
    "lie_bracket", "DegreeError",
]


class DegreeError(ValueError):
    pass


def sort_sign(seq: Sequence[int]):
    """Return (sign, sorted tuple); sign is 0 if an index repeats."""
    s = list(seq)
    if len(set(s)) != len(s):
        return 0, None
    sign = 1
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign, tuple(s)


def _merge_sign(a: tuple, b: tuple):
    inv = 0
    for x in a:
        for y in b:
            if x == y:
                return 0
            if x > y:
                inv += 1
    return -1 if inv % 2 else 1


class Chart:
    """Ordered coordinate names; the order fixes every sign."""

    def __init__(self, names: Sequence[str], roles: Mapping[str, str] | None = None,
                 display: Mapping[str, str] | None = None):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be unique")
        self.names = names
        self.symbols = [var(n) for n in names]
        self.index = {n: i for i, n in enumerate(names)}
        self.roles = dict(roles or {})
        self.display = dict(display or {})

    @property
    def dim(self) -> int:
        return len(self.names)

    def __repr__(self):
        return f"Chart({self.names})"

    def __eq__(self, other):
        return isinstance(other, Chart) and self.names == other.names

    def __hash__(self):
        return hash(tuple(self.names))

    def sym(self, name):
        return self.symbols[self.index[name]]

    def _idx(self, name):
        if isinstance(name, int):
            return name
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown coordinate {name!r}") from None

    def d(self, *names) -> "Form":
        """dq^a ^ dq^b ^ ... for the given names."""
        sign, key = sort_sign([self._idx(n) for n in names])
        return Form(self, len(names), {key: sp.Integer(sign)} if sign else {})

    def partial(self, *names) -> "Multivector":
        sign, key = sort_sign([self._idx(n) for n in names])
        return Multivector(self, len(names), {key: sp.Integer(sign)} if sign else {})

    def scalar(self, c, kind="form"):
        cls = Form if kind == "form" else Multivector
        return cls(self, 0, {(): sp.sympify(c)})

    def form(self, terms: Mapping[tuple, object]) -> "Form":
        return _from_named(Form, self, terms)

    def multivector(self, terms: Mapping[tuple, object]) -> "Multivector":
        return _from_named(Multivector, self, terms)

    def vector(self, comps: Mapping[str, object]) -> "Multivector":
        return Multivector(self, 1, {(self._idx(k),): sp.sympify(v) for k, v in comps.items()})

    def render_name(self, i: int) -> str:
        n = self.names[i]
        return self.display.get(n, n)


def _from_named(cls, chart, terms):
    out = None
    for names, c in terms.items():
        if isinstance(names, str):
            names = (names,)
        base = chart.d(*names) if cls is Form else chart.partial(*names)
        t = base * c
        out = t if out is None else out + t
    if out is None:
        raise ValueError("empty term map, degree unknown")
    return out


class _Graded:
    __slots__ = ("chart", "degree", "terms")
    _prefix = ""

    def __init__(self, chart: Chart, degree: int, terms: Mapping[tuple, object] | None = None,
                 clean: bool = True):
        if degree < 0 or (degree > chart.dim and terms):
            raise DegreeError(f"degree {degree} out of range for dimension {chart.dim}")
        self.chart = chart
        self.degree = degree
        if clean:
            t = {}
            for k, v in (terms or {}).items():
                v = normalize(v)
                if v != 0:
                    t[tuple(k)] = v
            self.terms = t
        else:
            self.terms = dict(terms or {})

    # arithmetic -----------------------------------------------------------
    def _same(self, other):
        if type(other) is not type(self) or other.chart != self.chart:
            raise TypeError("operands live in different spaces")
        if other.degree != self.degree:
            raise DegreeError("degree mismatch in sum")

    def __add__(self, other):
        if isinstance(other, (int, sp.Expr)) and other == 0:
            return self
        self._same(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0) + v
        return type(self)(self.chart, self.degree, t)

    __radd__ = __add__

    def __neg__(self):
        return type(self)(self.chart, self.degree, {k: -v for k, v in self.terms.items()}, clean=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, _Graded):
            raise TypeError("use wedge() for products of graded objects")
        c = sp.sympify(c)
        return type(self)(self.chart, self.degree, {k: v * c for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1 / sp.sympify(c))

    # inspection -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def equals(self, other) -> bool:
        return (self - other).is_zero()

    def __eq__(self, other):
        if isinstance(other, (int, sp.Expr)) and other == 0:
            return self.is_zero()
        if type(other) is not type(self):
            return NotImplemented
        return self.chart == other.chart and self.degree == other.degree and self.equals(other)

    __hash__ = None

    def coeff(self, *names):
        sign, key = sort_sign([self.chart._idx(n) for n in names])
        if not sign:
            return sp.Integer(0)
        return sign * self.terms.get(key, sp.Integer(0))

    def scalar_value(self):
        if self.degree != 0:
            raise DegreeError("not a scalar")
        return self.terms.get((), sp.Integer(0))

    def subs(self, mapping):
        m = {(var(k) if isinstance(k, str) else k): sp.sympify(v) for k, v in mapping.items()}
        return type(self)(self.chart, self.degree, {k: v.xreplace(m) for k, v in self.terms.items()})

    def map(self, f):
        return type(self)(self.chart, self.degree, {k: f(v) for k, v in self.terms.items()})

    @property
    def free_symbols(self):
        out = set()
        for v in self.terms.values():
            out |= v.free_symbols
        return out

    def items_named(self):
        for k, v in sorted(self.terms.items()):
            yield tuple(self.chart.names[i] for i in k), v

    def transfer(self, chart: Chart):
        """Re-express on another chart sharing the coordinate names used."""
        t = {}
        for k, v in self.terms.items():
            sign, key = sort_sign([chart.index[self.chart.names[i]] for i in k])
            t[key] = sign * v
        return type(self)(chart, self.degree, t)

    def render(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for k, v in sorted(self.terms.items()):
            basis = self._basis_str(k)
            c = str(v)
            if basis == "":
                parts.append(c)
            elif v == 1:
                parts.append(basis)
            elif v == -1:
                parts.append("-" + basis)
            else:
                parts.append(f"({c})*{basis}")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"{type(self).__name__}[{self.degree}]({self.render()})"


class Form(_Graded):
    """Differential form: sum of coefficient * dq^I."""

    def _basis_str(self, key):
        return "^".join("d" + self.chart.render_name(i) for i in key)

    def __call__(self, *vectors):
        """Evaluate on vectors: mu(X1, ..., Xk) = <X1 ^ ... ^ Xk, mu>."""
        if len(vectors) != self.degree:
            raise DegreeError("wrong number of arguments")
        return pair(decomposable(list(vectors), chart=self.chart), self)


class Multivector(_Graded):
    """Multivector: sum of coefficient * d/dq^I."""

    def _basis_str(self, key):
        return "^".join("D" + self.chart.render_name(i) for i in key)

    def component(self, name):
        return self.coeff(name)


def wedge(a, b):
    if type(a) is not type(b) or a.chart != b.chart:
        raise TypeError("wedge needs two forms or two multivectors on one chart")
    deg = a.degree + b.degree
    if deg > a.chart.dim:
        raise DegreeError("degree overflow")
    t: dict = {}
    for ka, va in a.terms.items():
        for kb, vb in b.terms.items():
            s = _merge_sign(ka, kb)
            if s:
                key = tuple(sorted(ka + kb))
                t[key] = t.get(key, 0) + s * va * vb
    return type(a)(a.chart, deg, t)


def wedge_all(items):
    items = list(items)
    out = items[0]
    for x in items[1:]:
        out = wedge(out, x)
    return out


def ext_d(a: Form) -> Form:
    if not isinstance(a, Form):
        raise TypeError("ext_d acts on forms")
    ch = a.chart
    if a.degree + 1 > ch.dim:
        return Form(ch, a.degree + 1, {})
    t: dict = {}
    for k, v in a.terms.items():
        for j, s in enumerate(ch.symbols):
            if j in k or not v.has(s):
                continue
            dv = sp.diff(v, s)
            sign = _merge_sign((j,), k)
            key = tuple(sorted((j,) + k))
            t[key] = t.get(key, 0) + sign * dv
    return Form(ch, a.degree + 1, t)


def pair(X: Multivector, mu: Form):
    if X.chart != mu.chart:
        raise TypeError("different charts")
    if X.degree != mu.degree:
        raise DegreeError("pairing needs equal degrees")
    small, big = (X.terms, mu.terms) if len(X.terms) <= len(mu.terms) else (mu.terms, X.terms)
    s = sp.Integer(0)
    for k, v in small.items():
        w = big.get(k)
        if w is not None:
            s += v * w
    return normalize(s)


def _complement(outer: tuple, inner: tuple):
    if not set(inner) <= set(outer):
        return None
    return tuple(i for i in outer if i not in inner)


def interior_mv_form(X: Multivector, mu: Form) -> Form:
    """X _| mu, a form of degree deg(mu) - deg(X)."""
    if X.chart != mu.chart:
        raise TypeError("different charts")
    if X.degree > mu.degree:
        raise DegreeError("X _| mu needs deg X <= deg mu")
    t: dict = {}
    for kx, vx in X.terms.items():
        for km, vm in mu.terms.items():
            rest = _complement(km, kx)
            if rest is None:
                continue
            s = _merge_sign(kx, rest)
            t[rest] = t.get(rest, 0) + s * vx * vm
    return Form(mu.chart, mu.degree - X.degree, t)


def interior_form_mv(X: Multivector, mu: Form) -> Multivector:
    """X |_ mu, a multivector of degree deg(X) - deg(mu)."""
    if X.chart != mu.chart:
        raise TypeError("different charts")
    if X.degree < mu.degree:
        raise DegreeError("X |_ mu needs deg X >= deg mu")
    t: dict = {}
    for kx, vx in X.terms.items():
        for km, vm in mu.terms.items():
            rest = _complement(kx, km)
            if rest is None:
                continue
            s = _merge_sign(km, rest)
            t[rest] = t.get(rest, 0) + s * vx * vm
    return Multivector(X.chart, X.degree - mu.degree, t)


def decomposable(vectors: Sequence[Multivector], chart: Chart | None = None) -> Multivector:
    """X1 ^ ... ^ Xn; components are the n x n minors of the coefficient matrix."""
    if not vectors:
        if chart is None:
            raise ValueError("chart needed for the empty product")
        return chart.scalar(1, kind="mv")
    for v in vectors:
        if not isinstance(v, Multivector) or v.degree != 1:
            raise TypeError("decomposable takes vectors")
    out = wedge_all(vectors)
    return out


def lie_bracket(X: Multivector, Y: Multivector) -> Multivector:
    """[X, Y]^a = X(Y^a) - Y(X^a)."""
    if X.degree != 1 or Y.degree != 1:
        raise DegreeError("Lie bracket of vector fields only")
    ch = X.chart
    t: dict = {}
    for (a,), ya in Y.terms.items():
        for (b,), xb in X.terms.items():
            t[(a,)] = t.get((a,), 0) + xb * sp.diff(ya, ch.symbols[b])
    for (a,), xa in X.terms.items():
        for (b,), yb in Y.terms.items():
            t[(a,)] = t.get((a,), 0) - yb * sp.diff(xa, ch.symbols[b])
    return Multivector(ch, 1, t)


def apply_vector(X: Multivector, f) -> sp.Expr:
    """Directional derivative X(f)."""
    return normalize(sum((v * sp.diff(f, X.chart.symbols[a]) for (a,), v in X.terms.items()),
                         sp.Integer(0)))


def basis_keys(dim: int, degree: int) -> Iterable[tuple]:
    return itertools.combinations(range(dim), degree)
