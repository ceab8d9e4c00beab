"""Observable forms, brackets, symplectomorphisms, slices and copolarizations.

Sign conventions used throughout (X _| mu pairs X on the leading slots,
X |_ mu pairs mu on the leading slots of X):

  xi_F            dF + xi_F _| Omega = 0
  {F, G}          (xi_F ^ xi_G) _| Omega = xi_F _| dG = -xi_G _| dF
  {H, F}          (-1)^((n-p)p) [X]^H |_ dF, F of degree p-1
  external        {F, G} = xi_F _| dG if F has degree n-1, else -xi_G _| dF
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import sympy as sp

from .exterior import (Form, Multivector, ext_d, interior_form_mv, interior_mv_form, lie_bracket,
                       pair, sort_sign, wedge, wedge_all)
from .hamflow import HamiltonClass, decomposable_class, hamilton_class_at, _sub
from .multisympl import MultisymplecticSpace
from .symcore import Inconsistent, normalize, solve_linear, var

__all__ = [
    "NotAlgebraic", "NotSymplectomorphism", "NotProper", "OutsideCopolarization",
    "ObservableForm", "xi_of", "try_xi", "classify_form", "poisson", "jacobi_sides",
    "random_q_zeta", "random_p_xi", "random_field_on_base", "random_chi", "lift_to_space",
    "pi_operator", "xi_bar", "SymplectoDecomposition", "classify_symplectomorphism",
    "ObservabilityVerdict", "is_observable_sampled", "random_decomposable",
    "ProperDecomposition", "proper_decomposition", "SliceVerdict", "slice_test", "slice_test_codim",
    "supercrochets", "Copolarization", "standard_copolarization", "maxwell_copolarization",
    "PseudobracketClass", "graded_pseudobracket", "external_bracket", "ConjugateBracket",
    "conjugate_pair_bracket", "KanatchikovResult", "kanatchikov_bracket_maxwell", "maxwell_forms",
]


class NotAlgebraic(ValueError):
    def __init__(self, witness):
        super().__init__(f"dF + xi _| Omega = 0 has no solution ({witness} = 0 would be required)")
        self.witness = witness


class NotSymplectomorphism(ValueError):
    def __init__(self, witness: Form):
        super().__init__(f"d(Xi _| Omega) = {witness.render()} is not zero")
        self.witness = witness


class NotProper(ValueError):
    def __init__(self, residual):
        super().__init__(f"a is not lambda dH + a_alpha dq^alpha: {residual} = 0 would be required")
        self.residual = residual


class OutsideCopolarization(ValueError):
    pass


def _form(space: MultisymplecticSpace, F) -> Form:
    if isinstance(F, Form):
        return F
    return space.chart.scalar(F)


def _zs(space):
    return [sp.Dummy(f"xi{i}") for i in range(space.dim)]


# --------------------------------------------------------------------------
# algebraic observables

_XI_CACHE: dict = {}


def _xi_operator(space: MultisymplecticSpace):
    """Rows of the map xi -> xi _| Omega and a left inverse on pivot rows,
    or None when Omega has non-constant coefficients."""
    key = id(space)
    hit = _XI_CACHE.get(key)
    if hit is not None and hit[0] is space:
        return hit[1]
    cols = [interior_mv_form(Multivector(space.chart, 1, {(i,): 1}), space.omega) for i in range(space.dim)]
    rows = sorted({k for c in cols for k in c.terms})
    A = sp.Matrix([[c.terms.get(r, 0) for c in cols] for r in rows])
    op = None
    if all(x.is_Number for x in A):
        _, piv = A.T.rref()
        if len(piv) == space.dim:
            sel = [rows[i] for i in piv]
            op = (rows, A, sel, A.extract(list(piv), list(range(space.dim))).inv())
    _XI_CACHE[key] = (space, op)
    return op


def xi_of(space: MultisymplecticSpace, F, dF: Form | None = None) -> Multivector:
    """The unique xi with dF + xi _| Omega = 0, or NotAlgebraic."""
    dF = dF if dF is not None else ext_d(_form(space, F))
    if dF.degree != space.n:
        raise ValueError(f"dF must be an {space.n}-form")
    op = _xi_operator(space)
    if op is not None:
        rows, A, sel, inv = op
        known = set(rows)
        for k, c in dF.terms.items():
            if k not in known:
                raise NotAlgebraic(c)
        b = sp.Matrix([-dF.terms.get(r, 0) for r in sel])
        comps = [normalize(c) for c in inv * b]
        xi = Multivector(space.chart, 1, {(i,): c for i, c in enumerate(comps)})
        res = (dF + interior_mv_form(xi, space.omega)).map(normalize)
        if not res.is_zero():
            raise NotAlgebraic(next(iter(res.terms.values())))
        return xi
    zs = _zs(space)
    xi = Multivector(space.chart, 1, {(i,): z for i, z in enumerate(zs)})
    res = dF + interior_mv_form(xi, space.omega)
    try:
        sol = solve_linear([e for e in res.terms.values()], zs)
    except Inconsistent as exc:
        raise NotAlgebraic(exc.conditions[0]) from None
    if sol.basis:
        raise ValueError("Omega is degenerate: xi_F is not unique")
    return Multivector(space.chart, 1, {(i,): sol.particular[z] for i, z in enumerate(zs)})


def try_xi(space, F, dF=None):
    try:
        return xi_of(space, F, dF)
    except NotAlgebraic:
        return None


@dataclass
class ObservableForm:
    space: MultisymplecticSpace
    form: Form
    kind: str  # algebraic | observable | not-observable
    xi: Multivector | None = None
    counterexample: object = None


def classify_form(space, F, rng: random.Random | None = None, samples: int = 20) -> ObservableForm:
    F = _form(space, F)
    if F.degree < space.n - 1:
        # lower degrees: observable iff dF lies in the copolarization
        cp = maxwell_copolarization(space) if space.kind == "maxwell" else standard_copolarization(space)
        return ObservableForm(space, F, "observable" if cp.contains(ext_d(F)) else "not-observable")
    if F.degree != space.n - 1:
        raise ValueError(f"forms of degree {F.degree} > n - 1 are not observables")
    xi = try_xi(space, F)
    if xi is not None:
        return ObservableForm(space, F, "algebraic", xi)
    v = is_observable_sampled(space, F, samples=samples, rng=rng or random.Random(0))
    return ObservableForm(space, F, "observable" if v.observable else "not-observable",
                          counterexample=v.counterexample)


def poisson(space, F, G, xi_F: Multivector | None = None, xi_G: Multivector | None = None) -> Form:
    """{F, G} = (xi_F ^ xi_G) _| Omega."""
    xi_F = xi_F or xi_of(space, F)
    xi_G = xi_G or xi_of(space, G)
    out = interior_mv_form(wedge(xi_F, xi_G), space.omega)
    return out.map(normalize)


def jacobi_sides(space, F, G, K):
    """({{F,G},K} + {{G,K},F} + {{K,F},G}, d(xi_F ^ xi_G ^ xi_K _| Omega))."""
    xf, xg, xk = (xi_of(space, A) for A in (F, G, K))
    FG, GK, KF = poisson(space, F, G, xf, xg), poisson(space, G, K, xg, xk), poisson(space, K, F, xk, xf)
    lhs = poisson(space, FG, K, None, xk) + poisson(space, GK, F, None, xf) + poisson(space, KF, G, None, xg)
    if space.n >= 2:
        rhs = ext_d(interior_mv_form(wedge_all([xf, xg, xk]), space.omega))
    else:  # n = 1: the ordinary Jacobi identity, no exact term
        rhs = space.chart.scalar(0)
    return lhs.map(normalize), rhs.map(normalize)


# --------------------------------------------------------------------------
# random generators on a Lambda^n chart

def _rand_poly(rng: random.Random, names: Sequence[str], terms: int = 3, degree: int = 2) -> sp.Expr:
    syms = [var(n) for n in names]
    out = sp.Integer(0)
    for _ in range(terms):
        c = sp.Rational(rng.randint(-5, 5), rng.randint(1, 3))
        mono = sp.Integer(1)
        for _ in range(rng.randint(0, degree)):
            mono *= rng.choice(syms)
        out += c * mono
    return out


def random_q_zeta(space: MultisymplecticSpace, rng: random.Random, terms: int = 2) -> Form:
    """Q^zeta: an (n-1)-form on N with polynomial coefficients."""
    qs = space.q_names
    out = None
    for _ in range(terms):
        idx = sorted(rng.sample(range(len(qs)), space.n - 1))
        t = space.chart.d(*[qs[i] for i in idx]) * _rand_poly(rng, qs) if idx else \
            space.chart.scalar(_rand_poly(rng, qs))
        out = t if out is None else out + t
    return out


def random_field_on_base(space: MultisymplecticSpace, rng: random.Random, terms: int = 2) -> Multivector:
    """A vector field on N with polynomial coefficients, as a field on M."""
    qs = space.q_names
    comps = {}
    for q in rng.sample(qs, min(terms, len(qs))):
        comps[q] = _rand_poly(rng, qs)
    return space.chart.vector(comps)


def random_p_xi(space: MultisymplecticSpace, rng: random.Random):
    """(P_xi = xi _| theta, xi)."""
    xi = random_field_on_base(space, rng)
    return interior_mv_form(xi, space.theta), xi


def random_chi(space: MultisymplecticSpace, rng: random.Random) -> Multivector:
    """A chi with chi _| Omega = -dQ^zeta."""
    Q = random_q_zeta(space, rng)
    return lift_to_space(space, -ext_d(Q))


def lift_to_space(space: MultisymplecticSpace, form_on_q: Form) -> Multivector:
    """Vertical vector carrying an n-form in the dq's (chart of M)."""
    N = space.base_chart()
    t = {}
    for key, c in form_on_q.terms.items():
        names = [space.chart.names[i] for i in key]
        if any(nm not in space.q_names for nm in names):
            raise ValueError("form involves momentum differentials")
        s, k2 = sort_sign([N.index[nm] for nm in names])
        t[k2] = t.get(k2, 0) + s * c
    return space.vertical_lift(Form(N, space.n, t))


def pi_operator(space: MultisymplecticSpace, beta: str, alpha: str) -> Multivector:
    """Pi^beta_alpha = sum_I sum_mu delta^beta_{I_mu} p_{I_mu -> alpha} d/dp_I."""
    comps = {}
    for c, entries in space.momenta.items():
        if len(entries) != 1:
            raise ValueError("Pi is defined on full Lambda^n charts")
        sign, I = entries[0]
        tot = sp.Integer(0)
        for mu, b in enumerate(I):
            if b == beta:
                J = list(I)
                J[mu] = alpha
                tot += space.raw_momentum(J)
        if tot != 0:
            comps[c] = sign * tot
    return space.chart.vector(comps)


def xi_bar(space: MultisymplecticSpace, xi: Multivector) -> Multivector:
    """Canonical lift: xi - sum (d xi^alpha / d q^beta) Pi^beta_alpha."""
    out = space.chart.vector({q: xi.coeff(q) for q in space.q_names})
    for a in space.q_names:
        xa = xi.coeff(a)
        if xa == 0:
            continue
        for b in space.q_names:
            d = sp.diff(xa, var(b))
            if d != 0:
                out = out - pi_operator(space, b, a) * d
    return out.map(normalize)


@dataclass
class SymplectoDecomposition:
    xi: Multivector       # the field on N (q-components only)
    xi_bar: Multivector
    chi: Multivector

    def reassemble(self) -> Multivector:
        return self.xi_bar + self.chi


def classify_symplectomorphism(space: MultisymplecticSpace, Xi: Multivector) -> SymplectoDecomposition:
    if space.kind != "lambda_n":
        raise ValueError("classification needs a full Lambda^n chart")
    w = ext_d(interior_mv_form(Xi, space.omega)).map(normalize)
    if not w.is_zero():
        raise NotSymplectomorphism(w)
    qsyms = {var(q) for q in space.q_names}
    xi = space.chart.vector({q: Xi.coeff(q) for q in space.q_names})
    for q in space.q_names:
        if not Xi.coeff(q).free_symbols <= qsyms | _params(Xi.coeff(q)):
            raise NotSymplectomorphism(w)
    xb = xi_bar(space, xi)
    chi = (Xi - xb).map(normalize)
    for q in space.q_names:
        if chi.coeff(q) != 0:
            raise AssertionError("chi has a horizontal part")
    for p in space.p_names:
        if chi.coeff(p).free_symbols - qsyms - _params(chi.coeff(p)):
            raise AssertionError("chi depends on momenta")
    if not ext_d(interior_mv_form(chi, space.omega)).map(normalize).is_zero():
        raise AssertionError("chi part is not closed")
    return SymplectoDecomposition(xi, xb, chi)


def _params(e):
    # formal constants that are not coordinates (none by default)
    return {s for s in e.free_symbols if str(s).startswith("κ")}


# --------------------------------------------------------------------------
# observability by sampling

def random_point(space: MultisymplecticSpace, rng: random.Random) -> dict:
    return {nm: sp.Rational(rng.randint(-6, 6), rng.randint(1, 4)) for nm in space.chart.names}


def random_decomposable(space: MultisymplecticSpace, rng: random.Random) -> Multivector:
    """Rational X = X_1 ^ ... ^ X_n with omega(X) = 1."""
    vecs = []
    for mu, b in enumerate(space.base):
        comps = {b: 1}
        for nm in space.chart.names:
            if nm not in space.base:
                comps[nm] = sp.Rational(rng.randint(-5, 5), rng.randint(1, 3))
        vecs.append(space.chart.vector(comps))
    return wedge_all(vecs)


@dataclass
class ObservabilityVerdict:
    observable: bool
    samples: int
    counterexample: tuple | None = None

    def __bool__(self):
        return self.observable


def is_observable_sampled(space: MultisymplecticSpace, F=None, samples: int = 50,
                          rng: random.Random | None = None, dF: Form | None = None,
                          point: Mapping | None = None, group: int = 2) -> ObservabilityVerdict:
    """Sample X with omega(X) = 1, build equivalents with the same X _| Omega
    from the free parameters of the class, and compare dF exactly."""
    rng = rng or random.Random(0)
    dF = dF if dF is not None else ext_d(_form(space, F))
    for s in range(samples):
        m = point if point is not None else random_point(space, rng)
        sub = _sub(m)
        om = space.omega.subs(sub)
        a = dF.subs(sub)
        X = random_decomposable(space, rng)
        alpha = interior_mv_form(X, om)
        cls = decomposable_class(space, alpha, m)
        if cls.empty or cls.conditions:
            raise AssertionError("sampled class is empty")
        v0 = pair(X, a)
        for _ in range(group):
            Xt = cls.representative(cls.random_values(rng))
            if not (interior_mv_form(Xt, om) - alpha).map(normalize).is_zero():
                raise AssertionError("equivalent n-vector has a different contraction")
            v1 = pair(Xt, a)
            if normalize(v1 - v0) != 0:
                return ObservabilityVerdict(False, s + 1, (m, X, Xt, v0, v1))
    return ObservabilityVerdict(True, samples)


# --------------------------------------------------------------------------
# proper forms and slices

@dataclass
class ProperDecomposition:
    lam: sp.Expr
    coeffs: dict[str, sp.Expr]
    kind: str  # point-slice | vanishing
    values: list[sp.Expr]  # a(X_mu) on the class


def proper_decomposition(space: MultisymplecticSpace, H, a: Form, point: Mapping | None = None,
                         cls: HamiltonClass | None = None) -> ProperDecomposition:
    """Write a = lambda dH + a_alpha dq^alpha and classify it on [X]^H."""
    sub = _sub(point)
    H = sp.sympify(H)
    dH = ext_d(space.chart.scalar(H)).subs(sub)
    a = a.subs(sub)
    lam = sp.Dummy("lam")
    cs = {q: sp.Dummy(f"a_{q}") for q in space.q_names}
    rhs = dH * lam
    for q, c in cs.items():
        rhs = rhs + space.chart.d(q) * c
    try:
        sol = solve_linear(list((a - rhs).terms.values()), [lam] + list(cs.values()))
    except Inconsistent as exc:
        raise NotProper(exc.conditions[0]) from None
    vals = {u: sol.particular[u] for u in [lam] + list(cs.values())}
    cls = cls or hamilton_class_at(space, H, point)
    X = cls.vectors
    ev = [normalize(pair(Xm, a)) for Xm in X]
    if any(e.free_symbols & set(cls.params) for e in ev):
        raise NotProper("a(X_mu) depends on the class parameters")
    kind = "point-slice" if any(e != 0 for e in ev) else "vanishing"
    return ProperDecomposition(vals[lam], {q: vals[c] for q, c in cs.items()}, kind, ev)


def _entries(space):
    for c, entries in space.momenta.items():
        for sign, I in entries:
            yield c, sign, I


def supercrochets(space: MultisymplecticSpace, H, f) -> list[sp.Expr]:
    """All {H, f}^I_{I_mu} = dH/dp_I df/dq^{I_mu} - df/dp_I dH/dq^{I_mu}."""
    out = []
    for c, sign, I in _entries(space):
        Hc, fc = sp.diff(H, var(c)), sp.diff(f, var(c))
        for q in I:
            out.append(normalize(sign * (Hc * sp.diff(f, var(q)) - fc * sp.diff(H, var(q)))))
    return out


def _codim_minors(space, H, fs) -> list[sp.Expr]:
    r = len(fs)
    rows = [sp.sympify(H)] + [sp.sympify(f) for f in fs]
    out = []
    for c, sign, I in _entries(space):
        for S in itertools.combinations(I, r):
            cols = [var(c)] + [var(q) for q in S]
            M = sp.Matrix([[sp.diff(g, x) for x in cols] for g in rows])
            out.append(normalize(sign * M.det()))
    return out


@dataclass
class SliceVerdict:
    slice: bool
    factors_through_H: bool
    lambdas: list
    failures: list = field(default_factory=list)
    evaluations: int = 0

    def __bool__(self):
        return self.slice


def _lambda_condition(space, H, f):
    """lambda with d_p f = lambda d_p H, or None."""
    hp = [sp.diff(H, var(c)) for c in space.p_names]
    fp = [sp.diff(f, var(c)) for c in space.p_names]
    piv = next((i for i, h in enumerate(hp) if normalize(h) != 0), None)
    if piv is None:
        raise ValueError("d_p H vanishes identically")
    lam = normalize(fp[piv] / hp[piv])
    for h, g in zip(hp, fp):
        if normalize(g - lam * h) != 0:
            return None
    return lam


def _sample_nonzero(space, exprs, rng, samples, point_filter=None):
    failures = []
    syms = sorted(set().union(*[e.free_symbols for e in exprs]) if exprs else set(), key=str)
    funcs = [sp.lambdify(syms, e, "mpmath") for e in exprs]
    for _ in range(samples):
        m = random_point(space, rng)
        vals = [m.get(str(s), sp.Rational(rng.randint(1, 5), 3)) for s in syms]
        if not any(sp.nsimplify(e.xreplace(dict(zip(syms, vals)))) != 0 for e in exprs):
            failures.append(m)
    return failures


def slice_test(space: MultisymplecticSpace, H, f, samples: int = 100,
               rng: random.Random | None = None) -> SliceVerdict:
    """Level sets of f are slices: d_p f = lambda d_p H, and some supercrochet is nonzero."""
    return slice_test_codim(space, H, [f], samples, rng)


def slice_test_codim(space: MultisymplecticSpace, H, fs: Sequence, samples: int = 100,
                     rng: random.Random | None = None) -> SliceVerdict:
    rng = rng or random.Random(0)
    H = sp.sympify(H)
    fs = [sp.sympify(f) for f in fs]
    lams = [_lambda_condition(space, H, f) for f in fs]
    if any(l is None for l in lams):
        return SliceVerdict(False, False, lams)
    minors = supercrochets(space, H, fs[0]) if len(fs) == 1 else _codim_minors(space, H, fs)
    minors = [m for m in minors if m != 0]
    if not minors:
        return SliceVerdict(False, True, lams, ["all brackets vanish identically"], 0)
    failures = _sample_nonzero(space, minors, rng, samples)
    return SliceVerdict(not failures, True, lams, failures, samples)


# --------------------------------------------------------------------------
# copolarizations

@dataclass
class Copolarization:
    space: MultisymplecticSpace
    strata: dict[int, list[Form]]
    name: str = "custom"

    def generators(self, p: int) -> list[Form]:
        if p == 0:
            return [self.space.chart.scalar(1)]
        return self.strata.get(p, [])

    def contains(self, a: Form) -> bool:
        gens = self.generators(a.degree)
        if a.is_zero():
            return True
        if not gens:
            return False
        cs = [sp.Dummy(f"c{i}") for i in range(len(gens))]
        comb = gens[0] * cs[0]
        for c, g in zip(cs[1:], gens[1:]):
            comb = comb + g * c
        try:
            solve_linear(list((a - comb).terms.values()), cs)
            return True
        except Inconsistent:
            return False

    def closure_failures(self) -> list[tuple[Form, Form]]:
        """Generator pairs whose wedge leaves the next stratum (degree <= n)."""
        out = []
        n = self.space.n
        for p, gs in self.strata.items():
            for q, hs in self.strata.items():
                if p > q or p + q > n:
                    continue
                for g in gs:
                    for h in hs:
                        w = wedge(g, h).map(normalize)
                        if not self.contains(w):
                            out.append((g, h))
        return out

    def pairings(self, Y: Multivector) -> list[sp.Expr]:
        return [normalize(pair(Y, g)) for g in self.generators(Y.degree)]

    def equivalent(self, Y1: Multivector, Y2: Multivector) -> bool:
        return all(normalize(a - b) == 0 for a, b in zip(self.pairings(Y1), self.pairings(Y2)))


def standard_copolarization(space: MultisymplecticSpace) -> Copolarization:
    """dq-monomials below degree n, {xi _| Omega} in degree n."""
    if space.kind not in ("lambda_n", "ddw"):
        raise ValueError("standard copolarization needs a Lambda^n-type space")
    strata = {}
    for p in range(1, space.n):
        strata[p] = [space.chart.d(*c) for c in itertools.combinations(space.q_names, p)]
    strata[space.n] = [interior_mv_form(space.chart.partial(nm), space.omega) for nm in space.chart.names]
    return Copolarization(space, strata, "standard")


def maxwell_forms(space: MultisymplecticSpace) -> dict:
    """a, da, pi and the Faraday momenta on a Maxwell space.

    pi = -1/2 sum p^{mu nu} omega_{mu nu} = -sum_{mu<nu} p^{mu nu} omega_{mu nu}.
    """
    n = space.n
    afib = space.fiber[:n]
    a = None
    for mu in range(n):
        t = space.chart.d(space.base[mu]) * var(afib[mu])
        a = t if a is None else a + t
    pi = None
    for mu in range(1, n + 1):
        for nu in range(mu + 1, n + 1):
            nm = _faraday_name(space, mu, nu)
            t = space.omega_mu(mu, nu) * (-var(nm))
            pi = t if pi is None else pi + t
    return {"a": a, "da": ext_d(a), "pi": pi, "dpi": ext_d(pi), "fiber": afib}


def _faraday_name(space, mu, nu):
    if f"p{mu}{nu}" in space.chart.index:
        return f"p{mu}{nu}"
    for nm, (mus, iis) in space.alias_info.items():
        if mus == (nu,) and iis == (mu,):
            return nm
    raise KeyError(f"no Faraday momentum p^{mu}{nu}")


def maxwell_copolarization(space: MultisymplecticSpace, complete: bool = True) -> Copolarization:
    """The strata built from dx, da, dpi and d_mu _| Omega (da_mu excluded).

    The listed degree-n stratum misses da ^ da, which the wedge of two
    degree-2 generators produces; ``complete`` adds it (it is copolar).
    """
    if space.kind != "maxwell":
        raise ValueError("Maxwell copolarization needs the Maxwell restriction")
    n = space.n
    mf = maxwell_forms(space)
    dx = [space.chart.d(b) for b in space.base]

    def dxs(r):
        if r == 0:
            return [space.chart.scalar(1)]
        return [wedge_all(list(c)) for c in itertools.combinations(dx, r)]

    strata: dict[int, list[Form]] = {}
    for p in range(1, n + 1):
        gs = list(dxs(p))
        if p >= 2:
            gs += [wedge(w, mf["da"]) for w in dxs(p - 2)]
        if p >= n - 1:
            gs += [wedge(w, mf["dpi"]) for w in dxs(p - n + 1)]
        if p == n:
            # the 4-form reading of d_mu _| theta: d_mu _| Omega = -d(d_mu _| theta)
            gs += [interior_mv_form(space.chart.partial(b), space.omega) for b in space.base]
            if complete and n == 4:
                gs.append(wedge(mf["da"], mf["da"]))
        strata[p] = [g.map(normalize) for g in gs]
    return Copolarization(space, strata, "maxwell")


# --------------------------------------------------------------------------
# brackets

@dataclass
class PseudobracketClass:
    representative: Multivector | sp.Expr
    degree: int
    pairings: list
    copolarization: Copolarization | None

    def equals(self, other) -> bool:
        if self.degree == 0:
            return normalize(sp.sympify(self.representative) - sp.sympify(other)) == 0
        return self.copolarization.equivalent(self.representative, other)


def graded_pseudobracket(space: MultisymplecticSpace, H, F, copol: Copolarization | None = None,
                         point: Mapping | None = None, cls: HamiltonClass | None = None,
                         check: bool = True) -> PseudobracketClass:
    """{H, F} = (-1)^((n-p)p) [X]^H |_ dF for F of degree p-1."""
    F = _form(space, F)
    n = space.n
    p = F.degree + 1
    dF = ext_d(F).subs(_sub(point))
    if copol is not None and check and not copol.contains(dF):
        raise OutsideCopolarization(f"dF = {dF.render()} is not in P^{p}")
    cls = cls or hamilton_class_at(space, H, point)
    if cls.empty:
        raise ValueError(f"[X]^H is empty: {cls.reason}")
    X = cls.representative()
    rep = interior_form_mv(X, dF) * ((-1) ** ((n - p) * p))
    rep = rep.map(normalize)
    if p == n:
        val = normalize(rep.scalar_value())
        gen = normalize(interior_form_mv(wedge_all(cls.vectors), dF).scalar_value())
        if gen.free_symbols & set(cls.params):
            raise OutsideCopolarization("dF(X) depends on the representative")
        return PseudobracketClass(val, 0, [val], copol)
    pairs = []
    if copol is not None:
        Xg = wedge_all(cls.vectors)
        gen = interior_form_mv(Xg, dF) * ((-1) ** ((n - p) * p))
        for g in copol.generators(n - p):
            v = normalize(pair(gen, g))
            if check and v.free_symbols & set(cls.params):
                raise OutsideCopolarization("pairing depends on the representative")
            pairs.append(v)
    return PseudobracketClass(rep, n - p, pairs, copol)


def external_bracket(space: MultisymplecticSpace, F, G) -> Form:
    """{F, G} when one argument is an algebraic (n-1)-form."""
    F, G = _form(space, F), _form(space, G)
    n = space.n
    if G.degree == n - 1 and (xi := try_xi(space, G)) is not None:
        return (-interior_mv_form(xi, ext_d(F))).map(normalize)
    if F.degree == n - 1:
        xi = xi_of(space, F)
        return interior_mv_form(xi, ext_d(G)).map(normalize)
    raise NotAlgebraic("neither argument is an algebraic (n-1)-form")


@dataclass
class ConjugateBracket:
    value: sp.Expr
    reverse: sp.Expr
    antisymmetry_defect: sp.Expr
    tilde_bracket: Form


def _extract_scalar(phi: Form, base: Form):
    """chi with phi = base * chi (both of the same degree)."""
    key = next((k for k, v in base.terms.items() if normalize(v) != 0), None)
    if key is None:
        raise ValueError("df ^ dg vanishes")
    chi = normalize(phi.terms.get(key, 0) / base.terms[key])
    res = (phi - base * chi).map(normalize)
    if not res.is_zero():
        raise ValueError(f"wedge division fails, residual {res.render()}")
    return chi


def conjugate_pair_bracket(space: MultisymplecticSpace, F, G, fs: Sequence | None = None,
                           gs: Sequence | None = None) -> ConjugateBracket:
    """The scalar {F, G} for deg F + deg G = n - 1 via the wedged (n-1)-forms."""
    F, G = _form(space, F), _form(space, G)
    n = space.n
    p, q = F.degree + 1, G.degree + 1
    if p + q != n + 1:
        raise ValueError("needs p + q = n + 1")
    base = list(space.base)
    fs = [sp.sympify(f) for f in (fs if fs is not None else [var(b) for b in base[: n - p]])]
    gs = [sp.sympify(g) for g in (gs if gs is not None else [var(b) for b in base[n - p: 2 * n - p - q]])]
    dfs = [ext_d(space.chart.scalar(f)) for f in fs]
    dgs = [ext_d(space.chart.scalar(g)) for g in gs]

    def tilde(ds, A):
        return wedge(wedge_all(ds), A) if ds else A

    Ft, Gt = tilde(dfs, F), tilde(dgs, G)
    br = poisson(space, Ft, Gt)
    value = _extract_scalar(br, wedge(wedge_all(dfs), wedge_all(dgs)) if dfs and dgs
                            else wedge_all(dfs or dgs))
    rbr = poisson(space, Gt, Ft)
    reverse = _extract_scalar(rbr, wedge(wedge_all(dgs), wedge_all(dfs)) if dfs and dgs
                              else wedge_all(dgs or dfs))
    defect = normalize(value + (-1) ** ((n - p) * (n - q)) * reverse)
    return ConjugateBracket(value, reverse, defect, br)


@dataclass
class KanatchikovResult:
    value: sp.Expr
    xi_pi: Multivector
    contraction: Form
    dpi: Form

    @property
    def sign(self) -> int:
        """+1 if xi_pi _| Omega = dpi, -1 if it equals -dpi, 0 otherwise."""
        if (self.contraction - self.dpi).map(normalize).is_zero():
            return 1
        if (self.contraction + self.dpi).map(normalize).is_zero():
            return -1
        return 0


def kanatchikov_bracket_maxwell(space: MultisymplecticSpace) -> KanatchikovResult:
    """xi_pi = 1/2 sum_mu d/da_mu ^ d/dx^mu and its pairing with da."""
    mf = maxwell_forms(space)
    xi = None
    for mu, b in enumerate(space.base):
        t = space.chart.partial(mf["fiber"][mu], b) * sp.Rational(1, 2)
        xi = t if xi is None else xi + t
    value = pair(xi, mf["da"])
    contr = interior_mv_form(xi, space.omega).map(normalize)
    return KanatchikovResult(value, xi, contr, mf["dpi"].map(normalize))
