"""Named check suites: the reproduction checks run by ``lepage verify``.

Every check returns a :class:`CheckResult`.  Exact checks report the number
of nonzero defects as their residual with tolerance 0; numeric checks report
the measured error and the tolerance it is held to.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .exterior import Form, ext_d, interior_mv_form, lie_bracket, pair, wedge
from .hamflow import (trivial_family_curve, trivial_family_discrete, trivial_family_numeric_residual, hamilton_class_at,
                      integrate_ddw, pseudofiber_direction, random_polynomial)
from .legendre import LagrangianSpec, build_space, enlarged_pseudofiber, example, hamiltonian, kernel_forms, \
    velocity_lift
from .multisympl import build_lambda_n, ddw_constraints, restrict, restrict_form
from .symcore import FunctionSymbol, normalize, var

__all__ = ["CheckResult", "CRITERIA", "run_criterion", "run_suite", "SUITES"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def as_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("runtime")
        return d


def _exact(name, failures: list, detail=None) -> CheckResult:
    detail = dict(detail or {})
    if failures:
        detail["failures"] = [str(f) for f in failures[:5]]
    return CheckResult(name, not failures, float(len(failures)), 0.0, detail=detail)


# --------------------------------------------------------------------------
# 1. Hamiltonians of the example library against the closed forms

def _displayed_hamiltonians() -> dict[str, Callable[[LagrangianSpec], sp.Expr]]:
    e, r = var("e"), var("r")
    p = lambda mu, i: var(f"p{mu}_{i}")
    det = p(1, 1) * p(2, 2) - p(1, 2) * p(2, 1)
    sq = sum(p(mu, i) ** 2 for mu in (1, 2) for i in (1, 2))
    half, quarter = sp.Rational(1, 2), sp.Rational(1, 4)

    def antisym(prefix, n):
        def P(mu, nu):
            if mu == nu:
                return 0
            return var(f"{prefix}{mu}{nu}") if mu < nu else -var(f"{prefix}{nu}{mu}")
        return P

    def maxwell4d(spec):
        eta, P = spec.eta, antisym("p", 4)
        rng = range(1, 5)
        return (e - quarter * sum(eta[m - 1] * eta[l - 1] * P(m, l) ** 2 for m in rng for l in rng)
                + sum(var(f"j{m}") * var(f"a{m}") for m in rng))

    def h0(spec):
        eta, V = spec.eta, spec.params["potential"]
        f1, f2 = var("phi1"), var("phi2")
        return (e + half * sum(eta[m - 1] * (p(m, 1) ** 2 + p(m, 2) ** 2) for m in (1, 2))
                - V((f1 ** 2 + f2 ** 2) / 2))

    def h1(spec):
        eta, P = spec.eta, antisym("p", 2)
        f1, f2 = var("phi1"), var("phi2")
        return (h0(spec) + sum((p(m, 1) * f2 - p(m, 2) * f1) * var(f"a{m}") for m in (1, 2))
                - quarter * sum(eta[m - 1] * eta[l - 1] * P(m, l) ** 2 for m in (1, 2) for l in (1, 2)))

    def ymh(spec):
        eta, V = spec.eta, spec.params["potential"]
        R, M = (1, 2, 3), (1, 2)
        phi = [var(f"phi{i}") for i in R]
        a = lambda I, m: var(f"a{I}_{m}")
        eps = sp.LeviCivita

        def pi(I, m, l):
            if m == l:
                return 0
            return var(f"pi{I}_{m}{l}") if m < l else -var(f"pi{I}_{l}{m}")
        pi2 = sum(eta[m - 1] * eta[l - 1] * pi(I, m, l) ** 2 for I in R for m in M for l in M)
        p2 = sum(eta[m - 1] * p(m, i) ** 2 for m in M for i in R)
        comm = sum(pi(I, m, l) * eps(I, J, K) * a(J, m) * a(K, l)
                   for I in R for J in R for K in R for m in M for l in M)
        act = sum(p(m, i) * eps(i, J, l) * a(J, m) * phi[l - 1] for i in R for J in R for l in R for m in M)
        return e - quarter * pi2 + half * p2 + half * comm - act - V(*phi)

    return {
        "trivial2x2": lambda s: e - det / r,
        "dirichlet2x2": lambda s: e + (sq / 2 + r * det) / (1 - r ** 2),
        "maxwell2d": lambda s: (e + ((p(1, 2) + p(2, 1)) ** 2 - 4 * p(1, 1) * p(2, 2)) / (4 * r)
                                - quarter * (p(1, 2) - p(2, 1)) ** 2 / (2 + r)),
        "maxwell4d": maxwell4d,
        "ymh": ymh,
        "cscalar": h0,
        "cscalar_gauged": h1,
    }


def criterion_1(**_) -> CheckResult:
    fails, diffs = [], {}
    for name, display in _displayed_hamiltonians().items():
        spec = example(name)
        d = normalize(hamiltonian(spec).H - display(spec))
        diffs[name] = str(d)
        if d != 0:
            fails.append(f"{name}: {d}")
    return _exact("hamiltonian reproduction", fails, {"differences": diffs})


# --------------------------------------------------------------------------
# 2. pseudofiber geometry

def _zero_spec(n, k) -> LagrangianSpec:
    base = ["t"] if n == 1 else [f"x{m}" for m in range(1, n + 1)]
    return LagrangianSpec(f"L0_{n}{k}", n, k, sp.Integer(0), base, [f"y{i}" for i in range(1, k + 1)])


def _span_rank(forms: list[Form]) -> int:
    keys = sorted({k for f in forms for k in f.terms})
    return sp.Matrix([[f.terms.get(k, 0) for k in keys] for f in forms]).rank(simplify=True)


def criterion_2(**_) -> CheckResult:
    fails = []
    spec = example("trivial2x2")
    S = build_space(spec)
    v = spec.v
    p = lambda mu, i: var(f"p{mu}_{i}")
    r = var("r")
    # relation block dW/dv = 0, compared as spans of the equations
    W = normalize(pair(velocity_lift(spec, chart=S.base_chart()), S.momentum_form()))
    ours = [normalize(sp.diff(W, s)) for s in spec.velocity_symbols()]
    shown = [p(1, 1) + r * v(2, 2), p(1, 2) - r * v(1, 2), p(2, 1) - r * v(2, 1), p(2, 2) + r * v(1, 1)]
    syms = sorted(set().union(*[e.free_symbols for e in ours + shown]), key=str)
    polys = lambda es: sp.Matrix([[sp.Poly(e, *syms).coeff_monomial(m) for m in _monos(ours + shown, syms)]
                                  for e in es])
    if polys(ours).rank() != polys(shown).rank() or polys(ours + shown).rank() != polys(shown).rank():
        fails.append("relation block")
    # line and plane generators of the orthogonals
    c = S.base_chart()
    det = v(1, 1) * v(2, 2) - v(1, 2) * v(2, 1)
    line = c.d("x1", "x2") * det + c.d("y1", "y2")
    for (i, j), s in {(1, 2): 1, (2, 1): -1}.items():
        for nu in (1, 2):
            line = line - wedge(c.d(f"y{i}"), c.d(f"x{nu}")) * (s * v(j, nu))
    plane = [line, c.d("x1", "x2")]
    kern = kernel_forms(enlarged_pseudofiber(spec), S)
    if _span_rank(kern) != 2 or _span_rank(kern + plane) != 2:
        fails.append("plane generators")
    z = velocity_lift(spec, chart=c)
    if normalize(pair(z, line)) != 0:
        fails.append("line does not annihilate z")
    dims = {}
    for n, k in [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2)]:
        sol = enlarged_pseudofiber(_zero_spec(n, k))
        want = math.comb(n + k, n) - n * k
        dims[f"{n},{k}"] = [sol.dimension, want]
        if sol.dimension != want:
            fails.append(f"dim P_q(z) for (n,k)=({n},{k}): {sol.dimension} != {want}")
    return _exact("pseudofiber geometry", fails, {"dimensions": dims})


def _monos(exprs, syms):
    out = set()
    for e in exprs:
        out |= set(sp.Poly(e, *syms).monoms())
    return [sp.Mul(*[s ** k for s, k in zip(syms, m)]) for m in sorted(out)]


# --------------------------------------------------------------------------
# 3. Hamilton classes

def criterion_3(**_) -> CheckResult:
    fails = []
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    cls = hamilton_class_at(S, H)
    if cls.empty or cls.conditions:
        fails.append("dDW class empty")
    else:
        n = S.n
        X = cls.vectors
        for mu in range(n):
            for nu in range(n):
                if normalize(X[mu].coeff(S.base[nu]) - (1 if mu == nu else 0)) != 0:
                    fails.append(f"horizontal part of X_{mu + 1}")
            pm = f"p{mu + 1}"
            if normalize(X[mu].coeff("y") - sp.diff(H, var(pm))) != 0:
                fails.append(f"dy component of X_{mu + 1}")
        trace = sum(X[mu].coeff(f"p{mu + 1}") for mu in range(n))
        if normalize(trace + sp.diff(H, var("y"))) != 0:
            fails.append(f"trace condition: {normalize(trace + sp.diff(H, var('y')))}")
        if len(cls.params) != n * n - 1:
            fails.append(f"{len(cls.params)} free parameters, expected {n * n - 1}")
        if not cls.residual(cls.random_values(random.Random(0))).map(normalize).is_zero():
            fails.append("residual")
    L = build_lambda_n(2, 2)
    empty = hamilton_class_at(L, var("e") + var("r"))
    if not empty.empty:
        fails.append("H = p_12 + p_34 admits a solution")
    return _exact("hamilton-class structure", fails,
                  {"params": len(cls.params), "no_solution_reason": empty.reason})


# --------------------------------------------------------------------------
# 4. explicit curves of the trivial Lagrangian

def criterion_4(seed: int = 5, grid: int = 32, **_) -> CheckResult:
    x1, x2 = var("x1"), var("x2")
    U1, U2, R = FunctionSymbol("u1", 2), FunctionSymbol("u2", 2), FunctionSymbol("r", 2)
    sym = trivial_family_curve(U1(x1, x2), U2(x1, x2), R(x1, x2), var("h"))
    rng = random.Random(seed)
    u1, u2 = random_polynomial(rng, [x1, x2]), random_polynomial(rng, [x1, x2])
    r = random_polynomial(rng, [x1, x2], 1, constant=5)
    num = trivial_family_numeric_residual(u1, u2, r, 1, grid=grid)
    tol = 1e-12
    passed = sym.is_hamiltonian and num < tol
    return CheckResult("trivial-Lagrangian curve family", passed, num, tol,
                       detail={"symbolic_residual": sym.residual.render(), "numeric_residual": num})


# --------------------------------------------------------------------------
# 5. bracket identities

def _random_aof(space, rng):
    from .observ import random_p_xi, random_q_zeta
    if rng.random() < 0.5:
        return random_q_zeta(space, rng)
    return random_p_xi(space, rng)[0]


def criterion_5(seed: int = 0, trials: int = 20, **_) -> CheckResult:
    from .observ import jacobi_sides, poisson, xi_of
    fails = []
    for n, k in [(1, 1), (2, 2), (2, 1), (3, 1)]:
        S = build_lambda_n(n, k)
        for t in range(trials):
            rng = random.Random(seed * 1000 + 100 * n + 10 * k + t)
            F, G, K = (_random_aof(S, rng) for _ in range(3))
            xf, xg = xi_of(S, F), xi_of(S, G)
            d1 = (ext_d(poisson(S, F, G, xf, xg)) + interior_mv_form(lie_bracket(xf, xg), S.omega)).map(normalize)
            if not d1.is_zero():
                fails.append(f"(n,k)=({n},{k}) trial {t}: d{{F,G}} + [xi_F,xi_G] _| Omega = {d1.render()}")
            lhs, rhs = jacobi_sides(S, F, G, K)
            if not (lhs - rhs).map(normalize).is_zero():
                fails.append(f"(n,k)=({n},{k}) trial {t}: Jacobi defect")
    return _exact("bracket identities", fails, {"trials_per_chart": trials})


# --------------------------------------------------------------------------
# 6. symplectomorphism classification

def criterion_6(seed: int = 0, trials: int = 20, **_) -> CheckResult:
    from .observ import (NotSymplectomorphism, classify_symplectomorphism, random_chi,
                         random_field_on_base, xi_bar)
    fails = []
    S = build_lambda_n(2, 2)
    for t in range(trials):
        rng = random.Random(seed * 1000 + t)
        xi = random_field_on_base(S, rng)
        chi = random_chi(S, rng)
        Xi = (xi_bar(S, xi) + chi).map(normalize)
        dec = classify_symplectomorphism(S, Xi)
        if not (dec.reassemble() - Xi).map(normalize).is_zero():
            fails.append(f"trial {t}: reassembly")
        if not (dec.xi - xi).map(normalize).is_zero() or not (dec.chi - chi).map(normalize).is_zero():
            fails.append(f"trial {t}: recovered parts differ")
    c = S.chart
    e, r, y1 = var("e"), var("r"), var("y1")
    bad = [c.vector({"x1": e}), c.vector({"x2": r}), c.vector({"y1": var("p1_1")}),
           c.vector({"e": e}), c.vector({"e": y1})]
    rejected = 0
    for X in bad:
        try:
            classify_symplectomorphism(S, X)
            fails.append(f"accepted {X.render()}")
        except NotSymplectomorphism as exc:
            if exc.witness.is_zero():
                fails.append(f"zero witness for {X.render()}")
            else:
                rejected += 1
    return _exact("symplectomorphism classification", fails, {"round_trips": trials, "rejected": rejected})


# --------------------------------------------------------------------------
# 7. graded pseudobracket

def criterion_7(**_) -> CheckResult:
    from .observ import (conjugate_pair_bracket, graded_pseudobracket, kanatchikov_bracket_maxwell,
                         maxwell_forms, standard_copolarization)
    fails = []
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    cp = standard_copolarization(S)
    x1 = var("x1")
    G = S.chart.form({("x2",): x1})
    bG = graded_pseudobracket(S, H, G, cp)
    if normalize(sp.sympify(bG.representative) - 1) != 0:
        fails.append(f"{{H, x1 dx2}} = {bG.representative}")
    by = graded_pseudobracket(S, H, S.chart.scalar(var("y")), cp)
    lhs = interior_mv_form(by.representative, S.volume()).map(normalize)
    rhs = S.chart.form({(b,): sp.diff(H, var(f"p{m + 1}")) for m, b in enumerate(S.base)})
    if not (lhs - rhs).map(normalize).is_zero():
        fails.append(f"{{H,y}} _| omega = {lhs.render()}")
    M = hamiltonian(example("maxwell4d")).space
    mf = maxwell_forms(M)
    conj = conjugate_pair_bracket(M, mf["pi"], mf["a"])
    if normalize(conj.value - 1) != 0:
        fails.append(f"{{pi, a}} = {conj.value}")
    kan = kanatchikov_bracket_maxwell(M)
    if normalize(kan.value - sp.Rational(M.n, 2)) != 0:
        fails.append(f"Kanatchikov bracket = {kan.value}")
    return _exact("graded pseudobracket", fails,
                  {"H_G": str(bG.representative), "H_y_omega": lhs.render(), "pi_a": str(conj.value),
                   "kanatchikov": str(kan.value)})


# --------------------------------------------------------------------------
# 8. observable but not algebraic on dDW

def criterion_8(seed: int = 0, samples: int = 500, **_) -> CheckResult:
    from .observ import NotAlgebraic, is_observable_sampled, xi_of
    fails = []
    full = build_lambda_n(2, 2)
    D = restrict(full, ddw_constraints(full), kind="ddw")
    F = D.chart.form({("y2",): var("y1")})
    if ext_d(F) != D.chart.d("y1", "y2"):
        fails.append("dF is not dy1 ^ dy2")
    try:
        xi_of(D, F)
        fails.append("xi_of succeeded on dDW")
    except NotAlgebraic:
        pass
    v = is_observable_sampled(D, F, samples=samples, rng=random.Random(seed))
    if not v.observable:
        fails.append(f"sampling found a violation: {v.counterexample}")
    Ft = full.chart.form({("y2",): var("y1")})
    xt = xi_of(full, Ft)
    if not (restrict_form(full, D, Ft) - F).map(normalize).is_zero():
        fails.append("extension does not restrict to F")
    return _exact("observable, not algebraic, on dDW", fails,
                  {"samples": v.samples, "xi_extension": xt.render()})


# --------------------------------------------------------------------------
# 9. slices

def criterion_9(seed: int = 0, samples: int = 100, **_) -> CheckResult:
    from .observ import slice_test, slice_test_codim
    fails = []
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    x1, x2 = var("x1"), var("x2")
    rng = random.Random(seed)
    verdicts = {}
    for label, f, want in [("x1", x1, True), ("H", H, False), ("x1+H", x1 + H, True)]:
        v = slice_test(S, H, f, samples=samples, rng=rng)
        verdicts[label] = v.slice
        if v.slice != want:
            fails.append(f"{label}: slice={v.slice}")
    v = slice_test_codim(S, H, [x1, x2], samples=samples, rng=rng)
    verdicts["(x1,x2)"] = v.slice
    if not v.slice:
        fails.append("(x1, x2) rejected")
    return _exact("slices", fails, {"verdicts": verdicts, "samples": samples})


# --------------------------------------------------------------------------
# 10. dynamics along integrated curves

def criterion_10(grid: int = 128, **_) -> CheckResult:
    from .dynverify import verify_dynamics_law
    osc = hamiltonian(example("point_mech"))
    c = integrate_ddw(osc, {"q": 1.0, "p": 0.0}, t_span=(0.0, 20 * np.pi), dt=1e-3)
    q, tg = c.values["q"], c.grids[0]
    i = np.nonzero((q[:-1] > 0) & (q[1:] <= 0))[0]
    tc = tg[i] + (tg[i + 1] - tg[i]) * q[i] / (q[i] - q[i + 1])
    period_err = float(np.max(np.abs(np.diff(tc) - 2 * np.pi)))
    E = c.values["p"] ** 2 / 2 + c.values["q"] ** 2 / 2
    drift = float(np.max(np.abs(E - E[0])))
    sc = hamiltonian(example("scalar", m2=0))
    init = {"y": (lambda x: np.sin(x) + 0.5 * np.cos(2 * x), lambda x: 0.3 * np.cos(x))}
    res = []
    for N in (grid, 2 * grid):
        cur = integrate_ddw(sc, init, grid=(N, N), t_max=1.0)
        res.append(verify_dynamics_law(cur, sc.space, sc.H, sc.space.chart.scalar(var("y"))).residual)
    order = float(np.log2(res[0] / res[1]))
    passed = period_err < 1e-6 and drift < 1e-10 and order >= 1.9
    return CheckResult("dynamics along curves", passed, drift, 1e-10,
                       detail={"period_error": period_err, "energy_drift": drift,
                               "field_residuals": res, "observed_order": order})


# --------------------------------------------------------------------------
# 11. dynamical observables of the complex scalar field

def criterion_11(**_) -> CheckResult:
    from .dynverify import cubic_obstruction, free_field_family, gauged_charge_form, is_dynamical
    fails = []
    fam = free_field_family()
    if not fam.closure.map(normalize).is_zero():
        fails.append("closure dF0 + xi0 _| Omega0")
    if normalize(fam.defect) != 0:
        fails.append(f"dH0(xi0) = {fam.defect}")
    cub, expected = cubic_obstruction()
    if normalize(cub.defect - expected) != 0:
        fails.append(f"cubic defect {cub.defect} != {expected}")
    res = hamiltonian(example("cscalar_gauged"))
    psi = FunctionSymbol("psi", 2)(var("x1"), var("x2"))
    v = is_dynamical(res.space, res.H, gauged_charge_form(res.space, psi))
    if not v.dynamical:
        fails.append(f"gauged F1 defect {v.defect}")
    return _exact("complex scalar dynamical observables", fails,
                  {"cubic_defect": str(cub.defect), "gauged_xi": v.xi.render() if v.xi is not None else None})


# --------------------------------------------------------------------------
# 12. charge conservation

def criterion_12(grid: int = 128, **_) -> CheckResult:
    from .dynverify import FunctionalSpec, charge_form, functional_integral
    res = hamiltonian(example("cscalar", m2=0))
    S = res.space
    init = {"phi1": (lambda x: np.cos(x) + 0.2 * np.sin(3 * x), lambda x: 0.7 * np.sin(x)),
            "phi2": (lambda x: np.sin(x), lambda x: -0.6 * np.cos(x) + 0.1 * np.cos(2 * x))}
    F = charge_form(S)
    x1 = var("x1")
    tilt = x1 + sp.Rational(3, 10) * sp.sin(var("x2"))
    diffs, charges = [], []
    for N in (grid // 2, grid, 2 * grid):
        c = integrate_ddw(res, init, grid=(N, N), t_max=2.0)
        a = functional_integral(c, S, FunctionalSpec(F, x1, 0.3037))
        b = functional_integral(c, S, FunctionalSpec(F, tilt, 1.2123))
        charges.append([a, b])
        diffs.append(abs(a - b))
    orders = [float(np.log2(diffs[i] / diffs[i + 1])) for i in range(2)]
    tol = 1e-3
    passed = diffs[1] < tol and min(orders) >= 1.8
    return CheckResult("charge conservation", passed, diffs[1], tol,
                       detail={"grids": [grid // 2, grid, 2 * grid], "differences": diffs,
                               "observed_orders": orders, "charges": charges})


# --------------------------------------------------------------------------
# 13. pseudofiber invariance

def criterion_13(seed: int = 5, grid: int = 32, **_) -> CheckResult:
    from .dynverify import FunctionalSpec, functional_integral, pseudofiber_invariance
    res = hamiltonian(example("trivial2x2"))
    S, H = res.space, res.H
    x1, x2 = var("x1"), var("x2")
    rng = random.Random(seed)
    u1, u2 = random_polynomial(rng, [x1, x2]), random_polynomial(rng, [x1, x2])
    r = 2 + x1 + x2 ** 2 / 3
    zeta = pseudofiber_direction(S, H)[0]
    c0 = trivial_family_discrete(u1, u2, r, 0, grid=grid)
    vanish = {}
    for q in S.q_names:
        F = interior_mv_form(S.chart.partial(q), S.theta)
        vanish[q] = functional_integral(c0, S, FunctionalSpec(F, x1, 0.4321))
    reports = []
    for h, q in [(0, "y1"), (1, "x1")]:
        c = c0 if h == 0 else trivial_family_discrete(u1, u2, r, h, grid=grid)
        F = interior_mv_form(S.chart.partial(q), S.theta)
        reports.append(pseudofiber_invariance(c, S, H, F, zeta, FunctionalSpec(F, x1, 0.4321)))
    drift = max(rep.drift for rep in reports)
    hres = max(rep.max_residual for rep in reports)
    vmax = max(abs(v) for v in vanish.values())
    passed = drift < 1e-9 and hres < 1e-10 and vmax < 1e-9
    return CheckResult("pseudofiber invariance", passed, drift, 1e-9,
                       detail={"drift": drift, "hamilton_residual": hres, "vanishing_functionals": vanish})


CRITERIA: dict[int, Callable[..., CheckResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
    12: criterion_12, 13: criterion_13,
}

SUITES = {"paper-identities": list(CRITERIA)}


def run_criterion(number: int, **options) -> CheckResult:
    fn = CRITERIA[number]
    t0 = time.perf_counter()
    out = fn(**options)
    out.runtime = time.perf_counter() - t0
    out.name = f"{number}. {out.name}"
    return out


def run_suite(name: str = "paper-identities", **options) -> list[CheckResult]:
    try:
        numbers = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; known: {', '.join(SUITES)}") from None
    return [run_criterion(k, **options) for k in numbers]
