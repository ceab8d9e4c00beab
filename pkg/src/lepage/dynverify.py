"""Dynamics along Hamiltonian curves and observable functionals.

{H, F} for an (n-1)-form is dF(X) for X in [X]^H; for algebraic F this is
-dH(xi_F), and ``is_dynamical`` reports dH(xi_F) as the defect.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .exterior import Form, Multivector, ext_d, interior_mv_form, pair, wedge
from .hamflow import (DiscreteCurve, _eval_on, _spectral, contract_numeric, hamilton_class_at,
                      hamilton_residual, pseudofiber_direction)
from .legendre import LegendreResult, example, hamiltonian
from .multisympl import MultisymplecticSpace
from .observ import (NotAlgebraic, OutsideCopolarization, graded_pseudobracket, standard_copolarization,
                     try_xi, xi_of)
from .symcore import FunctionSymbol, Inconsistent, normalize, solve_linear, var

__all__ = [
    "UnverifiedCurve", "NoCrossing", "LeavesPseudofiber",
    "pseudobracket_scalar", "DynamicalVerdict", "is_dynamical", "charge_form", "gauged_charge_form",
    "FreeFieldFamily", "free_field_family", "cubic_obstruction", "psi_obstruction",
    "pullback", "DynamicsReport", "verify_dynamics_law", "FunctionalSpec", "functional_integral",
    "InvarianceReport", "pseudofiber_invariance", "deform_along",
]


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class UnverifiedCurve(ValueError):
    pass


class NoCrossing(ValueError):
    pass


class LeavesPseudofiber(ValueError):
    pass


def _form(space, F) -> Form:
    return F if isinstance(F, Form) else space.chart.scalar(F)


# --------------------------------------------------------------------------
# pseudobrackets with H

def pseudobracket_scalar(space: MultisymplecticSpace, H, F, point: Mapping | None = None) -> sp.Expr:
    """{H, F} = dF(X) for an (n-1)-form F and any X in [X]^H."""
    F = _form(space, F)
    if F.degree != space.n - 1:
        raise ValueError("F must be an (n-1)-form")
    xi = try_xi(space, F)
    if xi is not None and point is None:
        dH = ext_d(space.chart.scalar(sp.sympify(H)))
        return normalize(-interior_mv_form(xi, dH).scalar_value())
    cls = hamilton_class_at(space, H, point)
    if cls.empty:
        raise ValueError(f"[X]^H is empty: {cls.reason}")
    return graded_pseudobracket(space, H, F, None, point, cls).representative


@dataclass
class DynamicalVerdict:
    dynamical: bool
    defect: sp.Expr
    xi: Multivector | None = None

    def __bool__(self):
        return self.dynamical


def is_dynamical(space: MultisymplecticSpace, H, F, xi: Multivector | None = None) -> DynamicalVerdict:
    """Defect dH(xi_F) = -{H, F}; zero means F is dynamical."""
    F = _form(space, F)
    dH = ext_d(space.chart.scalar(sp.sympify(H)))
    if xi is None:
        xi = try_xi(space, F)
    if xi is None:
        d = -pseudobracket_scalar(space, H, F, point={})
        return DynamicalVerdict(d == 0, d)
    d = normalize(interior_mv_form(xi, dH).scalar_value())
    return DynamicalVerdict(d == 0, d, xi)


def _charge_current(space):
    return [var(f"p{mu}_1") * var("phi2") - var(f"p{mu}_2") * var("phi1") for mu in range(1, space.n + 1)]


def charge_form(space: MultisymplecticSpace, weight=1) -> Form:
    """weight * (p^mu_1 phi^2 - p^mu_2 phi^1) omega_mu."""
    out = None
    for mu, j in enumerate(_charge_current(space), start=1):
        t = space.omega_mu(mu) * (sp.sympify(weight) * j)
        out = t if out is None else out + t
    return out


def j0(space: MultisymplecticSpace) -> Multivector:
    comps = {"phi1": var("phi2"), "phi2": -var("phi1")}
    for mu in range(1, space.n + 1):
        comps[f"p{mu}_1"] = var(f"p{mu}_2")
        comps[f"p{mu}_2"] = -var(f"p{mu}_1")
    return space.chart.vector(comps)


def gauged_charge_form(space: MultisymplecticSpace, psi) -> Form:
    """psi J^mu omega_mu - 1/2 p^{mu nu} dpsi ^ omega_{mu nu}."""
    F = charge_form(space, psi)
    dpsi = ext_d(space.chart.scalar(psi))
    for mu in range(1, space.n + 1):
        for nu in range(mu + 1, space.n + 1):
            F = F - wedge(dpsi, space.omega_mu(mu, nu)) * var(f"p{mu}{nu}")
    return F


@dataclass
class FreeFieldFamily:
    space: MultisymplecticSpace
    H: sp.Expr
    F: Form
    xi: Multivector
    U: list
    lam: sp.Symbol
    closure: Form      # dF + xi _| Omega
    defect: sp.Expr    # dH(xi)

    @property
    def verified(self) -> bool:
        return self.closure.is_zero() and self.defect == 0


def _family_U(n, eta, m2):
    Us = [FunctionSymbol("U1", n), FunctionSymbol("U2", n)]
    # L U + m^2 U = 0 with L = -eta^{mu nu} d_mu d_nu, solved for d_1 d_1 U
    rep = {(): sp.sympify(m2) / eta[0]}
    for mu in range(2, n + 1):
        rep[(mu, mu)] = -sp.sympify(eta[mu - 1]) / eta[0]
    for U in Us:
        U.add_rule((1, 1), rep)
    return Us


def free_field_family(m2=sp.Symbol("m2"), n: int = 2, metric: Sequence | None = None,
                      potential=None) -> FreeFieldFamily:
    """The U-family of (n-1)-forms F_0 with their vector fields xi_0.

    ``potential`` (a function of s = |phi|^2/2) overrides the quadratic one;
    with a non-quadratic V the closure still holds and the defect measures
    the obstruction.
    """
    eta = list(metric or [-1] + [1] * (n - 1))
    if len(eta) != n:
        raise ValueError("metric length must equal n")
    spec = example("cscalar", n=n, metric=eta, m2=m2)
    res = hamiltonian(spec)
    space, H = res.space, res.H
    phi = [var("phi1"), var("phi2")]
    if potential is not None:
        s = (phi[0] ** 2 + phi[1] ** 2) / 2
        H = normalize(H + sp.sympify(m2) * s - potential(s))
    xs = [var(b) for b in space.base]
    Us = _family_U(n, eta, m2)
    U = [f(*xs) for f in Us]
    dU = [[sp.diff(u, x) for x in xs] for u in U]
    lam = sp.Symbol("lambda")
    p = lambda mu, a: var(f"p{mu}_{a}")
    LU = [normalize(-sum(sp.diff(u, x, 2) / eta[m] for m, x in enumerate(xs))) for u in U]
    comps = {}
    for a in (1, 2):
        comps[f"phi{a}"] = U[a - 1]
    comps["e"] = -sum(p(mu, a) * dU[a - 1][mu - 1] for mu in range(1, n + 1) for a in (1, 2)) \
        - sum(LU[a - 1] * phi[a - 1] for a in (1, 2))
    for mu in range(1, n + 1):
        for a in (1, 2):
            comps[f"p{mu}_{a}"] = dU[a - 1][mu - 1] / eta[mu - 1]
    xi = space.chart.vector(comps) + j0(space) * lam
    F = None
    for mu in range(1, n + 1):
        c = sum(U[a] * p(mu, a + 1) - dU[a][mu - 1] / eta[mu - 1] * phi[a] for a in (0, 1))
        t = space.omega_mu(mu) * c
        F = t if F is None else F + t
    F = F + charge_form(space, lam)
    closure = (ext_d(F) + interior_mv_form(xi, space.omega)).map(normalize)
    dH = ext_d(space.chart.scalar(H))
    defect = normalize(interior_mv_form(xi, dH).scalar_value())
    return FreeFieldFamily(space, H, F, xi, Us, lam, closure, defect)


def cubic_obstruction(n: int = 2, m2=sp.Symbol("m2"), c=sp.Symbol("c")):
    """The U-family on V(s) = m^2 s + c s^3: (family, expected defect).

    Expected: -phi^a U^a (V'(s) - m^2); the lambda j_0 part stays dynamical.
    """
    V = lambda s: sp.sympify(m2) * s + sp.sympify(c) * s ** 3
    fam = free_field_family(m2, n, potential=V)
    phi = [var("phi1"), var("phi2")]
    s = (phi[0] ** 2 + phi[1] ** 2) / 2
    xs = [var(b) for b in fam.space.base]
    Uv = [U(*xs) for U in fam.U]
    expected = normalize(-sum(p * u for p, u in zip(phi, Uv)) * (sp.diff(V(s), phi[0]) / phi[0] - m2))
    return fam, expected


def psi_obstruction(n: int = 2):
    """F = psi(x) J^mu omega_mu on the ungauged space: (xi, defect, expected)."""
    res = hamiltonian(example("cscalar", n=n))
    space, H = res.space, res.H
    psi = FunctionSymbol("psi", n)(*[var(b) for b in space.base])
    F = charge_form(space, psi)
    v = is_dynamical(space, H, F)
    J = _charge_current(space)
    expected = normalize(-sum(j * sp.diff(psi, var(b)) for j, b in zip(J, space.base)))
    return v, expected


# --------------------------------------------------------------------------
# discrete pullbacks

def pullback(curve: DiscreteCurve, space: MultisymplecticSpace, form: Form) -> dict[tuple, np.ndarray]:
    """Components form(T_a1, ..., T_ad) on the grid for increasing axis tuples."""
    names = space.chart.names
    d = form.degree
    if d == 0:
        return {(): _eval_on(curve, names, form.scalar_value())}
    tang = [curve.tangent(ax, names) for ax in range(curve.n)]
    coefs = [(k, _eval_on(curve, names, c)) for k, c in form.terms.items()]
    out = {}
    for axes in itertools.combinations(range(curve.n), d):
        acc = np.zeros(curve.shape)
        for idx, c in coefs:
            M = np.stack([tang[a][..., list(idx)] for a in axes], axis=-1)
            acc = acc + c * np.linalg.det(M)
        out[axes] = acc
    return out


def _interior(curve, arr, margin=2):
    sl = tuple(slice(margin, -margin) if b != "periodic" else slice(None) for b in curve.boundary)
    return arr[sl]


@dataclass
class DynamicsReport:
    residual: float
    scale: float
    components: dict = field(default_factory=dict)
    runtime: float = 0.0

    def passes(self, tol: float) -> bool:
        return self.residual < tol


def verify_dynamics_law(curve: DiscreteCurve, space: MultisymplecticSpace, H, F, G=None,
                        require_residual: float | None = None, margin: int = 2) -> DynamicsReport:
    """{H,F} dG|Gamma = {H,G} dF|Gamma on the grid.

    Without G, the form x^1 dx^2 ^ ... ^ dx^n (so {H,G} = 1, dG = omega)
    is used.  A lower-degree F is compared as dF|Gamma = ({H,F} _| omega)|Gamma
    with {H,F} a representative of the graded pseudobracket.
    """
    t0 = time.perf_counter()
    if require_residual is not None:
        r = hamilton_residual(curve, space, H, interior_only=True)
        if r > require_residual:
            raise UnverifiedCurve(f"Hamilton residual {r:.3e} exceeds {require_residual:.1e}")
    F = _form(space, F)
    n = space.n
    if F.degree < n - 1:
        cls = hamilton_class_at(space, H)
        br = graded_pseudobracket(space, H, F, standard_copolarization(space), None, cls, check=False)
        Y = br.representative
        lhs = pullback(curve, space, ext_d(F))
        rhs = pullback(curve, space, interior_mv_form(Y, space.volume()))
        comps = {k: float(np.max(np.abs(_interior(curve, lhs[k] - rhs[k], margin)))) for k in lhs}
        scale = max(float(np.max(np.abs(_interior(curve, v, margin)))) for v in lhs.values())
        return DynamicsReport(max(comps.values()), scale, comps, time.perf_counter() - t0)
    if G is None:
        b = space.base
        G = space.chart.scalar(var(b[0])) if n == 1 else space.chart.d(*b[1:]) * var(b[0])
    G = _form(space, G)
    bF = pseudobracket_scalar(space, H, F)
    bG = pseudobracket_scalar(space, H, G)
    names = space.chart.names
    full = tuple(range(n))
    dF = pullback(curve, space, ext_d(F))[full]
    dG = pullback(curve, space, ext_d(G))[full]
    res = _eval_on(curve, names, bF) * dG - _eval_on(curve, names, bG) * dF
    res = _interior(curve, res, margin)
    return DynamicsReport(float(np.max(np.abs(res))), float(np.max(np.abs(_interior(curve, dF, margin)))),
                          {full: float(np.max(np.abs(res)))}, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# observable functionals

@dataclass
class FunctionalSpec:
    """Integral of an (n-1)-form over {f = value} inside the curve.

    ``sign`` is the coorientation: +1 orients the slice by df, -1 by -df.
    """

    form: Form
    level: sp.Expr
    value: float = 0.0
    sign: int = 1


def functional_integral(curve: DiscreteCurve, space: MultisymplecticSpace, spec: FunctionalSpec,
                        axis: int = 0) -> float:
    """Locate {f = value} by sign changes along ``axis``, interpolate
    linearly, and integrate the pulled-back form along the other axis."""
    names = space.chart.names
    n = curve.n
    g = _eval_on(curve, names, sp.sympify(spec.level)) - float(spec.value)
    if n == 1:
        return _point_value(curve, space, spec, g)
    if n != 2:
        raise NotImplementedError("slice integrals are implemented for n = 1 and n = 2")
    other = 1 - axis
    comp = pullback(curve, space, spec.form)
    Fa, Fo = comp[(axis,)], comp[(other,)]
    ga = np.moveaxis(g, axis, 0)
    m = ga.shape[1]
    s_idx = np.empty(m)
    fa_v = np.empty(m)
    fo_v = np.empty(m)
    slope = np.empty(m)
    Fa_m, Fo_m = np.moveaxis(Fa, axis, 0), np.moveaxis(Fo, axis, 0)
    for j in range(m):
        col = ga[:, j]
        hit = np.nonzero((col[:-1] == 0) | (np.sign(col[:-1]) * np.sign(col[1:]) < 0))[0]
        if len(hit) == 0:
            raise NoCrossing(f"no crossing of the slice in column {j}")
        i = int(hit[0])
        w = 0.0 if col[i] == col[i + 1] else col[i] / (col[i] - col[i + 1])
        s_idx[j] = i + w
        fa_v[j] = (1 - w) * Fa_m[i, j] + w * Fa_m[i + 1, j]
        fo_v[j] = (1 - w) * Fo_m[i, j] + w * Fo_m[i + 1, j]
        slope[j] = (col[i + 1] - col[i])
    ha, ho = curve.steps[axis], curve.steps[other]
    s = curve.grids[axis][0] + ha * s_idx
    if curve.boundary[other] == "periodic":
        ds = _spectral(s, curve.period(other), 0)
        integrand = fa_v * ds + fo_v
        total = float(np.sum(integrand) * ho)
    else:
        ds = np.gradient(s, ho)
        integrand = fa_v * ds + fo_v
        total = float(_trapezoid(integrand, dx=ho))
    # orientation: X |_ df along the slice is sign(d_axis f) times the tangent
    # (d s, d other) when axis precedes other, and the opposite otherwise
    orient = np.sign(np.median(slope)) * (1 if axis == 0 else -1)
    return float(spec.sign * orient * total)


def _point_value(curve, space, spec, g):
    hit = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
    if len(hit) == 0:
        raise NoCrossing("no crossing of the slice")
    i = int(hit[0])
    w = 0.0 if g[i] == g[i + 1] else g[i] / (g[i] - g[i + 1])
    F = pullback(curve, space, spec.form)[()]
    return float(spec.sign * np.sign(g[i + 1] - g[i]) * ((1 - w) * F[i] + w * F[i + 1]))


# --------------------------------------------------------------------------
# invariance along generalized pseudofiber directions

def deform_along(curve: DiscreteCurve, space: MultisymplecticSpace, zeta: Multivector, s: float,
                 steps: int) -> DiscreteCurve:
    """Explicit Euler steps of the vertical field zeta, applied pointwise."""
    names = space.chart.names
    comps = {nm: zeta.coeff(nm) for nm in names if zeta.coeff(nm) != 0}
    for nm in comps:
        if nm in space.q_names:
            raise LeavesPseudofiber("zeta must be vertical")
    fs = {nm: sp.lambdify([var(x) for x in names], c, "numpy") for nm, c in comps.items()}
    out = curve.copy()
    if steps == 0 or s == 0:
        return out
    ds = s / steps
    for _ in range(steps):
        args = [out.values[nm] for nm in names]
        inc = {nm: np.broadcast_to(np.asarray(f(*args), dtype=float), out.shape) for nm, f in fs.items()}
        for nm, v in inc.items():
            out.values[nm] = out.values[nm] + ds * v
    out.meta = dict(out.meta, deformed=float(s))
    return out


def _check_in_lh(space, H, zeta):
    basis = pseudofiber_direction(space, H)
    cs = [sp.Dummy(f"c{i}") for i in range(len(basis))]
    comb = zeta * 0 if not basis else basis[0] * cs[0]
    for c, b in zip(cs[1:], basis[1:]):
        comb = comb + b * c
    try:
        solve_linear(list((zeta - comb).terms.values()) if basis else list(zeta.terms.values()), cs)
    except Inconsistent:
        raise LeavesPseudofiber("zeta is not a section of L^H") from None


@dataclass
class InvarianceReport:
    s_values: list
    integrals: list
    residuals: list
    drift: float
    max_residual: float


def pseudofiber_invariance(curve: DiscreteCurve, space: MultisymplecticSpace, H, F: Form,
                           zeta: Multivector, spec: FunctionalSpec, s_max: float = 1.0,
                           samples: int = 5, steps: int = 20) -> InvarianceReport:
    """Deform the curve along zeta and track the slice integral of F."""
    _check_in_lh(space, H, zeta)
    if not interior_mv_form(zeta, F).map(normalize).is_zero() and F.degree > 0:
        raise ValueError("hypothesis (b) fails: zeta _| F is not zero")
    ss, vals, res = [], [], []
    for k in range(samples + 1):
        s = s_max * k / samples
        c = deform_along(curve, space, zeta, s, steps * k)
        ss.append(s)
        vals.append(functional_integral(c, space, spec))
        res.append(hamilton_residual(c, space, H, interior_only=True))
    drift = max(abs(v - vals[0]) for v in vals)
    return InvarianceReport(ss, vals, res, drift, max(res))
