"""Legendre correspondence: W, pseudofibers, Hamiltonians and the example library."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .exterior import Chart, Form, Multivector, decomposable, pair
from .multisympl import (MultisymplecticSpace, build_ddw, build_lambda_n, maxwell_constraints,
                         restrict)
from .symcore import (AffineSolution, FunctionSymbol, Inconsistent, NonAffine, irreducible_factors,
                      normalize, solve_linear, var)

__all__ = [
    "LagrangianSpec", "LegendreResult", "Degenerate", "DomainError", "velocity_name",
    "velocity_lift", "w_function", "enlarged_pseudofiber", "hamiltonian", "hamiltonian_at",
    "verify_duality", "pseudofiber_level", "kernel_forms", "build_space", "example",
    "EXAMPLES", "ddw_library",
]


class Degenerate(ValueError):
    """The correspondence cannot be inverted on the chosen submanifold."""

    def __init__(self, conditions, target):
        self.conditions = list(conditions)
        self.target = target
        super().__init__(f"Legendre correspondence degenerate on {target}; "
                         f"requires {', '.join(f'{c} = 0' for c in self.conditions)}")


class DomainError(ValueError):
    pass


def velocity_name(n: int, k: int, i: int, mu: int) -> str:
    if n == 1:
        return "v" if k == 1 else f"v{i}"
    return f"v{i}_{mu}"


@dataclass
class LagrangianSpec:
    """A first-order Lagrangian density in x, y and the velocities v^i_mu."""

    name: str
    n: int
    k: int
    L: sp.Expr
    base: list[str]
    fiber: list[str]
    target: str = "full"
    metric: list[int] | None = None
    params: dict = field(default_factory=dict)
    momentum_names: dict[tuple[int, int], str] | None = None
    gauge_groups: list[dict[int, int]] | None = None
    display: dict[str, str] = field(default_factory=dict)
    description: str = ""

    def validate(self):
        allowed = set(self.base) | set(self.fiber) | {s for s in self.velocity_names()}
        allowed |= {str(s) for s in self.params.get("constants", [])}
        bad = {str(s) for s in sp.sympify(self.L).free_symbols} - allowed
        if bad:
            raise ValueError(f"Lagrangian references undeclared symbols {sorted(bad)}")
        return self

    def velocity_names(self) -> list[str]:
        return [velocity_name(self.n, self.k, i, mu)
                for i in range(1, self.k + 1) for mu in range(1, self.n + 1)]

    def v(self, i: int, mu: int) -> sp.Symbol:
        return var(velocity_name(self.n, self.k, i, mu))

    def velocity_symbols(self) -> list[sp.Symbol]:
        return [var(s) for s in self.velocity_names()]

    @property
    def eta(self) -> list[int]:
        return self.metric or [1] * self.n


@dataclass
class LegendreResult:
    spec: LagrangianSpec
    space: MultisymplecticSpace
    target: str
    H: sp.Expr
    W: sp.Expr
    v_of_p: dict[sp.Symbol, sp.Expr]
    v_kernel: list[dict[sp.Symbol, sp.Expr]]
    guards: list[sp.Expr]

    def check_domain(self, point: Mapping) -> None:
        sub = {var(k) if isinstance(k, str) else k: sp.sympify(x) for k, x in point.items()}
        for g in self.guards:
            if normalize(g.xreplace(sub)) == 0:
                raise DomainError(f"point violates {g} != 0")

    def at(self, point: Mapping) -> sp.Expr:
        self.check_domain(point)
        sub = {var(k) if isinstance(k, str) else k: sp.sympify(x) for k, x in point.items()}
        return normalize(self.H.xreplace(sub))

    def dH(self, name: str) -> sp.Expr:
        return normalize(sp.diff(self.H, var(name)))


# --------------------------------------------------------------------------

def build_space(spec: LagrangianSpec, target: str | None = None) -> MultisymplecticSpace:
    target = target or spec.target
    if target == "full":
        return build_lambda_n(spec.n, spec.k, spec.base, spec.fiber)
    sp_ = build_ddw(spec.base, spec.fiber, spec.momentum_names, extra_display=spec.display)
    if target == "ddw":
        return sp_
    if target == "maxwell":
        if not spec.gauge_groups:
            raise ValueError(f"{spec.name} has no gauge potential to restrict")
        sub = {}
        for grp in spec.gauge_groups:
            sub.update(maxwell_constraints(sp_, grp))
        return restrict(sp_, sub, kind="maxwell")
    raise ValueError(f"unknown target {target!r}")


def velocity_lift(spec: LagrangianSpec, values: Mapping | None = None,
                  chart: Chart | None = None) -> Multivector:
    """z = (d_1 + v^i_1 d_{y^i}) ^ ... ^ (d_n + v^i_n d_{y^i}) on N."""
    chart = chart or Chart(spec.base + spec.fiber)
    vals = {var(k) if isinstance(k, str) else k: sp.sympify(x) for k, x in (values or {}).items()}
    factors = []
    for mu in range(1, spec.n + 1):
        comps = {spec.base[mu - 1]: 1}
        for i in range(1, spec.k + 1):
            s = spec.v(i, mu)
            comps[spec.fiber[i - 1]] = vals.get(s, s)
        factors.append(chart.vector(comps))
    return decomposable(factors)


def w_function(spec: LagrangianSpec, space: MultisymplecticSpace | None = None) -> sp.Expr:
    """W(q, v, p) = <z(v), p> - L."""
    space = space or build_space(spec)
    z = velocity_lift(spec, chart=space.base_chart())
    return normalize(pair(z, space.momentum_form()) - spec.L)


def _unknown_order(space: MultisymplecticSpace) -> list[str]:
    # e and higher momenta last so that they come out as the free parameters
    names = space.p_names
    deg = {nm: len(space.alias_info.get(nm, ((0,), ()))[0]) for nm in names}
    return sorted(names, key=lambda nm: (deg[nm] == 0 or deg[nm] >= 2, deg[nm] == 0, names.index(nm)))


def enlarged_pseudofiber(spec: LagrangianSpec, q: Mapping | None = None, v: Mapping | None = None,
                         space: MultisymplecticSpace | None = None) -> AffineSolution:
    """The momenta p with dW/dv = 0 at (q, z(v)), as an affine solution set."""
    space = space or build_space(spec)
    W = w_function(spec, space)
    sub = {var(k) if isinstance(k, str) else k: sp.sympify(x)
           for k, x in {**(q or {}), **(v or {})}.items()}
    eqs = [normalize(sp.diff(W, s).xreplace(sub)) for s in spec.velocity_symbols()]
    return solve_linear(eqs, _unknown_order(space))


def kernel_forms(sol: AffineSolution, space: MultisymplecticSpace) -> list[Form]:
    """Homogeneous solutions of a pseudofiber as n-forms on N."""
    mf = space.momentum_form()
    out = []
    for b in sol.basis:
        out.append(mf.subs({u: b[u] for u in sol.unknowns}))
    return out


def hamiltonian(spec: LagrangianSpec, target: str | None = None,
                pin: Mapping[str, object] | None = None,
                space: MultisymplecticSpace | None = None) -> LegendreResult:
    """Eliminate v from W by solving dW/dv = 0 (affine in v for quadratic L).

    ``pin`` fixes momentum coordinates to values (e.g. r = 1) before solving.
    """
    target = target or spec.target
    space = space or build_space(spec, target)
    W = w_function(spec, space)
    pinned = {var(k): sp.sympify(x) for k, x in (pin or {}).items()}
    if pinned:
        W = normalize(W.xreplace(pinned))
    vs = spec.velocity_symbols()
    eqs = [normalize(sp.diff(W, s)) for s in vs]
    try:
        sol = solve_linear(eqs, vs)
    except Inconsistent as exc:
        raise Degenerate(exc.conditions, target) from None
    vstar = sol.particular
    H = normalize(W.xreplace(vstar))
    for b in sol.basis:
        # W must be flat along undetermined velocity directions
        t = sp.Dummy("t")
        shifted = normalize(W.xreplace({s: vstar[s] + t * b[s] for s in vs}))
        if normalize(shifted - H) != 0:
            raise Degenerate([normalize(sp.diff(shifted, t))], target)
    return LegendreResult(spec=spec, space=space, target=target, H=H, W=W, v_of_p=vstar,
                          v_kernel=sol.basis, guards=irreducible_factors(sol.guards))


def hamiltonian_at(spec: LagrangianSpec, point: Mapping[str, float], guess: Mapping[str, float],
                   target: str | None = None, tol: float = 1e-12, maxiter: int = 50) -> float:
    """Numeric H at one point by damped Newton on dW/dv = 0."""
    space = build_space(spec, target)
    W = w_function(spec, space)
    vs = spec.velocity_symbols()
    sub = {var(k): sp.sympify(x) for k, x in point.items()}
    Wp = W.xreplace(sub)
    grad = [sp.diff(Wp, s) for s in vs]
    hess = [[sp.diff(g, s) for s in vs] for g in grad]
    left = (Wp.free_symbols | set().union(*[g.free_symbols for g in grad])) - set(vs)
    if left:
        raise ValueError(f"point leaves {sorted(map(str, left))} unassigned")
    fg = sp.lambdify(vs, grad, "numpy")
    fh = sp.lambdify(vs, hess, "numpy")
    fw = sp.lambdify(vs, Wp, "numpy")
    x = np.array([float(guess.get(str(s), 0.0)) for s in vs])
    for _ in range(maxiter):
        g = np.asarray(fg(*x), dtype=float)
        if np.linalg.norm(g) < tol:
            return float(fw(*x))
        step = np.linalg.lstsq(np.asarray(fh(*x), dtype=float), -g, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            if np.linalg.norm(np.asarray(fg(*trial), dtype=float)) < np.linalg.norm(g):
                break
            lam /= 2
        x = x + lam * step
    g = np.asarray(fg(*x), dtype=float)
    if np.linalg.norm(g) >= tol:
        raise Degenerate([f"Newton residual {np.linalg.norm(g):.3e}"], target or spec.target)
    return float(fw(*x))


def verify_duality(result: LegendreResult, point: Mapping | None = None) -> dict[str, sp.Expr]:
    """dH/dc minus dW/dc at v = v*(p), for every momentum coordinate c.

    Both sides are the component of z along the direction c, so every entry
    must vanish.  With ``point`` the residuals are evaluated there.
    """
    sub = {}
    if point is not None:
        result.check_domain(point)
        sub = {var(k) if isinstance(k, str) else k: sp.sympify(x) for k, x in point.items()}
    out = {}
    for nm in result.space.p_names:
        c = var(nm)
        r = sp.diff(result.H, c) - sp.diff(result.W, c).xreplace(result.v_of_p)
        out[nm] = normalize(r.xreplace(sub)) if sub else normalize(r)
    return out


def pseudofiber_level(spec: LagrangianSpec, q: Mapping, v: Mapping, h,
                      result: LegendreResult | None = None,
                      free: Mapping[str, object] | None = None) -> dict[str, sp.Expr]:
    """A momentum in P^h_q(z): p0 + lambda*omega with lambda = h - H(q, p0).

    Free parameters other than e default to 1 (so that r != 0 on the full
    n = k = 2 chart); override with ``free``.
    """
    result = result or hamiltonian(spec)
    sol = enlarged_pseudofiber(spec, q, v, space=result.space)
    free = {var(k): sp.sympify(x) for k, x in (free or {}).items()}
    e = var("e")
    params = []
    for b in sol.basis:
        lead = [u for u in sol.unknowns if b[u] == 1 and all(b2[u] == 0 for b2 in sol.basis if b2 is not b)]
        u = lead[0] if lead else None
        params.append(0 if u == e else free.get(u, 1))
    p0 = sol.general(params)
    qsub = {var(k) if isinstance(k, str) else k: sp.sympify(x) for k, x in q.items()}
    point = {**qsub, **p0}
    H0 = result.at(point)
    lam = normalize(sp.sympify(h) - H0)
    p0[e] = normalize(p0[e] + lam)
    return {str(k): x for k, x in p0.items()}


# --------------------------------------------------------------------------
# example library

def _grid_names(n):
    return ["t"] if n == 1 else [f"x{m}" for m in range(1, n + 1)]


def _trivial(**_):
    return LagrangianSpec("trivial2x2", 2, 2, sp.Integer(0), ["x1", "x2"], ["y1", "y2"],
                          description="trivial variational problem, maps R^2 -> R^2")


def _dirichlet(target="full", **_):
    s = LagrangianSpec("dirichlet2x2", 2, 2, sp.Integer(0), ["x1", "x2"], ["y1", "y2"], target=target,
                       description="elliptic Dirichlet integral")
    s.L = sp.Rational(1, 2) * sum(s.v(i, mu) ** 2 for i in (1, 2) for mu in (1, 2))
    return s


def _maxwell2d(**_):
    s = LagrangianSpec("maxwell2d", 2, 2, sp.Integer(0), ["x1", "x2"], ["y1", "y2"],
                       description="Maxwell equations in two dimensions")
    s.L = -sp.Rational(1, 2) * (s.v(1, 2) - s.v(2, 1)) ** 2
    return s


def _point_mech(**_):
    s = LagrangianSpec("point_mech", 1, 1, sp.Integer(0), ["t"], ["q"], target="ddw",
                       description="harmonic oscillator")
    s.L = s.v(1, 1) ** 2 / 2 - var("q") ** 2 / 2
    return s


def _maxwell_names(n, groups, fiber_names, prefix):
    """Momentum names for dDW charts carrying gauge potentials.

    p^nu_{a_mu} is called p{mu}{nu} (or pi{I}_{mu}{nu}) for mu < nu; the
    other ones are eliminated by the Maxwell restriction.
    """
    names = {}
    disp = {}
    for gi, grp in enumerate(groups):
        for mu, pos in grp.items():
            for nu in range(1, n + 1):
                tag = prefix(gi)
                if mu < nu:
                    nm = f"{tag}{mu}{nu}" if not tag.startswith("pi") else f"{tag}_{mu}{nu}"
                    d = (f"p^{{{mu}{nu}}}" if not tag.startswith("pi")
                         else f"π^{{{mu}{nu}}}_{tag[2:]}")
                else:
                    nm = f"q{nu}_{fiber_names[pos - 1]}"
                    d = nm
                names[(nu, pos)] = nm
                disp[nm] = d
    return names, disp


def _maxwell4d(n=4, metric=None, **_):
    base = _grid_names(n)
    fiber = [f"a{m}" for m in range(1, n + 1)]
    eta = metric or [-1] + [1] * (n - 1)
    groups = [{mu: mu for mu in range(1, n + 1)}]
    names, disp = _maxwell_names(n, groups, fiber, lambda g: "p")
    js = [var(f"j{m}") for m in range(1, n + 1)]
    s = LagrangianSpec("maxwell4d", n, n, sp.Integer(0), base, fiber, target="maxwell", metric=eta,
                       params={"constants": js, "current": js}, momentum_names=names,
                       gauge_groups=groups, display=disp,
                       description="Maxwell equations on Minkowski space-time with a source current")
    F = lambda mu, nu: s.v(nu, mu) - s.v(mu, nu)  # d_mu a_nu - d_nu a_mu
    L = -sp.Rational(1, 4) * sum(eta[m] * eta[l] * F(m + 1, l + 1) ** 2 for m in range(n) for l in range(n))
    L -= sum(js[m] * var(fiber[m]) for m in range(n))
    s.L = L
    return s


def _ymh(n=2, metric=None, **_):
    base = _grid_names(n)
    eta = metric or [1] * n
    fiber = [f"a{I}_{mu}" for I in (1, 2, 3) for mu in range(1, n + 1)] + ["phi1", "phi2", "phi3"]
    k = len(fiber)
    groups = [{mu: (I - 1) * n + mu for mu in range(1, n + 1)} for I in (1, 2, 3)]
    names, disp = _maxwell_names(n, groups, fiber, lambda g: f"pi{g + 1}")
    for mu in range(1, n + 1):
        for i in (1, 2, 3):
            names[(mu, 3 * n + i)] = f"p{mu}_{i}"
            disp[f"p{mu}_{i}"] = f"p^{mu}_{i}"
    V = FunctionSymbol("V", 3)
    a = lambda I, mu: var(f"a{I}_{mu}")
    phi = [var(f"phi{i}") for i in (1, 2, 3)]
    eps = lambda i, j, l: sp.LeviCivita(i, j, l)
    s = LagrangianSpec("ymh", n, k, sp.Integer(0), base, fiber, target="maxwell", metric=eta,
                       params={"potential": V, "structure": "su(2)"}, momentum_names=names,
                       gauge_groups=groups, display=disp,
                       description="Yang-Mills-Higgs, gauge group SU(2), adjoint Higgs field")
    da = lambda I, mu, nu: s.v((I - 1) * n + nu, mu)  # d_mu a^I_nu
    dphi = lambda i, mu: s.v(3 * n + i, mu)

    def F(I, mu, nu):
        br = sum(eps(I, J, K) * a(J, mu) * a(K, nu) for J in (1, 2, 3) for K in (1, 2, 3))
        return da(I, mu, nu) - da(I, nu, mu) + br

    def cov(i, mu):
        return dphi(i, mu) + sum(eps(i, J, l) * a(J, mu) * phi[l - 1] for J in (1, 2, 3) for l in (1, 2, 3))

    F2 = sum(eta[m - 1] * eta[l - 1] * F(I, m, l) ** 2
             for I in (1, 2, 3) for m in range(1, n + 1) for l in range(1, n + 1))
    D2 = sum(eta[m - 1] * cov(i, m) ** 2 for i in (1, 2, 3) for m in range(1, n + 1))
    s.L = -sp.Rational(1, 4) * F2 + sp.Rational(1, 2) * D2 + V(*phi)
    return s


def _cscalar(n=2, metric=None, m2=None, **_):
    base = _grid_names(n)
    eta = metric or [-1] + [1] * (n - 1)
    phi = [var("phi1"), var("phi2")]
    s = LagrangianSpec("cscalar", n, 2, sp.Integer(0), base, ["phi1", "phi2"], target="ddw", metric=eta,
                       description="complex scalar field with U(1)-invariant potential")
    sq = (phi[0] ** 2 + phi[1] ** 2) / 2
    if m2 is None:
        V = FunctionSymbol("V", 1)
        s.params["potential"] = V
        pot = V(sq)
    else:
        s.params["m2"] = sp.sympify(m2)
        s.params["constants"] = [c for c in sp.sympify(m2).free_symbols]
        pot = sp.sympify(m2) * sq
    s.L = sp.Rational(1, 2) * sum(eta[m - 1] * s.v(a, m) ** 2 for a in (1, 2) for m in range(1, n + 1)) + pot
    return s


def _cscalar_gauged(n=2, metric=None, **_):
    base = _grid_names(n)
    eta = metric or [-1] + [1] * (n - 1)
    fiber = ["phi1", "phi2"] + [f"a{m}" for m in range(1, n + 1)]
    groups = [{mu: 2 + mu for mu in range(1, n + 1)}]
    names, disp = _maxwell_names(n, groups, fiber, lambda g: "p")
    for mu in range(1, n + 1):
        for i in (1, 2):
            names[(mu, i)] = f"p{mu}_{i}"
            disp[f"p{mu}_{i}"] = f"p^{mu}_{i}"
    V = FunctionSymbol("V", 1)
    s = LagrangianSpec("cscalar_gauged", n, n + 2, sp.Integer(0), base, fiber, target="maxwell",
                       metric=eta, params={"potential": V}, momentum_names=names, gauge_groups=groups,
                       display=disp, description="complex scalar field coupled to a U(1) gauge potential")
    p1, p2 = var("phi1"), var("phi2")
    a = lambda mu: var(f"a{mu}")
    # D_mu phi = d_mu phi + i a_mu phi, split into real and imaginary parts
    re_ = lambda mu: s.v(1, mu) - a(mu) * p2
    im_ = lambda mu: s.v(2, mu) + a(mu) * p1
    F = lambda mu, nu: s.v(2 + nu, mu) - s.v(2 + mu, nu)
    L = sp.Rational(1, 2) * sum(eta[m - 1] * (re_(m) ** 2 + im_(m) ** 2) for m in range(1, n + 1))
    L -= sp.Rational(1, 4) * sum(eta[m - 1] * eta[l - 1] * F(m, l) ** 2
                                 for m in range(1, n + 1) for l in range(1, n + 1))
    s.L = L + V((p1 ** 2 + p2 ** 2) / 2)
    return s


def _scalar(n=2, metric=None, m2=None, **_):
    """Real scalar field, the setting of the one-fiber observable examples."""
    base = _grid_names(n)
    eta = metric or [-1] + [1] * (n - 1)
    s = LagrangianSpec("scalar", n, 1, sp.Integer(0), base, ["y"], target="ddw", metric=eta,
                       momentum_names={(mu, 1): f"p{mu}" for mu in range(1, n + 1)},
                       display={f"p{mu}": f"p^{mu}" for mu in range(1, n + 1)},
                       description="real scalar field with potential")
    y = var("y")
    if m2 is None:
        V = FunctionSymbol("V", 1)
        s.params["potential"] = V
        pot = V(y)
    else:
        s.params["m2"] = sp.sympify(m2)
        pot = sp.sympify(m2) * y ** 2 / 2
    s.L = sp.Rational(1, 2) * sum(eta[m - 1] * s.v(1, m) ** 2 for m in range(1, n + 1)) + pot
    return s


EXAMPLES: dict[str, Callable[..., LagrangianSpec]] = {
    "trivial2x2": _trivial,
    "dirichlet2x2": _dirichlet,
    "maxwell2d": _maxwell2d,
    "maxwell4d": _maxwell4d,
    "ymh": _ymh,
    "cscalar": _cscalar,
    "cscalar_gauged": _cscalar_gauged,
    "point_mech": _point_mech,
    "scalar": _scalar,
}


def example(name: str, **options) -> LagrangianSpec:
    try:
        build = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(EXAMPLES)}") from None
    return build(**options).validate()


def ddw_library() -> dict[str, LegendreResult]:
    """The de Donder-Weyl Hamiltonians of the shipped field theories."""
    return {nm: hamiltonian(example(nm))
            for nm in ("point_mech", "cscalar", "cscalar_gauged", "ymh", "maxwell4d")}
