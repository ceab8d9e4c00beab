"""Hamilton n-curves: pointwise classes, integration, curve families, deformations."""
from __future__ import annotations

import io
import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from . import _kernels
from .exterior import Chart, Form, Multivector, ext_d, interior_mv_form, pair, wedge, wedge_all
from .legendre import LegendreResult, hamiltonian, example, velocity_lift
from .multisympl import MultisymplecticSpace, build_lambda_n
from .symcore import Inconsistent, normalize, solve_linear, var

__all__ = [
    "DpHZero", "CFLViolation", "Unsupported", "HamiltonClass", "hamilton_class_at",
    "decomposable_class",
    "pseudofiber_direction", "TrivialFamilyCurve", "trivial_family_curve", "trivial_family_numeric_residual",
    "trivial_family_discrete", "DiscreteCurve", "integrate_ddw", "hamilton_residual",
    "deform_curve", "renormalize_level", "random_polynomial", "contract_numeric",
]

CURVE_FORMAT = "lepage-curve"
CURVE_VERSION = 1


class DpHZero(ValueError):
    pass


class CFLViolation(ValueError):
    pass


class Unsupported(ValueError):
    pass


def _sub(point: Mapping | None):
    return {var(k) if isinstance(k, str) else k: sp.sympify(v) for k, v in (point or {}).items()}


# --------------------------------------------------------------------------
# pointwise structure of [X]^H

@dataclass
class HamiltonClass:
    """Solutions X = X_1 ^ ... ^ X_n of X _| Omega = (-1)^n dH at one point.

    ``vectors`` depend linearly on the free ``params``; every assignment of
    the params gives a member of the class.  ``conditions`` must vanish at
    the point for the class to be nonempty (only for symbolic points).
    """

    space: MultisymplecticSpace
    H: sp.Expr
    point: dict
    empty: bool
    vectors: list[Multivector] = field(default_factory=list)
    params: list[sp.Symbol] = field(default_factory=list)
    conditions: list[sp.Expr] = field(default_factory=list)
    reason: str = ""
    target: Form | None = None

    def __bool__(self):
        return not self.empty

    def vectors_at(self, values: Mapping | None = None) -> list[Multivector]:
        vals = {p: sp.Integer(0) for p in self.params}
        vals.update({(sp.Symbol(k) if isinstance(k, str) else k): sp.sympify(v)
                     for k, v in (values or {}).items()})
        return [X.subs(vals) for X in self.vectors]

    def representative(self, values: Mapping | None = None) -> Multivector:
        return wedge_all(self.vectors_at(values))

    def random_values(self, rng: random.Random, size: int = 5) -> dict:
        return {p: sp.Rational(rng.randint(-size, size), rng.randint(1, 3)) for p in self.params}

    def residual(self, values: Mapping | None = None) -> Form:
        sub = _sub(self.point)
        X = self.representative(values)
        return interior_mv_form(X, self.space.omega.subs(sub)) - self.target


def _is_affine(e, us) -> bool:
    if not us:
        return True
    try:
        return sp.Poly(e, *us).total_degree() <= 1
    except sp.PolynomialError:
        return False


def _peel(eqs, unknowns):
    """Solve polynomial equations by repeatedly solving the affine ones.

    Returns (assignment, free unknowns, symbolic conditions) or raises
    Inconsistent when a numeric contradiction appears.
    """
    unknowns = set(unknowns)
    assign: dict = {}
    conditions = []
    counter = 0
    while True:
        eqs = [normalize(e) for e in eqs]
        eqs = [e for e in eqs if e != 0]
        rest = []
        for e in eqs:
            if e.free_symbols & unknowns:
                rest.append(e)
            elif e.is_Number:
                raise Inconsistent([e], {})
            else:
                conditions.append(e)
        eqs = rest
        if not eqs:
            break
        aff = [e for e in eqs if _is_affine(e, sorted(e.free_symbols & unknowns, key=str))]
        if not aff:
            raise Unsupported("Hamilton class is not resolvable by successive linear solves")
        us = sorted(set().union(*[e.free_symbols & unknowns for e in aff]), key=str)
        sol = solve_linear(aff, us)
        params = []
        for _ in sol.basis:
            counter += 1
            params.append(sp.Dummy(f"s{counter}"))
        rep = {}
        for u in us:
            val = sol.particular[u] + sum(t * b[u] for t, b in zip(params, sol.basis))
            rep[u] = normalize(val)
        assign = {k: normalize(v.xreplace(rep)) for k, v in assign.items()}
        assign.update(rep)
        unknowns -= set(us)
        unknowns |= set(params)
        eqs = [e.xreplace(rep) for e in eqs if e not in aff]
    return assign, unknowns, conditions


def _normalizing_momentum(space, dH_at):
    best = None
    for nm in space.p_names:
        c = dH_at.coeff(nm)
        if c == 0:
            continue
        if c.is_Number:
            return nm
        best = best or nm
    return best


def hamilton_class_at(space: MultisymplecticSpace, H, point: Mapping | None = None) -> HamiltonClass:
    """All decomposable X with X _| Omega = (-1)^n dH at ``point``.

    Coordinates missing from ``point`` stay symbolic (a generic point).
    The horizontal parts are normalized against a momentum p_I with
    dH/dp_I != 0: X_1 = k d_{I_1} + ..., X_mu = d_{I_mu} + ... for mu > 1.
    """
    H = sp.sympify(H)
    dH = ext_d(space.chart.scalar(H)).subs(_sub(point))
    if all(dH.coeff(nm) == 0 for nm in space.p_names):
        raise DpHZero("d_p H vanishes at the point")
    return decomposable_class(space, dH * ((-1) ** space.n), point, H=H)


def contract_decomposable(vectors: Sequence[Multivector], omega: Form) -> list[sp.Expr]:
    """Components of (X_1 ^ ... ^ X_n) _| omega without forming the wedge.

    Component a is omega(X_1, ..., X_n, e_a), a sum of n x n determinants.
    """
    n = len(vectors)
    cols = [[V.terms.get((i,), 0) for i in range(omega.chart.dim)] for V in vectors]
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(n))]
    out = [sp.Integer(0)] * omega.chart.dim
    for idx, coef in omega.terms.items():
        for s, a in enumerate(idx):
            rows = idx[:s] + idx[s + 1:]
            det = sp.Add(*[sg * sp.Mul(*[cols[p[r]][rows[r]] for r in range(n)]) for p, sg in perms])
            out[a] += (-1) ** (n - s) * coef * det
    return out


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def decomposable_class(space: MultisymplecticSpace, target: Form, point: Mapping | None = None,
                       H=None) -> HamiltonClass:
    """Decomposable n-vectors X with X _| Omega = target at the point."""
    sub = _sub(point)
    chart = space.chart
    n = space.n
    c = _normalizing_momentum(space, target)
    if c is None:
        raise DpHZero("target has no momentum component")
    I = list(space.momenta[c][0][1])
    others = [q for q in space.q_names if q not in I]
    kappa = sp.Dummy("k")
    unknowns = [kappa]
    vectors = []
    for mu in range(n):
        comps = {I[mu]: kappa if mu == 0 else sp.Integer(1)}
        for q in others:
            s = sp.Dummy(f"c{mu}{q}")
            comps[q] = s
            unknowns.append(s)
        for p in space.p_names:
            s = sp.Dummy(f"P{mu}{p}")
            comps[p] = s
            unknowns.append(s)
        vectors.append(chart.vector(comps))
    res = contract_decomposable(vectors, space.omega.subs(sub))
    eqs = [sp.expand(r - target.terms.get((a,), 0)) for a, r in enumerate(res)]
    H = sp.sympify(H) if H is not None else None
    try:
        assign, free, conds = _peel(eqs, unknowns)
    except Inconsistent as exc:
        return HamiltonClass(space, H, dict(point or {}), True,
                             reason=f"no decomposable solution: {exc.conditions[0]} = 0 is required",
                             target=target)
    free = sorted(free, key=lambda s: str(s))
    params = [sp.Symbol(f"τ{j + 1}") for j in range(len(free))]
    ren = dict(zip(free, params))
    full = {u: normalize(assign.get(u, u).xreplace(ren)) for u in unknowns}
    vecs = [V.map(lambda e: normalize(e.xreplace(full))) for V in vectors]
    return HamiltonClass(space, H, dict(point or {}), False, vecs, params,
                         [normalize(cnd) for cnd in conds], target=target)


def pseudofiber_direction(space: MultisymplecticSpace, H, point: Mapping | None = None,
                          cls: HamiltonClass | None = None) -> list[Multivector]:
    """Basis of L^H at the point.

    L^H is the set of xi with xi _| Omega vanishing on T_X D^n for every X in
    the class.  T_X D^n is spanned by replacing one factor X_mu by an
    arbitrary vector, so the condition reads (X minus X_mu) _| (xi _| Omega) = 0
    for all mu, identically in the class parameters.
    """
    cls = cls or hamilton_class_at(space, H, point)
    if cls.empty:
        return []
    chart = space.chart
    zs = [sp.Dummy(f"z{i}") for i in range(chart.dim)]
    xi = Multivector(chart, 1, {(i,): zs[i] for i in range(chart.dim)})
    omega = space.omega.subs(_sub(point))
    contr = interior_mv_form(xi, omega)
    eqs = []
    n = space.n
    for mu in range(n):
        rest = [V for j, V in enumerate(cls.vectors) if j != mu]
        Y = wedge_all(rest) if rest else chart.scalar(1, kind="mv")
        one = interior_mv_form(Y, contr)
        for e in one.terms.values():
            e = normalize(e)
            if cls.params and e.free_symbols & set(cls.params):
                eqs.extend(sp.Poly(e, *cls.params).coeffs())
            else:
                eqs.append(e)
    sol = solve_linear(eqs, zs)
    return [Multivector(chart, 1, {(i,): b[zs[i]] for i in range(chart.dim)}) for b in sol.basis]


# --------------------------------------------------------------------------
# explicit curves of the trivial 2x2 Lagrangian

@dataclass
class TrivialFamilyCurve:
    coords: dict[str, sp.Expr]
    residual: Form
    h: sp.Expr

    @property
    def is_hamiltonian(self) -> bool:
        return self.residual.is_zero()


def _trivial_setup():
    res = hamiltonian(example("trivial2x2"))
    return res.space, res.H


def trivial_family_coords(u1, u2, r, h) -> dict[str, sp.Expr]:
    x1, x2 = var("x1"), var("x2")
    u1, u2, r, h = map(sp.sympify, (u1, u2, r, h))
    d = lambda f, x: sp.diff(f, x)
    det = d(u1, x1) * d(u2, x2) - d(u1, x2) * d(u2, x1)
    return {
        "x1": x1, "x2": x2, "y1": u1, "y2": u2,
        "e": r * det + h,
        "p1_1": -r * d(u2, x2), "p1_2": r * d(u1, x2),
        "p2_1": r * d(u2, x1), "p2_2": -r * d(u1, x1),
        "r": r,
    }


def curve_tangents(space: MultisymplecticSpace, coords: Mapping[str, sp.Expr]) -> list[Multivector]:
    return [space.chart.vector({nm: sp.diff(coords[nm], var(b)) for nm in space.chart.names})
            for b in space.base]


def symbolic_residual(space: MultisymplecticSpace, H, coords: Mapping[str, sp.Expr]) -> Form:
    """X _| Omega - (-1)^n dH along a parametrized curve, X = d_1 Gamma ^ ... ^ d_n Gamma."""
    on = {var(k): v for k, v in coords.items()}
    X = wedge_all(curve_tangents(space, coords))
    dH = ext_d(space.chart.scalar(H)).subs(on)
    return interior_mv_form(X, space.omega.subs(on)) - dH * ((-1) ** space.n)


def trivial_family_curve(u1, u2, r, h=0) -> TrivialFamilyCurve:
    """The curve built from arbitrary u and nowhere-zero r, with its residual."""
    if normalize(r) == 0:
        raise ValueError("r must not vanish identically")
    space, H = _trivial_setup()
    coords = trivial_family_coords(u1, u2, r, h)
    return TrivialFamilyCurve(coords, symbolic_residual(space, H, coords), sp.sympify(h))


def random_polynomial(rng: random.Random, variables: Sequence, degree: int = 2, size: int = 4,
                      constant: object = None) -> sp.Expr:
    """Random polynomial with small rational coefficients."""
    out = sp.Integer(0)
    vs = [var(v) if isinstance(v, str) else v for v in variables]
    for powers in np.ndindex(*([degree + 1] * len(vs))):
        if sum(powers) > degree:
            continue
        c = sp.Rational(rng.randint(-size, size), rng.randint(1, size))
        out += c * sp.Mul(*[v ** k for v, k in zip(vs, powers)])
    if constant is not None:
        out = out - out.subs({v: 0 for v in vs}) + sp.sympify(constant)
    return out


def contract_numeric(omega_terms, vectors: list[np.ndarray]) -> np.ndarray:
    """(X_1 ^ ... ^ X_n) _| Omega componentwise, via determinants.

    ``omega_terms`` is a list of (index tuple, coefficient array); vectors are
    arrays of shape (..., N).  Component a equals Omega(X_1, ..., X_n, e_a).
    """
    shape = vectors[0].shape[:-1]
    N = vectors[0].shape[-1]
    out = np.zeros(shape + (N,))
    n = len(vectors)
    for idx, coef in omega_terms:
        idx = list(idx)
        cols = np.stack([V[..., idx] for V in vectors], axis=-1)  # (..., n+1, n)
        for s, a in enumerate(idx):
            unit = np.zeros(shape + (n + 1, 1))
            unit[..., s, 0] = 1.0
            M = np.concatenate([cols, unit], axis=-1)
            out[..., a] += coef * np.linalg.det(M)
    return out


def trivial_family_numeric_residual(u1, u2, r, h=0, grid: int = 32, extent=(0.0, 1.0)) -> float:
    """Max |X _| Omega - dH| on a grid, evaluated with numeric determinants."""
    space, H = _trivial_setup()
    coords = trivial_family_coords(u1, u2, r, h)
    x1, x2 = var("x1"), var("x2")
    xs = np.linspace(extent[0], extent[1], grid)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    names = space.chart.names
    ev = lambda e: np.broadcast_to(np.asarray(sp.lambdify([x1, x2], e, "numpy")(X1, X2), dtype=float),
                                   X1.shape)
    vals = {nm: ev(coords[nm]) for nm in names}
    tang = [np.stack([ev(sp.diff(coords[nm], b)) for nm in names], axis=-1) for b in (x1, x2)]
    omega_terms = [(k, float(c)) for k, c in space.omega.terms.items()]
    lhs = contract_numeric(omega_terms, tang)
    syms = [var(nm) for nm in names]
    dH = np.stack([np.broadcast_to(np.asarray(sp.lambdify(syms, sp.diff(H, s), "numpy")(
        *[vals[nm] for nm in names]), dtype=float), X1.shape) for s in syms], axis=-1)
    return float(np.max(np.abs(lhs - dH)))


# --------------------------------------------------------------------------
# discrete curves

def _fd4(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points for 4th-order differences")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def _spectral(f: np.ndarray, period: float, axis: int) -> np.ndarray:
    n = f.shape[axis]
    k = np.fft.rfftfreq(n, d=period / n) * 2 * np.pi
    F = np.fft.rfft(f, axis=axis)
    shape = [1] * f.ndim
    shape[axis] = -1
    F = F * (1j * k).reshape(shape)
    if n % 2 == 0:
        idx = [slice(None)] * f.ndim
        idx[axis] = -1
        F[tuple(idx)] = 0
    return np.fft.irfft(F, n=n, axis=axis)


@dataclass
class DiscreteCurve:
    """A sampled n-curve: a regular grid in the base coordinates and the values
    of every chart coordinate at each grid point."""

    axes: list[str]
    grids: list[np.ndarray]
    boundary: list[str]
    values: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(g) for g in self.grids)

    @property
    def steps(self) -> list[float]:
        return [float(g[1] - g[0]) for g in self.grids]

    def period(self, axis: int) -> float:
        g = self.grids[axis]
        return float(len(g) * (g[1] - g[0]))

    def names(self) -> list[str]:
        return list(self.values)

    def derivative(self, name: str, axis: int) -> np.ndarray:
        """d(name)/d(axis): spectral on periodic axes, 4th order otherwise."""
        if name in self.axes:
            return np.full(self.shape, 1.0 if self.axes.index(name) == axis else 0.0)
        f = self.values[name]
        if self.boundary[axis] == "periodic":
            return _spectral(f, self.period(axis), axis)
        return _fd4(f, self.steps[axis], axis)

    def tangent(self, axis: int, names: Sequence[str]) -> np.ndarray:
        return np.stack([self.derivative(nm, axis) for nm in names], axis=-1)

    def omega_component(self) -> np.ndarray:
        """omega of the forward-difference tangent n-vector at each point."""
        cols = []
        for ax in range(self.n):
            rows = []
            for b in self.axes:
                f = self.values[b]
                d = np.roll(f, -1, axis=ax) - f
                if self.boundary[ax] == "periodic" and b == self.axes[ax]:
                    idx = [slice(None)] * self.n
                    idx[ax] = -1
                    d[tuple(idx)] += self.period(ax)
                rows.append(d / self.steps[ax])
            cols.append(np.stack(rows, axis=-1))
        M = np.stack(cols, axis=-1)
        det = np.linalg.det(M)
        # the last slab on non-periodic axes has no forward neighbour
        for ax in range(self.n):
            if self.boundary[ax] != "periodic":
                idx = [slice(None)] * self.n
                idx[ax] = -1
                det[tuple(idx)] = np.nan
        return det

    def check_positive(self) -> None:
        w = self.omega_component()
        bad = np.argwhere(~(np.isnan(w) | (w > 0)))
        if len(bad):
            raise ValueError(f"omega-positivity fails at grid index {tuple(bad[0])}: {w[tuple(bad[0])]}")

    def copy(self) -> "DiscreteCurve":
        return DiscreteCurve(list(self.axes), [g.copy() for g in self.grids], list(self.boundary),
                             {k: v.copy() for k, v in self.values.items()}, dict(self.meta))

    # ---- serialization: '#' header with a JSON line, then one row per point
    def dumps(self) -> str:
        cols = list(self.values)
        header = {"format": CURVE_FORMAT, "version": CURVE_VERSION, "axes": self.axes,
                  "shape": list(self.shape), "origin": [float(g[0]) for g in self.grids],
                  "steps": self.steps, "boundary": self.boundary, "columns": cols,
                  "meta": self.meta}
        buf = io.StringIO()
        buf.write(f"# {CURVE_FORMAT} v{CURVE_VERSION}\n")
        buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
        data = np.stack([self.values[c].reshape(-1) for c in cols], axis=1)
        np.savetxt(buf, data, fmt="%.17g")
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "DiscreteCurve":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(f"# {CURVE_FORMAT} v"):
            raise ValueError("not a curve file")
        header = json.loads(lines[1][2:])
        if header.get("version") != CURVE_VERSION:
            raise ValueError(f"unsupported curve file version {header.get('version')}")
        shape = tuple(header["shape"])
        data = np.loadtxt(io.StringIO("\n".join(lines[2:])), ndmin=2)
        values = {c: data[:, i].reshape(shape) for i, c in enumerate(header["columns"])}
        grids = [o + s * np.arange(m) for o, s, m in zip(header["origin"], header["steps"], shape)]
        return cls(header["axes"], grids, header["boundary"], values, header.get("meta", {}))

    @classmethod
    def load(cls, path) -> "DiscreteCurve":
        with open(path) as fh:
            return cls.loads(fh.read())


def curve_from_exprs(space: MultisymplecticSpace, coords: Mapping[str, sp.Expr], grids: Sequence[np.ndarray],
                     boundary: Sequence[str] | None = None, meta: dict | None = None) -> DiscreteCurve:
    mesh = np.meshgrid(*grids, indexing="ij")
    bs = [var(b) for b in space.base]
    vals = {}
    for nm in space.chart.names:
        f = sp.lambdify(bs, coords[nm], "numpy")
        vals[nm] = np.broadcast_to(np.asarray(f(*mesh), dtype=float), mesh[0].shape).copy()
    return DiscreteCurve(list(space.base), [np.asarray(g, dtype=float) for g in grids],
                         list(boundary or ["fixed"] * space.n), vals, dict(meta or {}))


def trivial_family_discrete(u1, u2, r, h=0, grid: int = 32, extent=(0.0, 1.0)) -> DiscreteCurve:
    space, _ = _trivial_setup()
    xs = np.linspace(extent[0], extent[1], grid)
    return curve_from_exprs(space, trivial_family_coords(u1, u2, r, h), [xs, xs],
                            meta={"example": "trivial2x2", "h": float(sp.sympify(h))})


def _eval_on(curve: DiscreteCurve, names: Sequence[str], expr) -> np.ndarray:
    f = sp.lambdify([var(nm) for nm in names], expr, "numpy")
    return np.broadcast_to(np.asarray(f(*[curve.values[nm] for nm in names]), dtype=float),
                           curve.shape)


def hamilton_residual(curve: DiscreteCurve, space: MultisymplecticSpace, H,
                      interior_only: bool = False) -> float:
    """Max over the grid of |X _| Omega - (-1)^n dH| with X from discrete tangents."""
    names = space.chart.names
    tang = [curve.tangent(ax, names) for ax in range(curve.n)]
    terms = [(k, _eval_on(curve, names, c)) for k, c in space.omega.terms.items()]
    lhs = contract_numeric(terms, tang)
    dH = np.stack([_eval_on(curve, names, sp.diff(sp.sympify(H), var(nm))) for nm in names], axis=-1)
    res = np.abs(lhs - ((-1) ** space.n) * dH)
    if interior_only:
        sl = tuple(slice(2, -2) if b != "periodic" else slice(None) for b in curve.boundary)
        res = res[sl]
    return float(np.max(res))


# --------------------------------------------------------------------------
# deformations

def _kernel_equations(space: MultisymplecticSpace, spec):
    """Homogeneous pseudofiber equations: d/dv <z(v), p> = 0 (linear in p)."""
    z = velocity_lift(spec, chart=space.base_chart())
    pz = pair(z, space.momentum_form())
    return [normalize(sp.diff(pz, s)) for s in spec.velocity_symbols()]


def _velocity_values(curve: DiscreteCurve, spec) -> dict[str, np.ndarray]:
    out = {}
    for i, y in enumerate(spec.fiber, start=1):
        for mu in range(1, spec.n + 1):
            out[str(spec.v(i, mu))] = curve.derivative(y, mu - 1)
    return out


def deform_curve(curve, section: Mapping[str, object], space: MultisymplecticSpace | None = None,
                 spec=None, tol: float = 1e-9):
    """Add a section of (T_z D^omega)^perp to the momenta of a curve.

    Works on a DiscreteCurve (section values are arrays) or on a symbolic
    coordinate map (section values are expressions).  The section is checked
    against the homogeneous pseudofiber equations at every point.
    """
    spec = spec or example("trivial2x2")
    space = space or build_lambda_n(spec.n, spec.k, spec.base, spec.fiber)
    eqs = _kernel_equations(space, spec)
    if isinstance(curve, DiscreteCurve):
        vv = _velocity_values(curve, spec)
        env = {**vv, **{nm: np.broadcast_to(np.asarray(section.get(nm, 0.0), dtype=float), curve.shape)
                        for nm in space.p_names}}
        syms = sorted({str(s) for e in eqs for s in e.free_symbols})
        worst = 0.0
        for e in eqs:
            f = sp.lambdify([var(s) for s in syms], e, "numpy")
            worst = max(worst, float(np.max(np.abs(f(*[env[s] for s in syms])))))
        if worst > tol:
            raise ValueError(f"section leaves the pseudofiber kernel (defect {worst:.3e})")
        out = curve.copy()
        for nm in space.p_names:
            if nm in section:
                out.values[nm] = out.values[nm] + np.asarray(section[nm], dtype=float)
        return out
    coords = {k: sp.sympify(v) for k, v in curve.items()}
    vsub = {}
    for i, y in enumerate(spec.fiber, start=1):
        for mu, b in enumerate(spec.base, start=1):
            vsub[spec.v(i, mu)] = sp.diff(coords[y], var(b))
    psub = {var(nm): sp.sympify(section.get(nm, 0)) for nm in space.p_names}
    for e in eqs:
        if normalize(e.xreplace({**vsub, **psub})) != 0:
            raise ValueError("section leaves the pseudofiber kernel")
    return {k: (normalize(v + sp.sympify(section[k])) if k in section else v) for k, v in coords.items()}


def renormalize_level(curve, H, h, names: Sequence[str] | None = None):
    """Shift e by (h - H) so that the curve lies in H = h (the choice pi = (h-H) omega)."""
    H = sp.sympify(H)
    if isinstance(curve, DiscreteCurve):
        names = names or list(curve.values)
        out = curve.copy()
        out.values["e"] = out.values["e"] + (float(h) - _eval_on(curve, names, H))
        return out
    on = {var(k): sp.sympify(v) for k, v in curve.items()}
    out = dict(curve)
    out["e"] = normalize(sp.sympify(curve["e"]) + sp.sympify(h) - H.xreplace(on))
    return out


# --------------------------------------------------------------------------
# integration of the de Donder-Weyl equations

def _ddw_quadratic(result: LegendreResult):
    """Split H = e + sum_mu a_mu (p^mu_i)^2 / 2 + G(y); returns (a, G)."""
    space = result.space
    e = var("e")
    n = space.n
    H = result.H
    if normalize(sp.diff(H, e) - 1) != 0:
        raise Unsupported("H must be e + H(q, p*)")
    mom = {}
    for nm, ((mus, iis)) in space.alias_info.items():
        if len(mus) == 1:
            mom[(mus[0], iis[0])] = var(nm)
    ps = list(mom.values())
    a = []
    for mu in range(1, n + 1):
        coeffs = {normalize(sp.diff(H, mom[(mu, i)], 2)) for i in range(1, space.k + 1)}
        if len(coeffs) != 1 or not next(iter(coeffs)).is_Number:
            raise Unsupported("kinetic term must be diagonal with constant coefficients")
        a.append(float(next(iter(coeffs))))
    G = normalize(H - e - sum(sp.Rational(a[mu - 1]).limit_denominator() * mom[(mu, i)] ** 2 / 2
                              for mu in range(1, n + 1) for i in range(1, space.k + 1)))
    if G.free_symbols & set(ps):
        raise Unsupported("H must be separable: e + quadratic(p) + G(y)")
    if G.free_symbols & {var(b) for b in space.base}:
        raise Unsupported("explicit dependence on the base coordinates is not supported")
    return a, G, mom


def integrate_ddw(result: LegendreResult, initial: Mapping[str, object], *, h: float = 0.0,
                  t_span: tuple[float, float] | None = None, dt: float | None = None,
                  grid: tuple[int, int] | None = None, length: float = 2 * np.pi,
                  t_max: float | None = None) -> DiscreteCurve:
    """March the Hamilton equations d_mu y = dH/dp^mu, sum d_mu p^mu = -dH/dy.

    n = 1: classic RK4 on (y, p) with ``initial`` = {fiber: y0, momentum: p0}.
    n = 2: leapfrog with x^1 as time, periodic in x^2; ``initial`` maps each
    fiber name to (u(0, x), d_t u(0, x)) callables.  ``grid`` = (nt, nx) is
    the number of time steps and of space points.  In both cases e is set so
    that H = h exactly.
    """
    space = result.space
    n = space.n
    a, G, mom = _ddw_quadratic(result)
    fibers = space.fiber
    ys = [var(f) for f in fibers]
    dG = [normalize(sp.diff(G, y)) for y in ys]
    if n == 1:
        t0, t1 = t_span or (0.0, 1.0)
        if dt is None:
            raise ValueError("dt is required")
        steps = int(round((t1 - t0) / dt))
        ps = [mom[(1, i)] for i in range(1, len(fibers) + 1)]
        t = sp.Symbol("t")
        rhs = [a[0] * p for p in ps] + [-g for g in dG]
        f = _kernels.compile_vector([t] + ys + ps, rhs)
        y0 = [float(initial[f_]) for f_ in fibers] + [float(initial[str(p)]) for p in ps]
        traj = _kernels.rk4(f, np.array(y0), t0, dt, steps)
        tg = t0 + dt * np.arange(steps + 1)
        vals = {"t" if space.base[0] == "t" else space.base[0]: tg}
        for j, nm in enumerate(fibers + [str(p) for p in ps]):
            vals[nm] = traj[:, j]
        curve = DiscreteCurve(list(space.base), [tg], ["fixed"], vals,
                              {"scheme": "rk4", "dt": dt, "h": h, "backend": _kernels.backend()})
        names = space.chart.names
        curve.values["e"] = np.zeros(curve.shape)
        curve.values["e"] = float(h) - (_eval_on(curve, names, result.H) - curve.values["e"])
        curve.values = {nm: curve.values[nm] for nm in names}
        return curve
    if n != 2:
        raise Unsupported("integration is implemented for n = 1 and n = 2")
    if grid is None:
        raise ValueError("grid = (nt, nx) is required")
    nt, nx = grid
    a1, a2 = a
    if a1 * a2 >= 0:
        raise Unsupported("Hamilton system is not hyperbolic in x^1 (need a Lorentzian metric)")
    c = np.sqrt(-a1 / a2)
    dx = length / nx
    if t_max is None:
        t_max = nt * 0.5 * dx
    step = t_max / nt
    if step * c > dx * (1 + 1e-12):
        raise CFLViolation(f"dt*c = {step * c:.4g} exceeds dx = {dx:.4g}")
    x = dx * np.arange(nx)
    u0 = np.array([np.asarray(initial[f_][0](x), dtype=float) * np.ones(nx) for f_ in fibers])
    ut0 = np.array([np.asarray(initial[f_][1](x), dtype=float) * np.ones(nx) for f_ in fibers])
    p0 = ut0 / a1
    force = _kernels.compile_force(ys, dG)
    us, p1s = _kernels.leapfrog(force, u0, p0, step, dx, a1, a2, nt)
    tg = step * np.arange(nt + 1)
    T, X = np.meshgrid(tg, x, indexing="ij")
    vals = {space.base[0]: T, space.base[1]: X}
    for i, f_ in enumerate(fibers):
        vals[f_] = us[:, i, :]
        vals[str(mom[(1, i + 1)])] = p1s[:, i, :]
        ux = (np.roll(us[:, i, :], -1, axis=1) - np.roll(us[:, i, :], 1, axis=1)) / (2 * dx)
        vals[str(mom[(2, i + 1)])] = ux / a2
    curve = DiscreteCurve(list(space.base), [tg, x], ["fixed", "periodic"], vals,
                          {"scheme": "leapfrog", "dt": step, "dx": dx, "h": h, "backend": _kernels.backend()})
    names = space.chart.names
    curve.values["e"] = np.zeros(curve.shape)
    curve.values["e"] = float(h) - _eval_on(curve, names, result.H)
    curve.values = {nm: curve.values[nm] for nm in names}
    return curve
