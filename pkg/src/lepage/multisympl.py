"""Multisymplectic spaces: Lambda^n T*N charts, restrictions, nondegeneracy."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import comb
from typing import Mapping, Sequence

import sympy as sp

from .exterior import Chart, Form, Multivector, ext_d, interior_mv_form, sort_sign, wedge
from .symcore import Inconsistent, normalize, solve_linear, var

__all__ = [
    "MultisymplecticSpace", "build_lambda_n", "build_ddw", "restrict", "restrict_form",
    "ddw_constraints", "maxwell_constraints", "nondegeneracy_check",
    "NondegeneracyVerdict", "SizeOverflow", "volume_form", "omega_mu",
]

MAX_MOMENTA = 5000


class SizeOverflow(ValueError):
    pass


@dataclass
class MultisymplecticSpace:
    """A chart of base and momentum coordinates with its (n+1)-form.

    ``momenta`` maps every momentum coordinate to a list of (sign, I) pairs
    meaning that the coordinate contributes sign * coordinate * dq^I to the
    tautological form.  For a Lambda^n chart each list has one entry; after a
    signed identification a coordinate may carry several.
    """

    chart: Chart
    n: int
    base: list[str]
    fiber: list[str]
    omega: Form
    theta: Form | None = None
    momenta: dict[str, list[tuple[int, tuple[str, ...]]]] = field(default_factory=dict)
    constraints: dict[str, sp.Expr] = field(default_factory=dict)
    kind: str = "custom"
    alias_info: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.fiber)

    @property
    def q_names(self) -> list[str]:
        return self.base + self.fiber

    @property
    def p_names(self) -> list[str]:
        return [nm for nm in self.chart.names if nm not in self.q_names]

    @property
    def dim(self) -> int:
        return self.chart.dim

    def sym(self, name):
        return self.chart.sym(name)

    def volume(self) -> Form:
        return self.chart.d(*self.base)

    def omega_mu(self, *mus: int) -> Form:
        """omega_{mu1...} = (d_mu1 ^ ...) _| omega, with 1-based base indices."""
        X = self.chart.partial(*[self.base[m - 1] for m in mus])
        return interior_mv_form(X, self.volume())

    def base_chart(self) -> Chart:
        return Chart(self.q_names)

    def momentum_form(self) -> Form:
        """The point p of Lambda^n T*_q N as an n-form on the base chart."""
        N = self.base_chart()
        t: dict = {}
        for name, entries in self.momenta.items():
            for sign, idx in entries:
                s, key = sort_sign([N.index[q] for q in idx])
                t[key] = t.get(key, 0) + s * sign * self.sym(name)
        return Form(N, self.n, t)

    def raw_momentum(self, idx: Sequence[str]) -> sp.Expr:
        """The antisymmetric symbol p_{idx} written in this chart's coordinates."""
        N = self.base_chart()
        s, key = sort_sign([N.index[q] for q in idx])
        if not s:
            return sp.Integer(0)
        mf = self.momentum_form()
        return s * mf.terms.get(key, sp.Integer(0))

    def vertical_lift(self, p: Form) -> Multivector:
        """Vertical vector on M whose momentum components represent p.

        Works on every space whose tautological form pairs coordinates with
        multi-indices one to one up to sign.
        """
        comps = {}
        N = self.base_chart()
        p = p.transfer(N) if p.chart != N else p
        for name, entries in self.momenta.items():
            sign, idx = entries[0]
            s, key = sort_sign([N.index[q] for q in idx])
            comps[name] = s * sign * p.terms.get(key, sp.Integer(0)) / len(entries)
        return self.chart.vector(comps)

    def form_of_vertical(self, xi: Multivector) -> Form:
        """Inverse of vertical_lift: the n-form on N carried by a vertical vector."""
        N = self.base_chart()
        t: dict = {}
        for name, entries in self.momenta.items():
            c = xi.coeff(name)
            for sign, idx in entries:
                s, key = sort_sign([N.index[q] for q in idx])
                t[key] = t.get(key, 0) + s * sign * c
        return Form(N, self.n, t)

    def is_nondegenerate(self) -> bool:
        return nondegeneracy_check(self).nondegenerate

    def render_name(self, name):
        return self.chart.display.get(name, name)


# --------------------------------------------------------------------------
# names for the Lambda^n chart

def _default_names(n, k, base, fiber):
    if base is None:
        base = ["t"] if n == 1 else [f"x{m}" for m in range(1, n + 1)]
    if fiber is None:
        fiber = ["y"] if (n == 1 and k == 1) else [f"y{i}" for i in range(1, k + 1)]
    return list(base), list(fiber)


def _alias_name(n, k, mus, iis):
    if not mus:
        return "e"
    if n == 1:
        return "p" if k == 1 else f"p{iis[0]}"
    if n == 2 and k == 2 and len(mus) == 2:
        return "r"
    return "p" + "".join(map(str, mus)) + "_" + "".join(map(str, iis))


def _alias_display(name, mus, iis):
    if not mus or name in ("e", "r", "p"):
        return name
    return "p^" + "".join(map(str, mus)) + "_" + "".join(map(str, iis))


def volume_form(chart: Chart, base: Sequence[str]) -> Form:
    return chart.d(*base)


def omega_mu(chart: Chart, base: Sequence[str], *mus: int) -> Form:
    return interior_mv_form(chart.partial(*[base[m - 1] for m in mus]), chart.d(*base))


def build_lambda_n(n: int, k: int, base: Sequence[str] | None = None,
                   fiber: Sequence[str] | None = None) -> MultisymplecticSpace:
    """Open chart of Lambda^n T*N for N = R^n x R^k.

    Momentum coordinates are named after the replaced slots: ``e`` is
    p_{1..n}, ``p{mu}_{i}`` replaces slot mu by fiber i (the sign of that
    replacement relative to the sorted multi-index is absorbed into the
    tautological form), and so on for several slots; ``r`` for n = k = 2.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    total = comb(n + k, n)
    if total > MAX_MOMENTA:
        raise SizeOverflow(f"{total} momentum coordinates exceed the budget")
    base, fiber = _default_names(n, k, base, fiber)
    q = base + fiber
    momenta: dict = {}
    display: dict = {}
    alias: dict = {}
    for J in itertools.combinations(range(n + k), n):
        kept = [a for a in J if a < n]
        mus = [m for m in range(n) if m not in kept]
        iis = [a - n for a in J if a >= n]
        slots = list(range(n))
        for mu, i in zip(mus, iis):
            slots[mu] = n + i
        sign, _ = sort_sign(slots)
        name = _alias_name(n, k, [m + 1 for m in mus], [i + 1 for i in iis])
        momenta[name] = [(sign, tuple(q[a] for a in J))]
        display[name] = _alias_display(name, [m + 1 for m in mus], [i + 1 for i in iis])
        alias[name] = (tuple(m + 1 for m in mus), tuple(i + 1 for i in iis))
    # order: q, then e, then by number of replaced slots
    pnames = sorted(momenta, key=lambda nm: (len(alias[nm][0]), alias[nm]))
    chart = Chart(q + pnames, roles={**{b: "base" for b in base}, **{f: "fiber" for f in fiber},
                                     **{p: "momentum" for p in pnames}}, display=display)
    space = MultisymplecticSpace(chart=chart, n=n, base=base, fiber=fiber,
                                 omega=None, momenta=momenta, kind="lambda_n", alias_info=alias)
    theta = _theta(space)
    space.theta = theta
    space.omega = ext_d(theta)
    return space


def _theta(space: MultisymplecticSpace) -> Form:
    ch = space.chart
    t: dict = {}
    for name, entries in space.momenta.items():
        for sign, idx in entries:
            s, key = sort_sign([ch.index[a] for a in idx])
            t[key] = t.get(key, 0) + s * sign * ch.sym(name)
    return Form(ch, space.n, t)


def build_ddw(base: Sequence[str], fiber: Sequence[str],
              momentum_names: Mapping[tuple[int, int], str] | None = None,
              energy: str = "e", extra_display: Mapping[str, str] | None = None) -> MultisymplecticSpace:
    """The de Donder-Weyl chart built directly: theta = e w + p^mu_i dy^i ^ w_mu."""
    base, fiber = list(base), list(fiber)
    n, k = len(base), len(fiber)
    names = {}
    for mu in range(1, n + 1):
        for i in range(1, k + 1):
            names[(mu, i)] = (momentum_names or {}).get((mu, i), f"p{mu}_{i}" if n > 1 else
                                                        ("p" if k == 1 else f"p{i}"))
    momenta: dict = {energy: [(1, tuple(base))]}
    display = {energy: energy}
    alias = {energy: ((), ())}
    for i in range(1, k + 1):
        for mu in range(1, n + 1):
            idx = list(base)
            idx[mu - 1] = fiber[i - 1]
            nm = names[(mu, i)]
            momenta[nm] = [(1, tuple(idx))]
            display[nm] = f"p^{mu}_{i}" if n > 1 else nm
            alias[nm] = ((mu,), (i,))
    display.update(extra_display or {})
    pnames = [energy] + [names[(mu, i)] for mu in range(1, n + 1) for i in range(1, k + 1)]
    chart = Chart(base + fiber + pnames, display=display,
                  roles={**{b: "base" for b in base}, **{f: "fiber" for f in fiber},
                         **{p: "momentum" for p in pnames}})
    space = MultisymplecticSpace(chart=chart, n=n, base=base, fiber=fiber, omega=None,
                                 momenta=momenta, kind="ddw", alias_info=alias)
    space.theta = _theta(space)
    space.omega = ext_d(space.theta)
    return space


def ddw_constraints(space: MultisymplecticSpace) -> dict[str, int]:
    """Kill every momentum with two or more fiber slots."""
    return {nm: 0 for nm, (mus, _) in space.alias_info.items() if len(mus) >= 2}


def maxwell_constraints(space: MultisymplecticSpace, fiber_of_slot: Mapping[int, str] | None = None):
    """p^nu_{a_mu} = -p^mu_{a_nu} on a dDW-type space whose fiber is a_1..a_n.

    Keeps p^nu_{a_mu} for mu < nu (the Faraday momenta p^{mu nu}) and returns
    the substitution for the remaining ones.
    """
    n = space.n
    if space.k < n:
        raise ValueError("Maxwell restriction needs a fiber coordinate a_mu per base direction")
    fib = fiber_of_slot or {mu: mu for mu in range(1, n + 1)}
    by_alias = {v: nm for nm, v in space.alias_info.items()}
    sub: dict = {}
    for mu in range(1, n + 1):
        for nu in range(1, n + 1):
            nm = by_alias.get(((nu,), (fib[mu],)))
            if nm is None:
                continue
            if mu == nu:
                sub[nm] = 0
            elif mu > nu:
                other = by_alias[((mu,), (fib[nu],))]
                sub[nm] = -var(other)
    return sub


def _pull(space, chart, constraints, rename, form: Form) -> Form:
    sub = {var(k): sp.sympify(v) for k, v in constraints.items()}
    ren = {var(a): var(b) for a, b in rename.items()}
    t: dict = {}
    for key, c in form.terms.items():
        c = c.xreplace(sub).xreplace(ren)
        parts = []
        for i in key:
            nm = space.chart.names[i]
            if nm in constraints:
                val = sp.sympify(constraints[nm])
                parts.append({chart.index[rename.get(str(s), str(s))]: val.coeff(s)
                              for s in val.free_symbols})
            else:
                parts.append({chart.index[rename.get(nm, nm)]: sp.Integer(1)})
        for combo in itertools.product(*[list(p.items()) for p in parts]):
            idx = [a for a, _ in combo]
            s, k2 = sort_sign(idx)
            if not s:
                continue
            w = c * s
            for _, cc in combo:
                w = w * cc
            t[k2] = t.get(k2, 0) + w
    return Form(chart, form.degree, t)


def restrict_form(space: MultisymplecticSpace, sub: MultisymplecticSpace, form: Form) -> Form:
    """Pull a form on ``space`` back to a restriction ``sub`` of it."""
    extra = {k: v for k, v in sub.constraints.items() if k not in space.constraints}
    return _pull(space, sub.chart, extra, {}, form)


def restrict(space: MultisymplecticSpace, constraints: Mapping[str, object],
             rename: Mapping[str, str] | None = None, kind: str | None = None) -> MultisymplecticSpace:
    """Pull theta and Omega back to the submanifold cut out by ``constraints``.

    Each constraint maps a momentum coordinate to 0 or to a linear expression
    in the remaining coordinates.  ``rename`` optionally renames survivors.
    """
    for nm in constraints:
        if nm not in space.chart.index:
            raise KeyError(f"constraint references unknown coordinate {nm!r}")
    if not constraints and not rename:
        return space
    rename = dict(rename or {})
    sub = {var(k): sp.sympify(v) for k, v in constraints.items()}
    keep = [nm for nm in space.chart.names if nm not in constraints]
    new_names = [rename.get(nm, nm) for nm in keep]
    ren = {var(a): var(b) for a, b in rename.items()}
    display = {rename.get(k, k): v for k, v in space.chart.display.items() if k in keep}
    for a, b in rename.items():
        display.setdefault(b, b)
    chart = Chart(new_names, roles={rename.get(k, k): v for k, v in space.chart.roles.items() if k in keep},
                  display=display)

    momenta: dict = {}
    for nm, entries in space.momenta.items():
        if nm in constraints:
            val = sp.expand(sp.sympify(constraints[nm]))
            for sym, c in val.as_coefficients_dict().items():
                if c == 0 or sym == 1:
                    continue
                tgt = rename.get(str(sym), str(sym))
                for sign, idx in entries:
                    momenta.setdefault(tgt, []).append((int(c) * sign, idx))
        else:
            momenta.setdefault(rename.get(nm, nm), []).extend(entries)

    pull = lambda form: _pull(space, chart, constraints, rename, form)

    alias = {rename.get(k, k): v for k, v in space.alias_info.items() if k in keep}
    out = MultisymplecticSpace(
        chart=chart, n=space.n, base=[rename.get(b, b) for b in space.base],
        fiber=[rename.get(f, f) for f in space.fiber], omega=pull(space.omega),
        theta=pull(space.theta) if space.theta is not None else None,
        momenta=momenta, constraints={**space.constraints, **{k: sp.sympify(v) for k, v in constraints.items()}},
        kind=kind or space.kind, alias_info=alias)
    return out


# --------------------------------------------------------------------------

@dataclass
class NondegeneracyVerdict:
    nondegenerate: bool
    kernel: list[Multivector]
    degenerate_points: list[dict]

    def __bool__(self):
        return self.nondegenerate


def _kernel(omega: Form, chart: Chart):
    xs = [sp.Dummy(f"k{i}") for i in range(chart.dim)]
    xi = Multivector(chart, 1, {(i,): xs[i] for i in range(chart.dim)})
    contr = interior_mv_form(xi, omega)
    sol = solve_linear(list(contr.terms.values()), xs)
    return [Multivector(chart, 1, {(i,): b[xs[i]] for i in range(chart.dim)}) for b in sol.basis]


def nondegeneracy_check(space: MultisymplecticSpace | Form, samples: int = 10,
                        seed: int = 0) -> NondegeneracyVerdict:
    """Kernel of xi -> xi _| Omega at a generic point, plus pointwise samples."""
    omega = space.omega if isinstance(space, MultisymplecticSpace) else space
    chart = omega.chart
    kernel = _kernel(omega, chart)
    bad = []
    syms = [s for s in chart.symbols if omega.free_symbols & {s}]
    if not kernel and syms:
        rng = random.Random(seed)
        for _ in range(samples):
            pt = {s: sp.Rational(rng.randint(-9, 9), rng.randint(1, 5)) for s in syms}
            if _kernel(omega.subs(pt), chart):
                bad.append(pt)
    return NondegeneracyVerdict(not kernel and not bad, kernel, bad)
