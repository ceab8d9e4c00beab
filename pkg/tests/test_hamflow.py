import random

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lepage import _kernels
from lepage.exterior import decomposable, interior_mv_form
from lepage.hamflow import (CFLViolation, DiscreteCurve, DpHZero, Unsupported, contract_decomposable,
                            contract_numeric, deform_curve, hamilton_class_at, hamilton_residual,
                            integrate_ddw, pseudofiber_direction, random_polynomial, renormalize_level,
                            trivial_family_coords, trivial_family_curve, trivial_family_discrete,
                            trivial_family_numeric_residual)
from lepage.legendre import example, hamiltonian
from lepage.multisympl import build_lambda_n
from lepage.symcore import FunctionSymbol, normalize, var

x1, x2 = var("x1"), var("x2")


@st.composite
def vector_lists(draw, n, chart):
    vals = st.sampled_from([0, 1, -1, 2, var("e"), var("y1"), var("r") - 1])
    return [chart.vector({nm: draw(vals) for nm in chart.names}) for _ in range(n)]


S22 = build_lambda_n(2, 2)


@given(vector_lists(2, S22.chart))
def test_contract_decomposable_matches_wedge_route(vs):
    fast = contract_decomposable(vs, S22.omega)
    slow = interior_mv_form(decomposable(vs), S22.omega)
    for a in range(S22.dim):
        assert normalize(fast[a] - slow.terms.get((a,), 0)) == 0


@given(st.integers(0, 10 ** 6))
def test_contract_numeric_matches_symbolic(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(2, S22.dim))
    vs = [S22.chart.vector(dict(zip(S22.chart.names, map(sp.Float, v)))) for v in vals]
    sub = {s: float(rng.normal()) for s in S22.chart.symbols}
    om = S22.omega.subs(sub)
    sym = [float(c) for c in contract_decomposable(vs, om)]
    num = contract_numeric([(k, float(c)) for k, c in om.terms.items()], [v for v in vals])
    assert np.allclose(sym, num, atol=1e-10)


def test_point_mechanics_class():
    res = hamiltonian(example("point_mech"))
    cls = hamilton_class_at(res.space, res.H)
    assert not cls.empty and not cls.params
    (X,) = cls.vectors
    assert X.coeff("t") == 1
    assert X.coeff("q") == var("p")
    assert X.coeff("p") == -var("q")
    assert cls.residual().map(normalize).is_zero()


@given(st.integers(0, 10 ** 6))
def test_class_members_all_solve(seed):
    res = hamiltonian(example("scalar"))
    cls = hamilton_class_at(res.space, res.H)
    assert len(cls.params) == 3
    assert cls.residual(cls.random_values(random.Random(seed))).map(normalize).is_zero()


def test_dph_zero():
    S = build_lambda_n(1, 1)
    with pytest.raises(DpHZero):
        hamilton_class_at(S, var("y") ** 2)


def test_trivial_family_symbolic():
    U1, U2, R = (FunctionSymbol(nm, 2) for nm in ("U1", "U2", "R"))
    c = trivial_family_curve(U1(x1, x2), U2(x1, x2), R(x1, x2), var("h"))
    assert c.is_hamiltonian
    with pytest.raises(ValueError):
        trivial_family_curve(x1, x2, 0)


def test_trivial_family_broken_by_wrong_energy():
    res = hamiltonian(example("trivial2x2"))
    from lepage.hamflow import symbolic_residual
    coords = trivial_family_coords(x1 ** 2, x1 * x2, 2 + x1, 0)
    coords["e"] = coords["e"] + x2   # H is no longer constant along the curve
    assert not symbolic_residual(res.space, res.H, coords).map(normalize).is_zero()


def test_trivial_family_numeric():
    rng = random.Random(3)
    u1, u2 = random_polynomial(rng, [x1, x2]), random_polynomial(rng, [x1, x2])
    assert trivial_family_numeric_residual(u1, u2, 3 + x1, 1, grid=16) < 1e-12


def test_discrete_residual_converges():
    res = hamiltonian(example("trivial2x2"))
    u1, u2 = sp.sin(x1) * x2, sp.cos(x2) + x1 ** 3
    errs = [hamilton_residual(trivial_family_discrete(u1, u2, 2 + x1 * x2, 0, grid=g), res.space, res.H)
            for g in (16, 32)]
    assert errs[1] < errs[0] / 8


def test_pseudofiber_direction_preserves_hamiltonicity():
    res = hamiltonian(example("trivial2x2"))
    S, H = res.space, res.H
    (zeta,) = pseudofiber_direction(S, H)
    coords = trivial_family_coords(x1 ** 2 + x2, x1 * x2, 2 + x1, 0)
    lam = x1 * x2 + 1
    on = {var(k): v for k, v in coords.items()}
    section = {nm: normalize(zeta.coeff(nm).xreplace(on) * lam) for nm in S.p_names if zeta.coeff(nm) != 0}
    moved = renormalize_level(deform_curve(coords, section), H, 0)
    from lepage.hamflow import symbolic_residual
    assert symbolic_residual(S, H, moved).map(normalize).is_zero()


def test_deform_rejects_non_kernel_section():
    coords = trivial_family_coords(x1, x2, 2, 0)
    with pytest.raises(ValueError):
        deform_curve(coords, {"p1_1": 1})


def test_oscillator_against_cosine():
    res = hamiltonian(example("point_mech"))
    c = integrate_ddw(res, {"q": 1.0, "p": 0.0}, t_span=(0.0, 2 * np.pi), dt=1e-3, h=0.25)
    t = c.grids[0]
    assert np.max(np.abs(c.values["q"] - np.cos(t))) < 1e-10
    assert np.max(np.abs(c.values["p"] + np.sin(t))) < 1e-10
    assert hamilton_residual(c, res.space, res.H, interior_only=True) < 1e-8


def test_free_wave_against_standing_wave():
    res = hamiltonian(example("scalar", m2=0))
    init = {"y": (np.sin, lambda x: 0 * x)}
    errs = []
    for N in (32, 64):
        c = integrate_ddw(res, init, grid=(N, N), t_max=1.0)
        T, X = c.values["x1"], c.values["x2"]
        errs.append(np.max(np.abs(c.values["y"] - np.sin(X) * np.cos(T))))
    assert errs[1] < 1e-3
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_integrator_guards():
    res = hamiltonian(example("scalar", m2=0))
    init = {"y": (np.sin, lambda x: 0 * x)}
    with pytest.raises(CFLViolation):
        integrate_ddw(res, init, grid=(4, 64), t_max=3.0)
    with pytest.raises(Unsupported):
        integrate_ddw(hamiltonian(example("scalar", m2=0, metric=[1, 1])), init, grid=(8, 8))
    with pytest.raises(Unsupported):
        integrate_ddw(hamiltonian(example("dirichlet2x2")), init, grid=(8, 8))


def test_curve_file_round_trip(tmp_path):
    res = hamiltonian(example("scalar", m2=1))
    c = integrate_ddw(res, {"y": (np.cos, np.sin)}, grid=(8, 16), t_max=0.2)
    c.save(tmp_path / "a.curve")
    d = DiscreteCurve.load(tmp_path / "a.curve")
    assert d.names() == c.names()
    for nm in c.names():
        assert np.array_equal(d.values[nm], c.values[nm])
    with pytest.raises(ValueError):
        DiscreteCurve.loads('{"format": "other"}')


def test_numba_and_numpy_paths_agree(monkeypatch):
    y1, y2 = sp.symbols("y1 y2")
    exprs = [y1 ** 3 + y2, y2 * y1]
    x = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    u0 = np.stack([np.cos(x), 0.5 * np.sin(2 * x)])
    p0 = np.zeros_like(u0)
    out = {}
    for flag in ("1", "0"):
        monkeypatch.setenv("LEPAGE_DISABLE_NUMBA", flag)
        if flag == "0" and not _kernels.numba_enabled():
            pytest.skip("numba unavailable")
        f = _kernels.compile_force([y1, y2], exprs)
        out[flag] = _kernels.leapfrog(f, u0, p0, 0.05, x[1] - x[0], -1.0, 1.0, 20)
        t = sp.Symbol("t")
        g = _kernels.compile_vector([t, y1, y2], [y2, -y1 + sp.sin(t)])
        out[flag] += (_kernels.rk4(g, [1.0, 0.0], 0.0, 0.01, 100),)
    for a, b in zip(out["1"], out["0"]):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-13)
