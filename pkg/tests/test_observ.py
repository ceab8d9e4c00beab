import random

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lepage.exterior import ext_d, interior_mv_form, lie_bracket, wedge
from lepage.legendre import example, hamiltonian
from lepage.multisympl import build_lambda_n, ddw_constraints, restrict
from lepage.observ import (NotAlgebraic, NotSymplectomorphism, OutsideCopolarization, classify_form,
                           classify_symplectomorphism, conjugate_pair_bracket, external_bracket,
                           graded_pseudobracket, is_observable_sampled, jacobi_sides,
                           kanatchikov_bracket_maxwell, maxwell_copolarization, maxwell_forms, poisson,
                           random_chi, random_field_on_base, random_p_xi, random_q_zeta, slice_test,
                           standard_copolarization, xi_bar, xi_of)
from lepage.symcore import normalize, var

seeds = st.integers(0, 10 ** 6)
S21 = build_lambda_n(2, 1)
S22 = build_lambda_n(2, 2)


def _aof(space, rng):
    return random_q_zeta(space, rng) if rng.random() < 0.5 else random_p_xi(space, rng)[0]


def _zero(form):
    return form.map(normalize).is_zero()


@given(seeds)
def test_xi_solves_its_equation(seed):
    rng = random.Random(seed)
    F = _aof(S22, rng)
    xi = xi_of(S22, F)
    assert _zero(ext_d(F) + interior_mv_form(xi, S22.omega))


@given(seeds)
def test_xi_matches_generic_linear_solve(seed):
    """Cached pivot inverse against sympy's linsolve on the full system."""
    rng = random.Random(seed)
    F = _aof(S21, rng)
    zs = sp.symbols(f"z0:{S21.dim}")
    X = S21.chart.vector(dict(zip(S21.chart.names, zs)))
    eqs = list((ext_d(F) + interior_mv_form(X, S21.omega)).terms.values())
    (sol,) = sp.linsolve(eqs, zs)
    xi = xi_of(S21, F)
    assert all(normalize(xi.coeff(nm) - s) == 0 for nm, s in zip(S21.chart.names, sol))


@given(seeds)
def test_bracket_antisymmetric_and_closed(seed):
    rng = random.Random(seed)
    F, G = _aof(S22, rng), _aof(S22, rng)
    xf, xg = xi_of(S22, F), xi_of(S22, G)
    FG, GF = poisson(S22, F, G, xf, xg), poisson(S22, G, F, xg, xf)
    assert _zero(FG + GF)
    assert _zero(ext_d(FG) + interior_mv_form(lie_bracket(xf, xg), S22.omega))


@given(seeds)
def test_jacobi_up_to_exact_term(seed):
    rng = random.Random(seed)
    lhs, rhs = jacobi_sides(S21, *(_aof(S21, rng) for _ in range(3)))
    assert _zero(lhs - rhs)


@given(seeds)
def test_canonical_lift_is_lie_morphism(seed):
    rng = random.Random(seed)
    a, b = random_field_on_base(S21, rng), random_field_on_base(S21, rng)
    lhs = lie_bracket(xi_bar(S21, a), xi_bar(S21, b))
    assert _zero(lhs - xi_bar(S21, lie_bracket(a, b)))


@given(seeds)
def test_chi_fields_commute(seed):
    rng = random.Random(seed)
    assert lie_bracket(random_chi(S22, rng), random_chi(S22, rng)).map(normalize).is_zero()


@given(seeds)
def test_symplectomorphism_round_trip(seed):
    rng = random.Random(seed)
    xi, chi = random_field_on_base(S22, rng), random_chi(S22, rng)
    Xi = (xi_bar(S22, xi) + chi).map(normalize)
    dec = classify_symplectomorphism(S22, Xi)
    assert _zero(dec.xi - xi) and _zero(dec.chi - chi)


def test_non_symplectomorphism_witness():
    with pytest.raises(NotSymplectomorphism) as ei:
        classify_symplectomorphism(S22, S22.chart.vector({"x1": var("e")}))
    assert not ei.value.witness.is_zero()


def test_mechanics_bracket_value():
    S = build_lambda_n(1, 1)
    p, y = S.chart.scalar(var("p")), S.chart.scalar(var("y"))
    assert external_bracket(S, p, y).scalar_value() == 1
    assert external_bracket(S, y, p).scalar_value() == -1


def _ddw22():
    full = build_lambda_n(2, 2)
    return full, restrict(full, ddw_constraints(full), kind="ddw")


def test_classification_on_ddw():
    full, D = _ddw22()
    F = D.chart.form({("y2",): var("y1")})
    with pytest.raises(NotAlgebraic):
        xi_of(D, F)
    assert classify_form(D, F, samples=30).kind == "observable"
    assert classify_form(D, D.chart.form({("x2",): var("p1_1")}), samples=30).kind == "not-observable"
    P = interior_mv_form(D.chart.partial("y1"), D.theta)
    assert classify_form(D, P).kind == "algebraic"


def test_classification_of_functions():
    S = hamiltonian(example("scalar")).space
    assert classify_form(S, S.chart.scalar(var("y"))).kind == "observable"
    assert classify_form(S, S.chart.scalar(var("e"))).kind == "not-observable"
    with pytest.raises(ValueError):
        classify_form(S, S.chart.d("x1", "x2"))


def test_sampler_finds_counterexample():
    _, D = _ddw22()
    v = is_observable_sampled(D, D.chart.form({("y2",): var("e")}), samples=30, rng=random.Random(1))
    assert not v.observable and v.counterexample is not None


def test_graded_pseudobracket_values():
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    cp = standard_copolarization(S)
    b = graded_pseudobracket(S, H, S.chart.form({("x2",): var("x1")}), cp)
    assert b.degree == 0 and b.equals(1)
    with pytest.raises(OutsideCopolarization):
        graded_pseudobracket(S, H, S.chart.scalar(var("p1")), cp)


def test_slices():
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    assert slice_test(S, H, var("x1"), samples=20, rng=random.Random(0)).slice
    assert not slice_test(S, H, H, samples=20, rng=random.Random(0)).slice


def test_maxwell_structures():
    M = hamiltonian(example("maxwell4d")).space
    kan = kanatchikov_bracket_maxwell(M)
    assert kan.value == 2 and kan.sign == 1
    mf = maxwell_forms(M)
    conj = conjugate_pair_bracket(M, mf["pi"], mf["a"])
    assert conj.value == 1 and conj.antisymmetry_defect == 0
    literal = maxwell_copolarization(M, complete=False)
    fails = literal.closure_failures()
    assert len(fails) == 1
    g, h = fails[0]
    assert g == h == mf["da"]
    assert maxwell_copolarization(M).contains(wedge(g, h))
