import math

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lepage.legendre import (EXAMPLES, Degenerate, DomainError, LagrangianSpec, build_space,
                             enlarged_pseudofiber, example, hamiltonian, hamiltonian_at, pseudofiber_level,
                             velocity_lift, verify_duality, w_function)
from lepage.symcore import normalize, var

e, r = var("e"), var("r")


def test_point_mechanics_hamiltonian():
    res = hamiltonian(example("point_mech"))
    assert normalize(res.H - (e + var("p") ** 2 / 2 + var("q") ** 2 / 2)) == 0
    assert res.v_of_p == {var("v"): var("p")}


def test_dirichlet_value_at_rational_point():
    # hand computation: |p|^2/2 = 3, det = -1, r = 1/3  ->  (3 - 1/3) / (8/9) = 3
    res = hamiltonian(example("dirichlet2x2"))
    pt = {"e": 0, "p1_1": 1, "p1_2": 2, "p2_1": 0, "p2_2": -1, "r": sp.Rational(1, 3)}
    assert res.at(pt) == 3


@given(st.lists(st.integers(-4, 4), min_size=4, max_size=4), st.integers(-4, 4))
def test_dirichlet_symbolic_matches_newton(ps, rn):
    """Closed form against damped Newton on dW/dv = 0."""
    spec = example("dirichlet2x2")
    res = hamiltonian(spec)
    rv = rn / 5
    pt = dict(zip(["p1_1", "p1_2", "p2_1", "p2_2"], ps), e=0.5, r=rv, x1=0, x2=0, y1=0, y2=0)
    exact = float(res.H.subs({var(k): v for k, v in pt.items()}))
    num = hamiltonian_at(spec, pt, {})
    assert math.isclose(exact, num, rel_tol=1e-9, abs_tol=1e-9)


@pytest.mark.parametrize("name", ["point_mech", "dirichlet2x2", "trivial2x2", "maxwell2d", "scalar", "cscalar"])
def test_duality(name):
    res = hamiltonian(example(name))
    assert all(v == 0 for v in verify_duality(res).values())


def test_trivial_domain_guard():
    res = hamiltonian(example("trivial2x2"))
    assert r in res.guards
    with pytest.raises(DomainError):
        res.at({"e": 0, "p1_1": 0, "p1_2": 0, "p2_1": 0, "p2_2": 0, "r": 0})


def test_linear_lagrangian_is_degenerate():
    spec = LagrangianSpec("lin", 1, 1, var("v"), ["t"], ["q"], target="ddw")
    with pytest.raises(Degenerate):
        hamiltonian(spec)


def test_undeclared_symbol_rejected():
    with pytest.raises(ValueError):
        LagrangianSpec("bad", 1, 1, var("v") ** 2 + var("zz"), ["t"], ["q"]).validate()


def test_w_function_pairs_z_with_p():
    spec = example("point_mech")
    W = w_function(spec)
    assert normalize(W - (e + var("p") * var("v") - spec.L)) == 0


def test_velocity_lift_components():
    spec = example("dirichlet2x2")
    z = velocity_lift(spec, {"v1_1": 2, "v1_2": 3, "v2_1": 5, "v2_2": 7})
    assert z.coeff("x1", "x2") == 1
    assert z.coeff("y1", "y2") == 2 * 7 - 3 * 5
    assert z.coeff("x1", "y1") == 3


@pytest.mark.parametrize("n,k", [(1, 1), (1, 2), (2, 1), (2, 2), (3, 2)])
def test_pseudofiber_dimension_counts(n, k):
    base = ["t"] if n == 1 else [f"x{m}" for m in range(1, n + 1)]
    spec = LagrangianSpec("zero", n, k, sp.Integer(0), base, [f"y{i}" for i in range(1, k + 1)])
    assert enlarged_pseudofiber(spec).dimension == math.comb(n + k, n) - n * k


def test_pseudofiber_level_hits_h():
    spec = example("trivial2x2")
    res = hamiltonian(spec)
    q = {"x1": 0, "x2": 0, "y1": 0, "y2": 0}
    v = {"v1_1": 1, "v1_2": 2, "v2_1": 3, "v2_2": 4}
    p = pseudofiber_level(spec, q, v, sp.Rational(5, 2), result=res)
    assert res.at({**q, **p}) == sp.Rational(5, 2)


def test_targets_and_unknown_example():
    assert build_space(example("maxwell4d")).kind == "maxwell"
    assert build_space(example("dirichlet2x2"), "ddw").kind == "ddw"
    with pytest.raises(KeyError):
        example("nope")
    with pytest.raises(ValueError):
        build_space(example("scalar"), "maxwell")


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_every_example_has_a_hamiltonian(name):
    res = hamiltonian(example(name))
    assert e in res.H.free_symbols
    assert normalize(sp.diff(res.H, e)) == 1
