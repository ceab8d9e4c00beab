import math

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lepage.exterior import Chart, ext_d, interior_mv_form
from lepage.multisympl import (SizeOverflow, build_ddw, build_lambda_n, ddw_constraints, maxwell_constraints,
                               nondegeneracy_check, restrict, restrict_form)
from lepage.symcore import normalize, var

small = st.tuples(st.integers(1, 3), st.integers(1, 3))


@given(small)
def test_lambda_n_dimension_and_closure(nk):
    n, k = nk
    S = build_lambda_n(n, k)
    assert S.dim == n + k + math.comb(n + k, n)
    assert S.omega == ext_d(S.theta)
    assert ext_d(S.omega).is_zero()


@given(small)
def test_theta_is_tautological(nk):
    """theta restricted to q-directions is the point p itself, seen as an n-form on N."""
    n, k = nk
    S = build_lambda_n(n, k)
    N = S.base_chart()
    qpart = {key: c for key, c in S.theta.terms.items()
             if all(S.chart.names[i] in S.q_names for i in key)}
    assert len(qpart) == len(S.theta.terms)
    t = S.theta.__class__(S.chart, n, qpart)
    assert t.transfer(N) == S.momentum_form()


def test_names_for_two_by_two():
    S = build_lambda_n(2, 2)
    assert S.chart.names == ["x1", "x2", "y1", "y2", "e", "p1_1", "p1_2", "p2_1", "p2_2", "r"]
    assert S.alias_info["p2_1"] == ((2,), (1,))
    assert S.raw_momentum(("x1", "x2")) == var("e")
    # p^mu_i replaces slot mu by y^i: p^1_1 sits on dy1 ^ dx2
    assert S.raw_momentum(("y1", "x2")) == var("p1_1")
    assert S.raw_momentum(("x1", "y1")) == var("p2_1")
    assert S.raw_momentum(("y1", "y2")) == var("r")


@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (1, 3)])
def test_lambda_n_nondegenerate(n, k):
    assert nondegeneracy_check(build_lambda_n(n, k)).nondegenerate


def test_ddw_build_matches_restriction():
    full = build_lambda_n(2, 2)
    D = restrict(full, ddw_constraints(full), kind="ddw")
    direct = build_ddw(["x1", "x2"], ["y1", "y2"])
    assert D.chart.names == direct.chart.names
    assert D.omega == direct.omega.transfer(D.chart)
    assert D.is_nondegenerate()


def test_ddw_theta_explicit():
    S = build_ddw(["x1", "x2"], ["y"])
    c = S.chart
    e, p1, p2, y = (var(s) for s in ("e", "p1_1", "p2_1", "y"))
    want = c.d("x1", "x2") * e + c.d("y", "x2") * p1 + c.d("x1", "y") * p2
    assert S.theta == want


def test_volume_and_omega_mu():
    S = build_ddw(["x1", "x2", "x3"], ["y"])
    c = S.chart
    assert S.volume() == c.d("x1", "x2", "x3")
    assert S.omega_mu(2) == -c.d("x1", "x3")
    assert S.omega_mu(1, 2) == c.d("x3")


def test_vertical_lift_round_trip():
    S = build_lambda_n(2, 2)
    N = S.base_chart()
    p = N.d("x1", "y2") * 3 + N.d("y1", "y2") * var("x1")
    assert S.form_of_vertical(S.vertical_lift(p)) == p


def test_restrict_form_round_trip():
    full = build_lambda_n(2, 2)
    D = restrict(full, ddw_constraints(full))
    F = full.chart.form({("y2",): var("y1"), ("r",): 1})
    got = restrict_form(full, D, F)
    assert got == D.chart.form({("y2",): var("y1")})


def test_restrict_rejects_unknown():
    with pytest.raises(KeyError):
        restrict(build_lambda_n(1, 1), {"nope": 0})


def test_maxwell_constraints_antisymmetric():
    S = build_ddw(["x1", "x2"], ["a1", "a2"])
    sub = maxwell_constraints(S)
    assert sub["p1_1"] == 0 and sub["p2_2"] == 0
    assert sub["p1_2"] == -var("p2_1")


def test_degenerate_form_detected():
    c = Chart(["u", "v", "w"])
    verdict = nondegeneracy_check(c.d("u", "v"))
    assert not verdict.nondegenerate
    assert verdict.kernel and interior_mv_form(verdict.kernel[0], c.d("u", "v")).map(normalize).is_zero()


def test_size_budget():
    with pytest.raises(SizeOverflow):
        build_lambda_n(8, 8)
