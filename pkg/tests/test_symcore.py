import pytest
import sympy as sp
from hypothesis import given, strategies as st

from lepage.symcore import (FunctionSymbol, Inconsistent, NonAffine, ParseError, UnknownVariable,
                            differentiate, equal, evaluate, irreducible_factors, normalize, parse,
                            solve_linear, var)

x, y, z = var("x"), var("y"), var("z")
ints = st.integers(-6, 6)


def test_normalize_expands_and_cancels():
    assert normalize((x + 1) ** 2) == x ** 2 + 2 * x + 1
    assert normalize((x ** 2 - 1) / (x - 1)) == x + 1
    assert normalize(sp.Rational(3, 6)) == sp.Rational(1, 2)


def test_equal_and_differentiate():
    assert equal((x + y) ** 2, x ** 2 + 2 * x * y + y ** 2)
    assert differentiate(x ** 3 * y, "x") == 3 * x ** 2 * y
    with pytest.raises(UnknownVariable):
        differentiate(x, "never_declared_name")


def test_evaluate_exact_and_unassigned():
    assert evaluate(x / 3 + y, {"x": 1, "y": sp.Rational(1, 3)}) == sp.Rational(2, 3)
    with pytest.raises(UnknownVariable):
        evaluate(x + z, {"x": 1})


def test_formal_function_partials_commute():
    f = FunctionSymbol("f", 2)
    a = sp.diff(f(x, y), x, y)
    b = sp.diff(f(x, y), y, x)
    assert a == b == f.derivative((1, 2), x, y)


def test_formal_function_rules():
    u = FunctionSymbol("u", 2)
    u.add_rule((1, 1), {(2, 2): 1})  # wave equation u_11 = u_22
    e = sp.diff(u(x, y), x, x) - sp.diff(u(x, y), y, y)
    assert normalize(e) == 0


def test_solve_linear_unique():
    sol = solve_linear([x + y - 3, x - y - 1], [x, y])
    assert sol.particular == {x: 2, y: 1}
    assert sol.dimension == 0


def test_solve_linear_symbolic_coefficients_and_guards():
    a = var("a")
    sol = solve_linear([a * x - 1], [x])
    assert normalize(sol.particular[x] - 1 / a) == 0
    assert a in sol.guards


def test_solve_linear_kernel():
    sol = solve_linear([x + y + z], [x, y, z])
    assert sol.dimension == 2
    t = sp.symbols("t0 t1")
    g = sol.general(t)
    assert normalize(g[x] + g[y] + g[z]) == 0


def test_solve_linear_inconsistent_witness():
    with pytest.raises(Inconsistent) as ei:
        solve_linear([x + y - 1, 2 * x + 2 * y - 3], [x, y])
    exc = ei.value
    assert exc.conditions and exc.witness
    eqs = [x + y - 1, 2 * x + 2 * y - 3]
    combo = normalize(sum(c * eqs[k] for k, c in exc.witness.items()))
    assert combo.is_Number and combo != 0


def test_solve_linear_nonaffine():
    with pytest.raises(NonAffine):
        solve_linear([x * y - 1], [x, y])


@given(st.lists(st.lists(ints, min_size=3, max_size=3), min_size=3, max_size=3), st.lists(ints, min_size=3,
                                                                                         max_size=3))
def test_solve_linear_matches_sympy(A, b):
    M = sp.Matrix(A)
    xs = [x, y, z]
    eqs = [sum(M[i, j] * xs[j] for j in range(3)) - b[i] for i in range(3)]
    try:
        sol = solve_linear(eqs, xs)
    except Inconsistent:
        assert M.rank() < M.row_join(sp.Matrix(b)).rank()
        return
    assert sol.dimension == 3 - M.rank()
    for i, e in enumerate(eqs):
        assert normalize(e.xreplace(sol.particular)) == 0
        for vec in sol.basis:
            assert normalize((e + b[i]).xreplace(vec)) == 0


def test_irreducible_factors():
    fs = irreducible_factors([(x ** 2 - 1) / (y + 2)])
    assert set(fs) == {x - 1, x + 1, y + 2}


def test_parse_index_summation():
    L = parse("p^mu_i*v^i_mu", indices={"mu": [1, 2], "i": [1, 2]})
    want = sum(var(f"p{m}_{i}") * var(f"v{i}_{m}") for m in (1, 2) for i in (1, 2))
    assert normalize(L - want) == 0


def test_parse_functions_and_power():
    V = FunctionSymbol("V", 1)
    e = parse("V(x^2)/2 + sin(y)", functions={"V": V})
    assert normalize(e - (V(x ** 2) / 2 + sp.sin(y))) == 0


def test_parse_error_position():
    with pytest.raises(ParseError) as ei:
        parse("x + (y")
    assert ei.value.col >= 6
