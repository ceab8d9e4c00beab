"""Hot loops for curve integration.

Each kernel exists twice: a numba ``@njit`` version and a pure numpy one.
Setting ``LEPAGE_DISABLE_NUMBA=1`` (or a missing numba) selects numpy.  Both
paths implement the same update formulas and agree to rounding.
"""
from __future__ import annotations

import math
import os

import numpy as np
import sympy as sp
from sympy.printing.pycode import PythonCodePrinter

try:  # pragma: no cover - exercised through the env flag
    import numba
except ImportError:  # pragma: no cover
    numba = None


def numba_enabled() -> bool:
    return numba is not None and os.environ.get("LEPAGE_DISABLE_NUMBA", "") not in ("1", "true", "yes")


def backend() -> str:
    return "numba" if numba_enabled() else "numpy"


def compile_scalar(args: list[sp.Symbol], expr, use_numba: bool | None = None):
    """Scalar callback f(*args) -> float from a sympy expression."""
    f = sp.lambdify(args, sp.sympify(expr), modules="math")
    if use_numba if use_numba is not None else numba_enabled():
        return numba.njit(cache=False)(f)
    return f


def compile_vector(args: list[sp.Symbol], exprs, use_numba: bool | None = None):
    """Array callback f(y, t) -> array for an ODE right-hand side.

    ``args`` is (t, y_0, ..., y_{m-1}).
    """
    src = ["def _rhs(y, t):", f"    out = np.empty({len(exprs)})"]
    printer = PythonCodePrinter({"fully_qualified_modules": False})
    names = {a: f"y[{i}]" for i, a in enumerate(args[1:])}
    names[args[0]] = "t"
    for i, e in enumerate(exprs):
        code = printer.doprint(sp.sympify(e).xreplace({a: sp.Symbol(names[a]) for a in args}))
        src.append(f"    out[{i}] = {code}")
    src.append("    return out")
    ns = {"np": np, "math": math, **{fn: getattr(math, fn) for fn in ("sin", "cos", "exp", "sqrt")}}
    exec("\n".join(src), ns)
    f = ns["_rhs"]
    if use_numba if use_numba is not None else numba_enabled():
        return numba.njit(cache=False)(f)
    return f


# --------------------------------------------------------------------------
# RK4

def _rk4_py(rhs, y0, t0, dt, nsteps):
    m = y0.shape[0]
    out = np.empty((nsteps + 1, m))
    out[0] = y0
    y = y0.copy()
    t = t0
    for s in range(nsteps):
        k1 = rhs(y, t)
        k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(y + dt * k3, t + dt)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (s + 1) * dt
        out[s + 1] = y
    return out


_rk4_nb = numba.njit(cache=False)(_rk4_py) if numba is not None else None


def rk4(rhs, y0, t0: float, dt: float, nsteps: int) -> np.ndarray:
    y0 = np.asarray(y0, dtype=float)
    if numba_enabled():
        return _rk4_nb(rhs, y0, float(t0), float(dt), int(nsteps))
    return _rk4_py(rhs, y0, float(t0), float(dt), int(nsteps))


# --------------------------------------------------------------------------
# leapfrog for  d_t u = a p,  d_t p = -d_x q - g(u),  q = (1/b) d_x u
# u, p live on integer space points, q on half points x_{j+1/2}; periodic.

def _force_py(force, u, dx, b, out):
    k, nx = u.shape
    for i in range(k):
        for j in range(nx):
            jp = j + 1 if j + 1 < nx else 0
            jm = j - 1 if j > 0 else nx - 1
            lap = (u[i, jp] - 2.0 * u[i, j] + u[i, jm]) / (dx * dx)
            out[i, j] = -lap / b
    for j in range(nx):
        g = force(u[:, j].copy())
        for i in range(k):
            out[i, j] -= g[i]
    return out


def _leapfrog_py(force, u0, p0, dt, dx, a, b, nsteps, force_impl):
    k, nx = u0.shape
    us = np.empty((nsteps + 1, k, nx))
    ps = np.empty((nsteps + 1, k, nx))
    us[0] = u0
    ps[0] = p0
    u = u0.copy()
    p = p0.copy()
    f = np.empty((k, nx))
    force_impl(force, u, dx, b, f)
    for s in range(nsteps):
        ph = p + 0.5 * dt * f
        u = u + dt * a * ph
        force_impl(force, u, dx, b, f)
        p = ph + 0.5 * dt * f
        us[s + 1] = u
        ps[s + 1] = p
    return us, ps


if numba is not None:
    _force_nb = numba.njit(cache=False)(_force_py)
    _leapfrog_nb_inner = numba.njit(cache=False)(_leapfrog_py)
else:  # pragma: no cover
    _force_nb = _leapfrog_nb_inner = None


def _force_np(force, u, dx, b, out):
    lap = (np.roll(u, -1, axis=1) - 2.0 * u + np.roll(u, 1, axis=1)) / (dx * dx)
    out[:] = -lap / b - force(u)
    return out


def leapfrog(force, u0, p0, dt: float, dx: float, a: float, b: float, nsteps: int):
    """Stormer-Verlet march; ``force(u_column)`` returns dH/du for one point.

    With numba the force is a compiled scalar-column callback; the numpy path
    expects a vectorized callback taking the whole (k, nx) array.
    """
    u0 = np.ascontiguousarray(u0, dtype=float)
    p0 = np.ascontiguousarray(p0, dtype=float)
    if numba_enabled():
        return _leapfrog_nb_inner(force, u0, p0, float(dt), float(dx), float(a), float(b),
                                  int(nsteps), _force_nb)
    return _leapfrog_py(force, u0, p0, float(dt), float(dx), float(a), float(b), int(nsteps), _force_np)


def compile_force(fields: list[sp.Symbol], exprs, use_numba: bool | None = None):
    """dH/du callback in the layout each leapfrog path expects."""
    nb = numba_enabled() if use_numba is None else use_numba
    if nb:
        return _column_force(fields, exprs)
    fs = [sp.lambdify(fields, e, modules="numpy") for e in exprs]

    def force(u):
        out = np.empty_like(u)
        for i, f in enumerate(fs):
            out[i] = f(*u) * np.ones(u.shape[1])
        return out
    return force


def _column_force(fields, exprs):
    src = ["def _force(u):", f"    out = np.empty({len(exprs)})"]
    printer = PythonCodePrinter({"fully_qualified_modules": False})
    rep = {f: sp.Symbol(f"u[{i}]") for i, f in enumerate(fields)}
    for i, e in enumerate(exprs):
        src.append(f"    out[{i}] = {printer.doprint(sp.sympify(e).xreplace(rep))}")
    src.append("    return out")
    ns = {"np": np, "math": math, **{fn: getattr(math, fn) for fn in ("sin", "cos", "exp", "sqrt")}}
    exec("\n".join(src), ns)
    return numba.njit(cache=False)(ns["_force"])
