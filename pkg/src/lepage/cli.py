"""Command line entry point.

Problem files are YAML documents (schema version 1).  A minimal one::

    version: 1
    example: scalar
    options: {m2: 0}
    grid: 128x128
    tmax: 1.0
    forms: ["1: y"]

Forms are written as ``basis: coefficient`` terms separated by ``;``, for
instance ``dy2: y1; dx1^dx2: x1``.  The basis ``1`` denotes a function.
"""
from __future__ import annotations

import json
import math
import os
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np
import sympy as sp
import yaml

from .symcore import FunctionSymbol, ParseError, normalize, parse, var

SCHEMA_VERSION = 1
REPORT_FORMAT = "lepage-report"

_KEYS = {"version", "example", "options", "lagrangian", "n", "k", "base", "fiber", "functions",
         "target", "metric", "grid", "tmax", "seed", "tolerance", "checks", "forms", "brackets",
         "initial", "hamiltonian_level"}


class ProblemError(click.ClickException):
    def __init__(self, msg, source="", line=None, col=None):
        where = f"{source}:{line}:{col}: " if line is not None else (f"{source}: " if source else "")
        super().__init__(where + msg)
        self.line, self.col = line, col


@dataclass
class Problem:
    version: int = SCHEMA_VERSION
    example: str | None = None
    options: dict = field(default_factory=dict)
    lagrangian: str | None = None
    n: int | None = None
    k: int | None = None
    base: list | None = None
    fiber: list | None = None
    functions: dict = field(default_factory=dict)
    target: str | None = None
    metric: list | None = None
    grid: tuple | None = None
    tmax: float | None = None
    seed: int = 0
    tolerance: float | None = None
    checks: list = field(default_factory=list)
    forms: list = field(default_factory=list)
    brackets: list = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    hamiltonian_level: float = 0.0
    source: str = "<problem>"
    marks: dict = field(default_factory=dict)

    # ------------------------------------------------------------------
    def spec(self):
        from .legendre import LagrangianSpec, example
        if self.example:
            opts = dict(self.options)
            if self.metric is not None:
                opts["metric"] = list(self.metric)
            try:
                return example(self.example, **opts)
            except KeyError as exc:
                raise self.error(str(exc.args[0]), "example") from None
        if not self.lagrangian or self.n is None or self.k is None:
            raise ProblemError("a problem needs either 'example' or 'lagrangian' with 'n' and 'k'", self.source)
        n, k = int(self.n), int(self.k)
        base = list(self.base or (["t"] if n == 1 else [f"x{m}" for m in range(1, n + 1)]))
        fiber = list(self.fiber or [f"y{i}" for i in range(1, k + 1)])
        funcs = {nm: FunctionSymbol(nm, int(ar)) for nm, ar in self.functions.items()}
        try:
            L = parse(self.lagrangian, functions=funcs,
                      indices={"mu": range(1, n + 1), "nu": range(1, n + 1), "i": range(1, k + 1),
                               "j": range(1, k + 1)})
        except ParseError as exc:
            line, col = self.marks.get("lagrangian", (None, None))
            if line is not None:
                line, col = line + exc.line - 1, (col + exc.col if exc.line == 1 else exc.col)
            raise ProblemError(str(exc).split(" at line")[0], self.source, line, col) from None
        s = LagrangianSpec("problem", n, k, L, base, fiber, target=self.target or "full",
                           metric=list(self.metric) if self.metric else None,
                           params={"constants": sorted(L.free_symbols - {var(v) for v in base + fiber}
                                                       - {var(v) for v in _velocities(n, k)}, key=str)})
        try:
            return s.validate()
        except ValueError as exc:
            raise self.error(str(exc), "lagrangian") from None

    def error(self, msg, key=None):
        line, col = self.marks.get(key, (None, None))
        return ProblemError(msg, self.source, line, col)


def _velocities(n, k):
    from .legendre import velocity_name
    return [velocity_name(n, k, i, mu) for i in range(1, k + 1) for mu in range(1, n + 1)]


def _parse_grid(g):
    if g is None:
        return None
    if isinstance(g, int):
        return (g, g)
    if isinstance(g, (list, tuple)):
        return tuple(int(x) for x in g)
    parts = str(g).lower().split("x")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise click.BadParameter(f"grid must look like 128x128, got {g!r}") from None


def load_problem(path) -> Problem:
    text = Path(path).read_text()
    return loads_problem(text, str(path))


def loads_problem(text: str, source: str = "<problem>") -> Problem:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        msg = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ProblemError(msg, source, mark.line + 1, mark.column + 1) from None
        raise ProblemError(msg, source) from None
    if node is None or not isinstance(node, yaml.MappingNode):
        raise ProblemError("problem file must be a mapping", source, 1, 1)
    marks = {}
    for knode, vnode in node.value:
        key = knode.value
        if key not in _KEYS:
            raise ProblemError(f"unknown key {key!r}", source, knode.start_mark.line + 1,
                               knode.start_mark.column + 1)
        marks[key] = (vnode.start_mark.line + 1, vnode.start_mark.column + 1)
    data = yaml.safe_load(text)
    if data.get("version") != SCHEMA_VERSION:
        line, col = marks.get("version", (1, 1))
        raise ProblemError(f"schema version must be {SCHEMA_VERSION}", source, line, col)
    data = dict(data)
    data["grid"] = _parse_grid(data.get("grid"))
    if data.get("target") not in (None, "full", "ddw", "maxwell"):
        line, col = marks["target"]
        raise ProblemError("target must be one of full, ddw, maxwell", source, line, col)
    return Problem(**data, source=source, marks=marks)


def parse_form(chart, text: str):
    """'dy2: y1; dx1^dx2: x1' -> Form; '1: expr' or a bare expression is a function."""
    from .exterior import Form
    terms = [t.strip() for t in str(text).split(";") if t.strip()]
    out = None
    for t in terms:
        basis, coef = (t.split(":", 1) if ":" in t else ("1", t))
        basis, coef = basis.strip(), parse(coef.strip())
        if basis == "1":
            f = chart.scalar(coef)
        else:
            names = [b.strip() for b in basis.split("^")]
            if not all(b.startswith("d") and b[1:] in chart.index for b in names):
                raise click.BadParameter(f"bad basis {basis!r} in form {text!r}")
            f = chart.d(*[b[1:] for b in names]) * coef
        if out is not None and out.degree != f.degree:
            raise click.BadParameter(f"mixed degrees in form {text!r}")
        out = f if out is None else out + f
    if out is None:
        raise click.BadParameter("empty form")
    return out


# --------------------------------------------------------------------------
# report emission

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, sp.Basic):
        return str(x)
    return x if isinstance(x, str) or x is None else str(x)


def build_report(command: str, checks, timings: bool, info: dict | None = None) -> dict:
    rows = [_clean(c.as_dict(timings)) for c in checks]
    doc = {"format": REPORT_FORMAT, "version": 1, "command": command,
           "passed": all(c.passed for c in checks), "checks": rows}
    if info:
        doc["info"] = _clean(info)
    return doc


def render_text(doc: dict) -> str:
    lines = []
    for key, val in doc.get("info", {}).items():
        lines.append(f"{key}: {val}" if not isinstance(val, (dict, list)) else f"{key}: {json.dumps(val)}")
    for c in doc["checks"]:
        tag = "PASS" if c["passed"] else "FAIL"
        line = f"{tag}  {c['name']}  residual={c['residual']:.3e}  tolerance={c['tolerance']:.1e}"
        if "runtime" in c:
            line += f"  runtime={c['runtime']:.2f}s"
        lines.append(line)
    if doc["checks"]:
        lines.append("all checks passed" if doc["passed"] else "some checks FAILED")
    return "\n".join(lines) + "\n"


def emit(ctx, doc: dict, stem: str):
    fmt, out = ctx.obj["format"], ctx.obj["out"]
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n" if fmt == "json" else render_text(doc)
    click.echo(text, nl=False)
    if out:
        os.makedirs(out, exist_ok=True)
        Path(out, f"{stem}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        Path(out, f"{stem}.txt").write_text(render_text(doc))
    if doc["checks"] and not doc["passed"]:
        failing = [c for c in doc["checks"] if not c["passed"]]
        for c in failing:
            click.echo(f"failed: {c['name']} residual={c['residual']}", err=True)
        ctx.exit(1)


# --------------------------------------------------------------------------

def _problem(ctx) -> Problem:
    o = ctx.obj
    if o["problem"]:
        p = load_problem(o["problem"])
    elif o["example"]:
        p = Problem(example=o["example"], source="--example")
    else:
        raise click.UsageError("give --example NAME or --problem FILE")
    if o["example"] and o["problem"]:
        p.example = o["example"]
    if o["grid"] is not None:
        p.grid = o["grid"]
    if o["seed"] is not None:
        p.seed = o["seed"]
    if o["tolerance"] is not None:
        p.tolerance = o["tolerance"]
    if o["tmax"] is not None:
        p.tmax = o["tmax"]
    if o["target"] is not None:
        p.target = o["target"]
    return p


def _common(f):
    opts = [
        click.option("--example", "example", default=None, help="Named example (see 'lepage examples')."),
        click.option("--problem", "problem", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Problem definition file (YAML)."),
        click.option("--grid", default=None, help="Grid size, e.g. 128x128."),
        click.option("--seed", type=int, default=None, help="Random seed for sampled checks."),
        click.option("--tolerance", type=float, default=None, help="Override the pass tolerance."),
        click.option("--tmax", type=float, default=None, help="Final time for 'evolve'."),
        click.option("--target", type=click.Choice(["full", "ddw", "maxwell"]), default=None,
                     help="Target space of the Legendre correspondence."),
        click.option("--out", default=None, type=click.Path(file_okay=False), help="Directory for artifacts."),
        click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text"),
        click.option("--timings", is_flag=True, help="Include runtimes (reports are then not reproducible)."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _store(ctx, example, problem, grid, seed, tolerance, tmax, target, out, fmt, timings):
    ctx.ensure_object(dict)
    ctx.obj.update(example=example, problem=problem, grid=_parse_grid(grid), seed=seed, tolerance=tolerance,
                   tmax=tmax, target=target, out=out, format=fmt, timings=timings)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ValueError, KeyError, ArithmeticError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            raise click.ClickException(f"{type(exc).__name__}: {msg}") from None


@click.group(cls=_Group, context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Multisymplectic Hamiltonians, observables, brackets and dynamics checks."""


@main.command()
@_common
@click.pass_context
def examples(ctx, **kw):
    """List the shipped example problems."""
    _store(ctx, **_kw(kw))
    from .legendre import EXAMPLES
    info = {}
    for name, build in EXAMPLES.items():
        s = build()
        info[name] = f"n={s.n} k={s.k} target={s.target}: {s.description}"
    emit(ctx, build_report("examples", [], False, info), "examples")


def _kw(kw):
    return dict(example=kw["example"], problem=kw["problem"], grid=kw["grid"], seed=kw["seed"],
                tolerance=kw["tolerance"], tmax=kw["tmax"], target=kw["target"], out=kw["out"], fmt=kw["fmt"],
                timings=kw["timings"])


@main.command()
@_common
@click.pass_context
def legendre(ctx, **kw):
    """Print the Hamiltonian and the pseudofiber data."""
    _store(ctx, **_kw(kw))
    from .legendre import enlarged_pseudofiber, hamiltonian, kernel_forms
    p = _problem(ctx)
    spec = p.spec()
    res = hamiltonian(spec, p.target)
    sol = enlarged_pseudofiber(spec, space=res.space)
    info = {"example": spec.name, "target": res.target, "chart": " ".join(res.space.chart.names),
            "H": _display_h(res.H), "domain": [f"{g} != 0" for g in res.guards],
            "pseudofiber_dimension": sol.dimension,
            "pseudofiber_particular": {str(k): str(v) for k, v in sol.particular.items() if v != 0},
            "pseudofiber_kernel": [f.render() for f in kernel_forms(sol, res.space)]}
    emit(ctx, build_report("legendre", [], False, info), "legendre")


def _display_h(H) -> str:
    e = var("e")
    rest = normalize(H - e)
    if e in rest.free_symbols:
        return str(H)
    return str(sp.Add(e, rest))


def _forms(p: Problem, space, extra):
    texts = list(p.forms) + list(extra)
    if not texts:
        raise click.UsageError("no forms given (use --form or 'forms:' in the problem file)")
    return [(t, parse_form(space.chart, t)) for t in texts]


@main.command()
@_common
@click.option("--form", "forms", multiple=True, help="A form, e.g. 'dy2: y1'.")
@click.option("--samples", type=int, default=50, show_default=True)
@click.pass_context
def observables(ctx, forms, samples, **kw):
    """Classify forms as algebraic observable, observable or not observable."""
    _store(ctx, **_kw(kw))
    from .legendre import hamiltonian
    from .observ import classify_form
    p = _problem(ctx)
    res = hamiltonian(p.spec(), p.target)
    info = {"space": res.space.kind, "chart": " ".join(res.space.chart.names)}
    for text, F in _forms(p, res.space, forms):
        c = classify_form(res.space, F, rng=random.Random(p.seed), samples=samples)
        info[text] = {"kind": c.kind, "xi": c.xi.render() if c.xi is not None else None}
    emit(ctx, build_report("observables", [], False, info), "observables")


@main.command()
@_common
@click.option("--pair", "pairs", nargs=2, multiple=True, help="Two forms F G: Poisson/external bracket.")
@click.option("--with-h", "with_h", multiple=True, help="A form F: pseudobracket {H, F}.")
@click.pass_context
def brackets(ctx, pairs, with_h, **kw):
    """Evaluate brackets {F, G} and pseudobrackets {H, F}."""
    _store(ctx, **_kw(kw))
    from .legendre import hamiltonian
    from .observ import (external_bracket, graded_pseudobracket, maxwell_copolarization, poisson,
                         standard_copolarization, try_xi)
    p = _problem(ctx)
    res = hamiltonian(p.spec(), p.target)
    S, H = res.space, res.H
    info = {"H": str(H)}
    todo = [tuple(x) for x in p.brackets] + list(pairs)
    for a, b in todo:
        F, G = parse_form(S.chart, a), parse_form(S.chart, b)
        if try_xi(S, F) is not None and try_xi(S, G) is not None:
            val = poisson(S, F, G)
        else:
            val = external_bracket(S, F, G)
        info[f"{{{a}, {b}}}"] = val.render()
    if with_h:
        cp = maxwell_copolarization(S) if S.kind == "maxwell" else standard_copolarization(S)
        for a in with_h:
            b = graded_pseudobracket(S, H, parse_form(S.chart, a), cp)
            rep = b.representative
            info[f"{{H, {a}}}"] = str(rep) if b.degree == 0 else rep.render()
    if not todo and not with_h:
        raise click.UsageError("nothing to evaluate: give --pair F G or --with-h F")
    emit(ctx, build_report("brackets", [], False, info), "brackets")


# ---- evolve / verify a curve

_DEFAULT_INITIAL = {
    "point_mech": {"q": 1.0, "p": 0.0},
    "scalar": {"y": ["sin(x) + cos(2*x)/2", "3*cos(x)/10"]},
    "cscalar": {"phi1": ["cos(x) + sin(3*x)/5", "7*sin(x)/10"],
                "phi2": ["sin(x)", "-3*cos(x)/5 + cos(2*x)/10"]},
}


# formal potentials cannot be integrated; free fields by default
_EVOLVE_OPTIONS = {"scalar": {"m2": 0}, "cscalar": {"m2": 0}}


def _initial(p: Problem, res):
    init = p.initial or _DEFAULT_INITIAL.get(p.example or "", None)
    if not init:
        raise click.UsageError("no initial data: add 'initial:' to the problem file")
    if res.space.n == 1:
        return {k: float(v) for k, v in init.items()}
    x = var("x")
    out = {}
    for nm, pair_ in init.items():
        fs = [sp.lambdify(x, parse(str(e)), "numpy") for e in pair_]
        out[nm] = tuple(fs)
    return out


@main.command()
@_common
@click.pass_context
def evolve(ctx, **kw):
    """Integrate the de Donder-Weyl Hamilton equations and write a curve file."""
    _store(ctx, **_kw(kw))
    from .legendre import hamiltonian
    from .hamflow import integrate_ddw
    p = _problem(ctx)
    if not p.options and p.example in _EVOLVE_OPTIONS:
        p.options = dict(_EVOLVE_OPTIONS[p.example])
    spec = p.spec()
    if "potential" in spec.params:
        raise click.UsageError(f"{spec.name} has a formal potential; set a mass, e.g. 'options: {{m2: 1}}'")
    res = hamiltonian(spec, p.target)
    init = _initial(p, res)
    if res.space.n == 1:
        tmax = p.tmax if p.tmax is not None else 2 * math.pi
        steps = p.grid[0] if p.grid else 1000
        curve = integrate_ddw(res, init, h=p.hamiltonian_level, t_span=(0.0, tmax), dt=tmax / steps)
    else:
        grid = p.grid or (128, 128)
        curve = integrate_ddw(res, init, h=p.hamiltonian_level, grid=grid, t_max=p.tmax)
    curve.meta.update({"example": spec.name, "options": _clean(p.options)})
    out = ctx.obj["out"] or "."
    os.makedirs(out, exist_ok=True)
    path = Path(out, f"{spec.name}.curve")
    curve.save(path)
    info = {"curve": str(path), "shape": list(curve.shape), "scheme": curve.meta.get("scheme")}
    ctx.obj["out"] = None
    emit(ctx, build_report("evolve", [], False, info), "evolve")


def _curve_checks(curve, tol):
    from .dynverify import FunctionalSpec, charge_form, functional_integral, verify_dynamics_law
    from .hamflow import hamilton_residual
    from .legendre import example, hamiltonian
    from .suites import CheckResult
    name = curve.meta.get("example")
    if not name:
        raise click.UsageError("curve file does not record its example; pass --example")
    res = hamiltonian(example(name, **curve.meta.get("options", {})))
    S, H = res.space, res.H
    checks = []
    hr = hamilton_residual(curve, S, H, interior_only=True)
    checks.append(CheckResult("hamilton residual", hr < tol, hr, tol))
    for f in S.fiber:
        rep = verify_dynamics_law(curve, S, H, S.chart.scalar(var(f)))
        checks.append(CheckResult(f"dynamics law for {f}", rep.residual < tol, rep.residual, tol,
                                  detail={"scale": rep.scale}))
    if name == "cscalar" and S.n == 2:
        F = charge_form(S)
        t = curve.grids[0]
        a, b = float(t[len(t) // 4]) + 0.37 * curve.steps[0], float(t[3 * len(t) // 4]) + 0.37 * curve.steps[0]
        qa = functional_integral(curve, S, FunctionalSpec(F, var(S.base[0]), a))
        qb = functional_integral(curve, S, FunctionalSpec(F, var(S.base[0]), b))
        checks.append(CheckResult("charge on two time slices", abs(qa - qb) < tol, abs(qa - qb), tol,
                                  detail={"slices": [a, b], "charges": [qa, qb]}))
    return checks


@main.command()
@_common
@click.option("--suite", default=None, help="Named suite, e.g. paper-identities.")
@click.option("--criterion", type=int, default=None, help="Run a single acceptance criterion.")
@click.option("--curve", "curve_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def verify(ctx, suite, criterion, curve_path, **kw):
    """Run check suites, one criterion, or the checks on a curve file."""
    _store(ctx, **_kw(kw))
    from .suites import CRITERIA, run_criterion, run_suite
    o = ctx.obj
    opts = {}
    if o["seed"] is not None:
        opts["seed"] = o["seed"]
    if o["grid"] is not None:
        opts["grid"] = o["grid"][0]
    if curve_path:
        from .hamflow import DiscreteCurve
        curve = DiscreteCurve.load(curve_path)
        if o["example"]:
            curve.meta["example"] = o["example"]
        checks = _curve_checks(curve, o["tolerance"] or 1e-2)
        emit(ctx, build_report("verify --curve", checks, o["timings"]), "verify-curve")
        return
    if criterion is not None:
        if criterion not in CRITERIA:
            raise click.BadParameter(f"criterion must be one of {sorted(CRITERIA)}")
        checks = [run_criterion(criterion, **opts)]
        stem = f"criterion-{criterion}"
    else:
        checks = run_suite(suite or "paper-identities", **opts)
        stem = suite or "paper-identities"
    if o["tolerance"] is not None:
        for c in checks:
            if c.tolerance > 0:
                c.tolerance = o["tolerance"]
                c.passed = c.passed and c.residual < c.tolerance
    emit(ctx, build_report(f"verify {stem}", checks, o["timings"]), stem)


@main.command()
@click.argument("report", type=click.Path(exists=True, dir_okay=False))
@click.option("--golden", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Compare verdicts and residuals against a stored report.")
@click.option("--rtol", type=float, default=1e-6, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text")
@click.pass_context
def report(ctx, report, golden, rtol, fmt):
    """Render a JSON report, optionally diffing it against a golden report."""
    doc = json.loads(Path(report).read_text())
    if doc.get("format") != REPORT_FORMAT:
        raise click.ClickException(f"{report} is not a {REPORT_FORMAT} document")
    diffs = []
    if golden:
        ref = {c["name"]: c for c in json.loads(Path(golden).read_text())["checks"]}
        for c in doc["checks"]:
            g = ref.pop(c["name"], None)
            if g is None:
                diffs.append(f"+ {c['name']}: not in golden")
                continue
            if g["passed"] != c["passed"]:
                diffs.append(f"~ {c['name']}: verdict {g['passed']} -> {c['passed']}")
            a, b = float(g["residual"]), float(c["residual"])
            if abs(a - b) > rtol * max(abs(a), abs(b), 1e-300) and abs(a - b) > 1e-300:
                diffs.append(f"~ {c['name']}: residual {a:.6e} -> {b:.6e}")
        diffs += [f"- {nm}: missing" for nm in ref]
    if fmt == "json":
        click.echo(json.dumps({"report": doc, "golden_diff": diffs}, indent=2, sort_keys=True))
    else:
        click.echo(render_text(doc), nl=False)
        for d in diffs:
            click.echo(d)
    if diffs or not doc["passed"]:
        ctx.exit(1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
