"""Lepage-Dedecker multisymplectic field theory: Legendre correspondence,
Hamilton n-curves, observable forms, brackets and dynamics checks."""
from .symcore import FunctionSymbol, normalize, parse, var
from .exterior import Chart, Form, Multivector, ext_d, interior_mv_form, wedge
from .multisympl import MultisymplecticSpace, build_ddw, build_lambda_n
from .legendre import LagrangianSpec, LegendreResult, example, hamiltonian

__version__ = "0.1.0"

__all__ = [
    "FunctionSymbol", "normalize", "parse", "var",
    "Chart", "Form", "Multivector", "ext_d", "interior_mv_form", "wedge",
    "MultisymplecticSpace", "build_ddw", "build_lambda_n",
    "LagrangianSpec", "LegendreResult", "example", "hamiltonian",
]
