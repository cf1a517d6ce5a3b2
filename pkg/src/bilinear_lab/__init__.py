"""Numerical laboratory for bilinear averages f(T^n x) g(T^-n x) along n in {floor(h(k))}."""

from .regvar import InverseFunction, RegVarFunction, parse_family
from .kernel import ParamBlock, build_kernel, param_block

__all__ = ["InverseFunction", "RegVarFunction", "parse_family", "ParamBlock", "build_kernel", "param_block"]
__version__ = "0.1.0"
