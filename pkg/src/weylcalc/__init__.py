"""Symbolic and numerical Weyl-type calculus on nilpotent and low-dimensional Lie algebras.

The numerical backends live in their own modules and are not imported here.
"""
from .lie import LieAlgebra, abelian, builtin, heisenberg3, so3
from .poly import PolySymbol
from .expr import parse_symbol

__version__ = "0.1.0"

__all__ = ["LieAlgebra", "PolySymbol", "abelian", "builtin", "heisenberg3", "so3",
           "parse_symbol", "__version__"]
