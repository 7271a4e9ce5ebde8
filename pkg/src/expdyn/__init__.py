"""High-precision dynamics of f(z) = lambda * e**z: strips, hairs, curves and constructions."""
from .arith import DEFAULT_EXPONENT_BUDGET, DEFAULT_PRECISION, ExponentBudgetExceeded, HPComplex
from .dynmap import ExpMap, make_map

__all__ = ["DEFAULT_EXPONENT_BUDGET", "DEFAULT_PRECISION", "ExponentBudgetExceeded", "ExpMap",
           "HPComplex", "make_map"]
__version__ = "0.1.0"
