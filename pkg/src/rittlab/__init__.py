"""Numerical laboratory for Ritt operators induced by measures on the integers.

Modules: zmeasure (measures, convolution, Ritt traces), spectral (symbols
and regularity checks), sqfun (orbits and square functions), varosc
(variation and oscillation), czdecomp (ergodic maximal function and
Calderon-Zygmund decomposition), lemmalab (Fourier-side integrals and
envelope estimates), cli (batch front end).
"""
__version__ = "0.1.0"

from .errors import CapacityError, DegenerateInputError, NumericalError  # noqa: E402

__all__ = ["CapacityError", "DegenerateInputError", "NumericalError", "__version__"]
