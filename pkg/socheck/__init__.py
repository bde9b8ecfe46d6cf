"""
socheck - Second-order optimality verifier for multiobjective C^{1,1} programs.

Given a problem (objectives F, equalities H = 0, constraint G(x) in Q) and a
candidate point, socheck searches for first- and second-order multiplier
certificates and reports whether the necessary conditions reject the point.
"""

__version__ = "0.1.0"

from .errors import SocheckError

__all__ = ["SocheckError", "__version__"]
