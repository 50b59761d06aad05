"""Wiener chaos decomposition of nodal lengths of Gaussian fields on S^2 and T^2."""

from . import chaos, field, geometry, nodal, specfun, variance

__version__ = "0.1.0"

__all__ = ["chaos", "field", "geometry", "nodal", "specfun", "variance"]
