"""Moment bounds for polynomial random matrices with Monte Carlo and exact checks."""

from .errors import InputError, ResourceCapError, SchemaError
from .polymatrix import DistributionSpec, PolyMatrix, gaussian, parse_polymatrix, pbiased, rademacher

__all__ = [
    "DistributionSpec",
    "InputError",
    "PolyMatrix",
    "ResourceCapError",
    "SchemaError",
    "gaussian",
    "parse_polymatrix",
    "pbiased",
    "rademacher",
]
__version__ = "0.1.0"
