"""Exceptional points of parameter-dependent non-Hermitian matrices."""
from .errors import EpcoreError
from .family import MatrixFamily
from .linalg import EigenSystem, biorthogonalize, char_discriminant, eig, nilpotent_part
from .finder import (ExceptionalPoint, SearchRegion, census, classify, find_epn,
                     refine_ep, scan_grid)

__version__ = "0.1.0"

__all__ = [
    "EpcoreError", "MatrixFamily", "EigenSystem", "eig", "biorthogonalize",
    "nilpotent_part", "char_discriminant", "ExceptionalPoint", "SearchRegion",
    "scan_grid", "refine_ep", "classify", "census", "find_epn",
]
