"""pkgeo: pseudo-Kähler geometry of tangent bundles of surfaces."""

__version__ = "0.1.0"

from pkgeo.basegeo import ConformalChart, Rect
from pkgeo.expr import ScalarField, parse
from pkgeo.tbundle import SplitTangent, TBPoint

__all__ = [
    "ConformalChart",
    "Rect",
    "ScalarField",
    "parse",
    "SplitTangent",
    "TBPoint",
]
