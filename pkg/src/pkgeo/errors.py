"""Exception hierarchy for pkgeo.

Every error is a ValueError so callers that only care about bad input can
catch that; the CLI maps the subclasses onto exit codes.
"""


class PkgeoError(ValueError):
    """Base class for all pkgeo errors."""


class ExprSyntaxError(PkgeoError):
    """Expression text does not follow the grammar.

    Attributes:
        position: Character offset where parsing failed
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(PkgeoError):
    """Identifier is neither a declared variable, a parameter nor a function."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}' at offset {position}")
        self.name = name
        self.position = position


class DomainError(PkgeoError):
    """Evaluation left the domain of a function (log, sqrt, division, ...).

    Attributes:
        subexpression: Printed form of the offending node
    """

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


class ChartDomainError(PkgeoError):
    """A point lies outside the parameter rectangle of a chart or immersion."""


class DegenerateMetricError(PkgeoError):
    """A Gram matrix is numerically singular."""


class NullPointError(PkgeoError):
    """The induced metric is degenerate (EG - F^2 inside the null tolerance)."""


class NotLagrangianError(PkgeoError):
    """An operation that needs a Lagrangian immersion got a non-Lagrangian one."""


class NotImmersedError(PkgeoError):
    """The differential of a map is not injective at the requested point."""


class BranchError(PkgeoError):
    """An angle is undefined (its complex argument vanishes)."""


class StencilError(PkgeoError):
    """A finite-difference stencil hit the null locus or the domain boundary."""


class QuadratureError(PkgeoError):
    """Gauss-Legendre refinement did not converge to the requested tolerance."""


class NotSpacelikeError(PkgeoError):
    """A surface of Minkowski space is not space-like."""


class ShapeOperatorError(PkgeoError):
    """The Weingarten map has numerically complex eigenvalues."""


class SceneError(PkgeoError):
    """A scene file is malformed or references undefined objects."""
