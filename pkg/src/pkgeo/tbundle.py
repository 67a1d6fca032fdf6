"""The pseudo-Kähler structure (J, G, Omega) on the tangent bundle of a surface.

A tangent vector X to TΣ at (p, V) is stored through the splitting
X ~ (PX, KX) into horizontal and vertical parts, each a 2-vector of chart
components at p. With g the base metric and j its complex structure:

    Omega(X, Y) = g(KX, PY) - g(PX, KY)
    J = j + j
    G(X, Y) = Omega(JX, Y)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from pkgeo.basegeo import (
    ConformalChart,
    christoffel_tensor,
    connection_term,
    curvature_operator,
    inner,
    jrot,
)
from pkgeo.errors import DegenerateMetricError
from pkgeo.expr import ScalarField, jet


@dataclass
class TBPoint:
    """A point (p, V) of TΣ: base point and fiber vector, in chart components."""

    p: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.p.shape != (2,) or self.V.shape != (2,):
            raise ValueError("TBPoint needs 2-vectors p and V")


@dataclass
class SplitTangent:
    """Tangent vector (PX, KX) to TΣ.

    Attributes:
        hpart: Horizontal part PX
        vpart: Vertical part KX
    """

    hpart: np.ndarray
    vpart: np.ndarray

    # numpy scalars defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __post_init__(self):
        self.hpart = np.asarray(self.hpart, dtype=float)
        self.vpart = np.asarray(self.vpart, dtype=float)

    @classmethod
    def from_vector(cls, x) -> "SplitTangent":
        x = np.asarray(x, dtype=float)
        return cls(x[:2], x[2:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.hpart, self.vpart])

    def __add__(self, other: "SplitTangent") -> "SplitTangent":
        return SplitTangent(self.hpart + other.hpart, self.vpart + other.vpart)

    def __sub__(self, other: "SplitTangent") -> "SplitTangent":
        return SplitTangent(self.hpart - other.hpart, self.vpart - other.vpart)

    def __neg__(self) -> "SplitTangent":
        return SplitTangent(-self.hpart, -self.vpart)

    def __mul__(self, scalar: float) -> "SplitTangent":
        return SplitTangent(scalar * self.hpart, scalar * self.vpart)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.as_vector())))


# split basis (d/ds)^h, (d/dt)^h, (d/ds)^v, (d/dt)^v
SPLIT_BASIS = tuple(SplitTangent.from_vector(row) for row in np.eye(4))


def omega(chart: ConformalChart, tb: TBPoint, X: SplitTangent, Y: SplitTangent) -> float:
    """Symplectic form g(KX, PY) - g(PX, KY)."""
    return inner(chart, tb.p, X.vpart, Y.hpart) - inner(chart, tb.p, X.hpart, Y.vpart)


def jmap(chart: ConformalChart, tb: TBPoint, X: SplitTangent) -> SplitTangent:
    """Complex structure J = j + j."""
    return SplitTangent(jrot(X.hpart), jrot(X.vpart))


def gmetric(chart: ConformalChart, tb: TBPoint, X: SplitTangent, Y: SplitTangent) -> float:
    """Neutral metric G(X, Y) = Omega(JX, Y)."""
    return omega(chart, tb, jmap(chart, tb, X), Y)


def sasaki_norm(chart: ConformalChart, tb: TBPoint, X: SplitTangent) -> float:
    """Positive norm sqrt(g(PX,PX) + g(KX,KX)), used for smallness tests."""
    return float(
        np.sqrt(inner(chart, tb.p, X.hpart, X.hpart) + inner(chart, tb.p, X.vpart, X.vpart))
    )


def gram_matrix(chart: ConformalChart, tb: TBPoint) -> np.ndarray:
    """4x4 Gram matrix of G in the split basis."""
    return np.array([[gmetric(chart, tb, a, b) for b in SPLIT_BASIS] for a in SPLIT_BASIS])


def signature(chart: ConformalChart, tb: TBPoint) -> tuple[int, int]:
    """Numbers of positive and negative eigenvalues of the G Gram matrix.

    Raises:
        DegenerateMetricError: |det| < 1e-12
    """
    gram = gram_matrix(chart, tb)
    det = float(np.linalg.det(gram))
    if abs(det) < 1e-12:
        raise DegenerateMetricError(f"Gram matrix of G is singular (det = {det:.3g})")
    eigenvalues = np.linalg.eigvalsh(gram)
    return int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))


def curvature_correction(chart: ConformalChart, tb: TBPoint, X, Y) -> np.ndarray:
    """-1/2 (R(X,Y)V - jR(V,jX)Y - jR(V,jY)X): the vertical term of D_{X}Y."""
    p, V = tb.p, tb.V
    R = curvature_operator
    return -0.5 * (
        R(chart, p, X, Y, V)
        - jrot(R(chart, p, V, jrot(X), Y))
        - jrot(R(chart, p, V, jrot(Y), X))
    )


def covariant_derivative(
    chart: ConformalChart,
    tb: TBPoint,
    PX,
    PY,
    KY,
    dPY,
    dKY,
) -> SplitTangent:
    """D_X Y for any field Y, given its split components and their derivatives along X.

    Args:
        chart: Base chart
        tb: Footpoint (p, V)
        PX: Horizontal part of the direction X
        PY: Horizontal part of Y at tb
        KY: Vertical part of Y at tb
        dPY: Derivative of the chart components of PY along X
        dKY: Derivative of the chart components of KY along X

    Returns:
        (nabla_{PX} PY, nabla_{PX} KY + curvature correction)
    """
    gamma = christoffel_tensor(chart, tb.p)
    hpart = np.asarray(dPY) + connection_term(gamma, PX, PY)
    vpart = (
        np.asarray(dKY)
        + connection_term(gamma, PX, KY)
        + curvature_correction(chart, tb, np.asarray(PX, dtype=float), np.asarray(PY, dtype=float))
    )
    return SplitTangent(hpart, vpart)


class ProjectableField:
    """Vector field on TΣ whose split parts depend on the base point only.

    Attributes:
        hpart: Two ScalarFields in (s, t), the chart components of PY
        vpart: Two ScalarFields in (s, t), the chart components of KY
    """

    def __init__(self, hpart: tuple[ScalarField, ScalarField], vpart: tuple[ScalarField, ScalarField]):
        self.hpart = tuple(hpart)
        self.vpart = tuple(vpart)

    @classmethod
    def parse(cls, hx: str, hy: str, vx: str, vy: str, parameters=None) -> "ProjectableField":
        fields = [ScalarField.parse(text, parameters=parameters) for text in (hx, hy, vx, vy)]
        return cls((fields[0], fields[1]), (fields[2], fields[3]))

    @classmethod
    def constant(cls, X: SplitTangent) -> "ProjectableField":
        """Extension of X with constant chart components."""
        h = X.hpart
        v = X.vpart
        return cls(
            (ScalarField.constant(h[0]), ScalarField.constant(h[1])),
            (ScalarField.constant(v[0]), ScalarField.constant(v[1])),
        )

    def rotated(self) -> "ProjectableField":
        """The field J Y."""
        h1, h2 = self.hpart
        v1, v2 = self.vpart
        return ProjectableField(
            (ScalarField(-h2.expression), h1),
            (ScalarField(-v2.expression), v1),
        )

    def at(self, p) -> SplitTangent:
        p = tuple(p)
        return SplitTangent(
            [self.hpart[0](*p), self.hpart[1](*p)],
            [self.vpart[0](*p), self.vpart[1](*p)],
        )

    def jacobians(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Chart-component Jacobians [component, variable] of PY and KY."""
        def rows(fields):
            out = []
            for f in fields:
                d = jet(f, tuple(p), 1)
                out.append([d[(1, 0)], d[(0, 1)]])
            return np.array(out, dtype=float)

        return rows(self.hpart), rows(self.vpart)

    def derivative(self, p, direction) -> tuple[np.ndarray, np.ndarray]:
        jh, jv = self.jacobians(p)
        return jh @ direction, jv @ direction


def levi_civita(chart: ConformalChart, tb: TBPoint, X: SplitTangent, Yfield: ProjectableField) -> SplitTangent:
    """Covariant derivative D_X Y of the Levi-Civita connection of G.

    Y is projectable, so only PX enters: the derivative of its components is
    taken symbolically along PX and corrected by the Christoffel symbols and
    the curvature term at (p, V).
    """
    Y = Yfield.at(tb.p)
    dPY, dKY = Yfield.derivative(tb.p, X.hpart)
    return covariant_derivative(chart, tb, X.hpart, Y.hpart, Y.vpart, dPY, dKY)


def nijenhuis(chart: ConformalChart, tb: TBPoint, X: SplitTangent, Y: SplitTangent) -> SplitTangent:
    """Nijenhuis tensor N(X,Y) = [JX,JY] - J[JX,Y] - J[X,JY] - [X,Y].

    X and Y are extended by constant chart components; the brackets come from
    the relations between horizontal and vertical lifts.
    """
    Xf, Yf = ProjectableField.constant(X), ProjectableField.constant(Y)
    JXf, JYf = Xf.rotated(), Yf.rotated()

    def bracket(A: ProjectableField, B: ProjectableField) -> SplitTangent:
        return _lift_bracket(chart, tb, A, B)

    J = lambda Z: jmap(chart, tb, Z)  # noqa: E731
    return bracket(JXf, JYf) - J(bracket(JXf, Yf)) - J(bracket(Xf, JYf)) - bracket(Xf, Yf)


# ---------------------------------------------------------------------------
# Structure residuals
# ---------------------------------------------------------------------------


def _lift_bracket(chart: ConformalChart, tb: TBPoint, Xf: ProjectableField, Yf: ProjectableField) -> SplitTangent:
    """[X, Y] from the bracket relations of horizontal and vertical lifts.

    [A^h, B^h] = [A, B]^h - (R(A, B)V)^v, [A^h, B^v] = (nabla_A B)^v and
    [A^v, B^v] = 0.
    """
    X = Xf.at(tb.p)
    Y = Yf.at(tb.p)
    jxh, jxv = Xf.jacobians(tb.p)
    jyh, jyv = Yf.jacobians(tb.p)
    gamma = christoffel_tensor(chart, tb.p)
    hpart = jyh @ X.hpart - jxh @ Y.hpart
    nabla_x_yk = jyv @ X.hpart + connection_term(gamma, X.hpart, Y.vpart)
    nabla_y_xk = jxv @ Y.hpart + connection_term(gamma, Y.hpart, X.vpart)
    vpart = nabla_x_yk - nabla_y_xk - curvature_operator(chart, tb.p, X.hpart, Y.hpart, tb.V)
    return SplitTangent(hpart, vpart)


def torsion_residual(chart: ConformalChart, tb: TBPoint, Xf: ProjectableField, Yf: ProjectableField) -> SplitTangent:
    """D_X Y - D_Y X - [X, Y]."""
    X = Xf.at(tb.p)
    Y = Yf.at(tb.p)
    return levi_civita(chart, tb, X, Yf) - levi_civita(chart, tb, Y, Xf) - _lift_bracket(chart, tb, Xf, Yf)


def metric_compatibility_residual(
    chart: ConformalChart,
    tb: TBPoint,
    X: SplitTangent,
    Yf: ProjectableField,
    Zf: ProjectableField,
) -> float:
    """X.G(Y,Z) - G(D_X Y, Z) - G(Y, D_X Z).

    G(Y, Z) = e^{2r} (jKY . PZ - jPY . KZ) depends on the base point only;
    its derivative along X is taken from symbolic jets of r and the fields.
    """
    p = tb.p
    Y, Z = Yf.at(p), Zf.at(p)
    dPY, dKY = Yf.derivative(p, X.hpart)
    dPZ, dKZ = Zf.derivative(p, X.hpart)
    r = chart.r_jet(p, 1)
    dr = np.array([r[(1, 0)], r[(0, 1)]]) @ X.hpart
    inside = jrot(Y.vpart) @ Z.hpart - jrot(Y.hpart) @ Z.vpart
    dinside = (
        jrot(dKY) @ Z.hpart
        + jrot(Y.vpart) @ dPZ
        - jrot(dPY) @ Z.vpart
        - jrot(Y.hpart) @ dKZ
    )
    derivative = np.exp(2.0 * r[(0, 0)]) * (2.0 * dr * inside + dinside)
    return float(
        derivative
        - gmetric(chart, tb, levi_civita(chart, tb, X, Yf), Z)
        - gmetric(chart, tb, Y, levi_civita(chart, tb, X, Zf))
    )


def parallel_j_residual(chart: ConformalChart, tb: TBPoint, X: SplitTangent, Yf: ProjectableField) -> SplitTangent:
    """D_X(JY) - J D_X Y."""
    return levi_civita(chart, tb, X, Yf.rotated()) - jmap(chart, tb, levi_civita(chart, tb, X, Yf))


def structure_residuals(
    chart: ConformalChart,
    tb: TBPoint,
    X: SplitTangent,
    Y: SplitTangent,
) -> dict[str, float]:
    """Pointwise algebraic identities of (J, G, Omega) for one pair of vectors."""
    J: Callable[[SplitTangent], SplitTangent] = lambda Z: jmap(chart, tb, Z)  # noqa: E731
    return {
        "j_squared": (J(J(X)) + X).max_abs(),
        "omega_antisymmetry": abs(omega(chart, tb, X, Y) + omega(chart, tb, Y, X)),
        "g_symmetry": abs(gmetric(chart, tb, X, Y) - gmetric(chart, tb, Y, X)),
        "g_j_invariance": abs(gmetric(chart, tb, J(X), J(Y)) - gmetric(chart, tb, X, Y)),
        "nijenhuis": nijenhuis(chart, tb, X, Y).max_abs(),
    }
