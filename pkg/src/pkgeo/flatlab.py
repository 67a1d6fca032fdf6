"""The flat case T R^2 = R^{2,2}, identified with C^2 through
(x1 + i x2, y1 + i y2).

For a gradient graph of u the complex determinant of the tangent frame is
2u_st + i(u_tt - u_ss); its argument is the Lagrangian angle beta, and
2H = J D beta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from pkgeo.basegeo import ConformalChart, Rect
from pkgeo.errors import BranchError, NullPointError
from pkgeo.expr import Expr, ScalarField, Var, jet, sub, substitute
from pkgeo.lagrangian import (
    DEFAULT_TOL_NULL,
    GradientGraph,
    induced_metric,
    mean_curvature_data,
    tangent_frame,
)
from pkgeo.tbundle import SplitTangent, TBPoint, gmetric, jmap, omega, sasaki_norm

logger = logging.getLogger(__name__)

BRANCH_TOL = 1e-12


def _snap(value: float) -> float:
    """Round trigonometric values within 1e-15 of 0 or +-1."""
    for target in (0.0, 1.0, -1.0):
        if abs(value - target) < 1e-15:
            return target
    return value


def flat_chart(domain: Rect | None = None) -> ConformalChart:
    return ConformalChart.catalog("flat", domain)


def flat_graph(u: ScalarField, domain: Rect | None = None) -> GradientGraph:
    """The gradient graph of u over the flat chart."""
    chart = flat_chart(domain)
    return GradientGraph(chart, u, chart.domain)


def as_complex(X: SplitTangent) -> np.ndarray:
    """(PX, KX) as a vector of C^2."""
    return np.array([X.hpart[0] + 1j * X.hpart[1], X.vpart[0] + 1j * X.vpart[1]])


def from_complex(z) -> SplitTangent:
    return SplitTangent([z[0].real, z[0].imag], [z[1].real, z[1].imag])


def complex_determinant(e1: SplitTangent, e2: SplitTangent) -> complex:
    z1, z2 = as_complex(e1), as_complex(e2)
    return complex(z1[0] * z2[1] - z1[1] * z2[0])


def hermitian_form(X: SplitTangent, Y: SplitTangent) -> complex:
    """G(X, Y) + i Omega(X, Y): complex linear in X, antilinear in Y."""
    zx, zy = as_complex(X), as_complex(Y)
    return complex(1j * (zx[1] * np.conj(zy[0]) - zx[0] * np.conj(zy[1])))


def _hessian(u: ScalarField, pt, order: int = 2):
    return jet(u, (float(pt[0]), float(pt[1])), order)


def _angle_vector(u: ScalarField, pt) -> tuple[float, float]:
    d = _hessian(u, pt)
    return 2.0 * d[(1, 1)], d[(0, 2)] - d[(2, 0)]


def lagrangian_angle(u: ScalarField, pt, tol: float = BRANCH_TOL) -> float:
    """beta = arg(2u_st + i(u_tt - u_ss)) in (-pi, pi].

    Raises:
        NullPointError: The complex determinant vanishes (the graph is null)
    """
    w1, w2 = _angle_vector(u, pt)
    if math.hypot(w1, w2) < tol:
        raise NullPointError(f"complex determinant vanishes at ({pt[0]:.6g}, {pt[1]:.6g})")
    beta = math.atan2(w2, w1)
    return math.pi if beta == -math.pi else beta


def angle_gradient(u: ScalarField, pt, tol: float = BRANCH_TOL) -> np.ndarray:
    """(beta_s, beta_t), differentiated without choosing a branch."""
    d = _hessian(u, pt, 3)
    w1, w2 = 2.0 * d[(1, 1)], d[(0, 2)] - d[(2, 0)]
    modulus = w1**2 + w2**2
    if math.sqrt(modulus) < tol:
        raise BranchError(f"Lagrangian angle undefined at ({pt[0]:.6g}, {pt[1]:.6g})")
    dw1 = np.array([2.0 * d[(2, 1)], 2.0 * d[(1, 2)]])
    dw2 = np.array([d[(1, 2)] - d[(3, 0)], d[(0, 3)] - d[(2, 1)]])
    return (w1 * dw2 - w2 * dw1) / modulus


def riemannian_angle(u: ScalarField, pt) -> float:
    """arg(1 - det Hess u + i Laplacian u): the angle of the graph in Euclidean C^2."""
    d = _hessian(u, pt)
    det = d[(2, 0)] * d[(0, 2)] - d[(1, 1)] ** 2
    return math.atan2(d[(2, 0)] + d[(0, 2)], 1.0 - det)


def angle_gradient_identity(
    u: ScalarField, pt, domain: Rect | None = None, tol_null: float = DEFAULT_TOL_NULL
) -> float:
    """|2H - J D beta| in the positive norm, D beta the induced-metric gradient.

    Raises:
        NullPointError: The graph is null at ``pt``
        BranchError: beta is undefined at ``pt``
    """
    graph = flat_graph(u, domain)
    data = mean_curvature_data(graph, pt, tol_null)
    grad = angle_gradient(u, pt)
    coefficients = np.linalg.solve(data.metric.matrix, grad)
    xs, xt = tangent_frame(graph, pt)
    d_beta = coefficients[0] * xs + coefficients[1] * xt
    residual = 2.0 * data.vector - jmap(graph.chart, data.tb, d_beta)
    return sasaki_norm(graph.chart, data.tb, residual)


def constant_angle_expression(u: ScalarField, beta0: float) -> Expr:
    """cos(beta0)(u_tt - u_ss) - 2 sin(beta0) u_st as a simplified AST."""
    c, s = _snap(math.cos(beta0)), _snap(math.sin(beta0))
    u_ss, u_st, u_tt = (u.derivative_ast(k) for k in ((2, 0), (1, 1), (0, 2)))
    return c * sub(u_tt, u_ss) - (2.0 * s) * u_st


def constant_angle_residual(u: ScalarField, beta0: float, pt) -> float:
    """cos(beta0)(u_tt - u_ss) - 2 sin(beta0) u_st at ``pt``."""
    c, s = _snap(math.cos(beta0)), _snap(math.sin(beta0))
    d = _hessian(u, pt)
    return c * (d[(0, 2)] - d[(2, 0)]) - 2.0 * s * d[(1, 1)]


@dataclass
class MinimalFamilySpec:
    """Data (beta0, f1, f2) of the minimal family u = f1(<p, V>) + f2(<p, jV>).

    Attributes:
        beta0: Constant Lagrangian angle
        f1, f2: Non-constant fields of the single variable x
    """

    beta0: float
    f1: ScalarField
    f2: ScalarField

    def __post_init__(self):
        for name, f in (("f1", self.f1), ("f2", self.f2)):
            if f.variables != ("x",):
                raise ValueError(f"{name} must be a field of the single variable x")
            if f.is_constant():
                raise ValueError(f"{name} is constant; the family would be degenerate")
            # second derivatives must exist symbolically
            f.derivative_ast((2,))

    @classmethod
    def parse(cls, beta0: float, f1: str, f2: str, parameters=None) -> "MinimalFamilySpec":
        return cls(
            beta0,
            ScalarField.parse(f1, ("x",), parameters),
            ScalarField.parse(f2, ("x",), parameters),
        )

    @property
    def theta(self) -> float:
        return self.beta0 / 2.0 + math.pi / 4.0

    @property
    def direction(self) -> tuple[float, float]:
        """V = e^{i theta}."""
        return (_snap(math.cos(self.theta)), _snap(math.sin(self.theta)))


def build_minimal(spec: MinimalFamilySpec, domain: Rect | None = None) -> GradientGraph:
    """Gradient graph of u = f1(cos(theta) s + sin(theta) t) + f2(-sin(theta) s + cos(theta) t)."""
    c, s = spec.direction
    S, T = Var("s"), Var("t")
    sigma = c * S + s * T
    tau = (-s) * S + c * T
    u = substitute(spec.f1.expression, {"x": sigma}) + substitute(spec.f2.expression, {"x": tau})
    return flat_graph(ScalarField(u), domain)


def rotate_coordinates(u: ScalarField, theta: float) -> ScalarField:
    """v(sigma, tau) = u(s, t) with sigma = cos(theta) s + sin(theta) t, tau = -sin(theta) s + cos(theta) t."""
    c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
    sigma, tau = Var("sigma"), Var("tau")
    mapping = {"s": c * sigma - s * tau, "t": s * sigma + c * tau}
    return ScalarField(substitute(u.expression, mapping), ("sigma", "tau"))


def rotation_identity_residual(u: ScalarField, theta: float, pt) -> float:
    """Largest residual of the second-derivative change-of-variables identities.

    u_ss = c^2 v_σσ - 2cs v_στ + s^2 v_ττ, u_tt = s^2 v_σσ + 2cs v_στ + c^2 v_ττ
    and u_st = cs(v_σσ - v_ττ) + (c^2 - s^2) v_στ, with c = cos(theta), s = sin(theta).
    """
    c, s = _snap(math.cos(theta)), _snap(math.sin(theta))
    v = rotate_coordinates(u, theta)
    x, y = float(pt[0]), float(pt[1])
    du = jet(u, (x, y), 2)
    dv = jet(v, (c * x + s * y, -s * x + c * y), 2)
    vss, vst, vtt = dv[(2, 0)], dv[(1, 1)], dv[(0, 2)]
    return max(
        abs(du[(2, 0)] - (c * c * vss - 2 * c * s * vst + s * s * vtt)),
        abs(du[(0, 2)] - (s * s * vss + 2 * c * s * vst + c * c * vtt)),
        abs(du[(1, 1)] - (c * s * (vss - vtt) + (c * c - s * s) * vst)),
    )


@dataclass
class LagrangianFrame:
    """Pseudo-orthonormal Lagrangian frame: G(e1,e1) = -1, G(e2,e2) = 1, G(e1,e2) = 0."""

    e1: SplitTangent
    e2: SplitTangent


def lagrangian_frame(u: ScalarField, pt, tol_null: float = DEFAULT_TOL_NULL) -> LagrangianFrame:
    """Frame of the tangent plane of the graph of grad u, from the eigenvectors of (E, F, G).

    Raises:
        NullPointError: The induced metric is degenerate
    """
    graph = flat_graph(u)
    metric = induced_metric(graph, pt)
    if metric.is_null(tol_null):
        raise NullPointError(f"graph is null at ({pt[0]:.6g}, {pt[1]:.6g})")
    eigenvalues, vectors = np.linalg.eigh(metric.matrix)
    xs, xt = tangent_frame(graph, pt)
    e1 = (vectors[0, 0] * xs + vectors[1, 0] * xt) * (1.0 / math.sqrt(-eigenvalues[0]))
    e2 = (vectors[0, 1] * xs + vectors[1, 1] * xt) * (1.0 / math.sqrt(eigenvalues[1]))
    return LagrangianFrame(e1, e2)


def frame_expansion_residual(frame: LagrangianFrame, V: SplitTangent) -> float:
    """Max-abs residual of V = -H(V, e1) e1 + H(V, e2) e2, H the hermitian form."""
    z = -hermitian_form(V, frame.e1) * as_complex(frame.e1) + hermitian_form(V, frame.e2) * as_complex(frame.e2)
    return float(np.max(np.abs(z - as_complex(V))))


# ---------------------------------------------------------------------------
# Angle grids
# ---------------------------------------------------------------------------


@dataclass
class AngleGrid:
    """Lagrangian angle on cell centres of a grid.

    Attributes:
        s, t: Grid coordinates (1-d)
        beta: Angle per cell, NaN on null cells
        null: Cells meeting the null locus
        labels: Connected component of each non-null cell (0 on null cells)
        components: Number of components
    """

    s: np.ndarray
    t: np.ndarray
    beta: np.ndarray
    null: np.ndarray
    labels: np.ndarray
    components: int


def _meets_null_locus(corners: list[tuple[float, float]], tol: float) -> bool:
    # a cell meets {w = 0} when w vanishes or turns by at least 90 degrees on it
    if any(math.hypot(*w) < tol for w in corners):
        return True
    for i, a in enumerate(corners):
        for b in corners[i + 1 :]:
            if a[0] * b[0] + a[1] * b[1] <= 0.0:
                return True
    return False


def angle_grid(u: ScalarField, domain: Rect, n: int = 32, tol: float = BRANCH_TOL) -> AngleGrid:
    """beta on an n x n grid with null cells labelled out.

    A cell is null when 2u_st + i(u_tt - u_ss) vanishes or turns through a
    right angle over its corners and centre; the remaining cells are split
    into 4-connected components.
    """
    s_values, t_values = domain.grid(n)
    hs = 0.5 * (domain.s1 - domain.s0) / n
    ht = 0.5 * (domain.t1 - domain.t0) / n
    beta = np.full((n, n), np.nan)
    null = np.zeros((n, n), dtype=bool)
    for i, s in enumerate(s_values):
        for j, t in enumerate(t_values):
            samples = [(s, t)] + [(s + a * hs, t + b * ht) for a in (-1, 1) for b in (-1, 1)]
            corners = [_angle_vector(u, q) for q in samples]
            if _meets_null_locus(corners, tol):
                null[i, j] = True
                continue
            beta[i, j] = lagrangian_angle(u, (s, t), tol)
    labels, components = ndimage.label(~null)
    if null.any():
        logger.debug("angle grid: %d null cells, %d components", int(null.sum()), components)
    return AngleGrid(s_values, t_values, beta, null, labels, int(components))


@dataclass
class AngleConstancy:
    """Circular spread of beta per connected non-null component."""

    spreads: list[float]
    mean_angles: list[float]
    null_cells: int

    @property
    def max_spread(self) -> float:
        return max(self.spreads, default=0.0)


def angle_constancy(grid: AngleGrid) -> AngleConstancy:
    """Root-mean-square deviation of beta from its circular mean, per component.

    Deviations are measured as angles between unit vectors, so values near
    the branch cut +-pi do not wrap.
    """
    spreads, means = [], []
    for label in range(1, grid.components + 1):
        angles = grid.beta[grid.labels == label]
        units = np.exp(1j * angles)
        mean = units.mean()
        direction = mean / abs(mean) if abs(mean) > 0 else 1.0
        deviation = np.angle(units * np.conj(direction))
        spreads.append(float(np.sqrt(np.mean(deviation**2))))
        means.append(float(np.angle(direction)))
    return AngleConstancy(spreads, means, int(grid.null.sum()))


def pseudo_orthonormality_defect(chart: ConformalChart, tb: TBPoint, frame: LagrangianFrame) -> float:
    e1, e2 = frame.e1, frame.e2
    return max(
        abs(gmetric(chart, tb, e1, e1) + 1.0),
        abs(gmetric(chart, tb, e2, e2) - 1.0),
        abs(gmetric(chart, tb, e1, e2)),
        abs(omega(chart, tb, e1, e2)),
    )
