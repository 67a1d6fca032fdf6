"""Surfaces immersed in TΣ: Lagrangian defect, induced metric, extrinsic
curvature, mean curvature and the classification constructors.

An immersion is a map (s, t) -> (p(s,t), V(s,t)). Its tangent frame is
split as X_k = (d_k p, d_k V + Gamma(d_k p, V)), and the derivative D_{X_j} X_k
uses the general form of the Levi-Civita connection of G along a map.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from pkgeo.basegeo import (
    ConformalChart,
    CurveOnSurface,
    Rect,
    check_arclength,
    christoffel_derivatives,
    christoffel_tensor,
    connection_term,
    frenet,
    jrot,
)
from pkgeo.errors import (
    BranchError,
    ChartDomainError,
    NotImmersedError,
    NotLagrangianError,
    NullPointError,
    StencilError,
)
from pkgeo.expr import Const, ScalarField, call, jet, mul
from pkgeo.tbundle import (
    SplitTangent,
    TBPoint,
    covariant_derivative,
    gmetric,
    jmap,
    omega,
    sasaki_norm,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL_NULL = 1e-10
DEFAULT_TOL_LAGRANGIAN = 1e-8


@dataclass
class ImmersionJet:
    """Second-order jet of an immersion at one parameter point.

    Arrays are indexed by parameter direction first: ``dp[k]`` is d_k p and
    ``ddp[j, k]`` is d_j d_k p (k = 0 for s, 1 for t).
    """

    p: np.ndarray
    dp: np.ndarray
    ddp: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    ddV: np.ndarray


class TBImmersion(ABC):
    """Parametrised surface (s, t) -> (p, V) in TΣ over a chart.

    Attributes:
        chart: Base chart
        domain: Parameter rectangle
    """

    def __init__(self, chart: ConformalChart, domain: Rect):
        self.chart = chart
        self.domain = domain

    @abstractmethod
    def _jet(self, s: float, t: float) -> ImmersionJet: ...

    def jet(self, pt) -> ImmersionJet:
        """Jet at ``pt``; the point and its footpoint must lie in their domains."""
        s, t = float(pt[0]), float(pt[1])
        if not self.domain.contains((s, t)):
            raise ChartDomainError(f"parameter point ({s:.6g}, {t:.6g}) outside {self.domain}")
        data = self._jet(s, t)
        self.chart.require(data.p)
        return data

    def point(self, pt) -> TBPoint:
        data = self.jet(pt)
        return TBPoint(data.p, data.V)


def _field_jet(f: ScalarField, s: float, t: float) -> tuple[float, np.ndarray, np.ndarray]:
    d = jet(f, (s, t), 2)
    grad = np.array([d[(1, 0)], d[(0, 1)]])
    hess = np.array([[d[(2, 0)], d[(1, 1)]], [d[(1, 1)], d[(0, 2)]]])
    return d[(0, 0)], grad, hess


class ExpressionImmersion(TBImmersion):
    """Immersion whose four chart components are expression fields in (s, t)."""

    def __init__(
        self,
        chart: ConformalChart,
        p: tuple[ScalarField, ScalarField],
        V: tuple[ScalarField, ScalarField],
        domain: Rect,
    ):
        super().__init__(chart, domain)
        self.p = tuple(p)
        self.V = tuple(V)

    @classmethod
    def parse(
        cls,
        chart: ConformalChart,
        p: tuple[str, str],
        V: tuple[str, str],
        domain: Rect,
        parameters: dict[str, float] | None = None,
    ) -> "ExpressionImmersion":
        fields = [ScalarField.parse(text, parameters=parameters) for text in (*p, *V)]
        return cls(chart, (fields[0], fields[1]), (fields[2], fields[3]), domain)

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(p=({self.p[0]}, {self.p[1]}), "
            f"V=({self.V[0]}, {self.V[1]}), chart={self.chart.name!r})"
        )

    def _jet(self, s: float, t: float) -> ImmersionJet:
        pj = [_field_jet(f, s, t) for f in self.p]
        vj = [_field_jet(f, s, t) for f in self.V]
        return ImmersionJet(
            p=np.array([x[0] for x in pj]),
            dp=np.array([x[1] for x in pj]).T,
            ddp=np.moveaxis(np.array([x[2] for x in pj]), 0, -1),
            V=np.array([x[0] for x in vj]),
            dV=np.array([x[1] for x in vj]).T,
            ddV=np.moveaxis(np.array([x[2] for x in vj]), 0, -1),
        )


class GradientGraph(ExpressionImmersion):
    """The graph p -> (p, grad u(p)) with grad u = e^{-2r}(u_s d/ds + u_t d/dt).

    Attributes:
        u: The potential
    """

    def __init__(self, chart: ConformalChart, u: ScalarField, domain: Rect | None = None):
        domain = domain or chart.domain
        factor = call("exp", mul(Const(-2.0), chart.r.expression))
        V = (
            ScalarField(mul(factor, u.derivative_ast((1, 0)))),
            ScalarField(mul(factor, u.derivative_ast((0, 1)))),
        )
        super().__init__(chart, (ScalarField.parse("s"), ScalarField.parse("t")), V, domain)
        self.u = u

    @classmethod
    def parse(  # type: ignore[override]
        cls,
        chart: ConformalChart,
        u: str,
        domain: Rect | None = None,
        parameters: dict[str, float] | None = None,
    ) -> "GradientGraph":
        return cls(chart, ScalarField.parse(u, parameters=parameters), domain)

    def __repr__(self) -> str:
        return f"GradientGraph(u={self.u}, chart={self.chart.name!r})"


class FlatExplicit(ExpressionImmersion):
    """Immersion into T R^2 = R^4 given by explicit (x1, x2, y1, y2)."""

    def __init__(
        self,
        x: tuple[ScalarField, ScalarField],
        y: tuple[ScalarField, ScalarField],
        domain: Rect,
        chart: ConformalChart | None = None,
    ):
        chart = chart or ConformalChart.catalog("flat")
        if not chart.r.is_constant() or chart.r(0.0, 0.0) != 0.0:
            raise ValueError("FlatExplicit needs the flat chart (r = 0)")
        super().__init__(chart, x, y, domain)


def zero_section(chart: ConformalChart, domain: Rect | None = None) -> ExpressionImmersion:
    """The null Lagrangian (p, 0)."""
    return ExpressionImmersion.parse(chart, ("s", "t"), ("0", "0"), domain or chart.domain)


def vertical_fiber(chart: ConformalChart, p0, domain: Rect) -> ExpressionImmersion:
    """The fiber over p0, parametrised by V = (s, t): projection rank 0."""
    params = {"x0": float(p0[0]), "y0": float(p0[1])}
    return ExpressionImmersion.parse(chart, ("x0", "y0"), ("s", "t"), domain, params)


class AffineNormalBundle(TBImmersion):
    """X(s, t) = (gamma(s), a(s) T(s) + t jT(s)) over an arclength curve.

    Attributes:
        curve: Base curve, parametrised by arclength
        a: Offset function of s
    """

    def __init__(
        self,
        chart: ConformalChart,
        curve: CurveOnSurface,
        a: ScalarField,
        t_interval: tuple[float, float] = (-1.0, 1.0),
        arclength_tol: float = 1e-8,
    ):
        if a.variables != ("s",):
            raise ValueError("the offset a must be a field of the single variable s")
        if not curve.arclength:
            raise ValueError("affine normal bundles need an arclength-parametrised curve")
        check_arclength(chart, curve, tol=arclength_tol)
        super().__init__(chart, Rect(curve.interval[0], curve.interval[1], *t_interval))
        self.curve = curve
        self.a = a

    def __repr__(self) -> str:
        return f"AffineNormalBundle(curve={self.curve!r}, a={self.a})"

    def _jet(self, s: float, t: float) -> ImmersionJet:
        g0, g1, g2, g3 = self.curve.derivatives(s, 3)
        aj = jet(self.a, s, 2)
        a0, a1, a2 = aj[(0,)], aj[(1,)], aj[(2,)]
        zero = np.zeros(2)
        dp = np.array([g1, zero])
        ddp = np.array([[g2, zero], [zero, zero]])
        V = a0 * g1 + t * jrot(g1)
        dV = np.array([a1 * g1 + a0 * g2 + t * jrot(g2), jrot(g1)])
        ddV = np.array(
            [
                [a2 * g1 + 2 * a1 * g2 + a0 * g3 + t * jrot(g3), jrot(g2)],
                [jrot(g2), zero],
            ]
        )
        return ImmersionJet(p=g0, dp=dp, ddp=ddp, V=V, dV=dV, ddV=ddV)

    def geodesic_curvature(self, s: float) -> float:
        return frenet(self.chart, self.curve, s).curvature

    def expected_mean_curvature(self, s: float) -> SplitTangent:
        """(0, k T): the mean curvature vector predicted from the curve alone."""
        fr = frenet(self.chart, self.curve, s)
        return SplitTangent(np.zeros(2), fr.curvature * fr.tangent)

    def expected_metric(self, s: float) -> np.ndarray:
        """[[-2ak, -1], [-1, 0]]."""
        k = self.geodesic_curvature(s)
        return np.array([[-2.0 * self.a(s) * k, -1.0], [-1.0, 0.0]])


def normal_bundle(
    chart: ConformalChart, curve: CurveOnSurface, t_interval: tuple[float, float] = (-1.0, 1.0)
) -> AffineNormalBundle:
    """The normal bundle of a curve (a = 0)."""
    return AffineNormalBundle(chart, curve, ScalarField.constant(0.0, ("s",)), t_interval)


# ---------------------------------------------------------------------------
# Frame and first-order quantities
# ---------------------------------------------------------------------------


@dataclass
class FrameData:
    """Split frame of an immersion and the derivatives of its vertical parts.

    Attributes:
        tb: Footpoint (p, V)
        frame: [X_s, X_t]
        dK: dK[j, k] = d_j of the chart components of K X_k
        jet: The underlying immersion jet
    """

    tb: TBPoint
    frame: list[SplitTangent]
    dK: np.ndarray
    jet: ImmersionJet


def frame_data(imm: TBImmersion, pt) -> FrameData:
    data = imm.jet(pt)
    chart = imm.chart
    gamma = christoffel_tensor(chart, data.p)
    dgamma = christoffel_derivatives(chart, data.p)
    frame = [
        SplitTangent(data.dp[k], data.dV[k] + connection_term(gamma, data.dp[k], data.V))
        for k in range(2)
    ]
    dK = np.zeros((2, 2, 2))
    for j in range(2):
        directional = np.einsum("c,ckij->kij", data.dp[j], dgamma)
        for k in range(2):
            dK[j, k] = (
                data.ddV[j, k]
                + connection_term(directional, data.dp[k], data.V)
                + connection_term(gamma, data.ddp[j, k], data.V)
                + connection_term(gamma, data.dp[k], data.dV[j])
            )
    return FrameData(tb=TBPoint(data.p, data.V), frame=frame, dK=dK, jet=data)


def tangent_frame(imm: TBImmersion, pt) -> tuple[SplitTangent, SplitTangent]:
    """(X_s, X_t) as split tangent vectors."""
    fd = frame_data(imm, pt)
    return fd.frame[0], fd.frame[1]


def frame_derivative(imm: TBImmersion, fd: FrameData, j: int, k: int) -> SplitTangent:
    """D_{X_j} X_k."""
    data = fd.jet
    return covariant_derivative(
        imm.chart,
        fd.tb,
        data.dp[j],
        data.dp[k],
        fd.frame[k].vpart,
        data.ddp[j, k],
        fd.dK[j, k],
    )


def _require_immersed(imm: TBImmersion, fd: FrameData, pt) -> None:
    matrix = np.column_stack([x.as_vector() for x in fd.frame])
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-8 * sv[0]:
        raise NotImmersedError(f"dX is not injective at ({pt[0]:.6g}, {pt[1]:.6g})")


def projection_rank(imm: TBImmersion, pt, tol: float = 1e-8) -> int:
    """Numerical rank of d(pi o X) with threshold tol * largest singular value.

    Raises:
        NotImmersedError: X itself is not immersive at ``pt``
    """
    fd = frame_data(imm, pt)
    _require_immersed(imm, fd, pt)
    sv = np.linalg.svd(fd.jet.dp, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def lagrangian_defect(imm: TBImmersion, pt) -> float:
    """Omega(X_s, X_t)."""
    fd = frame_data(imm, pt)
    return omega(imm.chart, fd.tb, fd.frame[0], fd.frame[1])


@dataclass
class InducedMetric:
    """Coefficients of the metric induced by G, with a null flag.

    Attributes:
        E, F, G: G(X_s,X_s), G(X_s,X_t), G(X_t,X_t)
        scale: (|X_s| |X_t|)^2 in the positive norm; nullity is judged relative to it
    """

    E: float
    F: float
    G: float
    scale: float = 1.0

    @property
    def det(self) -> float:
        return self.E * self.G - self.F**2

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.E, self.F], [self.F, self.G]])

    def is_null(self, tol: float = DEFAULT_TOL_NULL) -> bool:
        return abs(self.det) < tol * max(self.scale, 1e-300)


def _metric_from_frame(imm: TBImmersion, fd: FrameData) -> InducedMetric:
    xs, xt = fd.frame
    chart, tb = imm.chart, fd.tb
    scale = (sasaki_norm(chart, tb, xs) * sasaki_norm(chart, tb, xt)) ** 2
    return InducedMetric(
        E=gmetric(chart, tb, xs, xs),
        F=gmetric(chart, tb, xs, xt),
        G=gmetric(chart, tb, xt, xt),
        scale=scale,
    )


def induced_metric(imm: TBImmersion, pt) -> InducedMetric:
    """(E, F, G) of the induced metric; check ``is_null`` before inverting."""
    return _metric_from_frame(imm, frame_data(imm, pt))


@dataclass
class ExtrinsicTensor:
    """h_ijk = Omega(X_i, D_{X_j} X_k), indexed [i, j, k] with 0 = s, 1 = t."""

    h: np.ndarray

    def __getitem__(self, key: str) -> float:
        """Component by 1-based label, e.g. ``tensor["112"]``."""
        i, j, k = (int(c) - 1 for c in key)
        return float(self.h[i, j, k])

    @property
    def symmetry_defect(self) -> float:
        worst = 0.0
        for idx in np.ndindex(2, 2, 2):
            for perm in permutations(idx):
                worst = max(worst, abs(self.h[perm] - self.h[idx]))
        return float(worst)


def _extrinsic(imm: TBImmersion, fd: FrameData) -> ExtrinsicTensor:
    h = np.zeros((2, 2, 2))
    for j in range(2):
        for k in range(2):
            D = frame_derivative(imm, fd, j, k)
            for i in range(2):
                h[i, j, k] = omega(imm.chart, fd.tb, fd.frame[i], D)
    return ExtrinsicTensor(h)


def _require_lagrangian(imm: TBImmersion, fd: FrameData, pt, tol: float) -> None:
    defect = omega(imm.chart, fd.tb, fd.frame[0], fd.frame[1])
    xs, xt = fd.frame
    scale = sasaki_norm(imm.chart, fd.tb, xs) * sasaki_norm(imm.chart, fd.tb, xt)
    if abs(defect) > tol * max(scale, 1.0):
        raise NotLagrangianError(
            f"immersion is not Lagrangian at ({pt[0]:.6g}, {pt[1]:.6g}): Omega(X_s, X_t) = {defect:.3g}"
        )


def second_fundamental(imm: TBImmersion, pt, tol: float = DEFAULT_TOL_LAGRANGIAN) -> ExtrinsicTensor:
    """Tri-symmetric extrinsic curvature tensor of a Lagrangian immersion.

    Raises:
        NotLagrangianError: Omega(X_s, X_t) exceeds ``tol``
    """
    fd = frame_data(imm, pt)
    _require_lagrangian(imm, fd, pt, tol)
    tensor = _extrinsic(imm, fd)
    if tensor.symmetry_defect > 1e-6 * max(1.0, float(np.max(np.abs(tensor.h)))):
        logger.warning("extrinsic tensor symmetry defect %.3g at %s", tensor.symmetry_defect, tuple(pt))
    return tensor


@dataclass
class MeanCurvature:
    """Mean curvature H = alpha JX_s + beta JX_t and the data it came from.

    Attributes:
        vector: H as a split tangent vector
        coefficients: (alpha, beta)
        traced: (G(2H, JX_s), G(2H, JX_t))
        metric: Induced metric at the point
        tensor: Extrinsic tensor at the point
        tb: Footpoint
    """

    vector: SplitTangent
    coefficients: np.ndarray
    traced: np.ndarray
    metric: InducedMetric
    tensor: ExtrinsicTensor
    tb: TBPoint = field(repr=False)


def mean_curvature_data(
    imm: TBImmersion,
    pt,
    tol_null: float = DEFAULT_TOL_NULL,
    tol_lagrangian: float = DEFAULT_TOL_LAGRANGIAN,
) -> MeanCurvature:
    """Full mean-curvature computation; see ``mean_curvature``."""
    fd = frame_data(imm, pt)
    _require_lagrangian(imm, fd, pt, tol_lagrangian)
    metric = _metric_from_frame(imm, fd)
    if metric.is_null(tol_null):
        raise NullPointError(
            f"induced metric is degenerate at ({pt[0]:.6g}, {pt[1]:.6g}): EG - F^2 = {metric.det:.3g}"
        )
    tensor = _extrinsic(imm, fd)
    h = tensor.h
    E, F, G = metric.E, metric.F, metric.G
    traced = np.array(
        [-(h[i, 0, 0] * G - 2.0 * h[i, 0, 1] * F + h[i, 1, 1] * E) / metric.det for i in range(2)]
    )
    coefficients = np.linalg.solve(metric.matrix, 0.5 * traced)
    jxs, jxt = (jmap(imm.chart, fd.tb, x) for x in fd.frame)
    vector = coefficients[0] * jxs + coefficients[1] * jxt
    return MeanCurvature(vector, coefficients, traced, metric, tensor, fd.tb)


def mean_curvature(imm: TBImmersion, pt, tol_null: float = DEFAULT_TOL_NULL) -> SplitTangent:
    """Mean curvature vector H, solved from G(2H, JX_i) = -(h_i11 G - 2 h_i12 F + h_i22 E)/(EG - F^2).

    Raises:
        NotLagrangianError: The immersion is not Lagrangian at ``pt``
        NullPointError: The induced metric is degenerate at ``pt``
    """
    return mean_curvature_data(imm, pt, tol_null).vector


def mean_curvature_norm(imm: TBImmersion, pt, tol_null: float = DEFAULT_TOL_NULL) -> float:
    data = mean_curvature_data(imm, pt, tol_null)
    return sasaki_norm(imm.chart, data.tb, data.vector)


def hessian_coefficients(gg: GradientGraph, pt) -> tuple[np.ndarray, np.ndarray]:
    """(a, b, c) and their (s, t) derivatives for a gradient graph.

    K X_s = a d/ds + b d/dt and K X_t = b d/ds + c d/dt. Returns the triple
    and a 3x2 array of its partial derivatives.
    """
    fd = frame_data(gg, pt)
    ks, kt = fd.frame[0].vpart, fd.frame[1].vpart
    abc = np.array([ks[0], 0.5 * (ks[1] + kt[0]), kt[1]])
    d = np.array(
        [
            [fd.dK[j, 0, 0] for j in range(2)],
            [0.5 * (fd.dK[j, 0, 1] + fd.dK[j, 1, 0]) for j in range(2)],
            [fd.dK[j, 1, 1] for j in range(2)],
        ]
    )
    return abc, d


def mean_curvature_arg_form(
    gg: GradientGraph, pt, tol_null: float = DEFAULT_TOL_NULL
) -> tuple[float, float]:
    """Residuals of G(2H, JX_s) = (arg w)_s - 2r_t and G(2H, JX_t) = (arg w)_t + 2r_s.

    w = 2b + i(c - a); its argument is differentiated branch-free as
    (w1 dw2 - w2 dw1) / |w|^2.

    Raises:
        BranchError: |w| < 1e-12
        NullPointError: The graph is null at ``pt``
    """
    data = mean_curvature_data(gg, pt, tol_null)
    (a, b, c), d = hessian_coefficients(gg, pt)
    w1, w2 = 2.0 * b, c - a
    modulus = w1**2 + w2**2
    if math.sqrt(modulus) < 1e-12:
        raise BranchError(f"arg(2b + i(c - a)) undefined at ({pt[0]:.6g}, {pt[1]:.6g})")
    dw1 = 2.0 * d[1]
    dw2 = d[2] - d[0]
    darg = (w1 * dw2 - w2 * dw1) / modulus
    r = gg.chart.r_jet(data.tb.p, 1)
    r_s, r_t = r[(1, 0)], r[(0, 1)]
    return (
        float(data.traced[0] - (darg[0] - 2.0 * r_t)),
        float(data.traced[1] - (darg[1] + 2.0 * r_s)),
    )


def _stencil_points(imm: TBImmersion, pt, step: float) -> dict[tuple[int, int], tuple[float, float]]:
    s, t = float(pt[0]), float(pt[1])
    points = {}
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            q = (s + a * step, t + b * step)
            if not imm.domain.contains(q):
                raise StencilError(f"stencil of step {step:g} at ({s:.6g}, {t:.6g}) leaves {imm.domain}")
            points[(a, b)] = q
    return points


def hstationary_residual(
    imm: TBImmersion, pt, step: float = 1e-4, tol_null: float = DEFAULT_TOL_NULL
) -> float:
    """div(JH) in the induced metric, by central differences.

    With H = alpha JX_s + beta JX_t, JH = -alpha X_s - beta X_t and
    div(JH) = |det|^{-1/2} d_i(|det|^{1/2} (JH)^i).

    Raises:
        StencilError: The stencil leaves the domain or meets the null locus
    """
    points = _stencil_points(imm, pt, step)
    flux: dict[tuple[int, int], np.ndarray] = {}
    volume = 1.0
    for key in ((1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)):
        try:
            data = mean_curvature_data(imm, points[key], tol_null)
        except NullPointError as e:
            raise StencilError(f"stencil meets the null locus: {e}") from e
        root = math.sqrt(abs(data.metric.det))
        flux[key] = -root * data.coefficients
        if key == (0, 0):
            volume = root
    divergence = (flux[(1, 0)][0] - flux[(-1, 0)][0] + flux[(0, 1)][1] - flux[(0, -1)][1]) / (2 * step)
    return float(divergence / volume)


def _brioschi(m: dict[tuple[int, int], InducedMetric], h: float) -> float:
    def d(attr, a, b):
        return (getattr(m[(a, b)], attr) - getattr(m[(-a, -b)], attr)) / (2 * h)

    E, F, G = m[(0, 0)].E, m[(0, 0)].F, m[(0, 0)].G
    E_s, E_t = d("E", 1, 0), d("E", 0, 1)
    F_s, F_t = d("F", 1, 0), d("F", 0, 1)
    G_s, G_t = d("G", 1, 0), d("G", 0, 1)
    E_tt = (m[(0, 1)].E - 2 * E + m[(0, -1)].E) / h**2
    G_ss = (m[(1, 0)].G - 2 * G + m[(-1, 0)].G) / h**2
    F_st = (m[(1, 1)].F - m[(1, -1)].F - m[(-1, 1)].F + m[(-1, -1)].F) / (4 * h**2)
    first = np.array(
        [
            [-0.5 * E_tt + F_st - 0.5 * G_ss, 0.5 * E_s, F_s - 0.5 * E_t],
            [F_t - 0.5 * G_s, E, F],
            [0.5 * G_t, F, G],
        ]
    )
    second = np.array([[0.0, 0.5 * E_t, 0.5 * G_s], [0.5 * E_t, E, F], [0.5 * G_s, F, G]])
    return float((np.linalg.det(first) - np.linalg.det(second)) / (E * G - F**2) ** 2)


def induced_curvature(
    imm: TBImmersion, pt, step: float = 1e-3, tol_null: float = DEFAULT_TOL_NULL
) -> float:
    """Gauss curvature of the induced metric (Brioschi formula).

    E, F, G come from symbolic jets; their parameter derivatives are central
    differences at ``step`` and ``step/2``, Richardson-extrapolated.

    Raises:
        StencilError: The stencil leaves the domain or meets the null locus
    """
    estimates = []
    for h in (step, step / 2):
        metrics = {key: induced_metric(imm, q) for key, q in _stencil_points(imm, pt, h).items()}
        if any(metric.is_null(tol_null) for metric in metrics.values()):
            raise StencilError(f"curvature stencil at {tuple(pt)} meets the null locus")
        estimates.append(_brioschi(metrics, h))
    return (4.0 * estimates[1] - estimates[0]) / 3.0


# ---------------------------------------------------------------------------
# Grid sweeps and the rank-two probe
# ---------------------------------------------------------------------------

SWEEP_QUANTITIES = (
    "defect", "rank", "E", "F", "G", "H", "div_JH", "arg_s", "arg_t", "H_formula", "metric_formula",
)


@dataclass
class GridReport:
    """Per-cell values of a sweep; NaN marks skipped cells.

    Attributes:
        s, t: Grid coordinates (1-d)
        values: Quantity name -> array indexed [i_s, i_t]
        skipped: Quantity name -> number of skipped cells
    """

    s: np.ndarray
    t: np.ndarray
    values: dict[str, np.ndarray]
    skipped: dict[str, int]

    def rows(self) -> list[list[float]]:
        """CSV rows s, t, value... in grid order."""
        names = list(self.values)
        out = []
        for i, s in enumerate(self.s):
            for j, t in enumerate(self.t):
                out.append([float(s), float(t)] + [float(self.values[n][i, j]) for n in names])
        return out


def quantity_value(imm: TBImmersion, name: str, pt, tol_null: float = DEFAULT_TOL_NULL) -> float:
    """One of SWEEP_QUANTITIES at ``pt``; raises the error of the underlying operation."""
    if name == "defect":
        return lagrangian_defect(imm, pt)
    if name == "rank":
        return float(projection_rank(imm, pt))
    if name in ("E", "F", "G"):
        return getattr(induced_metric(imm, pt), name)
    if name == "H":
        return mean_curvature_norm(imm, pt, tol_null)
    if name == "div_JH":
        return hstationary_residual(imm, pt, tol_null=tol_null)
    if name in ("arg_s", "arg_t"):
        if not isinstance(imm, GradientGraph):
            raise ValueError("arg-form residuals need a gradient graph")
        return mean_curvature_arg_form(imm, pt, tol_null)[0 if name == "arg_s" else 1]
    if name in ("H_formula", "metric_formula"):
        if not isinstance(imm, AffineNormalBundle):
            raise ValueError(f"{name} needs an affine normal bundle")
        s = float(pt[0])
        if name == "metric_formula":
            return float(np.max(np.abs(induced_metric(imm, pt).matrix - imm.expected_metric(s))))
        H = mean_curvature(imm, pt, tol_null)
        return sasaki_norm(imm.chart, imm.point(pt), H - imm.expected_mean_curvature(s))
    raise ValueError(f"unknown sweep quantity '{name}' (choose from {', '.join(SWEEP_QUANTITIES)})")


def sweep(
    imm: TBImmersion,
    n: int = 16,
    quantities: tuple[str, ...] = ("defect", "rank", "E", "F", "G", "H"),
    tol_null: float = DEFAULT_TOL_NULL,
    domain: Rect | None = None,
) -> GridReport:
    """Evaluate quantities on the cell centres of an n x n grid.

    Cells where a quantity is undefined (null locus, stencil faults, branch
    faults) are skipped and counted.
    """
    domain = domain or imm.domain
    s_values, t_values = domain.grid(n)
    values = {name: np.full((n, n), np.nan) for name in quantities}
    skipped = {name: 0 for name in quantities}
    for i, s in enumerate(s_values):
        for j, t in enumerate(t_values):
            for name in quantities:
                try:
                    values[name][i, j] = quantity_value(imm, name, (s, t), tol_null)
                except (NullPointError, StencilError, BranchError, NotImmersedError) as e:
                    skipped[name] += 1
                    logger.debug("skipped %s at (%.4g, %.4g): %s", name, s, t, e)
    total = sum(skipped.values())
    if total:
        logger.info("sweep skipped %d cell evaluations", total)
    return GridReport(s_values, t_values, values, skipped)


PROBE_FAMILY = "c1*s+c2*t+c3*s^2+c4*s*t+c5*t^2+c6*s^2*t"
PROBE_PARAMETERS = ("c1", "c2", "c3", "c4", "c5", "c6")


@dataclass
class ProbeResult:
    """Outcome of the rank-two minimality probe.

    Attributes:
        best: Smallest max-|H| reached by a candidate
        best_coefficients: Coefficients of that candidate
        objectives: max-|H| per evaluated candidate
        degenerate: Candidates with no non-null grid point
    """

    best: float
    best_coefficients: dict[str, float]
    objectives: list[float]
    degenerate: int


def minimality_probe(
    chart: ConformalChart,
    seed: int = 0,
    candidates: int = 64,
    n: int = 5,
    domain: Rect | None = None,
    tol_null: float = DEFAULT_TOL_NULL,
) -> ProbeResult:
    """Search the polynomial family for a minimal gradient graph.

    Coefficients are drawn uniformly from [-1, 1]^6; each candidate is scored
    by the maximum |H| over the non-null points of an n x n grid.
    """
    rng = np.random.default_rng(seed)
    domain = domain or Rect(-0.3, 0.3, -0.3, 0.3)
    s_values, t_values = domain.grid(n)
    best = math.inf
    best_coefficients: dict[str, float] = {}
    objectives: list[float] = []
    degenerate = 0
    for _ in range(candidates):
        coefficients = dict(zip(PROBE_PARAMETERS, rng.uniform(-1.0, 1.0, 6).tolist()))
        graph = GradientGraph.parse(chart, PROBE_FAMILY, domain, coefficients)
        worst = -math.inf
        for s in s_values:
            for t in t_values:
                try:
                    worst = max(worst, mean_curvature_norm(graph, (s, t), tol_null))
                except NullPointError:
                    continue
        if worst == -math.inf:
            degenerate += 1
            continue
        objectives.append(worst)
        if worst < best:
            best, best_coefficients = worst, coefficients
    logger.debug("minimality probe on %s: best max|H| = %.4g", chart.name, best)
    return ProbeResult(best, best_coefficients, objectives, degenerate)
