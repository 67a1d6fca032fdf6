"""Intrinsic geometry of the base surface in conformal coordinates.

A chart is a rectangle with a log-conformal factor r, so that
g = e^{2r}(ds^2 + dt^2) and j d/ds = d/dt. Vectors are numpy 2-arrays of
components in the coordinate frame {d/ds, d/dt}.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from pkgeo.errors import ChartDomainError, NotImmersedError
from pkgeo.expr import ScalarField, jet

logger = logging.getLogger(__name__)

# Gamma = r_s * _GAMMA_S + r_t * _GAMMA_T, indexed [k, i, j] for Gamma^k_ij
_GAMMA_S = np.zeros((2, 2, 2))
_GAMMA_S[0, 0, 0] = 1.0
_GAMMA_S[1, 0, 1] = _GAMMA_S[1, 1, 0] = 1.0
_GAMMA_S[0, 1, 1] = -1.0
_GAMMA_T = np.zeros((2, 2, 2))
_GAMMA_T[1, 0, 0] = -1.0
_GAMMA_T[0, 0, 1] = _GAMMA_T[0, 1, 0] = 1.0
_GAMMA_T[1, 1, 1] = 1.0


@dataclass(frozen=True)
class Rect:
    """Closed parameter rectangle [s0, s1] x [t0, t1]."""

    s0: float
    s1: float
    t0: float
    t1: float

    def __post_init__(self):
        if not (self.s0 < self.s1 and self.t0 < self.t1):
            raise ValueError(f"empty rectangle [{self.s0}, {self.s1}] x [{self.t0}, {self.t1}]")

    @property
    def area(self) -> float:
        return (self.s1 - self.s0) * (self.t1 - self.t0)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.s0 + self.s1), 0.5 * (self.t0 + self.t1))

    def contains(self, point, margin: float = 0.0) -> bool:
        s, t = point
        return (
            self.s0 + margin <= s <= self.s1 - margin
            and self.t0 + margin <= t <= self.t1 - margin
        )

    def grid(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates of an n x n grid, as 1-d arrays (s, t)."""
        s = self.s0 + (np.arange(n) + 0.5) * (self.s1 - self.s0) / n
        t = self.t0 + (np.arange(n) + 0.5) * (self.t1 - self.t0) / n
        return s, t

    def sample(self, rng: np.random.Generator, n: int, inset: float = 0.05) -> np.ndarray:
        """n random points, kept ``inset`` (relative) away from the boundary."""
        ds = inset * (self.s1 - self.s0)
        dt = inset * (self.t1 - self.t0)
        s = rng.uniform(self.s0 + ds, self.s1 - ds, n)
        t = rng.uniform(self.t0 + dt, self.t1 - dt, n)
        return np.column_stack([s, t])

    def shrink(self, factor: float) -> "Rect":
        cs, ct = self.center
        hs = 0.5 * factor * (self.s1 - self.s0)
        ht = 0.5 * factor * (self.t1 - self.t0)
        return Rect(cs - hs, cs + hs, ct - ht, ct + ht)


CATALOG = {
    "flat": ("0", Rect(-10.0, 10.0, -10.0, 10.0)),
    "sphere": ("log(2/(1+s^2+t^2))", Rect(-3.0, 3.0, -3.0, 3.0)),
    "hyperbolic": ("-log((1-s^2-t^2)/2)", Rect(-0.7, 0.7, -0.7, 0.7)),
}


class ConformalChart:
    """Conformal chart (domain, r) of a Riemannian surface.

    Attributes:
        r: Log-conformal factor as a ScalarField in (s, t)
        domain: Parameter rectangle
        name: Catalog name, or "custom"
    """

    def __init__(self, r: ScalarField, domain: Rect, name: str = "custom"):
        if r.variables != ("s", "t"):
            raise ValueError(f"chart factor must be a field in (s, t), got {r.variables}")
        self.r = r
        self.domain = domain
        self.name = name

    @classmethod
    def catalog(cls, name: str, domain: Rect | None = None) -> "ConformalChart":
        """Build one of the catalog charts: flat, sphere or hyperbolic."""
        try:
            text, default = CATALOG[name]
        except KeyError:
            raise ValueError(
                f"unknown chart '{name}' (choose from {', '.join(CATALOG)})"
            ) from None
        return cls(ScalarField.parse(text), domain or default, name)

    @classmethod
    def from_expression(
        cls, text: str, domain: Rect, parameters: dict[str, float] | None = None
    ) -> "ConformalChart":
        return cls(ScalarField.parse(text, parameters=parameters), domain)

    def __repr__(self) -> str:
        return f"ConformalChart({self.name!r}, r={self.r}, domain={self.domain})"

    @property
    def is_flat_catalog(self) -> bool:
        return self.name == "flat"

    def require(self, point) -> None:
        """Raise ChartDomainError unless ``point`` lies in the chart rectangle."""
        if not self.domain.contains(point):
            raise ChartDomainError(f"point ({point[0]:.6g}, {point[1]:.6g}) outside {self.domain}")

    def r_jet(self, point, order: int = 2):
        return jet(self.r, tuple(point), order)

    def conformal_factor(self, point) -> float:
        """e^{2r} at ``point``."""
        return math.exp(2.0 * self.r(*point))


def jrot(X) -> np.ndarray:
    """The complex structure: rotation by +90 degrees, j d/ds = d/dt."""
    X = np.asarray(X, dtype=float)
    return np.array([-X[1], X[0]])


def inner(chart: ConformalChart, point, X, Y) -> float:
    """g(X, Y) at ``point``."""
    return chart.conformal_factor(point) * float(np.dot(X, Y))


def norm(chart: ConformalChart, point, X) -> float:
    return math.sqrt(max(inner(chart, point, X, X), 0.0))


def christoffel_tensor(chart: ConformalChart, point) -> np.ndarray:
    """Gamma^k_ij as an array indexed [k, i, j]."""
    r = chart.r_jet(point, 1)
    return r[(1, 0)] * _GAMMA_S + r[(0, 1)] * _GAMMA_T


def christoffel_derivatives(chart: ConformalChart, point) -> np.ndarray:
    """d_c Gamma^k_ij as an array indexed [c, k, i, j]."""
    r = chart.r_jet(point, 2)
    ds = r[(2, 0)] * _GAMMA_S + r[(1, 1)] * _GAMMA_T
    dt = r[(1, 1)] * _GAMMA_S + r[(0, 2)] * _GAMMA_T
    return np.stack([ds, dt])


def christoffels(chart: ConformalChart, point) -> dict[str, float]:
    """The six Christoffel symbols, keyed "s_ss", "t_ss", "s_st", "t_st", "s_tt", "t_tt".

    Raises:
        DomainError: r is not defined at ``point``
    """
    gamma = christoffel_tensor(chart, point)
    names = "st"
    out = {}
    for i, j in ((0, 0), (0, 1), (1, 1)):
        for k in range(2):
            out[f"{names[k]}_{names[i]}{names[j]}"] = float(gamma[k, i, j])
    return out


def connection_term(gamma: np.ndarray, X, Y) -> np.ndarray:
    """Gamma(X, Y)^k = Gamma^k_ij X^i Y^j."""
    return np.einsum("kij,i,j->k", gamma, X, Y)


def gauss_curvature(chart: ConformalChart, point) -> float:
    """K = -e^{-2r}(r_ss + r_tt)."""
    r = chart.r_jet(point, 2)
    return -math.exp(-2.0 * r[(0, 0)]) * (r[(2, 0)] + r[(0, 2)])


def curvature_operator(chart: ConformalChart, point, X, Y, Z) -> np.ndarray:
    """R(X,Y)Z = K (g(Y,Z) X - g(X,Z) Y)."""
    X, Y, Z = (np.asarray(v, dtype=float) for v in (X, Y, Z))
    K = gauss_curvature(chart, point)
    return K * (inner(chart, point, Y, Z) * X - inner(chart, point, X, Z) * Y)


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


class CurveOnSurface(ABC):
    """A regular curve in chart coordinates.

    Attributes:
        interval: Parameter interval (s0, s1)
        arclength: True when |gamma'|_g = 1
    """

    interval: tuple[float, float]
    arclength: bool = False

    @abstractmethod
    def derivatives(self, s: float, order: int = 2) -> list[np.ndarray]:
        """[gamma, gamma', ..., gamma^(order)] at parameter ``s``."""

    def point(self, s: float) -> np.ndarray:
        return self.derivatives(s, 0)[0]

    def sample(self, n: int) -> np.ndarray:
        s = np.linspace(self.interval[0], self.interval[1], n)
        return np.array([self.point(x) for x in s])


class ExpressionCurve(CurveOnSurface):
    """Curve gamma(s) = (x(s), y(s)) from two one-variable fields."""

    def __init__(
        self,
        x: ScalarField,
        y: ScalarField,
        interval: tuple[float, float],
        arclength: bool = False,
    ):
        if x.variables != ("s",) or y.variables != ("s",):
            raise ValueError("curve components must be fields of the single variable s")
        if not interval[0] < interval[1]:
            raise ValueError(f"empty curve interval {interval}")
        self.x = x
        self.y = y
        self.interval = (float(interval[0]), float(interval[1]))
        self.arclength = arclength

    @classmethod
    def parse(
        cls,
        x: str,
        y: str,
        interval: tuple[float, float],
        arclength: bool = False,
        parameters: dict[str, float] | None = None,
    ) -> "ExpressionCurve":
        return cls(
            ScalarField.parse(x, ("s",), parameters),
            ScalarField.parse(y, ("s",), parameters),
            interval,
            arclength,
        )

    def __repr__(self) -> str:
        return f"ExpressionCurve(({self.x}, {self.y}), interval={self.interval})"

    def derivatives(self, s: float, order: int = 2) -> list[np.ndarray]:
        return [
            np.array([self.x.value(s, (k,)), self.y.value(s, (k,))], dtype=float)
            for k in range(order + 1)
        ]


@dataclass
class Frenet:
    """Unit tangent, unit normal (= j tangent) and geodesic curvature."""

    tangent: np.ndarray
    normal: np.ndarray
    curvature: float


def frenet(chart: ConformalChart, curve: CurveOnSurface, s: float) -> Frenet:
    """Frenet data with the general-parameter curvature.

    k = g(nabla_{gamma'} gamma', j gamma') / |gamma'|^3, which is the Frenet
    relation nabla_{gamma'} gamma' = k j gamma' under arclength.

    Raises:
        NotImmersedError: gamma'(s) = 0
    """
    p, d1, d2 = curve.derivatives(s, 2)
    speed = norm(chart, p, d1)
    if speed < 1e-12:
        raise NotImmersedError(f"zero-speed point of the curve at s={s:.6g}")
    acceleration = d2 + connection_term(christoffel_tensor(chart, p), d1, d1)
    k = inner(chart, p, acceleration, jrot(d1)) / speed**3
    tangent = d1 / speed
    return Frenet(tangent=tangent, normal=jrot(tangent), curvature=float(k))


def curvature_derivative(chart: ConformalChart, curve: CurveOnSurface, s: float) -> float:
    """dk/ds for an arclength curve, from third derivatives.

    With T = gamma', k = g(nabla_T T, jT), so k' = g(nabla_T nabla_T T, jT).
    """
    p, d1, d2, d3 = curve.derivatives(s, 3)
    gamma = christoffel_tensor(chart, p)
    dgamma = christoffel_derivatives(chart, p)
    acc = d2 + connection_term(gamma, d1, d1)
    # d/ds of acc, then covariant correction
    dacc = (
        d3
        + connection_term(np.einsum("c,ckij->kij", d1, dgamma), d1, d1)
        + 2.0 * connection_term(gamma, d2, d1)
    )
    cov = dacc + connection_term(gamma, d1, acc)
    return inner(chart, p, cov, jrot(d1))


def check_arclength(chart: ConformalChart, curve: CurveOnSurface, samples: int = 17, tol: float = 1e-9) -> float:
    """Return max | |gamma'|_g - 1 | over samples; raise if above ``tol``."""
    drift = 0.0
    for s in np.linspace(curve.interval[0], curve.interval[1], samples):
        p, d1 = curve.derivatives(float(s), 1)
        drift = max(drift, abs(norm(chart, p, d1) - 1.0))
    if drift > tol:
        raise ValueError(f"curve is not parametrised by arclength (speed drift {drift:.3g})")
    return drift


class ArclengthCurve(CurveOnSurface):
    """Arclength reparametrisation of another curve.

    The length function is integrated with composite Gauss-Legendre and
    inverted with brentq; derivatives up to order three follow from the chain
    rule through the speed function.
    """

    arclength = True

    def __init__(self, chart: ConformalChart, base: CurveOnSurface, panels: int = 64, nodes: int = 16):
        self.chart = chart
        self.base = base
        a, b = base.interval
        self._edges = np.linspace(a, b, panels + 1)
        self._x, self._w = leggauss(nodes)
        lengths = [self._panel_length(self._edges[i], self._edges[i + 1]) for i in range(panels)]
        self._cumulative = np.concatenate([[0.0], np.cumsum(lengths)])
        self.length = float(self._cumulative[-1])
        if self.length <= 0:
            raise NotImmersedError("curve has zero length")
        self.interval = (0.0, self.length)

    def __repr__(self) -> str:
        return f"ArclengthCurve({self.base!r}, length={self.length:.6g})"

    def speed(self, sigma: float) -> float:
        p, d1 = self.base.derivatives(sigma, 1)
        return norm(self.chart, p, d1)

    def _panel_length(self, a: float, b: float) -> float:
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        return half * float(np.sum(self._w * np.array([self.speed(mid + half * x) for x in self._x])))

    def length_to(self, sigma: float) -> float:
        i = int(np.clip(np.searchsorted(self._edges, sigma) - 1, 0, len(self._edges) - 2))
        return float(self._cumulative[i]) + self._panel_length(self._edges[i], sigma)

    def parameter(self, s: float) -> float:
        """Base parameter sigma with length_to(sigma) = s."""
        if s <= 0.0:
            return self.base.interval[0]
        if s >= self.length:
            return self.base.interval[1]
        i = int(np.clip(np.searchsorted(self._cumulative, s) - 1, 0, len(self._edges) - 2))
        return brentq(
            lambda x: self.length_to(x) - s,
            self._edges[i],
            self._edges[i + 1],
            xtol=1e-14,
            rtol=4 * np.finfo(float).eps,
        )

    def derivatives(self, s: float, order: int = 2) -> list[np.ndarray]:
        if order > 3:
            raise ValueError("arclength curves provide derivatives up to order 3")
        sigma = self.parameter(s)
        g0, g1, g2, g3 = self.base.derivatives(sigma, 3)
        r = self.chart.r_jet(g0, 2)
        dr = np.array([r[(1, 0)], r[(0, 1)]])
        hess = np.array([[r[(2, 0)], r[(1, 1)]], [r[(1, 1)], r[(0, 2)]]])
        # log v = rho + log(m)/2 with rho = r(gamma), m = |gamma'|^2
        rho1 = dr @ g1
        rho2 = g1 @ hess @ g1 + dr @ g2
        m = g1 @ g1
        m1 = 2.0 * (g1 @ g2)
        m2 = 2.0 * (g2 @ g2 + g1 @ g3)
        v = math.exp(r[(0, 0)]) * math.sqrt(m)
        l1 = rho1 + m1 / (2 * m)
        l1p = rho2 + m2 / (2 * m) - m1**2 / (2 * m**2)
        v1 = v * l1
        v2 = v * (l1p + l1**2)
        phi1 = 1.0 / v
        phi2 = -v1 / v**3
        phi3 = -v2 / v**4 + 3 * v1**2 / v**5
        out = [
            g0,
            g1 * phi1,
            g2 * phi1**2 + g1 * phi2,
            g3 * phi1**3 + 3 * g2 * phi1 * phi2 + g1 * phi3,
        ]
        return out[: order + 1]


def arclength_reparametrize(chart: ConformalChart, curve: CurveOnSurface) -> CurveOnSurface:
    """Return ``curve`` parametrised by g-arclength (itself if already flagged)."""
    if curve.arclength:
        return curve
    return ArclengthCurve(chart, curve)


class GeodesicCurve(CurveOnSurface):
    """Geodesic sampled by fixed-step RK4.

    Off-sample values are obtained by one partial RK4 step from the nearest
    sample below; higher derivatives come from the geodesic equation.

    Attributes:
        samples: Array (n, 4) of (position, velocity) states
        step: Integration step
        truncated: True when the trajectory left the chart domain early
    """

    arclength = True

    def __init__(self, chart: ConformalChart, samples: np.ndarray, step: float, truncated: bool):
        self.chart = chart
        self.samples = samples
        self.step = step
        self.truncated = truncated
        self.interval = (0.0, step * (len(samples) - 1))

    def __repr__(self) -> str:
        return f"GeodesicCurve(length={self.interval[1]:.6g}, truncated={self.truncated})"

    def _state(self, s: float) -> np.ndarray:
        if not self.interval[0] <= s <= self.interval[1] + 1e-12:
            raise ChartDomainError(f"parameter {s:.6g} outside geodesic interval {self.interval}")
        i = min(int(s // self.step), len(self.samples) - 1)
        remainder = s - i * self.step
        state = self.samples[i]
        if remainder > 0:
            state = _rk4_step(self.chart, state, remainder)
        return state

    def derivatives(self, s: float, order: int = 2) -> list[np.ndarray]:
        if order > 3:
            raise ValueError("geodesics provide derivatives up to order 3")
        state = self._state(s)
        p, v = state[:2], state[2:]
        gamma = christoffel_tensor(self.chart, p)
        acc = -connection_term(gamma, v, v)
        out = [p, v, acc]
        if order >= 3:
            dgamma = np.einsum("c,ckij->kij", v, christoffel_derivatives(self.chart, p))
            out.append(-connection_term(dgamma, v, v) - 2.0 * connection_term(gamma, acc, v))
        return out[: order + 1]


def _geodesic_rhs(chart: ConformalChart, state: np.ndarray) -> np.ndarray:
    p, v = state[:2], state[2:]
    return np.concatenate([v, -connection_term(christoffel_tensor(chart, p), v, v)])


def _rk4_step(chart: ConformalChart, state: np.ndarray, h: float) -> np.ndarray:
    k1 = _geodesic_rhs(chart, state)
    k2 = _geodesic_rhs(chart, state + 0.5 * h * k1)
    k3 = _geodesic_rhs(chart, state + 0.5 * h * k2)
    k4 = _geodesic_rhs(chart, state + h * k3)
    return state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def geodesic(chart: ConformalChart, p0, v0, length: float, steps: int = 1000) -> GeodesicCurve:
    """Integrate gamma'' + Gamma(gamma', gamma') = 0 from (p0, v0).

    Args:
        chart: Base chart
        p0: Start point
        v0: Unit initial velocity (|v0|_g = 1)
        length: Arclength to integrate
        steps: Number of RK4 steps

    Returns:
        The sampled geodesic; ``truncated`` is set if it left the chart domain.

    Raises:
        ValueError: v0 is not a unit vector
    """
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    chart.require(p0)
    speed = norm(chart, p0, v0)
    if abs(speed - 1.0) > 1e-9:
        raise ValueError(f"initial velocity must be a unit vector, |v0|_g = {speed:.6g}")
    if length <= 0 or steps < 1:
        raise ValueError("geodesic needs a positive length and at least one step")
    h = length / steps
    states = [np.concatenate([p0, v0])]
    truncated = False
    for _ in range(steps):
        nxt = _rk4_step(chart, states[-1], h)
        if not chart.domain.contains(nxt[:2]):
            truncated = True
            logger.warning("geodesic left the chart domain after length %.6g", h * (len(states) - 1))
            break
        states.append(nxt)
    return GeodesicCurve(chart, np.array(states), h, truncated)


# ---------------------------------------------------------------------------
# Closed-form arclength curves
# ---------------------------------------------------------------------------


def line_curve(p0, direction, interval: tuple[float, float]) -> ExpressionCurve:
    """Straight line p0 + s*direction in the flat chart (direction normalised)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    params = {"x0": float(p0[0]), "y0": float(p0[1]), "dx": float(d[0]), "dy": float(d[1])}
    return ExpressionCurve.parse("x0+dx*s", "y0+dy*s", interval, arclength=True, parameters=params)


def circle_curve(
    chart: ConformalChart,
    radius: float,
    interval: tuple[float, float] | None = None,
    center=(0.0, 0.0),
) -> ExpressionCurve:
    """Arclength circle of Euclidean coordinate radius ``radius``.

    Flat chart circles may have any centre; sphere and hyperbolic chart
    circles are centred at the origin.
    """
    if radius <= 0:
        raise ValueError("circle radius must be positive")
    if chart.name == "flat":
        w = 1.0 / radius
    elif chart.name == "sphere":
        w = (1 + radius**2) / (2 * radius)
    elif chart.name == "hyperbolic":
        if radius >= 1:
            raise ValueError("hyperbolic circles need radius < 1")
        w = (1 - radius**2) / (2 * radius)
    else:
        raise ValueError(f"no closed-form circles on chart '{chart.name}'")
    if chart.name != "flat" and any(center):
        raise ValueError("only flat-chart circles may be off-centre")
    interval = interval or (0.0, 2 * math.pi / w)
    params = {"rho": radius, "w": w, "cx": float(center[0]), "cy": float(center[1])}
    return ExpressionCurve.parse(
        "cx+rho*cos(w*s)", "cy+rho*sin(w*s)", interval, arclength=True, parameters=params
    )


def ray_curve(chart: ConformalChart, angle: float, interval: tuple[float, float]) -> ExpressionCurve:
    """Arclength geodesic ray from the origin of a catalog chart."""
    params = {"c": math.cos(angle), "d": math.sin(angle)}
    if chart.name == "flat":
        radial = "s"
    elif chart.name == "sphere":
        radial = "tan(s/2)"
    elif chart.name == "hyperbolic":
        radial = "(exp(s)-1)/(exp(s)+1)"
    else:
        raise ValueError(f"no closed-form rays on chart '{chart.name}'")
    return ExpressionCurve.parse(
        f"c*{radial}", f"d*{radial}", interval, arclength=True, parameters=params
    )
