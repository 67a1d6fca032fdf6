"""Oriented line congruences: normal lines of a surface in R^3 (or of a
space-like surface in R^{2,1}) as a Lagrangian surface of TS^2 (or TH^2).

Everything is computed in the ambient representation. A line is a pair
(N, Y) with <N, Y> = 0; a tangent vector xi to the line space splits as
P xi = nu (the motion of N) and K xi = eta^T (the tangential part of the
motion of Y). Then

    Omega(xi, zeta) = <K xi, P zeta> - <P xi, K zeta>
    J xi = (N x nu, N x eta^T)
    G(xi, zeta) = Omega(J xi, zeta)

with the Lorentzian inner product and cross product in the Minkowski case.
Functions below accept numpy arrays of parameter values and evaluate
elementwise; trailing axis 3 holds vector components.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from pkgeo.basegeo import Rect
from pkgeo.errors import (
    NotImmersedError,
    NotSpacelikeError,
    QuadratureError,
    ShapeOperatorError,
)
from pkgeo.expr import Const, Expr, ScalarField, Var, call, jet
from pkgeo.tbundle import SplitTangent, TBPoint

logger = logging.getLogger(__name__)

EUCLIDEAN = "euclidean"
MINKOWSKI = "minkowski"
SIGNATURES = (EUCLIDEAN, MINKOWSKI)

_DIAG = {EUCLIDEAN: np.array([1.0, 1.0, 1.0]), MINKOWSKI: np.array([1.0, 1.0, -1.0])}


def ip(signature: str, a, b):
    """<a, b> (Euclidean) or <a, b>_1 = a1 b1 + a2 b2 - a3 b3."""
    return np.sum(np.asarray(a) * np.asarray(b) * _DIAG[signature], axis=-1)


def cross(signature: str, a, b):
    """Cross product; in R^{2,1} it is diag(1, 1, -1)(a x b)."""
    return np.cross(a, b) * _DIAG[signature]


class AmbientSurface:
    """Parametrised surface X(s, t) in R^3 or R^{2,1}.

    Attributes:
        X: Three ScalarFields in (s, t)
        domain: Parameter rectangle
        signature: "euclidean" or "minkowski"
        orientation: +1 for N along X_s x X_t, -1 for the opposite (Euclidean only)
        curvature_lines: The parametrisation is by curvature lines
    """

    def __init__(
        self,
        X: tuple[ScalarField, ScalarField, ScalarField],
        domain: Rect,
        signature: str = EUCLIDEAN,
        orientation: int = 1,
        curvature_lines: bool = False,
        name: str = "surface",
    ):
        if signature not in SIGNATURES:
            raise ValueError(f"unknown signature '{signature}' (choose from {', '.join(SIGNATURES)})")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.X = tuple(X)
        self.domain = domain
        self.signature = signature
        self.orientation = orientation
        self.curvature_lines = curvature_lines
        self.name = name
        self._normal: tuple[ScalarField, ScalarField, ScalarField] | None = None

    @classmethod
    def parse(
        cls,
        x: str,
        y: str,
        z: str,
        domain: Rect,
        signature: str = EUCLIDEAN,
        parameters: dict[str, float] | None = None,
        **kwargs,
    ) -> "AmbientSurface":
        fields = tuple(ScalarField.parse(text, parameters=parameters) for text in (x, y, z))
        return cls(fields, domain, signature, **kwargs)

    def __repr__(self) -> str:
        parts = ", ".join(str(f) for f in self.X)
        return f"AmbientSurface({self.name!r}, X=({parts}), signature={self.signature!r})"

    @property
    def eps(self) -> float:
        """<N, N>: +1 in R^3, -1 in R^{2,1}."""
        return 1.0 if self.signature == EUCLIDEAN else -1.0

    def moved(self, rotation, translation) -> "AmbientSurface":
        """The image of the surface under x -> rotation @ x + translation."""
        R = np.asarray(rotation, dtype=float)
        c = np.asarray(translation, dtype=float)
        fields = []
        for i in range(3):
            expr: Expr = Const(float(c[i]))
            for j in range(3):
                expr = expr + float(R[i, j]) * self.X[j].expression
            fields.append(ScalarField(expr))
        return AmbientSurface(
            tuple(fields), self.domain, self.signature, self.orientation, self.curvature_lines, self.name
        )

    def normal_fields(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        """Unit normal N as symbolic fields (sign fixed at the domain centre)."""
        if self._normal is None:
            d = [
                [f.derivative_ast((1, 0)) for f in self.X],
                [f.derivative_ast((0, 1)) for f in self.X],
            ]
            a, b = d
            n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
            if self.signature == MINKOWSKI:
                n[2] = -n[2]
                length = call("sqrt", n[2] * n[2] - n[0] * n[0] - n[1] * n[1])
            else:
                length = call("sqrt", n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
            center = self.domain.center
            frame = surface_frame(self, *center)
            raw = np.array([ScalarField(c)(*center) for c in n], dtype=float)
            sign = 1.0 if float(np.dot(raw, frame.N)) > 0 else -1.0
            self._normal = tuple(ScalarField(Const(sign) * c / length) for c in n)  # type: ignore[assignment]
        return self._normal  # type: ignore[return-value]

    def displaced(self, h: ScalarField, epsilon: float) -> "AmbientSurface":
        """X + epsilon h N."""
        normal = self.normal_fields()
        fields = tuple(
            ScalarField(x.expression + Const(epsilon) * h.expression * nf.expression)
            for x, nf in zip(self.X, normal)
        )
        return AmbientSurface(fields, self.domain, self.signature, self.orientation, self.curvature_lines, self.name)


@dataclass
class SurfaceFrame:
    """Pointwise (or gridwise) first- and second-order data of a surface.

    Attributes:
        X, Xs, Xt: Position and first derivatives
        N, Ns, Nt: Unit normal and its derivatives
        E, F, G: First fundamental form
        M11, M12, M22: <X_i, N_j> (symmetric)
    """

    signature: str
    X: np.ndarray
    Xs: np.ndarray
    Xt: np.ndarray
    N: np.ndarray
    Ns: np.ndarray
    Nt: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    M11: np.ndarray
    M12: np.ndarray
    M22: np.ndarray

    @property
    def eps(self) -> float:
        return 1.0 if self.signature == EUCLIDEAN else -1.0


def _component_jets(f: ScalarField, s, t, shape) -> dict[tuple[int, int], np.ndarray]:
    d = jet(f, (s, t), 2)
    return {k: np.broadcast_to(np.asarray(v, dtype=float), shape) for k, v in d.items()}


def surface_frame(surface: AmbientSurface, s, t) -> SurfaceFrame:
    """Frame data at parameter values ``s``, ``t`` (scalars or arrays).

    Raises:
        NotImmersedError: X_s x X_t vanishes
        NotSpacelikeError: Minkowski surface with an induced metric that is not positive definite
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast(s, t).shape
    jets = [_component_jets(f, s, t, shape) for f in surface.X]

    def vec(key):
        return np.stack([j[key] for j in jets], axis=-1)

    X, Xs, Xt = vec((0, 0)), vec((1, 0)), vec((0, 1))
    Xss, Xst, Xtt = vec((2, 0)), vec((1, 1)), vec((0, 2))
    sig = surface.signature
    E, F, G = ip(sig, Xs, Xs), ip(sig, Xs, Xt), ip(sig, Xt, Xt)
    if sig == MINKOWSKI and (np.any(E <= 0) or np.any(E * G - F**2 <= 0)):
        raise NotSpacelikeError(f"surface '{surface.name}' is not space-like on the requested points")
    n = cross(sig, Xs, Xt)
    n_s = cross(sig, Xss, Xt) + cross(sig, Xs, Xst)
    n_t = cross(sig, Xst, Xt) + cross(sig, Xs, Xtt)
    nn = ip(sig, n, n)
    eps = surface.eps
    if np.any(eps * nn <= 1e-300):
        raise NotImmersedError(f"surface '{surface.name}' is not immersed on the requested points")
    rho = np.sqrt(eps * nn)
    if sig == MINKOWSKI:
        sign = np.where(n[..., 2] < 0, -1.0, 1.0)
    else:
        sign = np.full(shape, float(surface.orientation))
    n, n_s, n_t = n * sign[..., None], n_s * sign[..., None], n_t * sign[..., None]
    N = n / rho[..., None]
    Ns = (n_s - eps * ip(sig, n_s, N)[..., None] * N) / rho[..., None]
    Nt = (n_t - eps * ip(sig, n_t, N)[..., None] * N) / rho[..., None]
    M12 = 0.5 * (ip(sig, Xs, Nt) + ip(sig, Xt, Ns))
    return SurfaceFrame(
        signature=sig,
        X=X,
        Xs=Xs,
        Xt=Xt,
        N=N,
        Ns=Ns,
        Nt=Nt,
        E=E,
        F=F,
        G=G,
        M11=ip(sig, Xs, Ns),
        M12=M12,
        M22=ip(sig, Xt, Nt),
    )


# ---------------------------------------------------------------------------
# Shape data
# ---------------------------------------------------------------------------


@dataclass
class ShapeData:
    """Principal curvatures (lam <= mu) with H = (lam + mu)/2, K = lam mu."""

    lam: np.ndarray
    mu: np.ndarray
    H: np.ndarray
    K: np.ndarray
    gap: np.ndarray  # |lam - mu|


def _shape(frame: SurfaceFrame) -> ShapeData:
    det = frame.E * frame.G - frame.F**2
    A11 = (frame.G * frame.M11 - frame.F * frame.M12) / det
    A12 = (frame.G * frame.M12 - frame.F * frame.M22) / det
    A21 = (frame.E * frame.M12 - frame.F * frame.M11) / det
    A22 = (frame.E * frame.M22 - frame.F * frame.M12) / det
    H = 0.5 * (A11 + A22)
    K = A11 * A22 - A12 * A21
    half = 0.5 * (A11 - A22)
    discriminant = half**2 + A12 * A21
    scale = np.maximum(1.0, H**2 + np.abs(K))
    if np.any(discriminant < -1e-8 * scale):
        raise ShapeOperatorError("shape operator has complex eigenvalues")
    gap = 2.0 * np.sqrt(np.maximum(discriminant, 0.0))
    return ShapeData(lam=H - 0.5 * gap, mu=H + 0.5 * gap, H=H, K=K, gap=gap)


def shape_data(surface: AmbientSurface, pt) -> ShapeData:
    """Principal curvatures as eigenvalues of the Weingarten map I^{-1} M, M_ij = <X_i, N_j>.

    On curvature lines this is N_s = lam X_s, N_t = mu X_t.

    Raises:
        ShapeOperatorError: Numerically complex eigenvalues
    """
    shape = _shape(surface_frame(surface, float(pt[0]), float(pt[1])))
    return ShapeData(*(float(v) for v in (shape.lam, shape.mu, shape.H, shape.K, shape.gap)))


def curvature_line_data(surface: AmbientSurface, pt, tol: float = 1e-9) -> tuple[float, float]:
    """(lam, mu) attached to the s and t directions: N_s = lam X_s, N_t = mu X_t.

    Raises:
        ValueError: The parametrisation is not by curvature lines at ``pt``
    """
    frame = surface_frame(surface, float(pt[0]), float(pt[1]))
    scale = math.sqrt(float(frame.E * frame.G))
    if abs(float(frame.F)) > tol * scale or abs(float(frame.M12)) > tol * max(scale, 1.0):
        raise ValueError(f"({pt[0]:.6g}, {pt[1]:.6g}) is not on a curvature-line parametrisation")
    return float(frame.M11 / frame.E), float(frame.M22 / frame.G)


# ---------------------------------------------------------------------------
# The congruence and the ambient structure
# ---------------------------------------------------------------------------


@dataclass
class LinePoint:
    """Oriented line (N, Y): direction and moment part, <N, Y> = 0."""

    N: np.ndarray
    Y: np.ndarray


@dataclass
class SplitLineTangent:
    """Tangent vector (nu, eta^T) to the line space; both parts orthogonal to N."""

    hpart: np.ndarray
    vpart: np.ndarray


def ambient_omega(signature: str, xi: SplitLineTangent, zeta: SplitLineTangent):
    return ip(signature, xi.vpart, zeta.hpart) - ip(signature, xi.hpart, zeta.vpart)


def ambient_j(signature: str, N, xi: SplitLineTangent) -> SplitLineTangent:
    return SplitLineTangent(cross(signature, N, xi.hpart), cross(signature, N, xi.vpart))


def ambient_g(signature: str, N, xi: SplitLineTangent, zeta: SplitLineTangent):
    return ambient_omega(signature, ambient_j(signature, N, xi), zeta)


def tangential(signature: str, N, eta):
    """eta^T = eta - <N,N> <eta, N> N."""
    eps = 1.0 if signature == EUCLIDEAN else -1.0
    return eta - eps * ip(signature, eta, N)[..., None] * N


@dataclass
class CongruenceFrame:
    """Line point and split tangents of the normal congruence."""

    surface: SurfaceFrame
    line: LinePoint
    Xs: SplitLineTangent
    Xt: SplitLineTangent
    support: np.ndarray  # <X, N>

    def metric(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(E-bar, F-bar, G-bar): G on the congruence frame."""
        sig, N = self.surface.signature, self.line.N
        return (
            ambient_g(sig, N, self.Xs, self.Xs),
            ambient_g(sig, N, self.Xs, self.Xt),
            ambient_g(sig, N, self.Xt, self.Xt),
        )

    def defect(self) -> np.ndarray:
        return ambient_omega(self.surface.signature, self.Xs, self.Xt)


def congruence_frame(surface: AmbientSurface, s, t) -> CongruenceFrame:
    frame = surface_frame(surface, s, t)
    sig, eps = frame.signature, frame.eps
    support = ip(sig, frame.X, frame.N)
    Y = frame.X - eps * support[..., None] * frame.N
    Ks = frame.Xs - eps * support[..., None] * frame.Ns
    Kt = frame.Xt - eps * support[..., None] * frame.Nt
    return CongruenceFrame(
        surface=frame,
        line=LinePoint(frame.N, Y),
        Xs=SplitLineTangent(frame.Ns, Ks),
        Xt=SplitLineTangent(frame.Nt, Kt),
        support=support,
    )


class NormalCongruence:
    """The map (s, t) -> (N, X - <X,N><N,N> N) of oriented normal lines."""

    def __init__(self, surface: AmbientSurface):
        self.surface = surface

    def __repr__(self) -> str:
        return f"NormalCongruence({self.surface!r})"

    def frame(self, pt) -> CongruenceFrame:
        return congruence_frame(self.surface, float(pt[0]), float(pt[1]))

    def line(self, pt) -> LinePoint:
        return self.frame(pt).line

    def tangents(self, pt) -> tuple[SplitLineTangent, SplitLineTangent]:
        cf = self.frame(pt)
        return cf.Xs, cf.Xt

    def lagrangian_defect(self, pt) -> float:
        return float(self.frame(pt).defect())

    def metric(self, pt) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.frame(pt).metric())  # type: ignore[return-value]

    def max_defect(self, n: int = 16) -> float:
        s, t = np.meshgrid(*self.surface.domain.grid(n), indexing="ij")
        return float(np.max(np.abs(congruence_frame(self.surface, s, t).defect())))


def normal_congruence(surface: AmbientSurface) -> NormalCongruence:
    return NormalCongruence(surface)


# ---------------------------------------------------------------------------
# Quadrature and the functionals
# ---------------------------------------------------------------------------


@dataclass
class QuadratureResult:
    value: float
    error: float
    subdivisions: int = 0


def _gauss_legendre(f, rect: Rect, order: int) -> float:
    x, w = leggauss(order)
    hs, ht = 0.5 * (rect.s1 - rect.s0), 0.5 * (rect.t1 - rect.t0)
    ms, mt = 0.5 * (rect.s0 + rect.s1), 0.5 * (rect.t0 + rect.t1)
    S, T = np.meshgrid(ms + hs * x, mt + ht * x, indexing="ij")
    values = np.asarray(f(S, T), dtype=float)
    return float(np.sum(np.outer(w, w) * values) * hs * ht)


def integrate(
    f,
    rect: Rect,
    order: int = 32,
    tol: float = 1e-10,
    atol: float = 1e-13,
    max_depth: int = 4,
) -> QuadratureResult:
    """Tensor Gauss-Legendre quadrature with order doubling as error estimate.

    Cells whose two estimates disagree are split in four, up to ``max_depth``
    times; sub-results are summed in a fixed order.

    Raises:
        QuadratureError: The estimate is still above tolerance at ``max_depth``
    """
    coarse = _gauss_legendre(f, rect, order)
    fine = _gauss_legendre(f, rect, 2 * order)
    error = abs(fine - coarse)
    if error <= max(tol * abs(fine), atol):
        return QuadratureResult(fine, error)
    if max_depth == 0:
        raise QuadratureError(f"quadrature did not converge on {rect}: error estimate {error:.3g}")
    cs, ct = rect.center
    parts = [
        Rect(rect.s0, cs, rect.t0, ct),
        Rect(cs, rect.s1, rect.t0, ct),
        Rect(rect.s0, cs, ct, rect.t1),
        Rect(cs, rect.s1, ct, rect.t1),
    ]
    results = [integrate(f, part, order, tol, atol / 4, max_depth - 1) for part in parts]
    logger.debug("quadrature subdivided %s", rect)
    return QuadratureResult(
        value=math.fsum(r.value for r in results),
        error=math.fsum(r.error for r in results),
        subdivisions=1 + sum(r.subdivisions for r in results),
    )


def functional_F(surface: AmbientSurface, order: int = 32, tol: float = 1e-10) -> QuadratureResult:
    """F(S) = integral of sqrt(H^2 - K) dA = integral of |lam - mu|/2 dA."""

    def density(s, t):
        frame = surface_frame(surface, s, t)
        area = np.sqrt(np.abs(frame.E * frame.G - frame.F**2))
        return 0.5 * _shape(frame).gap * area

    return integrate(density, surface.domain, order, tol)


def congruence_density(surface: AmbientSurface, s, t) -> np.ndarray:
    """sqrt|E-bar G-bar - F-bar^2|: the G-area density of the normal congruence."""
    Eb, Fb, Gb = congruence_frame(surface, s, t).metric()
    return np.sqrt(np.abs(Eb * Gb - Fb**2))


def congruence_area(surface: AmbientSurface, order: int = 32, tol: float = 1e-10) -> QuadratureResult:
    """Area of the normal congruence, in the normalisation G/2 of the line space.

    The raw G-area is twice this value; with this normalisation the area
    equals F(S).
    """
    raw = congruence_raw_area(surface, order, tol)
    return QuadratureResult(0.5 * raw.value, 0.5 * raw.error, raw.subdivisions)


def congruence_raw_area(surface: AmbientSurface, order: int = 32, tol: float = 1e-10) -> QuadratureResult:
    return integrate(lambda s, t: congruence_density(surface, s, t), surface.domain, order, tol)


def diagonal_defect(surface: AmbientSurface, n: int = 16) -> float:
    """max(|E-bar|, |G-bar|) over a grid; zero on curvature-line parametrisations."""
    s, t = np.meshgrid(*surface.domain.grid(n), indexing="ij")
    Eb, _, Gb = congruence_frame(surface, s, t).metric()
    return float(max(np.max(np.abs(Eb)), np.max(np.abs(Gb))))


# ---------------------------------------------------------------------------
# Hamiltonian variations
# ---------------------------------------------------------------------------


def taper(h: ScalarField, domain: Rect) -> ScalarField:
    """h times a C^1 bump vanishing with its first derivatives on the boundary."""
    S, T = Var("s"), Var("t")
    ws = 0.5 * (domain.s1 - domain.s0)
    wt = 0.5 * (domain.t1 - domain.t0)
    bump_s = ((S - domain.s0) * (domain.s1 - S) * (1.0 / ws**2)) ** 2
    bump_t = ((T - domain.t0) * (domain.t1 - T) * (1.0 / wt**2)) ** 2
    return ScalarField(h.expression * bump_s * bump_t)


@dataclass
class VariationReport:
    """Outcome of a Hamiltonian variation check.

    Attributes:
        residual: max |V-bar^perp - eps_sig J Dh| over evaluated cells
        identity: max |G(V-bar, J X-bar_i) - eps_sig h_i| over evaluated cells
        cells_skipped: Umbilic cells where the congruence frame degenerates
        cells: Cells evaluated
    """

    residual: float
    identity: float
    cells_skipped: int
    cells: int


def _line_vector(cf: CongruenceFrame) -> np.ndarray:
    return np.concatenate([cf.line.N, cf.line.Y], axis=-1)


def hamiltonian_variation_check(
    surface: AmbientSurface,
    h: ScalarField,
    epsilons: tuple[float, float] = (1e-3, 5e-4),
    n: int = 8,
    umbilic_tol: float = 1e-6,
) -> VariationReport:
    """Compare the variation of the congruence under X + eps h N with J Dh.

    V-bar is a central difference in eps at the two step sizes, combined by
    Richardson extrapolation. Its projection on the G-normal bundle must
    equal eps_sig J Dh, where eps_sig = <N, N>.
    """
    s, t = np.meshgrid(*surface.domain.grid(n), indexing="ij")
    base = congruence_frame(surface, s, t)
    sig, eps_sig = surface.signature, surface.eps

    def difference(epsilon: float) -> np.ndarray:
        plus = congruence_frame(surface.displaced(h, epsilon), s, t)
        minus = congruence_frame(surface.displaced(h, -epsilon), s, t)
        return (_line_vector(plus) - _line_vector(minus)) / (2 * epsilon)

    big, small = (difference(e) for e in epsilons)
    ratio = (epsilons[0] / epsilons[1]) ** 2
    motion = (ratio * small - big) / (ratio - 1.0)
    N = base.line.N
    V = SplitLineTangent(motion[..., :3], tangential(sig, N, motion[..., 3:]))

    # G(V, J X_i) = Omega(V, X_i)
    g_v = np.stack([ambient_omega(sig, V, base.Xs), ambient_omega(sig, V, base.Xt)], axis=-1)
    dh = jet(h, (s, t), 1)
    grad_h = np.stack(
        [np.broadcast_to(dh[(1, 0)], s.shape), np.broadcast_to(dh[(0, 1)], s.shape)], axis=-1
    ).astype(float)
    identity = np.abs(g_v - eps_sig * grad_h)

    Eb, Fb, Gb = base.metric()
    det = Eb * Gb - Fb**2
    scale = np.sqrt(base.surface.E * base.surface.G)
    degenerate = np.abs(det) <= umbilic_tol * np.maximum(scale, 1.0) ** 2
    safe = np.where(degenerate, 1.0, det)
    # coefficients on (J X_s, J X_t) of V^perp - eps_sig J Dh
    rhs = g_v - eps_sig * grad_h
    a = (Gb * rhs[..., 0] - Fb * rhs[..., 1]) / safe
    b = (Eb * rhs[..., 1] - Fb * rhs[..., 0]) / safe
    JXs, JXt = ambient_j(sig, N, base.Xs), ambient_j(sig, N, base.Xt)
    hpart = a[..., None] * JXs.hpart + b[..., None] * JXt.hpart
    vpart = a[..., None] * JXs.vpart + b[..., None] * JXt.vpart
    residual = np.sqrt(np.sum(hpart**2, axis=-1) + np.sum(vpart**2, axis=-1))
    keep = ~degenerate
    skipped = int(degenerate.sum())
    if skipped:
        logger.info("variation check skipped %d umbilic cells of %s", skipped, surface.name)
    return VariationReport(
        residual=float(np.max(residual[keep], initial=0.0)),
        identity=float(np.max(identity[keep], initial=0.0)),
        cells_skipped=skipped,
        cells=int(keep.sum()),
    )


# ---------------------------------------------------------------------------
# Developable surfaces, chart comparison and reports
# ---------------------------------------------------------------------------


@dataclass
class RankProfile:
    ranks: np.ndarray

    @property
    def max_rank(self) -> int:
        return int(self.ranks.max())

    @property
    def developable(self) -> bool:
        return self.max_rank <= 1


def developable_rank_profile(surface: AmbientSurface, n: int = 16, tol: float = 1e-8) -> RankProfile:
    """Per-cell rank of dN, read off the principal curvatures (dN = dX . Weingarten map)."""
    s, t = np.meshgrid(*surface.domain.grid(n), indexing="ij")
    shape = _shape(surface_frame(surface, s, t))
    scale = np.maximum(1.0, np.maximum(np.abs(shape.lam), np.abs(shape.mu)))
    ranks = (np.abs(shape.lam) > tol * scale).astype(int) + (np.abs(shape.mu) > tol * scale).astype(int)
    return RankProfile(ranks)


def _sphere_chart_basis(p) -> tuple[np.ndarray, np.ndarray]:
    x, y = p
    D = 1.0 + x * x + y * y
    sx = np.array([2 * (D - 2 * x * x), -4 * x * y, -4 * x]) / D**2
    sy = np.array([-4 * x * y, 2 * (D - 2 * y * y), -4 * y]) / D**2
    return sx, sy


def to_sphere_chart(line: LinePoint, xi: SplitLineTangent) -> tuple[TBPoint, SplitTangent]:
    """Express a Euclidean line and a tangent vector in the ``sphere`` chart.

    The chart is stereographic projection from the south pole,
    p = (N1, N2) / (1 + N3); chart components of an ambient tangent vector w
    are <w, d_i sigma> e^{-2r}.
    """
    N = np.asarray(line.N, dtype=float)
    if N[2] <= -1.0 + 1e-12:
        raise ValueError("the south pole is not covered by the sphere chart")
    p = N[:2] / (1.0 + N[2])
    sx, sy = _sphere_chart_basis(p)
    factor = 4.0 / (1.0 + p @ p) ** 2

    def components(w):
        return np.array([np.dot(w, sx), np.dot(w, sy)]) / factor

    tb = TBPoint(p, components(line.Y))
    return tb, SplitTangent(components(xi.hpart), components(xi.vpart))


@dataclass
class CongruenceReport:
    """Summary record of one surface: F, congruence area and diagnostics."""

    surface: str
    signature: str
    F: float
    F_error: float
    area: float
    area_error: float
    raw_area: float
    rel_diff: float
    max_defect: float
    cells_skipped: int
    diagonal: float | None = None
    max_rank: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def congruence_report(
    surface: AmbientSurface, order: int = 32, n: int = 16, tol: float = 1e-10
) -> CongruenceReport:
    """F, area and Lagrangian/rank diagnostics of a surface's normal congruence.

    ``cells_skipped`` counts umbilic grid cells; ``diagonal`` (max |E-bar|,
    |G-bar|) is reported for curvature-line parametrisations only.
    """
    F = functional_F(surface, order, tol)
    raw = congruence_raw_area(surface, order, tol)
    area = 0.5 * raw.value
    denominator = max(abs(F.value), abs(area))
    rel_diff = abs(F.value - area) / denominator if denominator > 1e-10 else abs(F.value - area)
    s, t = np.meshgrid(*surface.domain.grid(n), indexing="ij")
    cf = congruence_frame(surface, s, t)
    shape = _shape(cf.surface)
    umbilic = shape.gap <= 1e-9 * np.maximum(1.0, np.abs(shape.H))
    profile = developable_rank_profile(surface, n)
    return CongruenceReport(
        surface=surface.name,
        signature=surface.signature,
        F=F.value,
        F_error=F.error,
        area=area,
        area_error=0.5 * raw.error,
        raw_area=raw.value,
        rel_diff=float(rel_diff),
        max_defect=float(np.max(np.abs(cf.defect()))),
        cells_skipped=int(umbilic.sum()),
        diagonal=diagonal_defect(surface, n) if surface.curvature_lines else None,
        max_rank=profile.max_rank,
    )
