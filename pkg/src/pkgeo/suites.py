"""Verification suites and scene-request execution.

Suites and requests run concurrently in worker threads; results are put
back into request order, and a crashed worker becomes a failed result
carrying its error message.
"""

from __future__ import annotations

import asyncio
import csv
import io
import logging
import math
from pathlib import Path
from typing import Any, Callable

import numpy as np

from pkgeo import __version__
from pkgeo.basegeo import (
    ConformalChart,
    ExpressionCurve,
    Rect,
    arclength_reparametrize,
    circle_curve,
    geodesic,
    norm,
    ray_curve,
)
from pkgeo.congruence import (
    AmbientSurface,
    ambient_g,
    ambient_omega,
    congruence_frame,
    congruence_report,
    developable_rank_profile,
    functional_F,
    congruence_area,
    hamiltonian_variation_check,
    shape_data,
    taper,
    to_sphere_chart,
    SplitLineTangent,
    VariationReport,
)
from pkgeo.errors import (
    BranchError,
    ChartDomainError,
    DegenerateMetricError,
    DomainError,
    ExprSyntaxError,
    NotImmersedError,
    NotLagrangianError,
    NotSpacelikeError,
    NullPointError,
    QuadratureError,
    SceneError,
    ShapeOperatorError,
    StencilError,
    UnknownIdentifierError,
)
from pkgeo.expr import ScalarField, differentiate, jet, parse, to_text
from pkgeo.flatlab import (
    AngleConstancy,
    MinimalFamilySpec,
    angle_constancy,
    angle_grid,
    angle_gradient_identity,
    build_minimal,
    constant_angle_residual,
    flat_graph,
    lagrangian_angle,
)
from pkgeo.lagrangian import (
    PROBE_FAMILY,
    PROBE_PARAMETERS,
    AffineNormalBundle,
    GradientGraph,
    hstationary_residual,
    induced_curvature,
    induced_metric,
    lagrangian_defect,
    minimality_probe,
    mean_curvature,
    mean_curvature_arg_form,
    mean_curvature_norm,
    normal_bundle,
    quantity_value,
    second_fundamental,
    sweep,
)
from pkgeo.models import CheckResult, Report, RequestResult, Settings
from pkgeo.scene import (
    CongruenceRequest,
    EvaluateRequest,
    GridRequest,
    RankProfileRequest,
    Scene,
    SuiteRequest,
    VariationRequest,
    build_chart,
    build_objects,
)
from pkgeo.tbundle import (
    ProjectableField,
    SplitTangent,
    TBPoint,
    gmetric,
    jmap,
    metric_compatibility_residual,
    omega,
    parallel_j_residual,
    sasaki_norm,
    signature,
    structure_residuals,
    torsion_residual,
)

logger = logging.getLogger(__name__)

CHARTS = ("flat", "sphere", "hyperbolic")
THEOREM_SUITES = ("rank_one", "rank_two", "flat")

DEFAULT_TOLERANCES: dict[str, float] = {
    "structure.algebra": 1e-12,
    "structure.nijenhuis": 1e-9,
    "structure.compatibility": 1e-8,
    "structure.torsion": 1e-8,
    "structure.parallel_j": 1e-8,
    "rank_one.metric": 1e-8,
    "rank_one.extrinsic": 1e-8,
    "rank_one.mean_curvature": 1e-8,
    "rank_one.div_jh": 1e-5,
    "rank_one.curvature": 1e-6,
    "rank_one.geodesic": 1e-8,
    "rank_two.defect": 1e-10,
    "rank_two.arg_form": 1e-7,
    "rank_two.probe": 1e-3,
    "flat.constant_angle": 1e-12,
    "flat.mean_curvature": 1e-8,
    "flat.angle_spread": 1e-9,
    "flat.angle_identity": 1e-6,
    "flat.example": 1e-12,
    "congruence.area": 1e-6,
    "congruence.zero": 1e-10,
    "congruence.closed_form": 1e-8,
    "congruence.defect": 1e-9,
    "congruence.diagonal": 1e-9,
    "congruence.rigid": 1e-9,
    "congruence.variation": 1e-5,
    "congruence.identity": 1e-6,
    "congruence.chart": 1e-10,
    "parser.round_trip": 0.0,
    "parser.derivative": 1e-6,
}

# named result behind each check; a superset of the tolerance keys
REFERENCES: dict[str, str] = {
    "structure.algebra": "neutral Kaehler structure on the tangent bundle",
    "structure.signature": "neutral Kaehler structure on the tangent bundle",
    "structure.nijenhuis": "integrability of the complex structure J",
    "structure.compatibility": "Levi-Civita connection of G",
    "structure.torsion": "Levi-Civita connection of G",
    "structure.parallel_j": "J is parallel (G is Kaehler)",
    "rank_one.metric": "induced metric of an affine normal bundle",
    "rank_one.extrinsic": "extrinsic tensor of an affine normal bundle",
    "rank_one.mean_curvature": "mean curvature of an affine normal bundle",
    "rank_one.div_jh": "affine normal bundles are Hamiltonian stationary",
    "rank_one.curvature": "affine normal bundles are flat",
    "rank_one.geodesic": "normal bundles of geodesics are minimal",
    "rank_two.defect": "gradient graphs are Lagrangian",
    "rank_two.arg_form": "mean curvature of a gradient graph in arg form",
    "rank_two.probe": "no minimal gradient graphs over curved charts",
    "flat.constant_angle": "minimal graphs have constant Lagrangian angle",
    "flat.mean_curvature": "minimal graphs have constant Lagrangian angle",
    "flat.angle_spread": "Lagrangian angle constant on each component",
    "flat.angle_identity": "2H = J D beta in the flat case",
    "flat.example": "Lagrangian angle of sin s + cos t",
    "congruence.area": "area of a normal congruence equals F(S)",
    "congruence.zero": "area of a normal congruence equals F(S)",
    "congruence.closed_form": "area of a normal congruence equals F(S)",
    "congruence.defect": "normal congruences are Lagrangian",
    "congruence.diagonal": "curvature lines give null coordinates on the congruence",
    "congruence.rigid": "F is invariant under rigid motions",
    "congruence.variation": "normal variations are Hamiltonian",
    "congruence.identity": "normal variations are Hamiltonian",
    "congruence.chart": "ambient and chart structures agree on the line space",
    "congruence.rank": "developable surfaces have rank-one congruences",
    "parser.round_trip": "expression print/parse round trip",
    "parser.derivative": "symbolic differentiation",
}

SCENE_ERRORS = (SceneError, ExprSyntaxError, UnknownIdentifierError)
DOMAIN_ERRORS = (
    DomainError,
    ChartDomainError,
    DegenerateMetricError,
    NullPointError,
    StencilError,
    NotImmersedError,
    NotLagrangianError,
    NotSpacelikeError,
    BranchError,
    ShapeOperatorError,
    QuadratureError,
)

# errors that mark a sample point as unusable rather than a failure
SKIPPABLE = (NullPointError, BranchError, StencilError)


def merge_tolerances(overrides: dict[str, float] | None) -> dict[str, float]:
    """Defaults updated with scene overrides.

    Raises:
        SceneError: An override names an unknown check
    """
    merged = dict(DEFAULT_TOLERANCES)
    for key, value in (overrides or {}).items():
        if key not in merged:
            raise SceneError(f"unknown tolerance '{key}'")
        merged[key] = float(value)
    return merged


def error_kind(error: BaseException) -> str:
    if isinstance(error, SCENE_ERRORS):
        return "scene"
    if isinstance(error, DOMAIN_ERRORS):
        return "domain"
    return "internal"


class _Checks:
    """Accumulates the running maximum of each claim of a suite.

    A claim whose every sample was skipped still reports, as a failure.
    """

    def __init__(self, module: str, tolerances: dict[str, float]):
        self.module = module
        self.tolerances = tolerances
        self._worst: dict[tuple[str, str, str], float] = {}
        self._attempted: dict[tuple[str, str, str], None] = {}
        self._lower: set[tuple[str, str, str]] = set()
        self.skipped = 0

    def observe(self, key: str, operation: str, claim: str, value: float) -> None:
        slot = (key, operation, claim)
        self._attempted.setdefault(slot)
        previous, value = self._worst.get(slot, 0.0), abs(float(value))
        # NaN sticks so the check fails
        self._worst[slot] = math.nan if math.isnan(previous) or math.isnan(value) else max(previous, value)

    def at_least(self, key: str, operation: str, claim: str, value: float) -> None:
        slot = (key, operation, claim)
        self._attempted.setdefault(slot)
        self._lower.add(slot)
        self._worst[slot] = float(value)

    def skip(self, key: str, operation: str, claim: str) -> None:
        """Record a sample of this claim that could not be evaluated."""
        self._attempted.setdefault((key, operation, claim))
        self.skipped += 1

    def results(self) -> list[CheckResult]:
        out = []
        for slot in self._attempted:
            key, operation, claim = slot
            observed = self._worst.get(slot)
            if observed is None:
                logger.warning("%s.%s: every sample of '%s' was skipped", self.module, operation, claim)
                claim, observed = f"{claim} (no admissible samples)", math.nan
            out.append(
                CheckResult(
                    module=self.module,
                    operation=operation,
                    claim=claim,
                    observed=observed,
                    tolerance=self.tolerances[key],
                    lower_bound=slot in self._lower,
                    reference=REFERENCES[key],
                )
            )
        return out


# ---------------------------------------------------------------------------
# Structure suite
# ---------------------------------------------------------------------------


def _random_field(rng: np.random.Generator) -> ProjectableField:
    values = rng.uniform(-1.0, 1.0, (4, 3))
    params = {f"c{i}{j}": float(values[i, j]) for i in range(4) for j in range(3)}
    texts = [f"c{i}0+c{i}1*s+c{i}2*s*t" for i in range(4)]
    return ProjectableField.parse(*texts, parameters=params)


def structure_suite(chart: ConformalChart, settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """J^2 = -1, G(.,.) = Omega(J.,.), signature (2,2), N_J = 0, D metric, torsion-free, DJ = 0."""
    checks = _Checks("tbundle", tolerances)
    rng = np.random.default_rng(settings.seed)
    domain = chart.domain.shrink(0.9)
    wrong_signature = 0
    for p in domain.sample(rng, settings.samples):
        V = rng.uniform(-1.0, 1.0, 2)
        tb = TBPoint(p, V)
        X = SplitTangent.from_vector(rng.uniform(-1.0, 1.0, 4))
        Y = SplitTangent.from_vector(rng.uniform(-1.0, 1.0, 4))
        Xf, Yf, Zf = (_random_field(rng) for _ in range(3))
        scale = chart.conformal_factor(p) * (1.0 + float(np.abs(V).max())) ** 2
        algebra = structure_residuals(chart, tb, X, Y)
        for name in ("j_squared", "omega_antisymmetry", "g_symmetry", "g_j_invariance"):
            checks.observe("structure.algebra", "structure_residuals", name, algebra[name] / scale)
        JX = jmap(chart, tb, X)
        checks.observe(
            "structure.algebra",
            "gmetric",
            "G(X,Y) = Omega(JX,Y)",
            abs(gmetric(chart, tb, X, Y) - omega(chart, tb, JX, Y)) / scale,
        )
        checks.observe("structure.nijenhuis", "nijenhuis", "N_J(X,Y) = 0", algebra["nijenhuis"] / scale)
        if signature(chart, tb) != (2, 2):
            wrong_signature += 1
        X0 = Xf.at(p)
        checks.observe(
            "structure.compatibility",
            "metric_compatibility_residual",
            "X.G(Y,Z) = G(D_X Y,Z) + G(Y,D_X Z)",
            metric_compatibility_residual(chart, tb, X0, Yf, Zf) / scale,
        )
        checks.observe(
            "structure.torsion",
            "torsion_residual",
            "D_X Y - D_Y X = [X,Y]",
            torsion_residual(chart, tb, Xf, Yf).max_abs() / scale,
        )
        checks.observe(
            "structure.parallel_j",
            "parallel_j_residual",
            "D_X(JY) = J D_X Y",
            parallel_j_residual(chart, tb, X0, Yf).max_abs() / scale,
        )
    out = checks.results()
    out.append(CheckResult("tbundle", "signature", "G has signature (2,2)", float(wrong_signature), 0.0,
                           reference=REFERENCES["structure.signature"]))
    return RequestResult(index=0, op="suite", target=f"structure:{chart.name}", checks=out)


# ---------------------------------------------------------------------------
# Rank-one suite: affine normal bundles
# ---------------------------------------------------------------------------


def _random_curve(chart: ConformalChart, rng: np.random.Generator, i: int):
    """Alternate circles, rays and quadratic arcs inside the chart."""
    kind = i % 3
    if kind == 0:
        radius = float(rng.uniform(0.2, 0.5))
        curve = circle_curve(chart, radius)
        return ExpressionCurve(curve.x, curve.y, (0.0, 0.5 * curve.interval[1]), arclength=True)
    if kind == 1:
        return ray_curve(chart, float(rng.uniform(0, 2 * math.pi)), (0.1, 0.5))
    x0, y0 = rng.uniform(-0.2, 0.2, 2)
    angle = float(rng.uniform(0, 2 * math.pi))
    c1, c2 = rng.uniform(-0.2, 0.2, 2)
    params = {"x0": x0, "y0": y0, "dx": 0.5 * math.cos(angle), "dy": 0.5 * math.sin(angle), "c1": c1, "c2": c2}
    base = ExpressionCurve.parse("x0+dx*s+c1*s^2", "y0+dy*s+c2*s^2", (0.0, 1.0), parameters=params)
    return arclength_reparametrize(chart, base)


def rank_one_suite(chart: ConformalChart, settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """Affine normal bundles: metric, extrinsic tensor, H = (0, kT), Hamiltonian stationarity, flatness."""
    checks = _Checks("lagrangian", tolerances)
    rng = np.random.default_rng(settings.seed)
    for i in range(10):
        curve = _random_curve(chart, rng, i)
        a0, a1, a2 = rng.uniform(-0.5, 0.5, 3)
        a = ScalarField.parse("a0+a1*s+a2*s^2", ("s",), {"a0": a0, "a1": a1, "a2": a2})
        bundle = AffineNormalBundle(chart, curve, a, (-0.5, 0.5))
        for s, t in bundle.domain.shrink(0.8).sample(rng, 3):
            pt = (s, t)
            metric = induced_metric(bundle, pt)
            checks.observe(
                "rank_one.metric",
                "induced_metric",
                "(E,F,G) = (-2ak, -1, 0)",
                np.max(np.abs(metric.matrix - bundle.expected_metric(s))),
            )
            h = second_fundamental(bundle, pt)
            k = bundle.geodesic_curvature(s)
            checks.observe(
                "rank_one.extrinsic",
                "second_fundamental",
                "h112 = k, h122 = h222 = 0",
                max(abs(h["112"] - k), abs(h["122"]), abs(h["222"])),
            )
            tb = bundle.point(pt)
            H = mean_curvature(bundle, pt, settings.tol_null)
            checks.observe(
                "rank_one.mean_curvature",
                "mean_curvature",
                "H = (0, k T)",
                sasaki_norm(chart, tb, H - bundle.expected_mean_curvature(s)),
            )
            checks.observe(
                "rank_one.div_jh", "hstationary_residual", "div JH = 0", hstationary_residual(bundle, pt)
            )
            checks.observe(
                "rank_one.curvature", "induced_curvature", "induced metric is flat", induced_curvature(bundle, pt)
            )
    for _ in range(3):
        p0 = chart.domain.shrink(0.3).sample(rng, 1)[0]
        angle = float(rng.uniform(0, 2 * math.pi))
        v0 = np.array([math.cos(angle), math.sin(angle)])
        v0 = v0 / norm(chart, p0, v0)
        path = geodesic(chart, p0, v0, 0.3, 600)
        bundle = normal_bundle(chart, path, (-0.5, 0.5))
        for s, t in bundle.domain.shrink(0.8).sample(rng, 3):
            tb = bundle.point((s, t))
            checks.observe(
                "rank_one.geodesic",
                "mean_curvature",
                "normal bundles of geodesics are minimal",
                sasaki_norm(chart, tb, mean_curvature(bundle, (s, t), settings.tol_null)),
            )
    return RequestResult(index=0, op="suite", target=f"rank_one:{chart.name}", checks=checks.results())


# ---------------------------------------------------------------------------
# Rank-two suite: gradient graphs
# ---------------------------------------------------------------------------


def rank_two_suite(chart: ConformalChart, settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """Gradient graphs: Lagrangian, arg form of H, and the minimality probe on curved charts."""
    checks = _Checks("lagrangian", tolerances)
    rng = np.random.default_rng(settings.seed)
    domain = Rect(-0.3, 0.3, -0.3, 0.3)
    for _ in range(20):
        coefficients = dict(zip(PROBE_PARAMETERS, rng.uniform(-1.0, 1.0, 6).tolist()))
        graph = GradientGraph.parse(chart, PROBE_FAMILY, domain, coefficients)
        for pt in domain.shrink(0.9).sample(rng, 3):
            scale = chart.conformal_factor(pt)
            checks.observe(
                "rank_two.defect", "lagrangian_defect", "gradient graphs are Lagrangian",
                lagrangian_defect(graph, pt) / scale,
            )
            try:
                residuals = mean_curvature_arg_form(graph, pt, settings.tol_null)
            except SKIPPABLE:
                checks.skip("rank_two.arg_form", "mean_curvature_arg_form", "arg form of 2H")
                continue
            checks.observe("rank_two.arg_form", "mean_curvature_arg_form", "arg form of 2H", max(map(abs, residuals)))
    if not chart.is_flat_catalog:
        probe = minimality_probe(chart, seed=settings.seed, candidates=32, tol_null=settings.tol_null)
        checks.at_least("rank_two.probe", "minimality_probe", "no minimal gradient graph in the family", probe.best)
    result = RequestResult(index=0, op="suite", target=f"rank_two:{chart.name}", checks=checks.results())
    result.values["skipped"] = checks.skipped
    return result


# ---------------------------------------------------------------------------
# Flat suite: Lagrangian angle
# ---------------------------------------------------------------------------

_PROFILES = ("a*x^3", "a*sin(x)", "a*exp(x)", "a*x^2+x^4", "a*cos(2*x)")


def flat_suite(settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """Constant-angle families, beta constancy per component, 2H = J D beta and the sin s + cos t example."""
    checks = _Checks("flatlab", tolerances)
    rng = np.random.default_rng(settings.seed)
    domain = Rect(-1.0, 1.0, -1.0, 1.0)
    for i in range(10):
        beta0 = float(rng.uniform(-math.pi, math.pi))
        f1 = _PROFILES[i % len(_PROFILES)]
        f2 = _PROFILES[(i + 2) % len(_PROFILES)]
        a1, a2 = rng.uniform(0.5, 1.5, 2)
        spec = MinimalFamilySpec(
            beta0,
            ScalarField.parse(f1, ("x",), {"a": a1}),
            ScalarField.parse(f2, ("x",), {"a": a2}),
        )
        graph = build_minimal(spec, domain)
        u = graph.u
        for pt in domain.shrink(0.9).sample(rng, 5):
            hess = jet(u, tuple(pt), 2)
            scale = max(1.0, abs(hess[(2, 0)]), abs(hess[(1, 1)]), abs(hess[(0, 2)]))
            checks.observe(
                "flat.constant_angle", "constant_angle_residual", "constant-angle equation",
                constant_angle_residual(u, beta0, pt) / scale,
            )
            try:
                checks.observe(
                    "flat.mean_curvature", "mean_curvature_norm", "|H| = 0 off the null locus",
                    mean_curvature_norm(graph, pt, settings.tol_null),
                )
            except SKIPPABLE:
                checks.skip("flat.mean_curvature", "mean_curvature_norm", "|H| = 0 off the null locus")
        constancy = angle_constancy(angle_grid(u, domain, settings.grid))
        checks.observe("flat.angle_spread", "angle_constancy", "beta constant per component", constancy.max_spread)
    for _ in range(10):
        c = rng.uniform(-1.0, 1.0, 4)
        u = ScalarField.parse(
            "c1*s^3+c2*s^2*t+c3*s*t^2+c4*t^3+s*t", parameters=dict(zip(("c1", "c2", "c3", "c4"), c.tolist()))
        )
        for pt in domain.shrink(0.9).sample(rng, 3):
            try:
                checks.observe(
                    "flat.angle_identity", "angle_gradient_identity", "2H = J D beta",
                    angle_gradient_identity(u, pt, domain, settings.tol_null),
                )
            except SKIPPABLE:
                checks.skip("flat.angle_identity", "angle_gradient_identity", "2H = J D beta")
    example = ScalarField.parse("sin(s)+cos(t)")
    worst = 0.0
    for pt in domain.sample(rng, 50):
        if abs(math.sin(pt[0]) - math.cos(pt[1])) > 1e-3:
            worst = max(worst, abs(abs(lagrangian_angle(example, pt)) - math.pi / 2))
    checks.observe("flat.example", "lagrangian_angle", "beta = +-pi/2 for sin s + cos t", worst)
    result = RequestResult(index=0, op="suite", target="flat", checks=checks.results())
    result.values["skipped"] = checks.skipped
    return result


# ---------------------------------------------------------------------------
# Congruence suite
# ---------------------------------------------------------------------------


def congruence_surfaces() -> dict[str, AmbientSurface]:
    """Named test surfaces of R^3 and R^{2,1}."""
    E, M = "euclidean", "minkowski"
    return {
        "sphere": AmbientSurface.parse(
            "cos(s)*cos(t)", "sin(s)*cos(t)", "sin(t)", Rect(0.2, 1.0, -0.5, 0.5), E, name="sphere"
        ),
        "cylinder": AmbientSurface.parse("cos(s)", "sin(s)", "t", Rect(0.0, 1.0, 0.0, 1.0), E, name="cylinder"),
        "ellipsoid": AmbientSurface.parse(
            "cos(s)*cos(t)", "sin(s)*cos(t)", "2*sin(t)", Rect(0.2, 1.0, -0.5, 0.5), E, name="ellipsoid"
        ),
        "paraboloid": AmbientSurface.parse(
            "s", "t", "(s^2+t^2)/2", Rect(0.1, 0.6, -0.3, 0.3), E, name="paraboloid"
        ),
        "torus": AmbientSurface.parse(
            "(2+cos(t))*cos(s)", "(2+cos(t))*sin(s)", "sin(t)", Rect(0.0, 1.0, 0.3, 1.3), E,
            curvature_lines=True, name="torus",
        ),
        "cone": AmbientSurface.parse("s*cos(t)", "s*sin(t)", "s", Rect(0.5, 1.5, 0.0, 1.0), E, name="cone"),
        "plane": AmbientSurface.parse("s", "t", "0", Rect(0.0, 1.0, 0.0, 1.0), E, name="plane"),
        "hyperboloid": AmbientSurface.parse(
            "s", "t", "sqrt(1+s^2+t^2)", Rect(-0.5, 0.5, -0.5, 0.5), M, name="hyperboloid"
        ),
        "lorentz_plane": AmbientSurface.parse("s", "t", "0.5*s", Rect(0.0, 1.0, 0.0, 1.0), M, name="lorentz_plane"),
        "lorentz_graph": AmbientSurface.parse(
            "s", "t", "sqrt(1+s^2+t^2)/2", Rect(0.2, 0.7, -0.3, 0.3), M, name="lorentz_graph"
        ),
    }


def _rotation(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def _sphere_chart_mismatch(surface: AmbientSurface, pt) -> float:
    chart = ConformalChart.catalog("sphere")
    cf = congruence_frame(surface, float(pt[0]), float(pt[1]))
    line, xi = cf.line, cf.Xs
    # a second vector that is not tangent to the congruence, so Omega(xi, zeta) != 0
    zeta = SplitLineTangent(cf.Xt.hpart + cf.Xs.vpart, cf.Xt.vpart - 2.0 * cf.Xs.hpart)
    tb, a = to_sphere_chart(line, xi)
    _, b = to_sphere_chart(line, zeta)
    return max(
        abs(float(ambient_omega("euclidean", xi, zeta)) - omega(chart, tb, a, b)),
        abs(float(ambient_g("euclidean", line.N, xi, zeta)) - gmetric(chart, tb, a, b)),
    )


def congruence_suite(settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """A(S-bar) = F(S), Lagrangian normal congruences, variations, developable detection."""
    checks = _Checks("congruence", tolerances)
    surfaces = congruence_surfaces()
    order = settings.quad_order
    n = min(settings.grid, 12)
    reports = {}
    for name in ("sphere", "cylinder", "ellipsoid", "paraboloid", "torus", "hyperboloid", "lorentz_graph"):
        report = congruence_report(surfaces[name], order, n)
        reports[name] = report
        if name in ("sphere", "hyperboloid"):
            checks.observe("congruence.zero", "functional_F", f"F = A = 0 on the {name}", max(abs(report.F), abs(report.area)))
        else:
            checks.observe("congruence.area", "congruence_area", "A(S-bar) = F(S)", report.rel_diff)
        checks.observe("congruence.defect", "normal_congruence", "normal congruences are Lagrangian", report.max_defect)
        if report.diagonal is not None:
            checks.observe("congruence.diagonal", "congruence_area", "E-bar = G-bar = 0 on curvature lines", report.diagonal)
    checks.observe(
        "congruence.closed_form", "functional_F", "cylinder: F = area / 2", abs(reports["cylinder"].F - 0.5)
    )
    plane = surfaces["lorentz_plane"]
    checks.observe("congruence.zero", "functional_F", "F = 0 on a space-like plane", functional_F(plane, order).value)

    ellipsoid = surfaces["ellipsoid"]
    moved = ellipsoid.moved(_rotation((1.0, 2.0, 0.5), 0.7), (0.3, -1.0, 2.0))
    checks.observe(
        "congruence.rigid", "functional_F", "rigid motions preserve F and A",
        max(
            abs(functional_F(moved, order).value - reports["ellipsoid"].F),
            abs(congruence_area(moved, order).value - reports["ellipsoid"].area),
        ),
    )

    expected_ranks = {"cylinder": 1, "cone": 1, "ellipsoid": 2, "plane": 0, "lorentz_plane": 0}
    mismatched = sum(
        developable_rank_profile(surfaces[name], n).max_rank != rank for name, rank in expected_ranks.items()
    )
    out = checks.results()
    out.append(CheckResult("congruence", "developable_rank_profile", "rank of dN", float(mismatched), 0.0,
                           reference=REFERENCES["congruence.rank"]))

    bump = ScalarField.parse("1+s*t")
    for name in ("paraboloid", "lorentz_graph"):
        surface = surfaces[name]
        report = hamiltonian_variation_check(surface, taper(bump, surface.domain), n=6)
        out.extend(_variation_checks(report, f" on the {name}", tolerances["congruence.variation"], tolerances))
    out.append(
        CheckResult(
            "congruence", "to_sphere_chart", "ambient and chart structures agree",
            max(_sphere_chart_mismatch(ellipsoid, pt) for pt in ellipsoid.domain.shrink(0.8).sample(
                np.random.default_rng(settings.seed), 5)),
            tolerances["congruence.chart"],
            reference=REFERENCES["congruence.chart"],
        )
    )
    lam_mu = shape_data(surfaces["cylinder"], (0.5, 0.5))
    result = RequestResult(index=0, op="suite", target="congruence", checks=out)
    result.values = {name: r.to_dict() for name, r in reports.items()}
    result.values["cylinder_principal"] = [lam_mu.lam, lam_mu.mu]
    return result


# ---------------------------------------------------------------------------
# Parser suite
# ---------------------------------------------------------------------------


def random_expression(rng: np.random.Generator, depth: int = 3) -> str:
    """Random expression text over s, t without domain restrictions."""
    if depth == 0 or rng.random() < 0.25:
        choice = rng.integers(0, 4)
        if choice == 0:
            return "s"
        if choice == 1:
            return "t"
        if choice == 2:
            return f"{rng.integers(1, 5)}"
        return f"{rng.uniform(0.1, 2.0):.3f}"
    kind = rng.integers(0, 7)
    left = random_expression(rng, depth - 1)
    if kind < 3:
        op = "+-*"[kind]
        return f"({left}){op}({random_expression(rng, depth - 1)})"
    if kind == 3:
        return f"({left})^{rng.integers(2, 4)}"
    if kind == 4:
        return f"-({left})"
    func = ("sin", "cos", "atan")[rng.integers(0, 3)]
    return f"{func}({left})"


def parser_suite(settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    """Print/parse round trip, symbolic vs finite-difference derivatives, finite order-4 jets."""
    checks = _Checks("expr", tolerances)
    rng = np.random.default_rng(settings.seed)
    mismatched = 0
    for _ in range(100):
        ast = parse(random_expression(rng))
        text = to_text(ast)
        again = parse(text)
        if to_text(again) != text or again != ast:
            mismatched += 1
        s, t = rng.uniform(-1.0, 1.0, 2)
        field = ScalarField(ast)
        h = 1e-5
        for var, (ds, dt) in (("s", (h, 0.0)), ("t", (0.0, h))):
            symbolic = ScalarField(differentiate(ast, var))(s, t)
            numeric = (field(s + ds, t + dt) - field(s - ds, t - dt)) / (2 * h)
            checks.observe(
                "parser.derivative", "differentiate", "symbolic = finite difference",
                abs(symbolic - numeric) / max(1.0, abs(symbolic)),
            )
        values = jet(field, (s, t), 4)
        if not all(math.isfinite(v) for v in values.values()):
            mismatched += 1
    out = checks.results()
    out.append(CheckResult("expr", "parse", "round trip and finite order-4 jets", float(mismatched),
                           tolerances["parser.round_trip"], reference=REFERENCES["parser.round_trip"]))
    return RequestResult(index=0, op="suite", target="parser", checks=out)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def suite_jobs(name: str, settings: Settings, tolerances: dict[str, float], charts=CHARTS) -> list[Callable[[], RequestResult]]:
    """Independent jobs making up a suite (one per chart where charts apply)."""
    if name == "structure":
        return [lambda c=c: structure_suite(ConformalChart.catalog(c), settings, tolerances) for c in charts]
    if name == "rank_one":
        return [lambda c=c: rank_one_suite(ConformalChart.catalog(c), settings, tolerances) for c in charts]
    if name == "rank_two":
        return [lambda c=c: rank_two_suite(ConformalChart.catalog(c), settings, tolerances) for c in charts]
    if name == "flat":
        return [lambda: flat_suite(settings, tolerances)]
    if name == "congruence":
        return [lambda: congruence_suite(settings, tolerances)]
    if name == "parser":
        return [lambda: parser_suite(settings, tolerances)]
    raise ValueError(f"unknown suite '{name}'")


def crashed_result(index: int, op: str, target: str, error: BaseException) -> RequestResult:
    return RequestResult(index=index, op=op, target=target, error=str(error) or type(error).__name__,
                         error_kind=error_kind(error))


async def gather_jobs(jobs: list[tuple[str, str, Callable[[], RequestResult]]]) -> list[RequestResult]:
    """Run (op, target, job) triples in threads; result i belongs to job i."""
    outcomes = await asyncio.gather(*(asyncio.to_thread(job) for _, _, job in jobs), return_exceptions=True)
    results = []
    for index, ((op, target, _), outcome) in enumerate(zip(jobs, outcomes)):
        if isinstance(outcome, BaseException):
            if not isinstance(outcome, Exception):
                raise outcome
            logger.error("%s %s crashed: %s", op, target, outcome)
            results.append(crashed_result(index, op, target, outcome))
        else:
            outcome.index = index
            results.append(outcome)
    return results


async def run_suites(
    names: tuple[str, ...],
    settings: Settings,
    charts: tuple[str, ...] = CHARTS,
    tolerances: dict[str, float] | None = None,
) -> Report:
    tolerances = tolerances or dict(DEFAULT_TOLERANCES)
    jobs = []
    for name in names:
        per_chart = name in ("structure", "rank_one", "rank_two")
        for i, job in enumerate(suite_jobs(name, settings, tolerances, charts)):
            target = f"{name}:{charts[i]}" if per_chart else name
            jobs.append(("suite", target, job))
    results = await gather_jobs(jobs)
    return Report(version=__version__, seed=settings.seed, tolerances=tolerances, results=results)


# ---------------------------------------------------------------------------
# Scene requests
# ---------------------------------------------------------------------------


def format_grid_csv(names: list[str], rows: list[list[float]]) -> str:
    """Header ``s,t,<names>``; one row per cell, NaN cells left empty."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["s", "t", *names])
    for row in rows:
        writer.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])
    return buffer.getvalue()


def write_grid_csv(path: Path, names: list[str], rows: list[list[float]]) -> None:
    Path(path).write_text(format_grid_csv(names, rows))


# closed-form residuals that carry a check: quantity -> (tolerance key, operation, claim)
FORMULA_QUANTITIES = {
    "H_formula": ("rank_one.mean_curvature", "mean_curvature", "H = (0, k T)"),
    "metric_formula": ("rank_one.metric", "induced_metric", "(E,F,G) = (-2ak, -1, 0)"),
}


def _formula_check(name: str, values, tolerances: dict[str, float]) -> CheckResult:
    key, operation, claim = FORMULA_QUANTITIES[name]
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size:
        observed = float(np.max(np.abs(finite)))
    else:
        claim, observed = f"{claim} (no admissible samples)", math.nan
    return CheckResult("lagrangian", operation, claim, observed, tolerances[key], reference=REFERENCES[key])


def _evaluate(request: EvaluateRequest, obj: Any, settings: Settings, tolerances: dict[str, float]) -> RequestResult:
    result = RequestResult(index=0, op="evaluate", target=request.target)
    if isinstance(obj, AmbientSurface):
        data = [shape_data(obj, pt) for pt in request.points]
        for name in ("lam", "mu", "H", "K"):
            result.values[name] = [getattr(d, name) for d in data]
        return result
    for name in request.quantities:
        column = []
        for pt in request.points:
            try:
                column.append(quantity_value(obj, name, pt, settings.tol_null))
            except (*SKIPPABLE, NotImmersedError):
                column.append(math.nan)
        result.values[name] = column
        if name in FORMULA_QUANTITIES:
            result.checks.append(_formula_check(name, column, tolerances))
    return result


def _grid(request: GridRequest, obj: Any, settings: Settings, tolerances: dict[str, float],
          out_dir: Path) -> RequestResult:
    report = sweep(obj, request.n or settings.grid, tuple(request.quantities), settings.tol_null)
    path = out_dir / (request.output or f"{request.target}_grid.csv")
    write_grid_csv(path, list(report.values), report.rows())
    result = RequestResult(index=0, op="grid", target=request.target, grids=[path.name])
    result.values["skipped"] = dict(report.skipped)
    for name, values in report.values.items():
        finite = values[np.isfinite(values)]
        result.values[f"max_abs_{name}"] = float(np.max(np.abs(finite))) if finite.size else math.nan
        if name in FORMULA_QUANTITIES:
            result.checks.append(_formula_check(name, values, tolerances))
    return result


def _congruence(request: CongruenceRequest, surface: AmbientSurface, settings: Settings,
                tolerances: dict[str, float]) -> RequestResult:
    report = congruence_report(surface, settings.quad_order, settings.grid)
    result = RequestResult(index=0, op="congruence", target=request.target, values=report.to_dict())
    tol = request.tol if request.tol is not None else tolerances["congruence.area"]
    if max(abs(report.F), abs(report.area)) <= tolerances["congruence.zero"]:
        result.checks.append(CheckResult("congruence", "congruence_area", "F = A = 0",
                                         max(abs(report.F), abs(report.area)), tolerances["congruence.zero"],
                                         reference=REFERENCES["congruence.zero"]))
    else:
        result.checks.append(CheckResult("congruence", "congruence_area", "A(S-bar) = F(S)", report.rel_diff, tol,
                                         reference=REFERENCES["congruence.area"]))
    result.checks.append(CheckResult("congruence", "normal_congruence", "normal congruence is Lagrangian",
                                     report.max_defect, tolerances["congruence.defect"],
                                     reference=REFERENCES["congruence.defect"]))
    if report.diagonal is not None:
        result.checks.append(CheckResult("congruence", "congruence_area", "E-bar = G-bar = 0",
                                         report.diagonal, tolerances["congruence.diagonal"],
                                         reference=REFERENCES["congruence.diagonal"]))
    return result


def _variation_checks(report: VariationReport, where: str, tol: float,
                      tolerances: dict[str, float]) -> list[CheckResult]:
    """V^perp = J Dh and G(V, J X_i) = h_i; failing when every cell was umbilic."""
    residual, identity, suffix = report.residual, report.identity, ""
    if report.cells == 0:
        residual, identity, suffix = math.nan, math.nan, " (no admissible samples)"
    reference = REFERENCES["congruence.variation"]
    return [
        CheckResult("congruence", "hamiltonian_variation_check", f"V^perp = J Dh{where}{suffix}", residual, tol,
                    reference=reference),
        CheckResult("congruence", "hamiltonian_variation_check", f"G(V, J X_i) = h_i{where}{suffix}", identity,
                    tolerances["congruence.identity"], reference=reference),
    ]


def _variation(request: VariationRequest, surface: AmbientSurface, params: dict[str, float],
               tolerances: dict[str, float]) -> RequestResult:
    h = taper(ScalarField.parse(request.h, parameters=params), surface.domain)
    report = hamiltonian_variation_check(surface, h, n=request.n or 6)
    tol = request.tol if request.tol is not None else tolerances["congruence.variation"]
    return RequestResult(
        index=0,
        op="variation",
        target=request.target,
        values={"residual": report.residual, "identity": report.identity,
                "cells": report.cells, "cells_skipped": report.cells_skipped},
        checks=_variation_checks(report, "", tol, tolerances),
    )


def _rank_profile(request: RankProfileRequest, surface: AmbientSurface, settings: Settings) -> RequestResult:
    profile = developable_rank_profile(surface, request.n or settings.grid)
    result = RequestResult(index=0, op="rank_profile", target=request.target,
                           values={"max_rank": profile.max_rank, "developable": profile.developable})
    if request.expect is not None:
        result.checks.append(CheckResult("congruence", "developable_rank_profile", f"max rank = {request.expect}",
                                         float(profile.max_rank != request.expect), 0.0,
                                         reference=REFERENCES["congruence.rank"]))
    return result


def request_job(
    request: Any,
    objects: dict[str, Any],
    scene: Scene,
    settings: Settings,
    tolerances: dict[str, float],
    out_dir: Path,
) -> Callable[[], RequestResult]:
    if isinstance(request, EvaluateRequest):
        return lambda: _evaluate(request, objects[request.target], settings, tolerances)
    if isinstance(request, GridRequest):
        return lambda: _grid(request, objects[request.target], settings, tolerances, out_dir)
    if isinstance(request, CongruenceRequest):
        return lambda: _congruence(request, objects[request.target], settings, tolerances)
    if isinstance(request, VariationRequest):
        return lambda: _variation(request, objects[request.target], dict(scene.parameters), tolerances)
    if isinstance(request, RankProfileRequest):
        return lambda: _rank_profile(request, objects[request.target], settings)
    if isinstance(request, SuiteRequest):
        jobs = suite_jobs(request.suite, settings, tolerances)

        def run_suite() -> RequestResult:
            parts = [job() for job in jobs]
            merged = RequestResult(index=0, op="suite", target=request.suite)
            for part in parts:
                merged.checks.extend(part.checks)
            return merged

        return run_suite
    raise SceneError(f"unsupported request {request!r}")


async def run_scene(scene: Scene, settings: Settings, out_dir: Path) -> Report:
    """Build the scene objects and run its requests concurrently.

    Raises:
        SceneError, ExprSyntaxError, UnknownIdentifierError: The scene cannot be built
    """
    tolerances = merge_tolerances(scene.tolerances)
    chart = build_chart(scene.chart)
    objects = build_objects(scene, chart)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for request in scene.requests:
        target = request.suite if isinstance(request, SuiteRequest) else request.target
        jobs.append((request.op, target, request_job(request, objects, scene, settings, tolerances, out_dir)))
    results = await gather_jobs(jobs)
    return Report(version=__version__, seed=settings.seed, tolerances=tolerances, results=results)


def flat_export(
    u: ScalarField, domain: Rect, n: int, tol_null: float
) -> tuple[list[str], list[list[float]], AngleConstancy]:
    """Per-cell Lagrangian angle, component label and |H| of a flat gradient graph."""
    grid = angle_grid(u, domain, n)
    H = sweep(flat_graph(u, domain), n, ("H",), tol_null).values["H"]
    rows = [
        [float(s), float(t), float(grid.beta[i, j]), float(grid.labels[i, j]), float(H[i, j])]
        for i, s in enumerate(grid.s)
        for j, t in enumerate(grid.t)
    ]
    return ["beta", "component", "H"], rows, angle_constancy(grid)
