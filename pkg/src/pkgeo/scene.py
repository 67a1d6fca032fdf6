"""Scene files: JSON schema, loading, and construction of geometric objects.

A scene names a chart, a set of objects built from expression strings and
a list of analysis requests::

    {
      "chart": {"name": "sphere"},
      "parameters": {"a0": 0.3},
      "objects": {
        "gamma": {"kind": "curve", "x": "0.5*cos(s)", "y": "0.5*sin(s)", "interval": [0, 1]},
        "bundle": {"kind": "affine_normal_bundle", "curve": "gamma", "a": "a0"}
      },
      "requests": [{"op": "grid", "target": "bundle", "quantities": ["defect", "H"]}]
    }
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pkgeo.basegeo import (
    ConformalChart,
    CurveOnSurface,
    ExpressionCurve,
    Rect,
    arclength_reparametrize,
    geodesic,
)
from pkgeo.congruence import SIGNATURES, AmbientSurface
from pkgeo.errors import SceneError
from pkgeo.expr import ScalarField
from pkgeo.flatlab import MinimalFamilySpec, build_minimal
from pkgeo.lagrangian import (
    SWEEP_QUANTITIES,
    AffineNormalBundle,
    ExpressionImmersion,
    GradientGraph,
)

logger = logging.getLogger(__name__)

Domain = tuple[float, float, float, float]
Interval = tuple[float, float]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _rect(domain: Domain) -> Rect:
    return Rect(*domain)


class ChartSpec(_Model):
    """Either a catalog name or a conformal factor expression with its domain."""

    name: Literal["flat", "sphere", "hyperbolic"] | None = None
    r: str | None = None
    domain: Domain | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "ChartSpec":
        if (self.name is None) == (self.r is None):
            raise ValueError("chart needs exactly one of 'name' or 'r'")
        if self.r is not None and self.domain is None:
            raise ValueError("a chart given by 'r' needs a 'domain'")
        return self


# -- objects -----------------------------------------------------------------


class CurveObject(_Model):
    kind: Literal["curve"]
    x: str
    y: str
    interval: Interval
    arclength: bool = False


class GeodesicObject(_Model):
    kind: Literal["geodesic"]
    p0: tuple[float, float]
    v0: tuple[float, float]
    length: float = Field(gt=0)
    steps: int = Field(default=1000, ge=10)


class AffineNormalBundleObject(_Model):
    kind: Literal["affine_normal_bundle"]
    curve: str
    a: str = "0"
    t_interval: Interval = (-1.0, 1.0)


class GradientGraphObject(_Model):
    kind: Literal["gradient_graph"]
    u: str
    domain: Domain | None = None


class ImmersionObject(_Model):
    kind: Literal["immersion"]
    p: tuple[str, str]
    V: tuple[str, str]
    domain: Domain


class AmbientSurfaceObject(_Model):
    kind: Literal["ambient_surface"]
    x: str
    y: str
    z: str
    domain: Domain
    signature: str = "euclidean"
    orientation: Literal[1, -1] = 1
    curvature_lines: bool = False

    @field_validator("signature")
    @classmethod
    def _known_signature(cls, value: str) -> str:
        if value not in SIGNATURES:
            raise ValueError(f"signature must be one of {', '.join(SIGNATURES)}")
        return value


class MinimalFamilyObject(_Model):
    kind: Literal["minimal_family"]
    beta0: float
    f1: str
    f2: str
    domain: Domain | None = None


SceneObject = Annotated[
    Union[
        CurveObject,
        GeodesicObject,
        AffineNormalBundleObject,
        GradientGraphObject,
        ImmersionObject,
        AmbientSurfaceObject,
        MinimalFamilyObject,
    ],
    Field(discriminator="kind"),
]

IMMERSION_KINDS = ("affine_normal_bundle", "gradient_graph", "immersion", "minimal_family")
CURVE_KINDS = ("curve", "geodesic")


# -- requests ----------------------------------------------------------------


class EvaluateRequest(_Model):
    op: Literal["evaluate"]
    target: str
    points: list[tuple[float, float]]
    quantities: list[str] = ["defect", "rank", "E", "F", "G", "H"]


class GridRequest(_Model):
    op: Literal["grid"]
    target: str
    n: int | None = Field(default=None, ge=1)
    quantities: list[str] = ["defect", "rank", "E", "F", "G", "H"]
    output: str | None = None

    @field_validator("quantities")
    @classmethod
    def _known_quantities(cls, value: list[str]) -> list[str]:
        unknown = [q for q in value if q not in SWEEP_QUANTITIES]
        if unknown:
            raise ValueError(f"unknown quantities {unknown} (choose from {', '.join(SWEEP_QUANTITIES)})")
        return value


class CongruenceRequest(_Model):
    op: Literal["congruence"]
    target: str
    tol: float | None = None


class VariationRequest(_Model):
    op: Literal["variation"]
    target: str
    h: str
    n: int | None = Field(default=None, ge=1)
    tol: float | None = None


class RankProfileRequest(_Model):
    op: Literal["rank_profile"]
    target: str
    expect: int | None = Field(default=None, ge=0, le=2)
    n: int | None = Field(default=None, ge=1)


class SuiteRequest(_Model):
    op: Literal["suite"]
    suite: Literal["structure", "rank_one", "rank_two", "flat", "congruence", "parser"]


Request = Annotated[
    Union[EvaluateRequest, GridRequest, CongruenceRequest, VariationRequest, RankProfileRequest, SuiteRequest],
    Field(discriminator="op"),
]


class Scene(_Model):
    """Top-level scene document."""

    chart: ChartSpec = ChartSpec(name="flat")
    parameters: dict[str, float] = {}
    objects: dict[str, SceneObject] = {}
    requests: list[Request] = []
    tolerances: dict[str, float] = {}

    @model_validator(mode="after")
    def _references(self) -> "Scene":
        for name, obj in self.objects.items():
            if isinstance(obj, AffineNormalBundleObject):
                base = self.objects.get(obj.curve)
                if base is None or base.kind not in CURVE_KINDS:
                    raise ValueError(f"object '{name}' refers to unknown curve '{obj.curve}'")
        for i, request in enumerate(self.requests):
            if isinstance(request, SuiteRequest):
                continue
            target = request.target
            obj = self.objects.get(target)
            if obj is None:
                raise ValueError(f"request {i} refers to unknown object '{target}'")
            surfaces_only = isinstance(request, (CongruenceRequest, VariationRequest, RankProfileRequest))
            if surfaces_only and obj.kind != "ambient_surface":
                raise ValueError(f"request {i} ({request.op}) needs an ambient_surface, '{target}' is {obj.kind}")
            if isinstance(request, EvaluateRequest) and obj.kind in CURVE_KINDS:
                raise ValueError(f"request {i} ({request.op}) cannot target the curve '{target}'")
            if isinstance(request, GridRequest) and obj.kind not in IMMERSION_KINDS:
                raise ValueError(f"request {i} (grid) needs an immersion, '{target}' is {obj.kind}")
        return self


def parse_scene(data: dict[str, Any]) -> Scene:
    """Validate a decoded scene document.

    Raises:
        SceneError: The document does not match the schema
    """
    try:
        return Scene.model_validate(data)
    except ValidationError as e:
        raise SceneError(f"invalid scene: {e}") from e


def load_scene(path: Path) -> Scene:
    """Read and validate a scene file.

    Raises:
        SceneError: The file is missing, not JSON, or not a valid scene
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SceneError(f"cannot read scene '{path}': {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"scene '{path}' is not valid JSON: {e.msg} (line {e.lineno})") from e
    return parse_scene(data)


def packaged_scene(name: str) -> Path:
    """Path of a golden scene shipped with the package."""
    path = Path(__file__).parent / "scenes" / f"{name}.json"
    if not path.exists():
        raise SceneError(f"no packaged scene named '{name}'")
    return path


# -- construction --------------------------------------------------------------


def build_chart(spec: ChartSpec) -> ConformalChart:
    if spec.name is not None:
        domain = _rect(spec.domain) if spec.domain else None
        return ConformalChart.catalog(spec.name, domain)
    return ConformalChart.from_expression(spec.r, _rect(spec.domain))


def _build_curve(chart: ConformalChart, obj, params: dict[str, float]) -> CurveOnSurface:
    if isinstance(obj, GeodesicObject):
        return geodesic(chart, obj.p0, obj.v0, obj.length, obj.steps)
    curve = ExpressionCurve.parse(obj.x, obj.y, obj.interval, obj.arclength, params)
    return curve if obj.arclength else arclength_reparametrize(chart, curve)


def build_objects(scene: Scene, chart: ConformalChart | None = None) -> dict[str, Any]:
    """Construct every object of a scene, in declaration order.

    Curves are reparametrised by arclength unless declared so.

    Raises:
        ExprSyntaxError, UnknownIdentifierError: An expression does not parse
    """
    chart = chart or build_chart(scene.chart)
    params = dict(scene.parameters)
    built: dict[str, Any] = {}
    # curves first: bundles refer to them
    for name, obj in sorted(scene.objects.items(), key=lambda kv: kv[1].kind not in CURVE_KINDS):
        if isinstance(obj, (CurveObject, GeodesicObject)):
            built[name] = _build_curve(chart, obj, params)
        elif isinstance(obj, AffineNormalBundleObject):
            a = ScalarField.parse(obj.a, ("s",), params)
            built[name] = AffineNormalBundle(chart, built[obj.curve], a, obj.t_interval)
        elif isinstance(obj, GradientGraphObject):
            domain = _rect(obj.domain) if obj.domain else None
            built[name] = GradientGraph.parse(chart, obj.u, domain, params)
        elif isinstance(obj, ImmersionObject):
            built[name] = ExpressionImmersion.parse(chart, obj.p, obj.V, _rect(obj.domain), params)
        elif isinstance(obj, AmbientSurfaceObject):
            built[name] = AmbientSurface.parse(
                obj.x,
                obj.y,
                obj.z,
                _rect(obj.domain),
                obj.signature,
                params,
                orientation=obj.orientation,
                curvature_lines=obj.curvature_lines,
                name=name,
            )
        elif isinstance(obj, MinimalFamilyObject):
            if not chart.is_flat_catalog:
                raise SceneError(f"minimal family '{name}' needs the flat chart")
            spec = MinimalFamilySpec.parse(obj.beta0, obj.f1, obj.f2, params)
            built[name] = build_minimal(spec, _rect(obj.domain) if obj.domain else None)
        logger.debug("built %s: %r", name, built[name])
    return {name: built[name] for name in scene.objects}
