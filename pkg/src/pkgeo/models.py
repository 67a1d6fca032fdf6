"""Settings and report data models for pkgeo runs."""

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCENE_ERROR = 2
EXIT_DOMAIN_ERROR = 3
EXIT_INTERRUPTED = 130


def _env(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ValueError(f"{name} must be a {cast.__name__}, got '{raw}'") from None


@dataclass(frozen=True)
class Settings:
    """Resolved run configuration: flags over environment over defaults.

    Attributes:
        seed: Seed for every random sample drawn by a suite
        samples: Random samples per structure check
        grid: Grid resolution of sweeps and congruence checks
        tol_null: Threshold on |EG - F^2| below which a point counts as null
        quad_order: Gauss-Legendre order per axis
    """

    seed: int = 0
    samples: int = 100
    grid: int = 16
    tol_null: float = 1e-10
    quad_order: int = 32

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be positive, got {self.samples}")
        if self.grid < 1:
            raise ValueError(f"grid must be positive, got {self.grid}")
        if self.quad_order < 2:
            raise ValueError(f"quad_order must be at least 2, got {self.quad_order}")
        if not self.tol_null > 0:
            raise ValueError(f"tol_null must be positive, got {self.tol_null}")

    @classmethod
    def from_env(cls) -> "Settings":
        """Read PKGEO_SEED, PKGEO_SAMPLES, PKGEO_GRID, PKGEO_TOL_NULL and PKGEO_QUAD_ORDER."""
        return cls(
            seed=_env("PKGEO_SEED", int, cls.seed),
            samples=_env("PKGEO_SAMPLES", int, cls.samples),
            grid=_env("PKGEO_GRID", int, cls.grid),
            tol_null=_env("PKGEO_TOL_NULL", float, cls.tol_null),
            quad_order=_env("PKGEO_QUAD_ORDER", int, cls.quad_order),
        )

    def with_overrides(self, **overrides: Any) -> "Settings":
        """Copy with the given values; None means "keep"."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown setting(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class CheckResult:
    """One asserted claim and how the numbers came out.

    Attributes:
        module: Library module the claim belongs to
        operation: Operation that was exercised
        claim: What should hold, in words
        observed: Observed residual (or value for lower-bound checks)
        tolerance: Allowed residual (or required lower bound)
        lower_bound: If True the check passes when observed >= tolerance
        reference: Named result the claim comes from
    """

    module: str
    operation: str
    claim: str
    observed: float
    tolerance: float
    lower_bound: bool = False
    reference: str = ""

    @property
    def passed(self) -> bool:
        if math.isnan(self.observed):
            return False
        if self.lower_bound:
            return self.observed >= self.tolerance
        return self.observed <= self.tolerance

    def __repr__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        op = ">=" if self.lower_bound else "<="
        return f"CheckResult({status}: {self.module}.{self.operation} {self.observed:.3g} {op} {self.tolerance:.3g})"

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["observed"] = _finite(self.observed)
        out["passed"] = self.passed
        return out


@dataclass
class RequestResult:
    """Outcome of one scene request or suite.

    Attributes:
        index: Position of the request in the scene (report order)
        op: Request kind, e.g. "congruence" or "suite"
        target: Object or suite name
        values: Scalar results keyed by name
        checks: Claims asserted by the request
        grids: CSV files written for this request
        error: Error message if the request crashed
        error_kind: "scene", "domain" or "internal" when ``error`` is set
    """

    index: int
    op: str
    target: str
    values: dict[str, Any] = field(default_factory=dict)
    checks: list[CheckResult] = field(default_factory=list)
    grids: list[str] = field(default_factory=list)
    error: str | None = None
    error_kind: str | None = None

    @property
    def success(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "op": self.op,
            "target": self.target,
            "success": self.success,
            "values": {k: _jsonable(v) for k, v in self.values.items()},
            "checks": [c.to_dict() for c in self.checks],
            "grids": list(self.grids),
            "error": self.error,
            "error_kind": self.error_kind,
        }


@dataclass
class Report:
    """Ordered results of a run.

    Attributes:
        version: pkgeo version that produced the report
        seed: Seed the run used
        tolerances: Tolerances in force (defaults merged with scene overrides)
        results: Request results, sorted by request index
    """

    version: str
    seed: int
    tolerances: dict[str, float]
    results: list[RequestResult]

    def __post_init__(self):
        """Keep results in request order whatever order they finished in."""
        self.results.sort(key=lambda r: r.index)

    @property
    def success(self) -> bool:
        return all(r.success for r in self.results)

    @property
    def failures(self) -> list[tuple[RequestResult, CheckResult]]:
        return [(r, c) for r in self.results for c in r.failures]

    @property
    def exit_code(self) -> int:
        """2 for scene errors, 3 for domain errors, 1 for failed checks, else 0."""
        kinds = {r.error_kind for r in self.results if r.error_kind}
        if "scene" in kinds:
            return EXIT_SCENE_ERROR
        if "domain" in kinds:
            return EXIT_DOMAIN_ERROR
        return EXIT_OK if self.success else EXIT_CHECK_FAILED

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "seed": self.seed,
            "tolerances": dict(sorted(self.tolerances.items())),
            "success": self.success,
            "results": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        """Deterministic JSON: sorted keys, non-finite floats as null."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _finite(value: float) -> float | None:
    value = float(value)
    return value if math.isfinite(value) else None


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    try:
        return _finite(value)
    except (TypeError, ValueError):
        return str(value)
