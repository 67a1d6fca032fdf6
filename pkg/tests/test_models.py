"""Unit tests for pkgeo settings and report models."""

import json
import math

import pytest

from pkgeo.models import (
    EXIT_CHECK_FAILED,
    EXIT_DOMAIN_ERROR,
    EXIT_OK,
    EXIT_SCENE_ERROR,
    CheckResult,
    Report,
    RequestResult,
    Settings,
)


def test_settings_defaults():
    """Test Settings defaults."""
    settings = Settings()

    assert settings.seed == 0
    assert settings.samples == 100
    assert settings.grid == 16
    assert settings.tol_null == 1e-10
    assert settings.quad_order == 32


def test_settings_from_env(monkeypatch):
    """Test environment variables override defaults."""
    monkeypatch.setenv("PKGEO_SEED", "7")
    monkeypatch.setenv("PKGEO_GRID", "8")
    monkeypatch.setenv("PKGEO_TOL_NULL", "1e-8")
    monkeypatch.delenv("PKGEO_SAMPLES", raising=False)

    settings = Settings.from_env()

    assert settings.seed == 7
    assert settings.grid == 8
    assert settings.tol_null == 1e-8
    assert settings.samples == 100


def test_settings_from_env_rejects_garbage(monkeypatch):
    """Test a non-numeric environment value is reported by name."""
    monkeypatch.setenv("PKGEO_SAMPLES", "many")

    with pytest.raises(ValueError, match="PKGEO_SAMPLES"):
        Settings.from_env()


def test_settings_overrides():
    """Test flags override settings and None keeps the current value."""
    settings = Settings(seed=3).with_overrides(seed=None, grid=4)

    assert settings.seed == 3
    assert settings.grid == 4


def test_settings_unknown_override():
    """Test unknown override names are rejected."""
    with pytest.raises(ValueError, match="unknown setting"):
        Settings().with_overrides(colour="red")


def test_settings_validation():
    """Test invalid settings raise."""
    with pytest.raises(ValueError, match="samples must be positive"):
        Settings(samples=0)
    with pytest.raises(ValueError, match="quad_order"):
        Settings(quad_order=1)
    with pytest.raises(ValueError, match="tol_null"):
        Settings(tol_null=0.0)


def test_check_result_pass_and_fail():
    """Test upper- and lower-bound checks."""
    assert CheckResult("expr", "parse", "round trip", 0.0, 0.0).passed
    assert not CheckResult("tbundle", "jmap", "J^2 = -1", 1e-6, 1e-12).passed
    assert CheckResult("lagrangian", "minimality_probe", "probe", 0.5, 1e-3, lower_bound=True).passed
    assert not CheckResult("lagrangian", "minimality_probe", "probe", 1e-4, 1e-3, lower_bound=True).passed


def test_check_result_nan_fails():
    """Test a NaN residual never passes."""
    check = CheckResult("flatlab", "angle_constancy", "spread", math.nan, 1.0)

    assert not check.passed
    assert check.to_dict()["observed"] is None


def test_failing_check_serialises_reference():
    """Test a failing check names module, operation, reference and both residuals."""
    check = CheckResult("lagrangian", "mean_curvature", "H = (0, k T)", 3e-6, 1e-8,
                        reference="mean curvature of an affine normal bundle")

    out = check.to_dict()

    assert not out["passed"]
    assert out["reference"] == "mean curvature of an affine normal bundle"
    assert (out["module"], out["operation"], out["observed"], out["tolerance"]) == (
        "lagrangian", "mean_curvature", 3e-6, 1e-8,
    )


def test_check_result_repr():
    """Test CheckResult string representation."""
    check = CheckResult("tbundle", "nijenhuis", "N_J = 0", 2e-9, 1e-9)

    assert repr(check) == "CheckResult(FAIL: tbundle.nijenhuis 2e-09 <= 1e-09)"


def test_request_result_success():
    """Test RequestResult success and failures."""
    good = CheckResult("congruence", "functional_F", "F = A", 1e-9, 1e-6)
    bad = CheckResult("congruence", "normal_congruence", "Lagrangian", 1e-3, 1e-9)
    result = RequestResult(index=0, op="congruence", target="cylinder", checks=[good, bad])

    assert not result.success
    assert result.failures == [bad]

    crashed = RequestResult(index=1, op="grid", target="g", error="boom", error_kind="internal")
    assert not crashed.success


def test_report_orders_results():
    """Test Report sorts results by request index."""
    results = [
        RequestResult(index=2, op="grid", target="c"),
        RequestResult(index=0, op="grid", target="a"),
        RequestResult(index=1, op="grid", target="b"),
    ]
    report = Report(version="0.1.0", seed=0, tolerances={}, results=results)

    assert [r.target for r in report.results] == ["a", "b", "c"]


@pytest.mark.parametrize(
    "results, expected",
    [
        ([], EXIT_OK),
        ([RequestResult(0, "x", "a", checks=[CheckResult("m", "o", "c", 1.0, 0.0)])], EXIT_CHECK_FAILED),
        ([RequestResult(0, "x", "a", error="bad", error_kind="domain")], EXIT_DOMAIN_ERROR),
        (
            [
                RequestResult(0, "x", "a", error="bad", error_kind="domain"),
                RequestResult(1, "x", "b", error="worse", error_kind="scene"),
            ],
            EXIT_SCENE_ERROR,
        ),
        ([RequestResult(0, "x", "a", error="oops", error_kind="internal")], EXIT_CHECK_FAILED),
    ],
)
def test_report_exit_code(results, expected):
    """Test exit code precedence: scene, domain, failed check, success."""
    report = Report(version="0.1.0", seed=0, tolerances={}, results=results)

    assert report.exit_code == expected


def test_report_json_is_deterministic():
    """Test JSON output has sorted keys and null for non-finite values."""
    result = RequestResult(index=0, op="evaluate", target="g", values={"H": [0.5, math.nan], "rank": 2})
    report = Report(version="0.1.0", seed=5, tolerances={"b": 1.0, "a": 2.0}, results=[result])

    text = report.to_json()
    data = json.loads(text)

    assert text == report.to_json()
    assert text.endswith("\n")
    assert list(data["tolerances"]) == ["a", "b"]
    assert data["results"][0]["values"]["H"] == [0.5, None]
    assert data["results"][0]["values"]["rank"] == 2
    assert data["success"] is True
