"""Tests for suite orchestration, scene execution and CSV output."""

import math

import pytest

from pkgeo.basegeo import ConformalChart, Rect
from pkgeo.congruence import VariationReport
from pkgeo.errors import NullPointError, SceneError
from pkgeo.expr import ScalarField
from pkgeo.models import EXIT_DOMAIN_ERROR, EXIT_OK, RequestResult, Settings
from pkgeo.scene import load_scene, packaged_scene, parse_scene
from pkgeo.suites import (
    DEFAULT_TOLERANCES,
    REFERENCES,
    _variation_checks,
    error_kind,
    flat_export,
    format_grid_csv,
    gather_jobs,
    merge_tolerances,
    parser_suite,
    rank_two_suite,
    run_scene,
    run_suites,
    structure_suite,
)


def test_merge_tolerances():
    """Test overrides replace defaults and unknown keys are rejected."""
    merged = merge_tolerances({"congruence.area": 1e-3})

    assert merged["congruence.area"] == 1e-3
    assert merged["structure.torsion"] == DEFAULT_TOLERANCES["structure.torsion"]
    with pytest.raises(SceneError, match="unknown tolerance 'congruence.volume'"):
        merge_tolerances({"congruence.volume": 1.0})


def test_error_kind():
    """Test errors are classified for exit codes."""
    assert error_kind(SceneError("x")) == "scene"
    assert error_kind(NullPointError("x")) == "domain"
    assert error_kind(RuntimeError("x")) == "internal"


def test_format_grid_csv_leaves_nan_empty():
    """Test the header and empty NaN cells."""
    text = format_grid_csv(["H"], [[0.5, 0.25, math.nan], [1.0, 2.0, 3.0]])

    assert text.splitlines() == ["s,t,H", "0.5,0.25,", "1.0,2.0,3.0"]


async def test_gather_jobs_keeps_order_and_records_crashes():
    """Test results come back in job order with crashes as failed results."""

    def ok():
        return RequestResult(index=99, op="evaluate", target="a")

    def null():
        raise NullPointError("complex determinant vanishes")

    def broken():
        raise RuntimeError("boom")

    results = await gather_jobs([("evaluate", "a", ok), ("evaluate", "b", null), ("grid", "c", broken)])

    assert [r.index for r in results] == [0, 1, 2]
    assert results[0].success
    assert results[1].error == "complex determinant vanishes"
    assert results[1].error_kind == "domain"
    assert results[2].error_kind == "internal"


def test_structure_suite_passes_on_flat_chart():
    """Test the structure suite with a few samples."""
    result = structure_suite(ConformalChart.catalog("flat"), Settings(samples=5), DEFAULT_TOLERANCES)

    assert result.checks
    assert result.success, result.failures


def test_parser_suite_passes():
    """Test the parser suite at the default seed."""
    result = parser_suite(Settings(), DEFAULT_TOLERANCES)

    assert result.success, result.failures


async def test_run_suites_targets_per_chart():
    """Test per-chart suites are labelled with their chart."""
    report = await run_suites(("structure",), Settings(samples=3), ("flat", "sphere"))

    assert [r.target for r in report.results] == ["structure:flat", "structure:sphere"]
    assert report.exit_code == EXIT_OK


async def test_run_packaged_cylinder_scene(tmp_path):
    """Test the cylinder scene passes its congruence and rank checks."""
    report = await run_scene(load_scene(packaged_scene("cylinder")), Settings(grid=6), tmp_path)

    assert [r.op for r in report.results] == ["congruence", "rank_profile"]
    congruence, rank = report.results
    assert congruence.values["F"] == pytest.approx(0.5, abs=1e-10)
    assert congruence.values["diagonal"] < 1e-9
    assert rank.values == {"max_rank": 1, "developable": True}
    assert report.success


async def test_run_scene_writes_grid(tmp_path):
    """Test grid requests write their CSV next to the report."""
    scene = parse_scene(
        {
            "objects": {"u": {"kind": "gradient_graph", "u": "s*t", "domain": [-1, 1, -1, 1]}},
            "requests": [{"op": "grid", "target": "u", "n": 3, "quantities": ["defect", "H"], "output": "u.csv"}],
        }
    )

    report = await run_scene(scene, Settings(), tmp_path)

    assert report.results[0].grids == ["u.csv"]
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "s,t,defect,H"
    assert len(lines) == 10
    assert report.results[0].values["max_abs_H"] < 1e-12


async def test_run_scene_domain_error(tmp_path):
    """Test a time-like surface in R^{2,1} gives a domain-error result."""
    scene = parse_scene(
        {
            "objects": {
                "steep": {"kind": "ambient_surface", "x": "s", "y": "t", "z": "2*s",
                          "domain": [0, 1, 0, 1], "signature": "minkowski"}
            },
            "requests": [{"op": "congruence", "target": "steep"}],
        }
    )

    report = await run_scene(scene, Settings(grid=4), tmp_path)

    assert report.results[0].error_kind == "domain"
    assert "not space-like" in report.results[0].error
    assert report.exit_code == EXIT_DOMAIN_ERROR


def test_flat_export_rows():
    """Test one row per cell with angle, component and |H|."""
    names, rows, constancy = flat_export(ScalarField.parse("s*t"), Rect(-1.0, 1.0, -1.0, 1.0), 4, 1e-10)

    assert names == ["beta", "component", "H"]
    assert len(rows) == 16
    assert all(row[2] == pytest.approx(0.0) for row in rows)
    assert constancy.max_spread < 1e-12


def test_every_tolerance_has_a_reference():
    """Test each tolerance key names the result its checks come from."""
    assert set(DEFAULT_TOLERANCES) <= set(REFERENCES)
    assert all(REFERENCES.values())


def test_suite_checks_carry_references():
    """Test suite checks, including appended ones, name their result."""
    result = structure_suite(ConformalChart.catalog("sphere"), Settings(samples=2), DEFAULT_TOLERANCES)

    assert all(check.reference for check in result.checks)
    signature = next(c for c in result.checks if c.operation == "signature")
    assert signature.reference == REFERENCES["structure.signature"]


def test_claim_with_every_sample_skipped_fails():
    """Test a null threshold that skips every arg-form sample fails the suite."""
    result = rank_two_suite(ConformalChart.catalog("flat"), Settings(tol_null=1e6), DEFAULT_TOLERANCES)

    arg_form = [c for c in result.checks if c.operation == "mean_curvature_arg_form"]
    assert result.values["skipped"] == 60
    assert len(arg_form) == 1
    assert arg_form[0].claim == "arg form of 2H (no admissible samples)"
    assert math.isnan(arg_form[0].observed)
    assert arg_form[0].reference == "mean curvature of a gradient graph in arg form"
    assert arg_form[0].to_dict()["reference"] == arg_form[0].reference
    assert not result.success
    assert result.failures == arg_form


async def test_run_suites_same_seed_same_json():
    """Test two runs with the same settings produce byte-identical reports."""
    settings = Settings(seed=5, samples=3)

    first = await run_suites(("structure", "parser"), settings, ("sphere",))
    second = await run_suites(("structure", "parser"), settings, ("sphere",))

    assert first.to_json() == second.to_json()


async def test_affine_normal_bundle_scene_reports_formula_residuals(tmp_path):
    """Test the packaged bundle scene checks H and the metric against their closed forms."""
    report = await run_scene(load_scene(packaged_scene("affine_normal_bundle")), Settings(), tmp_path)

    evaluate, grid = report.results
    for result in (evaluate, grid):
        checks = {c.operation: c for c in result.checks}
        assert set(checks) == {"mean_curvature", "induced_metric"}
        assert checks["mean_curvature"].observed < 1e-7
        assert checks["induced_metric"].observed < 1e-8
    assert max(evaluate.values["H_formula"]) < 1e-7
    assert grid.values["max_abs_metric_formula"] < 1e-8
    assert "H_formula" in (tmp_path / "affine_normal_bundle_grid.csv").read_text().splitlines()[0]
    assert report.success


def test_variation_with_only_umbilic_cells_fails():
    """Test a variation check that evaluated no cell does not pass."""
    report = VariationReport(residual=0.0, identity=0.0, cells_skipped=36, cells=0)

    checks = _variation_checks(report, " on the sphere", 1e-5, DEFAULT_TOLERANCES)

    assert [c.claim for c in checks] == [
        "V^perp = J Dh on the sphere (no admissible samples)",
        "G(V, J X_i) = h_i on the sphere (no admissible samples)",
    ]
    assert not any(c.passed for c in checks)
