"""Tests for the pkgeo command line."""

import json

import pytest

from pkgeo.cli import main, parse_args
from pkgeo.models import EXIT_DOMAIN_ERROR, EXIT_OK, EXIT_SCENE_ERROR


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("PKGEO_SEED", "PKGEO_SAMPLES", "PKGEO_GRID", "PKGEO_TOL_NULL", "PKGEO_QUAD_ORDER"):
        monkeypatch.delenv(name, raising=False)


def test_parse_args_defaults():
    """Test subcommand defaults."""
    args = parse_args(["verify-theorems"])

    assert args.chart == "all"
    assert args.suite == ["rank_one", "rank_two", "flat"]
    assert args.seed is None


def test_parse_args_rejects_unknown_chart():
    """Test argparse rejects charts outside the catalog."""
    with pytest.raises(SystemExit):
        parse_args(["verify-structure", "--chart", "torus"])


def test_verify_structure_writes_report(tmp_path):
    """Test a passing structure run exits 0 with a JSON report."""
    out = tmp_path / "structure.json"

    code = main(["verify-structure", "--chart", "flat", "--samples", "5", "--seed", "2", "--out", str(out)])

    report = json.loads(out.read_text())
    assert code == EXIT_OK
    assert report["success"] is True
    assert report["seed"] == 2
    assert report["results"][0]["target"] == "structure:flat"


def test_run_packaged_scene_by_name(tmp_path):
    """Test scenes can be named without a path."""
    out = tmp_path / "cylinder.json"

    code = main(["run", "cylinder", "--grid", "6", "--out", str(out)])

    assert code == EXIT_OK
    assert [r["op"] for r in json.loads(out.read_text())["results"]] == ["congruence", "rank_profile"]


def test_run_unknown_scene():
    """Test a missing scene is a scene error."""
    assert main(["run", "no_such_scene"]) == EXIT_SCENE_ERROR


def test_run_domain_error_exit_code(tmp_path):
    """Test a domain failure inside a request exits 3."""
    scene = tmp_path / "steep.json"
    scene.write_text(
        json.dumps(
            {
                "objects": {
                    "steep": {"kind": "ambient_surface", "x": "s", "y": "t", "z": "2*s",
                              "domain": [0, 1, 0, 1], "signature": "minkowski"}
                },
                "requests": [{"op": "congruence", "target": "steep"}],
            }
        )
    )

    assert main(["run", str(scene), "--out", str(tmp_path / "report.json")]) == EXIT_DOMAIN_ERROR


def test_congruence_named_surface(tmp_path):
    """Test the cylinder congruence values land in the report."""
    out = tmp_path / "cylinder.json"

    code = main(["congruence", "--surface", "cylinder", "--grid", "6", "--out", str(out)])

    values = json.loads(out.read_text())["results"][0]["values"]
    assert code == EXIT_OK
    assert values["F"] == pytest.approx(0.5, abs=1e-10)
    assert values["raw_area"] == pytest.approx(1.0, abs=1e-10)


def test_flatlab_csv(tmp_path):
    """Test the angle grid CSV of sin s + cos t."""
    out = tmp_path / "beta.csv"

    code = main(["flatlab", "--u", "sin(s)+cos(t)", "--grid", "8", "--out", str(out)])

    lines = out.read_text().splitlines()
    assert code == EXIT_OK
    assert lines[0] == "s,t,beta,component,H"
    assert len(lines) == 65


def test_flatlab_minimal_family(tmp_path):
    """Test the minimal family options build a graph."""
    out = tmp_path / "family.csv"

    code = main(["flatlab", "--beta0", "0.5", "--f1", "x^3", "--f2", "sin(x)", "--grid", "4", "--out", str(out)])

    assert code == EXIT_OK
    assert len(out.read_text().splitlines()) == 17


@pytest.mark.parametrize(
    "argv",
    [
        ["flatlab", "--u", "s*t", "--beta0", "0.5"],
        ["flatlab", "--beta0", "0.5", "--f1", "x^2"],
        ["flatlab", "--u", "s*"],
        ["flatlab", "--u", "s*q"],
    ],
)
def test_flatlab_bad_input(argv):
    """Test inconsistent flags and bad expressions exit 2."""
    assert main(argv) == EXIT_SCENE_ERROR


def test_grid_export(tmp_path):
    """Test exporting one immersion of a packaged scene."""
    out = tmp_path / "graph.csv"

    code = main(
        ["grid-export", "doubly_periodic", "--target", "graph", "--grid", "4", "--quantities", "defect", "H",
         "--out", str(out)]
    )

    lines = out.read_text().splitlines()
    assert code == EXIT_OK
    assert lines[0] == "s,t,defect,H"
    assert len(lines) == 17


def test_grid_export_unknown_target():
    """Test an unknown target exits 2."""
    assert main(["grid-export", "doubly_periodic", "--target", "missing"]) == EXIT_SCENE_ERROR


def test_grid_export_rejects_curve(tmp_path):
    """Test curves cannot be exported as immersion grids."""
    scene = tmp_path / "curve.json"
    scene.write_text(
        json.dumps({"objects": {"c": {"kind": "curve", "x": "s", "y": "0", "interval": [0, 1], "arclength": True}}})
    )

    assert main(["grid-export", str(scene), "--target", "c"]) == EXIT_SCENE_ERROR


def test_bad_environment_is_input_error(monkeypatch):
    """Test a garbage environment value exits 2."""
    monkeypatch.setenv("PKGEO_GRID", "lots")

    assert main(["flatlab", "--u", "s*t"]) == EXIT_SCENE_ERROR
