"""Tests for scene loading, validation and object construction."""

import json

import pytest

from pkgeo.basegeo import CurveOnSurface
from pkgeo.congruence import AmbientSurface
from pkgeo.errors import SceneError
from pkgeo.lagrangian import AffineNormalBundle, GradientGraph
from pkgeo.scene import build_chart, build_objects, load_scene, packaged_scene, parse_scene

PACKAGED = ["affine_normal_bundle", "cylinder", "doubly_periodic", "minkowski_hyperboloid"]


def _scene(objects, requests, **extra):
    return {"objects": objects, "requests": requests, **extra}


CURVE = {"kind": "curve", "x": "0.5*cos(s)", "y": "0.5*sin(s)", "interval": [0, 1]}
GRAPH = {"kind": "gradient_graph", "u": "s*t", "domain": [-1, 1, -1, 1]}
SURFACE = {"kind": "ambient_surface", "x": "cos(s)", "y": "sin(s)", "z": "t", "domain": [0, 1, 0, 1]}


def test_parse_minimal_scene():
    """Test defaults: flat chart, no parameters, no tolerance overrides."""
    scene = parse_scene(_scene({"u": GRAPH}, [{"op": "grid", "target": "u", "n": 4}]))

    assert scene.chart.name == "flat"
    assert scene.parameters == {}
    assert scene.requests[0].quantities == ["defect", "rank", "E", "F", "G", "H"]


@pytest.mark.parametrize(
    "objects, requests, message",
    [
        ({"u": GRAPH}, [{"op": "grid", "target": "v"}], "unknown object 'v'"),
        ({"c": CURVE}, [{"op": "grid", "target": "c"}], "needs an immersion"),
        ({"c": CURVE}, [{"op": "evaluate", "target": "c", "points": [[0, 0]]}], "cannot target the curve"),
        ({"u": GRAPH}, [{"op": "congruence", "target": "u"}], "needs an ambient_surface"),
        ({"u": GRAPH}, [{"op": "grid", "target": "u", "quantities": ["K"]}], "unknown quantities"),
        ({"b": {"kind": "affine_normal_bundle", "curve": "nope"}}, [], "unknown curve 'nope'"),
        ({"S": {**SURFACE, "signature": "lorentzian"}}, [], "signature must be one of"),
        ({"u": {**GRAPH, "colour": "red"}}, [], "Extra inputs"),
    ],
)
def test_parse_scene_errors(objects, requests, message):
    """Test schema and reference errors are reported as SceneError."""
    with pytest.raises(SceneError, match=message):
        parse_scene(_scene(objects, requests))


def test_chart_needs_one_source():
    """Test a chart must be a catalog name or an expression, not both."""
    with pytest.raises(SceneError, match="exactly one of 'name' or 'r'"):
        parse_scene({"chart": {"name": "flat", "r": "s"}})
    with pytest.raises(SceneError, match="needs a 'domain'"):
        parse_scene({"chart": {"r": "s"}})


def test_build_chart_from_expression():
    """Test an expression chart carries its domain."""
    chart = build_chart(parse_scene({"chart": {"r": "0.1*s", "domain": [0, 1, 0, 2]}}).chart)

    assert chart.domain.t1 == 2.0


def test_load_scene_missing_file(tmp_path):
    """Test a missing file is a SceneError naming the path."""
    with pytest.raises(SceneError, match="cannot read scene"):
        load_scene(tmp_path / "absent.json")


def test_load_scene_bad_json(tmp_path):
    """Test malformed JSON reports the line."""
    path = tmp_path / "broken.json"
    path.write_text('{"objects": {\n')

    with pytest.raises(SceneError, match="not valid JSON"):
        load_scene(path)


def test_load_scene_roundtrip(tmp_path):
    """Test a scene written to disk loads and builds."""
    path = tmp_path / "scene.json"
    path.write_text(
        json.dumps(
            {
                "chart": {"name": "sphere"},
                "parameters": {"a0": 0.3},
                "objects": {"gamma": CURVE, "bundle": {"kind": "affine_normal_bundle", "curve": "gamma", "a": "a0"}},
                "requests": [{"op": "grid", "target": "bundle", "n": 3}],
            }
        )
    )

    built = build_objects(load_scene(path))

    assert list(built) == ["gamma", "bundle"]
    assert isinstance(built["gamma"], CurveOnSurface)
    assert isinstance(built["bundle"], AffineNormalBundle)
    assert built["bundle"].a(0.5) == pytest.approx(0.3)


def test_packaged_scene_unknown():
    """Test an unknown packaged scene name."""
    with pytest.raises(SceneError, match="no packaged scene named 'torus'"):
        packaged_scene("torus")


@pytest.mark.parametrize("name", PACKAGED)
def test_packaged_scenes_build(name):
    """Test every shipped scene validates and constructs."""
    scene = load_scene(packaged_scene(name))

    built = build_objects(scene)

    assert set(built) == set(scene.objects)
    assert scene.requests


def test_ambient_surface_named_after_object():
    """Test ambient surfaces take the object name."""
    scene = parse_scene(_scene({"tube": SURFACE}, [{"op": "congruence", "target": "tube"}]))

    built = build_objects(scene)

    assert isinstance(built["tube"], AmbientSurface)
    assert built["tube"].name == "tube"


def test_minimal_family_needs_flat_chart():
    """Test minimal families are refused on curved charts."""
    scene = parse_scene(
        {
            "chart": {"name": "sphere"},
            "objects": {"m": {"kind": "minimal_family", "beta0": 0.0, "f1": "x^2", "f2": "x"}},
        }
    )

    with pytest.raises(SceneError, match="needs the flat chart"):
        build_objects(scene)


def test_gradient_graph_uses_parameters():
    """Test scene parameters reach expression parsing."""
    scene = parse_scene(
        {"parameters": {"k": 2.0}, "objects": {"u": {**GRAPH, "u": "k*s*t"}}, "requests": []}
    )

    graph = build_objects(scene)["u"]

    assert isinstance(graph, GradientGraph)
    assert graph.u(0.5, 0.5) == pytest.approx(0.5)
