"""Tests for base surface geometry in conformal charts."""

import math

import numpy as np
import pytest

from pkgeo.basegeo import (
    ConformalChart,
    ExpressionCurve,
    Rect,
    arclength_reparametrize,
    check_arclength,
    christoffels,
    circle_curve,
    curvature_derivative,
    curvature_operator,
    frenet,
    gauss_curvature,
    geodesic,
    inner,
    jrot,
    line_curve,
    ray_curve,
)
from pkgeo.errors import ChartDomainError, NotImmersedError


def test_rect_validation_and_grid():
    """Test empty rectangles are rejected and grids are cell centred."""
    with pytest.raises(ValueError, match="empty rectangle"):
        Rect(1.0, 0.0, 0.0, 1.0)

    s, t = Rect(0.0, 1.0, -1.0, 1.0).grid(2)
    assert np.allclose(s, [0.25, 0.75])
    assert np.allclose(t, [-0.5, 0.5])


def test_rect_sample_stays_inside():
    """Test random samples keep away from the boundary."""
    rect = Rect(-1.0, 1.0, 0.0, 2.0)
    points = rect.sample(np.random.default_rng(0), 50)

    assert points.shape == (50, 2)
    assert all(rect.contains(p, margin=0.09) for p in points)


def test_catalog_unknown_chart():
    """Test an unknown catalog name is reported with the choices."""
    with pytest.raises(ValueError, match="unknown chart 'torus'"):
        ConformalChart.catalog("torus")


def test_require_outside_domain():
    """Test points outside the chart rectangle raise ChartDomainError."""
    chart = ConformalChart.catalog("hyperbolic")

    with pytest.raises(ChartDomainError, match="outside"):
        chart.require((0.9, 0.0))


def test_christoffels_of_exponential_factor():
    """Test the Christoffel symbols of r = s."""
    chart = ConformalChart.from_expression("s", Rect(-1.0, 1.0, -1.0, 1.0))

    assert christoffels(chart, (0.3, -0.2)) == {
        "s_ss": 1.0,
        "t_ss": 0.0,
        "s_st": 0.0,
        "t_st": 1.0,
        "s_tt": -1.0,
        "t_tt": 0.0,
    }


@pytest.mark.parametrize("name, expected", [("flat", 0.0), ("sphere", 1.0), ("hyperbolic", -1.0)])
def test_gauss_curvature_of_catalog(name, expected):
    """Test the catalog charts have constant curvature 0, 1 and -1."""
    chart = ConformalChart.catalog(name)
    for point in [(0.0, 0.0), (0.3, -0.4), (-0.5, 0.1)]:
        assert gauss_curvature(chart, point) == pytest.approx(expected, abs=1e-12)


def test_curvature_operator_form():
    """Test R(X,Y)Y = K g(Y,Y) X for g-orthogonal X and Y."""
    chart = ConformalChart.catalog("sphere")
    p = (0.2, 0.1)
    X = np.array([1.0, 0.0])
    Y = jrot(X)

    result = curvature_operator(chart, p, X, Y, Y)

    assert np.allclose(result, inner(chart, p, Y, Y) * X)


def test_flat_circle_frenet():
    """Test a flat circle of radius 2 has curvature 1/2 and inward normal."""
    chart = ConformalChart.catalog("flat")
    curve = circle_curve(chart, 2.0)

    f = frenet(chart, curve, 0.0)

    assert f.curvature == pytest.approx(0.5)
    assert np.allclose(f.tangent, [0.0, 1.0])
    assert np.allclose(f.normal, [-1.0, 0.0])
    assert curvature_derivative(chart, curve, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_sphere_equator_is_geodesic():
    """Test the unit circle of the sphere chart has zero geodesic curvature."""
    chart = ConformalChart.catalog("sphere")
    curve = circle_curve(chart, 1.0)

    for s in (0.0, 0.7, 2.0):
        assert frenet(chart, curve, s).curvature == pytest.approx(0.0, abs=1e-12)


def test_frenet_zero_speed():
    """Test a stationary point raises NotImmersedError."""
    chart = ConformalChart.catalog("flat")
    curve = ExpressionCurve.parse("s^2", "0", (-1.0, 1.0))

    with pytest.raises(NotImmersedError, match="zero-speed"):
        frenet(chart, curve, 0.0)


def test_arclength_reparametrisation_sphere():
    """Test the reparametrised curve has unit speed and matching length."""
    chart = ConformalChart.catalog("sphere")
    base = ExpressionCurve.parse("0.5*cos(s)", "0.5*sin(s)", (0.0, 1.0))

    curve = arclength_reparametrize(chart, base)

    # coordinate circle of radius 1/2 has metric speed 2*0.5/(1+0.25)
    assert curve.length == pytest.approx(0.8, rel=1e-12)
    assert check_arclength(chart, curve, tol=1e-8) < 1e-8
    assert frenet(chart, curve, 0.3).curvature == pytest.approx(frenet(chart, base, 0.375).curvature, rel=1e-8)


def test_check_arclength_rejects_slow_curve():
    """Test a curve with speed 2 is reported."""
    chart = ConformalChart.catalog("flat")
    curve = ExpressionCurve.parse("2*s", "0", (0.0, 1.0))

    with pytest.raises(ValueError, match="not parametrised by arclength"):
        check_arclength(chart, curve)


def test_arclength_curve_kept():
    """Test curves flagged as arclength are returned unchanged."""
    chart = ConformalChart.catalog("flat")
    curve = line_curve((0.0, 0.0), (3.0, 4.0), (0.0, 1.0))

    assert arclength_reparametrize(chart, curve) is curve
    assert np.allclose(curve.point(1.0), [0.6, 0.8])


def test_geodesic_matches_ray_on_sphere():
    """Test RK4 geodesics agree with the closed-form rays from the origin."""
    chart = ConformalChart.catalog("sphere")
    angle = 0.4
    # e^{2r} = 4 at the origin
    v0 = 0.5 * np.array([math.cos(angle), math.sin(angle)])

    numeric = geodesic(chart, (0.0, 0.0), v0, 1.0, steps=400)
    exact = ray_curve(chart, angle, (0.0, 1.0))

    assert not numeric.truncated
    for s in (0.25, 0.5, 1.0):
        assert np.allclose(numeric.point(s), exact.point(s), atol=1e-9)


def test_long_sphere_geodesic_keeps_unit_speed():
    """Test a half great circle off the origin: unit speed throughout, ending at the antipode."""
    chart = ConformalChart.catalog("sphere")
    p0 = np.array([0.3, 0.2])
    v = np.array([-0.2, 0.3])
    v0 = v / math.sqrt(inner(chart, p0, v, v))

    curve = geodesic(chart, p0, v0, math.pi, steps=3000)

    assert not curve.truncated
    assert check_arclength(chart, curve, samples=101, tol=1e-6) < 1e-6
    assert np.allclose(curve.point(math.pi), -p0 / (p0 @ p0), atol=1e-6)


def test_geodesic_flat_line():
    """Test flat geodesics are straight lines."""
    chart = ConformalChart.catalog("flat")

    curve = geodesic(chart, (1.0, 2.0), (0.6, -0.8), 2.0, steps=20)

    assert np.allclose(curve.point(1.5), [1.9, 0.8])
    assert np.allclose(curve.derivatives(1.5, 3)[2:], 0.0)


def test_geodesic_rejects_non_unit_velocity():
    """Test the initial velocity must be g-unit."""
    chart = ConformalChart.catalog("flat")

    with pytest.raises(ValueError, match="unit vector"):
        geodesic(chart, (0.0, 0.0), (1.0, 1.0), 1.0)


def test_geodesic_truncated_at_domain_edge():
    """Test a geodesic leaving the chart is truncated."""
    chart = ConformalChart.catalog("flat")

    curve = geodesic(chart, (9.05, 0.0), (1.0, 0.0), 5.0, steps=50)

    assert curve.truncated
    assert curve.interval[1] == pytest.approx(0.9)
    with pytest.raises(ChartDomainError):
        curve.point(3.0)
