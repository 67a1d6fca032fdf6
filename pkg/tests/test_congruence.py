"""Tests for normal line congruences of surfaces in R^3 and R^{2,1}."""

import math

import numpy as np
import pytest

from pkgeo.basegeo import ConformalChart, Rect
from pkgeo.congruence import (
    AmbientSurface,
    LinePoint,
    SplitLineTangent,
    ambient_g,
    ambient_omega,
    congruence_area,
    congruence_frame,
    congruence_report,
    cross,
    curvature_line_data,
    developable_rank_profile,
    diagonal_defect,
    functional_F,
    hamiltonian_variation_check,
    integrate,
    ip,
    normal_congruence,
    shape_data,
    taper,
    to_sphere_chart,
)
from pkgeo.errors import NotSpacelikeError, QuadratureError
from pkgeo.expr import ScalarField
from pkgeo.suites import congruence_surfaces
from pkgeo.tbundle import gmetric, omega


@pytest.fixture(scope="module")
def surfaces():
    return congruence_surfaces()


def test_minkowski_products():
    """Test the Lorentzian inner and cross products."""
    e1, e2, e3 = np.eye(3)

    assert ip("minkowski", e3, e3) == -1.0
    assert ip("euclidean", e3, e3) == 1.0
    assert np.allclose(cross("minkowski", e1, e2), [0.0, 0.0, -1.0])
    assert ip("minkowski", cross("minkowski", e1, e3), e1) == 0.0


def test_surface_validation():
    """Test unknown signatures, orientations and time-like surfaces are rejected."""
    with pytest.raises(ValueError, match="unknown signature"):
        AmbientSurface.parse("s", "t", "0", Rect(0.0, 1.0, 0.0, 1.0), "lorentzian")
    with pytest.raises(ValueError, match="orientation"):
        AmbientSurface.parse("s", "t", "0", Rect(0.0, 1.0, 0.0, 1.0), orientation=2)

    timelike = AmbientSurface.parse("s", "t", "2*s", Rect(0.0, 1.0, 0.0, 1.0), "minkowski", name="steep")
    with pytest.raises(NotSpacelikeError, match="steep"):
        functional_F(timelike)


def test_cylinder_closed_form(surfaces):
    """Test the unit cylinder: principal curvatures 0 and 1, F = A = 1/2."""
    cylinder = surfaces["cylinder"]

    shape = shape_data(cylinder, (0.5, 0.5))
    F = functional_F(cylinder)
    area = congruence_area(cylinder)

    assert (shape.lam, shape.mu) == pytest.approx((0.0, 1.0), abs=1e-12)
    assert shape.K == pytest.approx(0.0, abs=1e-12)
    assert F.value == pytest.approx(0.5, abs=1e-10)
    assert area.value == pytest.approx(0.5, abs=1e-10)
    assert curvature_line_data(cylinder, (0.3, 0.7)) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_cylinder_congruence_metric(surfaces):
    """Test the cylinder's normal congruence has E-bar = G-bar = 0 and F-bar = -1."""
    congruence = normal_congruence(surfaces["cylinder"])

    assert congruence.metric((0.4, 0.6)) == pytest.approx((0.0, -1.0, 0.0), abs=1e-12)
    assert abs(congruence.lagrangian_defect((0.4, 0.6))) < 1e-12
    assert congruence.max_defect(8) < 1e-12
    assert diagonal_defect(surfaces["cylinder"], 8) < 1e-12
    assert np.allclose(congruence.line((0.0, 0.25)).Y, [0.0, 0.0, 0.25])


def test_orientation_does_not_change_F():
    """Test reversing the normal keeps F."""
    inward = AmbientSurface.parse("cos(s)", "sin(s)", "t", Rect(0.0, 1.0, 0.0, 1.0), orientation=-1)

    assert functional_F(inward).value == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("name", ["sphere", "hyperboloid"])
def test_umbilic_congruences_are_null(surfaces, name):
    """Test normal lines through one point give F = A = 0."""
    report = congruence_report(surfaces[name], n=6)

    assert abs(report.F) < 1e-10
    assert abs(report.area) < 1e-10
    assert report.cells_skipped == 36


@pytest.mark.parametrize("name", ["ellipsoid", "paraboloid", "torus", "lorentz_graph"])
def test_area_equals_F(surfaces, name):
    """Test A(S-bar) = F(S) and the congruence is Lagrangian."""
    report = congruence_report(surfaces[name], n=6)

    assert report.rel_diff < 1e-6
    assert report.max_defect < 1e-9
    assert report.raw_area == pytest.approx(2.0 * report.area)


def test_curvature_line_report(surfaces):
    """Test the torus parametrisation by curvature lines has E-bar = G-bar = 0."""
    report = congruence_report(surfaces["torus"], n=6)

    assert report.diagonal is not None
    assert report.diagonal < 1e-9
    data = report.to_dict()
    assert {"F", "area", "raw_area", "rel_diff", "cells_skipped", "F_error", "area_error"} <= set(data)


def test_curvature_line_data_rejects_skew_parametrisation(surfaces):
    """Test a chart with F != 0 is refused."""
    skew = AmbientSurface.parse("s", "t", "s*t", Rect(0.2, 0.8, 0.2, 0.8))

    with pytest.raises(ValueError, match="curvature-line"):
        curvature_line_data(skew, (0.5, 0.5))


def test_rigid_motion_invariance(surfaces):
    """Test F is invariant under a rotation and translation."""
    ellipsoid = surfaces["ellipsoid"]
    angle = 0.7
    rotation = np.array(
        [[math.cos(angle), -math.sin(angle), 0.0], [math.sin(angle), math.cos(angle), 0.0], [0.0, 0.0, 1.0]]
    )

    moved = ellipsoid.moved(rotation, (1.0, -2.0, 0.5))

    assert functional_F(moved).value == pytest.approx(functional_F(ellipsoid).value, abs=1e-9)


@pytest.mark.parametrize(
    "name, rank",
    [("cylinder", 1), ("cone", 1), ("ellipsoid", 2), ("plane", 0), ("lorentz_plane", 0)],
)
def test_developable_rank_profile(surfaces, name, rank):
    """Test developable surfaces have rank(dN) <= 1."""
    profile = developable_rank_profile(surfaces[name], n=6)

    assert profile.max_rank == rank
    assert profile.developable == (rank <= 1)


@pytest.mark.parametrize("name", ["paraboloid", "lorentz_graph"])
def test_hamiltonian_variation(surfaces, name):
    """Test the variation X + eps h N moves the congruence by eps_sig J Dh."""
    surface = surfaces[name]

    report = hamiltonian_variation_check(surface, taper(ScalarField.parse("1+s*t"), surface.domain), n=6)

    assert report.cells + report.cells_skipped == 36
    assert report.cells > 30
    assert report.residual < 1e-5
    assert report.identity < 1e-6


def test_taper_vanishes_on_boundary():
    """Test the tapered function and its first partials vanish on the edge."""
    domain = Rect(0.0, 1.0, 0.0, 1.0)
    h = taper(ScalarField.parse("1+s*t"), domain)

    assert h(0.0, 0.4) == 0.0
    assert h.value((0.0, 0.4), (1, 0)) == 0.0
    assert h.value((0.7, 1.0), (0, 1)) == 0.0
    assert h(0.5, 0.5) == pytest.approx(1.25)


def test_integrate_polynomial_and_kink():
    """Test exact polynomials and subdivision at a kink."""
    rect = Rect(0.0, 1.0, 0.0, 1.0)

    smooth = integrate(lambda s, t: s * t, rect)
    kinked = integrate(lambda s, t: np.abs(s - 0.5) + 0.0 * t, rect, order=4)

    assert smooth.value == pytest.approx(0.25, abs=1e-15)
    assert smooth.subdivisions == 0
    assert kinked.value == pytest.approx(0.25, abs=1e-13)
    assert kinked.subdivisions == 1


def test_integrate_gives_up():
    """Test a singular integrand raises QuadratureError at the depth limit."""
    with pytest.raises(QuadratureError, match="did not converge"):
        integrate(lambda s, t: np.sqrt(np.abs(s - 0.3)) + 0.0 * t, Rect(0.0, 1.0, 0.0, 1.0), order=2, max_depth=0)


def test_sphere_chart_agrees_with_ambient_structure(surfaces):
    """Test Omega and G of the line space match the sphere chart of the tangent bundle."""
    chart = ConformalChart.catalog("sphere")
    cf = congruence_frame(surfaces["ellipsoid"], 0.6, 0.1)
    xi = cf.Xs
    zeta = SplitLineTangent(cf.Xt.hpart + cf.Xs.vpart, cf.Xt.vpart - 2.0 * cf.Xs.hpart)

    tb, a = to_sphere_chart(cf.line, xi)
    _, b = to_sphere_chart(cf.line, zeta)

    assert omega(chart, tb, a, b) == pytest.approx(float(ambient_omega("euclidean", xi, zeta)), abs=1e-10)
    assert gmetric(chart, tb, a, b) == pytest.approx(float(ambient_g("euclidean", cf.line.N, xi, zeta)), abs=1e-10)


def test_sphere_chart_excludes_south_pole(surfaces):
    """Test the south pole has no sphere-chart coordinates."""
    cf = congruence_frame(surfaces["plane"], 0.5, 0.5)
    line = LinePoint(-cf.line.N, cf.line.Y)

    with pytest.raises(ValueError, match="south pole"):
        to_sphere_chart(line, cf.Xs)
