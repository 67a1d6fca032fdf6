"""Tests for the neutral Kähler structure on the tangent bundle."""

import numpy as np
import pytest

from pkgeo.basegeo import ConformalChart
from pkgeo.tbundle import (
    SPLIT_BASIS,
    ProjectableField,
    SplitTangent,
    TBPoint,
    _lift_bracket,
    gmetric,
    jmap,
    levi_civita,
    metric_compatibility_residual,
    nijenhuis,
    omega,
    parallel_j_residual,
    sasaki_norm,
    signature,
    structure_residuals,
    torsion_residual,
)

CHARTS = ["flat", "sphere", "hyperbolic"]


def _random_tangent(rng):
    return SplitTangent.from_vector(rng.normal(size=4))


def test_tbpoint_shape():
    """Test TBPoint needs 2-vectors."""
    with pytest.raises(ValueError, match="2-vectors"):
        TBPoint([0.0, 0.0, 0.0], [1.0, 0.0])


def test_split_tangent_arithmetic():
    """Test vector operations, including numpy scalars on the left."""
    X = SplitTangent([1.0, 2.0], [3.0, 4.0])
    Y = SplitTangent([0.5, 0.5], [0.5, 0.5])

    assert np.allclose((X - Y).as_vector(), [0.5, 1.5, 2.5, 3.5])
    assert np.allclose((np.float64(2.0) * X).as_vector(), [2.0, 4.0, 6.0, 8.0])
    assert (-X).max_abs() == 4.0


def test_flat_metric_in_split_basis():
    """Test horizontal and vertical lifts are null and paired by G."""
    chart = ConformalChart.catalog("flat")
    tb = TBPoint([0.0, 0.0], [1.0, 0.0])
    hs, ht, vs, vt = SPLIT_BASIS

    assert gmetric(chart, tb, hs, hs) == 0.0
    assert gmetric(chart, tb, vs, vs) == 0.0
    assert gmetric(chart, tb, hs, vt) == -1.0
    assert gmetric(chart, tb, ht, vs) == 1.0
    assert omega(chart, tb, vs, hs) == 1.0


@pytest.mark.parametrize("name", CHARTS)
def test_neutral_signature(name):
    """Test G has signature (2, 2)."""
    chart = ConformalChart.catalog(name)
    tb = TBPoint([0.2, -0.3], [0.5, 1.5])

    assert signature(chart, tb) == (2, 2)


@pytest.mark.parametrize("name", CHARTS)
def test_structure_residuals_vanish(name):
    """Test J^2 = -1, antisymmetry of Omega, symmetry and J-invariance of G, N_J = 0."""
    chart = ConformalChart.catalog(name)
    rng = np.random.default_rng(3)
    for p in chart.domain.shrink(0.5).sample(rng, 10):
        tb = TBPoint(p, rng.normal(size=2))
        residuals = structure_residuals(chart, tb, _random_tangent(rng), _random_tangent(rng))
        assert set(residuals) == {"j_squared", "omega_antisymmetry", "g_symmetry", "g_j_invariance", "nijenhuis"}
        assert max(residuals.values()) < 1e-10


def test_nijenhuis_with_curved_lift_brackets():
    """Test N_J = 0 on the sphere although the horizontal lifts do not commute."""
    chart = ConformalChart.catalog("sphere")
    tb = TBPoint([0.2, -0.1], [1.0, 0.5])
    X, Y = SPLIT_BASIS[0], SPLIT_BASIS[1]

    bracket = _lift_bracket(chart, tb, ProjectableField.constant(X), ProjectableField.constant(Y))

    assert np.allclose(bracket.hpart, 0.0)
    assert bracket.max_abs() > 0.1
    assert nijenhuis(chart, tb, X, Y).max_abs() < 1e-12
    assert nijenhuis(chart, tb, X, SPLIT_BASIS[3]).max_abs() < 1e-12


def test_sasaki_norm_is_positive():
    """Test the Sasaki norm of a null vector is positive."""
    chart = ConformalChart.catalog("sphere")
    tb = TBPoint([0.0, 0.0], [0.0, 0.0])
    X = SPLIT_BASIS[0]

    assert gmetric(chart, tb, X, X) == 0.0
    assert sasaki_norm(chart, tb, X) == pytest.approx(2.0)
    assert sasaki_norm(chart, tb, jmap(chart, tb, X)) == pytest.approx(2.0)


def test_constant_field_is_parallel_on_flat_chart():
    """Test D_X Y = 0 for constant fields over the flat plane."""
    chart = ConformalChart.catalog("flat")
    tb = TBPoint([0.3, 0.1], [1.0, -2.0])
    Y = ProjectableField.constant(SplitTangent([1.0, 0.0], [0.0, 1.0]))

    assert levi_civita(chart, tb, SPLIT_BASIS[1], Y).max_abs() == 0.0


@pytest.mark.parametrize("name", CHARTS)
def test_levi_civita_identities(name):
    """Test D is torsion free, G-compatible and J-parallel."""
    chart = ConformalChart.catalog(name)
    Yf = ProjectableField.parse("s*t", "cos(s)", "1+t^2", "sin(s+t)")
    Zf = ProjectableField.parse("exp(t)", "s-t", "s^2", "atan(s)")
    rng = np.random.default_rng(5)
    for p in chart.domain.shrink(0.4).sample(rng, 6):
        tb = TBPoint(p, rng.normal(size=2))
        X = _random_tangent(rng)
        assert torsion_residual(chart, tb, Yf, Zf).max_abs() < 1e-9
        assert abs(metric_compatibility_residual(chart, tb, X, Yf, Zf)) < 1e-9
        assert parallel_j_residual(chart, tb, X, Yf).max_abs() < 1e-9
