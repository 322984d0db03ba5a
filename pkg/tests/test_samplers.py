import numpy as np
import pytest

from common.errors import ConfigurationError, DivergenceError, InvalidParameterError
from common.numerics import row_norms
from models import ProjectionParams, SchemeKind
from services.drift_models import make_double_well, make_ou
from services.samplers import advance, lmc_step, mtlmc_step, plmc_step, project, projection_for


def test_projection_radius():
    params = ProjectionParams(gamma=3.0, theta=1.0, dimension=4, step=0.125)
    assert params.cap_radius == pytest.approx(32.0 ** (1.0 / 6.0))
    assert ProjectionParams(gamma=1.0, dimension=4, step=0.125).cap_radius == np.inf


def test_projection_keeps_inside_points_and_caps_outside_points():
    params = ProjectionParams(gamma=1.5, dimension=3, step=2.0 ** -5)
    cap = params.cap_radius
    x = np.array([[0.0, 0.0, 0.0], [0.1, -0.2, 0.3], [10.0 * cap, 0.0, 0.0], [cap, cap, cap]])
    out = project(x, params)
    np.testing.assert_array_equal(out[:2], x[:2])
    assert np.all(row_norms(out) <= cap)
    np.testing.assert_allclose(out[2], [cap, 0.0, 0.0], rtol=1e-14)
    assert np.array_equal(project(out, params), out)


def test_projection_identity_for_lipschitz_drift():
    params = ProjectionParams(gamma=1.0, dimension=2, step=0.5)
    x = np.array([[1e6, -1e6]])
    assert np.array_equal(project(x, params), x)


def test_projection_single_vector_and_batch_agree():
    params = ProjectionParams(gamma=3.0, dimension=2, step=0.25)
    x = np.array([[5.0, -7.0], [0.5, 0.1]])
    np.testing.assert_array_equal(project(x[0], params), project(x, params)[0])


def test_plmc_equals_lmc_for_ou():
    model = make_ou(3)
    rng = np.random.default_rng(0)
    y, xi = rng.standard_normal(3) * 50.0, rng.standard_normal(3)
    assert np.array_equal(plmc_step(y, model, 0.25, 1.0, xi), lmc_step(y, model, 0.25, xi))


def test_noiseless_steps():
    model = make_double_well(1.0, 1.0, 2)
    y, zero = np.array([0.5, 0.0]), np.zeros(2)
    expected = y + model.drift(y) * 0.125
    np.testing.assert_array_equal(plmc_step(y, model, 0.125, 1.0, zero), expected)
    np.testing.assert_array_equal(lmc_step(y, model, 0.125, zero), expected)
    np.testing.assert_array_equal(mtlmc_step(np.zeros(2), model.double_well, 0.125, zero), np.zeros(2))


def test_plmc_projects_before_stepping():
    model = make_double_well(1.0, 1.0, 2)
    h = 0.125
    y, zero = np.array([100.0, 0.0]), np.zeros(2)
    base = project(y, projection_for(model, h, 1.0))
    np.testing.assert_array_equal(plmc_step(y, model, h, 1.0, zero), base + model.drift(base) * h)


def test_tamed_step_stays_bounded():
    model = make_double_well(1.0, 1.0, 2)
    out = mtlmc_step(np.array([1e3, 0.0]), model.double_well, 0.125, np.zeros(2))
    assert np.all(np.isfinite(out))
    assert row_norms(out) < 2e3


def test_lmc_divergence_raises():
    model = make_double_well(1.0, 1.0, 2)
    with pytest.raises(DivergenceError):
        lmc_step(np.array([1e60, 1e60]), model, 0.125, np.zeros(2))
    with pytest.raises(DivergenceError):
        lmc_step(np.array([np.nan, 0.0]), model, 0.125, np.zeros(2))


def test_step_size_validation():
    with pytest.raises(InvalidParameterError):
        lmc_step(np.zeros(2), make_ou(2), 1.0, np.zeros(2))


def test_mtlmc_needs_double_well():
    with pytest.raises(ConfigurationError):
        advance(SchemeKind.MTLMC, np.zeros((1, 2)), make_ou(2), 0.1, 1.0, np.zeros((1, 2)))
