import math

import numpy as np
import pytest

from common.errors import ConfigurationError
from models import PointSampling
from services import assumptions
from services.drift_models import make_double_well, make_ou, with_cf


def test_unit_double_well_is_dissipative():
    report = assumptions.check_dissipativity(make_double_well(1.0, 1.0, 4), n_samples=20_000, seed=3)
    assert report.passed
    assert report.samples == 20_000


def test_unit_double_well_is_contractive_at_infinity():
    report = assumptions.check_contractivity_at_infinity(make_double_well(1.0, 1.0, 4), n_pairs=20_000, seed=3)
    assert report.passed


def test_corrupted_contractivity_constant_fails():
    model = make_double_well(1.0, 1.0, 4).model_copy(update={"atilde2": 50.0})
    report = assumptions.check_contractivity_at_infinity(model, n_pairs=20_000, seed=3,
                                                         sampling=PointSampling.RADIAL)
    assert not report.passed
    assert report.worst_margin > 0


def test_ball_sampling_is_uniform_by_volume():
    rng = np.random.default_rng(0)
    norms = np.linalg.norm(assumptions._draw(rng, PointSampling.BALL, 100_000, 10, 60.0), axis=1)
    assert norms.max() <= 60.0 * (1 + 1e-12)
    # P(|x| <= R/2) = 2^-10 in d=10
    assert np.mean(norms <= 30.0) < 0.003
    radial = np.linalg.norm(assumptions._draw(rng, PointSampling.RADIAL, 100_000, 10, 60.0), axis=1)
    assert abs(np.mean(radial <= 30.0) - 0.5) < 0.01


def test_non_finite_margins_are_violations():
    report = assumptions._report("x", np.array([np.nan, 1.0, np.inf]), np.zeros(3))
    assert report.violations == 2
    assert report.worst_margin == math.inf
    assert not report.passed


def test_ou_one_sided_lipschitz():
    report = assumptions.check_one_sided_lipschitz(make_ou(6), 1.0, n_pairs=10_000)
    assert report.passed


def test_double_well_one_sided_lipschitz_with_alpha():
    # the cubic part is monotone, so alpha bounds the one-sided constant
    report = assumptions.check_one_sided_lipschitz(make_double_well(1.0, 1.0, 3), 1.0, n_pairs=10_000)
    assert report.passed


def test_missing_constants_raise():
    model = make_double_well(1.0, 4.0, 2)
    with pytest.raises(ConfigurationError):
        assumptions.check_dissipativity(model)
    with pytest.raises(ConfigurationError):
        assumptions.check_contractivity_at_infinity(model)
    with pytest.raises(ConfigurationError):
        assumptions.admissible_h_max(make_ou(2))


def test_estimate_cf_double_well_is_finite_and_positive():
    model = make_double_well(1.0, 1.0, 3)
    cf = assumptions.estimate_cf(model, [2.0 ** -5, 2.0 ** -7])
    assert math.isfinite(cf) and cf > 0
    h_max = assumptions.admissible_h_max(with_cf(model, cf))
    assert 0 < h_max <= 0.5
