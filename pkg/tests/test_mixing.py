import math

import pytest

from common.errors import InvalidParameterError
from services.mixing import dimension_exponent, plan_mixing, tv_error_budget


def test_worked_example():
    plan = plan_mixing(epsilon=0.1, gamma=1.0, d=1)
    assert plan.h == 0.05
    assert plan.k == 60 == math.ceil(20 * math.log(20))
    assert plan.note == "up to unknown constants"


def test_smaller_epsilon_needs_more_iterations():
    for gamma in (1.0, 3.0):
        assert plan_mixing(0.05, gamma, 4).k > plan_mixing(0.1, gamma, 4).k


def test_superlinear_step_shrinks_with_dimension():
    assert dimension_exponent(3.0) == 5.0
    assert dimension_exponent(1.0) == 1.5
    h1 = plan_mixing(0.1, 3.0, 1).h
    h10 = plan_mixing(0.1, 3.0, 10).h
    assert h1 / h10 >= 10 ** 4.5


def test_plan_meets_required_time():
    plan = plan_mixing(0.2, 2.0, 7, C=0.5, C_star=3.0, c_star=0.7, mean_x0_norm=2.0, phi_sup_norm=1.5)
    assert plan.k * plan.h >= plan.required_time
    assert plan.k >= 1


def test_budget_at_the_worked_example():
    plan = plan_mixing(0.1, 1.0, 1)
    mixing, bias = tv_error_budget(plan.k, plan.h, 1.0, 1)
    assert mixing <= 0.05
    assert bias == pytest.approx(0.05)


@pytest.mark.parametrize("kwargs", [
    dict(epsilon=0.0, gamma=1.0, d=1),
    dict(epsilon=1.0, gamma=1.0, d=1),
    dict(epsilon=0.1, gamma=0.5, d=1),
    dict(epsilon=0.1, gamma=1.0, d=1, C=0.0),
])
def test_invalid_inputs(kwargs):
    with pytest.raises(InvalidParameterError):
        plan_mixing(**kwargs)


def test_superlinear_step_uses_the_exact_log_factor():
    plan = plan_mixing(0.9, 3.0, 1)
    assert plan.h == pytest.approx(1.0 / (4.0 / 0.9 * math.log(2.0 / 0.9)), rel=1e-12)
    assert plan.h == pytest.approx(0.28178, abs=1e-5)
    mixing, bias = tv_error_budget(plan.k, plan.h, 3.0, 1)
    assert bias > 0 and mixing <= 0.45


def test_non_positive_log_factor_is_rejected():
    # 2 C d^q / epsilon = 0.2 / 0.9 < 1
    with pytest.raises(InvalidParameterError):
        plan_mixing(0.9, 3.0, 1, C=0.1)
