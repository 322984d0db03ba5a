"""
Mixing-time planner.

The TV error after k steps of size h splits into a mixing term
C* |phi|_0 exp(-c* k h) (1 + E|x0|) and a bias term C d^q h (|ln h| for
gamma > 1), q = max{3 gamma/2, 2 gamma - 1}. The planner makes each term
at most epsilon/2. C, C*, c* are existential constants with no known
values, so plans hold up to those constants.
"""
import logging
import math
from typing import Tuple

from common.errors import InvalidParameterError
from models import MixingPlan

logger = logging.getLogger(__name__)


def dimension_exponent(gamma: float) -> float:
    return max(1.5 * gamma, 2.0 * gamma - 1.0)


def plan_mixing(epsilon: float, gamma: float, d: int, C: float = 1.0, C_star: float = 1.0,
                c_star: float = 1.0, mean_x0_norm: float = 0.0, phi_sup_norm: float = 1.0) -> MixingPlan:
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    if gamma < 1 or d < 1:
        raise InvalidParameterError(f"need gamma >= 1 and d >= 1, got gamma={gamma}, d={d}")
    if min(C, C_star, c_star, phi_sup_norm) <= 0 or mean_x0_norm < 0:
        raise InvalidParameterError("constants must be positive")

    if gamma > 1:
        scaled = d ** dimension_exponent(gamma) / epsilon
        log_factor = math.log(2.0 * C * scaled)
        if log_factor <= 0:
            raise InvalidParameterError(f"ln(2 C d^q / epsilon) = {log_factor:.4g} must be positive; increase C")
        h = 1.0 / (4.0 * C * scaled * log_factor)
    else:
        h = epsilon / (2.0 * C * d ** 1.5)

    ratio = 2.0 * C_star * phi_sup_norm * (1.0 + mean_x0_norm) / epsilon
    required_time = math.log(ratio) / c_star
    k = max(1, math.ceil(required_time / h))
    while k * h < required_time:
        k += 1

    plan = MixingPlan(epsilon=epsilon, gamma=gamma, d=d, C=C, C_star=C_star, c_star=c_star,
                      mean_x0_norm=mean_x0_norm, phi_sup_norm=phi_sup_norm, h=h, k=k)
    logger.info(f"Mixing plan: h={h:.6g}, k={k} for epsilon={epsilon}, gamma={gamma}, d={d} ({plan.note})")
    return plan


def tv_error_budget(k: int, h: float, gamma: float, d: int, C: float = 1.0, C_star: float = 1.0,
                    c_star: float = 1.0, mean_x0_norm: float = 0.0,
                    phi_sup_norm: float = 1.0) -> Tuple[float, float]:
    """(mixing term, bias term) of the TV error bound after k steps of size h"""
    if k < 0 or not h > 0:
        raise InvalidParameterError("need k >= 0 and h > 0")
    mixing = C_star * phi_sup_norm * math.exp(-c_star * k * h) * (1.0 + mean_x0_norm)
    log_factor = abs(math.log(h)) if gamma > 1 else 1.0
    bias = C * d ** dimension_exponent(gamma) * h * log_factor
    return mixing, bias
