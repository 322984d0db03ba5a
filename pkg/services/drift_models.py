"""
Drift/potential models: double-well, Ornstein-Uhlenbeck and user-supplied
"""
import logging
import math
from typing import Callable, Optional

import numpy as np

import config
from common.errors import ConfigurationError, InvalidParameterError
from common.numerics import row_sq_norms
from models import AssumptionReport, DoubleWellParams, DriftModel

logger = logging.getLogger(__name__)

# Contractivity/dissipativity constants proven for alpha = beta = 1
UNIT_DOUBLE_WELL_CONSTANTS = {
    "a1": 1.0,
    "a2": 1.0,
    "atilde1": 4.0 * math.sqrt(2.0) + 19.0 / 2.0,
    "atilde2": 0.5,
    "radius_R": 16.0 + 20.0 * math.sqrt(2.0),
}


def _double_well_drift(params: DoubleWellParams) -> Callable[[np.ndarray], np.ndarray]:
    alpha, beta = params.alpha, params.beta

    def drift(x: np.ndarray) -> np.ndarray:
        sq = row_sq_norms(x)[..., None]
        return alpha * x - beta * sq * x

    return drift


def _double_well_potential(params: DoubleWellParams) -> Callable[[np.ndarray], np.ndarray]:
    alpha, beta = params.alpha, params.beta

    def potential(x: np.ndarray) -> np.ndarray:
        sq = row_sq_norms(x)
        return beta * sq * sq / 4.0 - alpha * sq / 2.0

    return potential


def _ou_drift(x: np.ndarray) -> np.ndarray:
    return -x


def _ou_potential(x: np.ndarray) -> np.ndarray:
    return row_sq_norms(x) / 2.0


def make_double_well(alpha: float, beta: float, d: int, **constants: float) -> DriftModel:
    """Double-well drift alpha x - beta |x|^2 x, gamma = 3.

    Assumption constants are filled in only for alpha = beta = 1; other
    parameterizations take them from the caller.
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidParameterError(f"alpha and beta must be positive, got alpha={alpha}, beta={beta}")
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")

    params = DoubleWellParams(alpha=alpha, beta=beta)
    stored = dict(UNIT_DOUBLE_WELL_CONSTANTS) if alpha == 1 and beta == 1 else {}
    stored.update({key: value for key, value in constants.items() if value is not None})

    return DriftModel(
        name="doublewell",
        dimension=d,
        gamma=3.0,
        drift_eval=_double_well_drift(params),
        potential_eval=_double_well_potential(params),
        double_well=params,
        **stored,
    )


def make_ou(d: int, **constants: float) -> DriftModel:
    """f(x) = -x, stationary law N(0, I)"""
    if d < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {d}")

    stored = {"a1": 1.0, "a2": config.OU_A2}
    stored.update({key: value for key, value in constants.items() if value is not None})

    return DriftModel(
        name="ou",
        dimension=d,
        gamma=1.0,
        drift_eval=_ou_drift,
        potential_eval=_ou_potential,
        **stored,
    )


def make_user_model(name: str, d: int, gamma: float, drift: Callable[[np.ndarray], np.ndarray],
                    potential: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    **constants: float) -> DriftModel:
    """Wrap a caller drift; it must act on the last axis of (..., d) arrays"""
    if d < 1 or gamma < 1:
        raise InvalidParameterError(f"need d >= 1 and gamma >= 1, got d={d}, gamma={gamma}")
    return DriftModel(
        name=name,
        dimension=d,
        gamma=gamma,
        drift_eval=drift,
        potential_eval=potential,
        **{key: value for key, value in constants.items() if value is not None},
    )


def with_cf(model: DriftModel, cf: float) -> DriftModel:
    return model.model_copy(update={"cf": float(cf)})


def check_gradient_consistency(model: DriftModel, n_points: int = 100, radius: float = 5.0,
                               seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    """Central differences of U against -f at random points of the ball"""
    if model.potential_eval is None:
        raise ConfigurationError(f"model '{model.name}' has no potential to differentiate")

    rng = np.random.default_rng(seed)
    d = model.dimension
    points = uniform_in_ball(rng, n_points, d, radius)
    drift = model.drift(points)
    tolerance = 1e-5 * (1.0 + np.sqrt(row_sq_norms(drift)))
    delta = 1e-5 * (1.0 + np.sqrt(row_sq_norms(points)))

    worst = -np.inf
    violations = 0
    for i in range(d):
        shift = np.zeros((n_points, d))
        shift[:, i] = delta
        grad_i = (model.potential(points + shift) - model.potential(points - shift)) / (2.0 * delta)
        margin = np.abs(drift[:, i] + grad_i) - tolerance
        violations += int(np.count_nonzero(margin > 0))
        worst = max(worst, float(margin.max()))

    logger.debug(f"Gradient consistency for {model.name}: worst margin {worst:.3e}")
    return AssumptionReport(assumption_id="gradient", samples=n_points, violations=violations,
                            worst_margin=worst)


def uniform_in_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    """n points uniform in the d-ball of the given radius"""
    directions = rng.standard_normal((n, d))
    norms = np.sqrt(row_sq_norms(directions))
    norms[norms == 0] = 1.0
    radii = radius * rng.random(n) ** (1.0 / d)
    return directions / norms[:, None] * radii[:, None]


def radial_points(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    """n points with norms uniform on [0, radius] and uniform directions.

    Unlike uniform_in_ball this keeps a fixed share of samples near the
    origin in high dimension.
    """
    directions = rng.standard_normal((n, d))
    norms = np.sqrt(row_sq_norms(directions))
    norms[norms == 0] = 1.0
    radii = radius * rng.random(n)
    return directions / norms[:, None] * radii[:, None]
