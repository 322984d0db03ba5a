"""
Monte Carlo verifiers for the structural drift assumptions, the drift
bound constant C_f and the PLMC step-size window.

The assumptions are global; these checks sample bounded regions, uniformly
by volume unless the radial law is asked for, so a pass is evidence, not proof.
"""
import logging
from typing import Sequence

import numpy as np

import config
from common.errors import ConfigurationError, InvalidParameterError
from common.numerics import row_dots, row_sq_norms
from models import AssumptionReport, DriftModel, PointSampling
from services.drift_models import radial_points, uniform_in_ball

logger = logging.getLogger(__name__)

CHUNK = 20_000


def _report(assumption_id: str, lhs: np.ndarray, rhs: np.ndarray) -> AssumptionReport:
    """A sample violates lhs <= rhs when the excess beats rounding noise"""
    margin = lhs - rhs
    slack = config.CHECK_RTOL * (np.abs(lhs) + np.abs(rhs) + 1e-300)
    # non-finite margins count as violations
    violated = ~(margin <= slack)
    return AssumptionReport(
        assumption_id=assumption_id,
        samples=int(margin.size),
        violations=int(np.count_nonzero(violated)),
        worst_margin=float(margin.max()) if np.all(np.isfinite(margin)) else float("inf"),
    )


def _draw(rng: np.random.Generator, sampling: PointSampling, n: int, d: int, radius: float) -> np.ndarray:
    if PointSampling(sampling) == PointSampling.RADIAL:
        return radial_points(rng, n, d, radius)
    return uniform_in_ball(rng, n, d, radius)


def _merge(reports: Sequence[AssumptionReport]) -> AssumptionReport:
    return AssumptionReport(
        assumption_id=reports[0].assumption_id,
        samples=sum(r.samples for r in reports),
        violations=sum(r.violations for r in reports),
        worst_margin=max(r.worst_margin for r in reports),
    )


def _chunks(total: int):
    start = 0
    while start < total:
        yield min(CHUNK, total - start)
        start += CHUNK


def check_dissipativity(model: DriftModel, n_samples: int = config.ASSUMPTION_SAMPLES,
                        radius: float = config.DISSIPATIVITY_RADIUS,
                        seed: int = config.DEFAULT_SEED,
                        sampling: PointSampling = PointSampling.BALL) -> AssumptionReport:
    """<x, f(x)> <= -a1 |x|^2 + a2 on a ball"""
    if model.a1 is None or model.a2 is None:
        raise ConfigurationError(f"model '{model.name}' lacks dissipativity constants a1, a2")
    if n_samples < 1:
        raise InvalidParameterError("n_samples must be >= 1")

    rng = np.random.default_rng(seed)
    reports = []
    for size in _chunks(n_samples):
        x = _draw(rng, sampling, size, model.dimension, radius)
        lhs = row_dots(x, model.drift(x))
        rhs = -model.a1 * row_sq_norms(x) + model.a2
        reports.append(_report("dissipativity", lhs, rhs))

    report = _merge(reports)
    logger.info(f"Dissipativity on {model.name}: {report.violations}/{report.samples} violations, "
                f"worst margin {report.worst_margin:.4g}")
    return report


def check_contractivity_at_infinity(model: DriftModel, n_pairs: int = config.ASSUMPTION_SAMPLES,
                                    radius: float = config.CONTRACTIVITY_RADIUS,
                                    seed: int = config.DEFAULT_SEED,
                                    sampling: PointSampling = PointSampling.BALL) -> AssumptionReport:
    """<x-y, f(x)-f(y)> <= (atilde1 1{|x-y| <= R} - atilde2) |x-y|^2"""
    if model.atilde1 is None or model.atilde2 is None or model.radius_R is None:
        raise ConfigurationError(f"model '{model.name}' lacks contractivity constants atilde1, atilde2, R")
    if n_pairs < 1:
        raise InvalidParameterError("n_pairs must be >= 1")

    rng = np.random.default_rng(seed)
    reports = []
    for size in _chunks(n_pairs):
        x = _draw(rng, sampling, size, model.dimension, radius)
        y = _draw(rng, sampling, size, model.dimension, radius)
        diff = x - y
        dist_sq = row_sq_norms(diff)
        lhs = row_dots(diff, model.drift(x) - model.drift(y))
        inside = np.sqrt(dist_sq) <= model.radius_R
        rhs = (model.atilde1 * inside - model.atilde2) * dist_sq
        reports.append(_report("contractivity", lhs, rhs))

    report = _merge(reports)
    logger.info(f"Contractivity at infinity on {model.name}: {report.violations}/{report.samples} "
                f"violations, worst margin {report.worst_margin:.4g}")
    return report


def check_one_sided_lipschitz(model: DriftModel, L: float, n_pairs: int = config.ASSUMPTION_SAMPLES,
                              radius: float = config.DISSIPATIVITY_RADIUS,
                              seed: int = config.DEFAULT_SEED,
                              sampling: PointSampling = PointSampling.BALL) -> AssumptionReport:
    """<x-y, f(x)-f(y)> <= L |x-y|^2"""
    if not L > 0:
        raise InvalidParameterError(f"L must be positive, got {L}")

    rng = np.random.default_rng(seed)
    reports = []
    for size in _chunks(n_pairs):
        x = _draw(rng, sampling, size, model.dimension, radius)
        y = _draw(rng, sampling, size, model.dimension, radius)
        diff = x - y
        lhs = row_dots(diff, model.drift(x) - model.drift(y))
        reports.append(_report("one_sided_lipschitz", lhs, L * row_sq_norms(diff)))
    return _merge(reports)


def _search_directions(rng: np.random.Generator, d: int) -> np.ndarray:
    """Axes +-e_i followed by random unit directions"""
    axes = np.concatenate([np.eye(d), -np.eye(d)])
    random = rng.standard_normal((config.CF_RANDOM_DIRECTIONS, d))
    random /= np.sqrt(row_sq_norms(random))[:, None]
    return np.concatenate([axes, random])


def _max_drift_norm(model: DriftModel, radii: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """max over directions of |f(r u)| for each radius r"""
    out = np.empty(radii.size)
    for start in range(0, radii.size, 64):
        r = radii[start:start + 64]
        points = r[:, None, None] * directions[None, :, :]
        out[start:start + 64] = np.sqrt(row_sq_norms(model.drift(points))).max(axis=1)
    return out


def estimate_cf(model: DriftModel, h_grid: Sequence[float], theta: float = config.DEFAULT_THETA,
                seed: int = config.DEFAULT_SEED) -> float:
    """Smallest C_f consistent with the drift bound on the projection ball.

    gamma > 1: max |f(x)| / (theta^gamma d^(1/2) h^(-1/2)) over |x| <= theta (d/h)^(1/(2 gamma)).
    gamma = 1: max |f(x)| / (1 + |x|).
    """
    if len(h_grid) == 0:
        raise InvalidParameterError("h_grid must be nonempty")
    if any(not 0 < h < 1 for h in h_grid):
        raise InvalidParameterError("h_grid values must lie in (0, 1)")

    d = model.dimension
    rng = np.random.default_rng(seed)
    directions = _search_directions(rng, d)

    if model.gamma == 1:
        radii = np.concatenate([[0.0], np.geomspace(1e-3, 1e8, config.CF_RADIAL_POINTS)])
        ratio = _max_drift_norm(model, radii, directions) / (1.0 + radii)
        return float(ratio.max())

    best = 0.0
    for h in h_grid:
        cap = theta * (d / h) ** (1.0 / (2.0 * model.gamma))
        radii = np.linspace(0.0, cap, config.CF_RADIAL_POINTS)
        scale = theta ** model.gamma * np.sqrt(d) / np.sqrt(h)
        best = max(best, float(_max_drift_norm(model, radii, directions).max() / scale))
    logger.debug(f"Estimated C_f={best:.6g} for {model.name} over {len(h_grid)} step sizes")
    return best


def admissible_h_max(model: DriftModel) -> float:
    """Upper end of the PLMC step-size window min{1/(2 a1), 2 a1/(a1 + 2 C_f^2), 1}"""
    if model.a1 is None or model.cf is None:
        raise ConfigurationError(f"model '{model.name}' needs a1 and cf for the step-size window")
    a1, cf = model.a1, model.cf
    return min(1.0 / (2.0 * a1), 2.0 * a1 / (a1 + 2.0 * cf * cf), 1.0)
