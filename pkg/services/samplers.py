"""
Discrete-time kernels: projection, PLMC, LMC and the tamed MTLMC step.

All kernels act on the last axis, so a single state (d,) and a batch of
trajectories (M, d) go through the same code path.
"""
import numpy as np

import config
from common.errors import ConfigurationError, DivergenceError, InvalidParameterError
from common.numerics import row_sq_norms
from models import DoubleWellParams, DriftModel, ProjectionParams, SchemeKind

_DIVERGENCE_SQ = config.DIVERGENCE_NORM ** 2


def project(x: np.ndarray, params: ProjectionParams) -> np.ndarray:
    """min{1, cap/|x|} x with 0 -> 0; identity when gamma = 1"""
    x = np.asarray(x, dtype=np.float64)
    if params.is_identity:
        return x.copy()

    cap = params.cap_radius
    flat = x.reshape(-1, x.shape[-1])
    norms = np.sqrt(row_sq_norms(flat))
    outside = norms > cap
    if not outside.any():
        return x.copy()

    scale = np.ones_like(norms)
    scale[outside] = cap / norms[outside]
    out = flat * scale[:, None]
    # rounding can leave |out| a few ulps above cap
    for _ in range(8):
        over = np.sqrt(row_sq_norms(out)) > cap
        if not over.any():
            break
        scale[over] = np.nextafter(scale[over], 0.0)
        out = flat * scale[:, None]
    return out.reshape(x.shape)


def projection_for(model: DriftModel, h: float, theta: float) -> ProjectionParams:
    return ProjectionParams(gamma=model.gamma, theta=theta, dimension=model.dimension, step=h)


def is_diverged(y: np.ndarray) -> np.ndarray:
    """Non-finite coordinates or norm above the divergence threshold"""
    sq = row_sq_norms(y)
    return ~np.isfinite(sq) | (sq > _DIVERGENCE_SQ)


def _euler(base: np.ndarray, drift: np.ndarray, h: float, xi: np.ndarray) -> np.ndarray:
    return base + drift * h + np.sqrt(2.0 * h) * xi


def tamed_drift(y: np.ndarray, params: DoubleWellParams, h: float) -> np.ndarray:
    sq = row_sq_norms(y)[..., None]
    return (params.alpha * y - params.beta * sq * y) / np.sqrt(1.0 + h * sq ** 3)


def advance(scheme: SchemeKind, y: np.ndarray, model: DriftModel, h: float, theta: float,
            xi: np.ndarray) -> np.ndarray:
    """One step of the given scheme, no divergence checks"""
    if scheme in (SchemeKind.PLMC, SchemeKind.REFERENCE):
        base = project(y, projection_for(model, h, theta))
        return _euler(base, model.drift(base), h, xi)
    if scheme == SchemeKind.LMC:
        return _euler(y, model.drift(y), h, xi)
    if scheme == SchemeKind.MTLMC:
        if model.double_well is None:
            raise ConfigurationError(f"MTLMC needs a double-well drift, model is '{model.name}'")
        return _euler(y, tamed_drift(y, model.double_well, h), h, xi)
    raise InvalidParameterError(f"Unknown scheme {scheme}")


def _checked(step, y: np.ndarray, h: float) -> np.ndarray:
    if not 0 < h < 1:
        raise InvalidParameterError(f"h must lie in (0, 1), got {h}")
    y = np.asarray(y, dtype=np.float64)
    if np.any(is_diverged(y)):
        raise DivergenceError("input state is not finite")
    with np.errstate(over="ignore", invalid="ignore"):
        out = step(y)
    if np.any(is_diverged(out)):
        raise DivergenceError("step produced a non-finite or exploding state")
    return out


def plmc_step(y: np.ndarray, model: DriftModel, h: float, theta: float, xi: np.ndarray) -> np.ndarray:
    """P(y) + f(P(y)) h + sqrt(2h) xi"""
    return _checked(lambda s: advance(SchemeKind.PLMC, s, model, h, theta, xi), y, h)


def lmc_step(y: np.ndarray, model: DriftModel, h: float, xi: np.ndarray) -> np.ndarray:
    """y + f(y) h + sqrt(2h) xi"""
    return _checked(lambda s: advance(SchemeKind.LMC, s, model, h, config.DEFAULT_THETA, xi), y, h)


def mtlmc_step(y: np.ndarray, params: DoubleWellParams, h: float, xi: np.ndarray) -> np.ndarray:
    """y + h (alpha y - beta |y|^2 y) / (1 + h |y|^6)^(1/2) + sqrt(2h) xi"""
    return _checked(lambda s: _euler(s, tamed_drift(s, params, h), h, xi), y, h)
