"""
Estimators and oracles: expectations of bounded test functions, weak errors,
total-variation lower bounds, moment curves, Gaussian TV oracles, KS
statistics, histograms and log-log order fits.

TV follows the sup-over-|phi|<=1 convention, which ranges in [0, 2].
"""
import logging
import math
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

import config
from common.errors import EstimationError, InvalidParameterError
from common.numerics import mean_and_std_error, row_norms, row_sq_norms
from models import Ensemble, ErrorRecord, OrderFit, TestFunction, TestFunctionId

logger = logging.getLogger(__name__)

PHI1_INTERVALS = [(0.0, 0.5), (1.5, 2.0), (2.5, 3.0), (3.5, 4.0)]
# Step function: value on [edge_{i-1}, edge_i); index 5 is the [5/2, 3) gap
PHI2_EDGES = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
PHI2_VALUES = np.array([0.0, 1.0, 0.5, -1.0, 0.25, config.PHI2_GAP_FILL, 1.0 / 3.0, -1.0 / 3.0, -0.5])
PHI2_GAP_INDEX = 5

STANDARD_PHIS = [TestFunctionId.PHI1, TestFunctionId.EXP_NEG_NORM, TestFunctionId.PHI2,
                 TestFunctionId.ATAN_NORM]


def _phi1(x: np.ndarray) -> np.ndarray:
    r = row_norms(x)
    hit = np.zeros(r.shape, dtype=bool)
    for lo, hi in PHI1_INTERVALS:
        hit |= (r > lo) & (r < hi)
    return hit.astype(np.float64)


def _phi2(gap: float) -> Callable[[np.ndarray], np.ndarray]:
    values = PHI2_VALUES.copy()
    values[PHI2_GAP_INDEX] = gap

    def step(x: np.ndarray) -> np.ndarray:
        return values[np.digitize(row_norms(x), PHI2_EDGES)]
    return step


def _spot_check(phi: TestFunction, dimension: int) -> TestFunction:
    """|phi| <= sup_norm on random inputs with norms from 1e-2 to 1e2"""
    rng = np.random.default_rng(config.DEFAULT_SEED)
    directions = rng.standard_normal((config.SUP_NORM_SAMPLES, dimension))
    directions /= np.maximum(row_norms(directions), 1e-300)[:, None]
    x = directions * np.exp(rng.uniform(np.log(1e-2), np.log(1e2), config.SUP_NORM_SAMPLES))[:, None]
    values = phi(x)
    if values.shape != (config.SUP_NORM_SAMPLES,):
        raise InvalidParameterError(f"{phi.name} must map (n, d) inputs to n values, got shape {values.shape}")
    worst = float(np.max(np.abs(values))) if np.all(np.isfinite(values)) else math.inf
    if worst > phi.sup_norm * (1.0 + 1e-12):
        raise InvalidParameterError(f"{phi.name} reaches {worst:.6g}, above its sup norm {phi.sup_norm:.6g}")
    return phi


def make_test_function(fid: TestFunctionId, value: float = 1.0,
                       fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                       sup_norm: Optional[float] = None, phi2_gap: float = config.PHI2_GAP_FILL,
                       dimension: int = 2) -> TestFunction:
    """Build one of the standard test functions; CONST uses `value`, USER wraps `fn`.

    Every function is spot-checked against its sup norm on inputs of the
    given dimension before it is returned.
    """
    try:
        fid = TestFunctionId(fid)
    except ValueError:
        raise InvalidParameterError(f"Unknown test function {fid}")
    if fid == TestFunctionId.PHI1:
        phi = TestFunction(id=fid, sup_norm=1.0, eval=_phi1)
    elif fid == TestFunctionId.PHI2:
        if not -1.0 <= phi2_gap <= 1.0:
            raise InvalidParameterError(f"PHI2 gap value must lie in [-1, 1], got {phi2_gap}")
        phi = TestFunction(id=fid, sup_norm=1.0, eval=_phi2(phi2_gap))
    elif fid == TestFunctionId.EXP_NEG_NORM:
        phi = TestFunction(id=fid, sup_norm=1.0, eval=lambda x: np.exp(-row_norms(x)))
    elif fid == TestFunctionId.ATAN_NORM:
        phi = TestFunction(id=fid, sup_norm=math.pi / 2.0, eval=lambda x: np.arctan(row_norms(x)))
    elif fid == TestFunctionId.CONST:
        if value == 0:
            raise InvalidParameterError("CONST needs a nonzero value")
        phi = TestFunction(id=fid, sup_norm=abs(value),
                           eval=lambda x: np.full(np.shape(x)[:-1], float(value)))
    elif fid == TestFunctionId.USER:
        if fn is None or sup_norm is None:
            raise InvalidParameterError("USER test functions need fn and sup_norm")
        phi = TestFunction(id=fid, sup_norm=sup_norm, eval=fn)
    else:
        raise InvalidParameterError(f"Unknown test function {fid}")
    return _spot_check(phi, dimension)


def standard_test_functions(phi2_gap: float = config.PHI2_GAP_FILL) -> List[TestFunction]:
    return [make_test_function(fid, phi2_gap=phi2_gap) for fid in STANDARD_PHIS]


def _finite_states(ensemble: Ensemble) -> np.ndarray:
    mask = ensemble.finite_mask
    if not mask.any():
        raise EstimationError(f"all {ensemble.n_trajectories} trajectories diverged")
    if not mask.all():
        logger.warning(f"Excluding {ensemble.n_diverged} diverged trajectories from the estimate")
    return ensemble.states[mask]


def estimate_expectation(ensemble: Ensemble, phi: TestFunction) -> Tuple[float, float]:
    """Sample mean of phi over finite trajectories and its standard error"""
    if ensemble.n_trajectories == 0:
        raise EstimationError("empty ensemble")
    return mean_and_std_error(phi(_finite_states(ensemble)))


def _paired(a: Ensemble, b: Ensemble) -> bool:
    return (a.coupled and b.coupled and a.master_seed == b.master_seed and a.lane == b.lane
            and a.n_trajectories == b.n_trajectories)


def weak_error(coarse: Ensemble, reference: Ensemble, phi: TestFunction, **context) -> ErrorRecord:
    """|E phi(Y_N) - E phi(X_T)|; coupled ensembles are differenced per trajectory"""
    horizon = coarse.horizon
    if abs(horizon - reference.horizon) > 1e-9 * max(1.0, abs(horizon)):
        raise InvalidParameterError(f"time mismatch: coarse T={horizon}, reference T={reference.horizon}")

    if _paired(coarse, reference):
        mask = coarse.finite_mask & reference.finite_mask
        if not mask.any():
            raise EstimationError("no trajectory is finite in both ensembles")
        values_c = phi(coarse.states[mask])
        values_r = phi(reference.states[mask])
        estimate, _ = mean_and_std_error(values_c)
        ref_value, _ = mean_and_std_error(values_r)
        _, std_error = mean_and_std_error(values_c - values_r)
    else:
        estimate, se_c = estimate_expectation(coarse, phi)
        ref_value, se_r = estimate_expectation(reference, phi)
        std_error = math.sqrt(se_c * se_c + se_r * se_r)

    return ErrorRecord(
        phi=phi.name,
        h=coarse.h,
        d=coarse.dimension,
        estimate=estimate,
        reference=ref_value,
        abs_error=abs(estimate - ref_value),
        std_error=std_error,
        **context,
    )


def tv_lower_bound(ens_a: Ensemble, ens_b: Ensemble, phis: Sequence[TestFunction]) -> float:
    """max over phi of |E_a phi - E_b phi|, each phi rescaled to sup norm <= 1"""
    if len(phis) == 0:
        raise InvalidParameterError("need at least one test function")
    if ens_a.dimension != ens_b.dimension:
        raise InvalidParameterError("ensembles differ in dimension")
    states_a, states_b = _finite_states(ens_a), _finite_states(ens_b)
    best = 0.0
    for phi in phis:
        scale = 1.0 / phi.sup_norm if phi.sup_norm > 1 else 1.0
        mean_a, _ = mean_and_std_error(phi(states_a) * scale)
        mean_b, _ = mean_and_std_error(phi(states_b) * scale)
        best = max(best, abs(mean_a - mean_b))
    return best


def moment_curve(checkpointed: Ensemble, p: int) -> List[Tuple[int, float]]:
    """Per-checkpoint sample mean of |Y_n|^(2p) over finite trajectories"""
    if not checkpointed.checkpoints:
        raise InvalidParameterError("ensemble has no checkpoints")
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    curve = []
    for step, states in checkpointed.checkpoints:
        sq = row_sq_norms(states)
        sq = sq[np.isfinite(sq)]
        if sq.size == 0:
            raise EstimationError(f"no finite trajectory at step {step}")
        mean, _ = mean_and_std_error(sq ** p)
        curve.append((step, mean))
    return curve


def sde_moment_bound(p: int, c: float, a1: float, a2: float, d: int, t: float, m0: float) -> float:
    """Uniform-in-time bound on E|X_t|^(2p) for the Langevin SDE, valid for c in (0, 2 a1)"""
    if not 0 < c < 2 * a1:
        raise InvalidParameterError(f"c must lie in (0, 2 a1) = (0, {2 * a1}), got {c}")
    if p < 1 or m0 < 0:
        raise InvalidParameterError("need p >= 1 and m0 >= 0")
    factor = ((p - 1) / ((2 * a1 - c) * p)) ** (p - 1)
    return math.exp(-c * p * t) * m0 + (4 * p - 2 + 2 * a2) ** p / p * factor * d ** p


def lmc_ou_stationary_variance(h: float) -> float:
    """Fixed point of v = (1-h)^2 v + 2h"""
    return 1.0 / (1.0 - h / 2.0)


def _crossing(sigma_a: float, sigma_b: float) -> float:
    lo, hi = sorted((sigma_a, sigma_b))
    return math.sqrt(2.0 * lo * lo * hi * hi * math.log(hi / lo) / (hi * hi - lo * lo))


def gaussian_tv_oracle(sigma_a: float, sigma_b: float) -> float:
    """Integral of |N(0, sa^2) - N(0, sb^2)| densities, by adaptive quadrature"""
    if not (sigma_a > 0 and sigma_b > 0):
        raise InvalidParameterError("standard deviations must be positive")
    if sigma_a == sigma_b:
        return 0.0

    def gap(x: float) -> float:
        return abs(stats.norm.pdf(x, scale=sigma_a) - stats.norm.pdf(x, scale=sigma_b))

    x_star = _crossing(sigma_a, sigma_b)
    inner, _ = integrate.quad(gap, 0.0, x_star, epsabs=1e-12, epsrel=1e-12, limit=200)
    outer, _ = integrate.quad(gap, x_star, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    return 2.0 * (inner + outer)


def gaussian_tv_closed_form(sigma_a: float, sigma_b: float) -> float:
    """Same quantity as gaussian_tv_oracle via normal CDFs at the crossing points"""
    if sigma_a == sigma_b:
        return 0.0
    x_star = _crossing(sigma_a, sigma_b)
    return 4.0 * abs(special.ndtr(x_star / sigma_a) - special.ndtr(x_star / sigma_b))


def ks_statistic(samples_a: Sequence[float], samples_b: Sequence[float]) -> float:
    a, b = np.asarray(samples_a, dtype=np.float64), np.asarray(samples_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise InvalidParameterError("KS needs nonempty samples")
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def fit_order(points: Iterable[Tuple[float, float]], label: str = "") -> OrderFit:
    """Least squares of ln(error) against ln(h); zero errors are dropped"""
    pts = [(float(x), float(e)) for x, e in points]
    if any(not (math.isfinite(x) and math.isfinite(e)) for x, e in pts):
        raise InvalidParameterError("order fit needs finite points")
    if any(x <= 0 or e < 0 for x, e in pts):
        raise InvalidParameterError("order fit needs positive abscissae and errors")
    zeros = [p for p in pts if p[1] == 0]
    if zeros:
        logger.warning(f"Dropping {len(zeros)} zero errors from order fit {label}".rstrip())
        pts = [p for p in pts if p[1] > 0]
    if len(pts) < 2:
        raise InvalidParameterError(f"order fit needs >= 2 positive points, got {len(pts)}")

    log_x = np.log([x for x, _ in pts])
    log_e = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(log_x, log_e, 1)
    residuals = log_e - (slope * log_x + intercept)
    return OrderFit(slope=float(slope), intercept=float(intercept),
                    residual_rms=float(np.sqrt(np.mean(residuals ** 2))),
                    points_used=len(pts), label=label)


def histogram(samples: Sequence[float], bins: int, lo: float, hi: float) -> List[Tuple[float, float]]:
    """Equal-width bins normalised by the total sample count"""
    if bins < 1 or not lo < hi:
        raise InvalidParameterError("need bins >= 1 and lo < hi")
    values = np.asarray(samples, dtype=np.float64)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    total = max(values.size, 1)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return [(float(c), float(n / (total * width))) for c, n in zip(centers, counts)]
