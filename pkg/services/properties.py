"""
Runnable property checks for projection, schemes and moment bounds.

Each check returns an AssumptionReport so `verify` can tabulate them next
to the drift-assumption checks. A margin > 0 is a violation unless noted.
"""
import logging
import math
from typing import Iterable, Sequence

import numpy as np

import config
from common.numerics import mean_and_std_error, row_norms, row_sq_norms
from models import AssumptionReport, ProjectionParams, SamplerConfig, SchemeKind
from services.drift_models import make_double_well, make_ou
from services.ensemble import run_ensemble
from services.estimators import (fit_order, gaussian_tv_oracle, lmc_ou_stationary_variance,
                                 sde_moment_bound)
from services.mixing import plan_mixing
from services.randomness import derive_stream, gaussian_block
from services.samplers import advance, project, projection_for

logger = logging.getLogger(__name__)


def _tally(check_id: str, margins: Iterable[float]) -> AssumptionReport:
    margins = np.asarray(margins, dtype=np.float64).ravel()
    return AssumptionReport(assumption_id=check_id, samples=int(margins.size),
                            violations=int(np.count_nonzero(~(margins <= 0))),
                            worst_margin=float(margins.max()) if np.all(np.isfinite(margins)) else math.inf)


def _random_points(rng: np.random.Generator, n: int, d: int, cap: float) -> np.ndarray:
    """Gaussian directions with norms log-uniform around the cap radius"""
    directions = rng.standard_normal((n, d))
    directions /= row_norms(directions)[:, None]
    radii = cap * np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
    return directions * radii[:, None]


def check_projection_norm_bounds(params: ProjectionParams, n: int = 10_000,
                                 seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    cap = params.cap_radius if not params.is_identity else 1.0
    x = _random_points(rng, n, params.dimension, cap)
    out_norm = row_norms(project(x, params))
    bound = np.minimum(row_norms(x), params.cap_radius)
    return _tally("projection_norm_bound", out_norm - bound)


def check_projection_idempotence(params: ProjectionParams, n: int = 10_000,
                                 seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    cap = params.cap_radius if not params.is_identity else 1.0
    once = project(_random_points(rng, n, params.dimension, cap), params)
    twice = project(once, params)
    return _tally("projection_idempotence", np.abs(twice - once).max(axis=1))


def check_projection_lipschitz(params: ProjectionParams, n: int = 10_000,
                               seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    cap = params.cap_radius if not params.is_identity else 1.0
    x = _random_points(rng, n, params.dimension, cap)
    y = _random_points(rng, n, params.dimension, cap)
    lhs = row_norms(project(x, params) - project(y, params))
    return _tally("projection_lipschitz", lhs - row_norms(x - y) - 1e-12)


def check_projection_equivariance(params: ProjectionParams, n: int = 10_000,
                                  seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    d = params.dimension
    cap = params.cap_radius if not params.is_identity else 1.0
    margins = []
    for batch in np.array_split(np.arange(n), 10):
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        x = _random_points(rng, batch.size, d, cap)
        gap = row_norms(project(x @ q.T, params) - project(x, params) @ q.T)
        margins.append(gap - 1e-10 * (1.0 + row_norms(x)))
    return _tally("projection_equivariance", np.concatenate(margins))


def check_projection_error(gammas: Sequence[float] = (1.5, 3.0),
                           h_grid: Sequence[float] = tuple(2.0 ** -k for k in range(3, 10)),
                           dims: Sequence[int] = (2, 8, 32), n: int = 10_000, theta: float = 1.0,
                           seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    """|x - P(x)| <= 2 theta^(-4 gamma) d^(-2) h^2 |x|^(4 gamma + 1)"""
    rng = np.random.default_rng(seed)
    margins = []
    for gamma in gammas:
        for h in h_grid:
            for d in dims:
                params = ProjectionParams(gamma=gamma, theta=theta, dimension=d, step=h)
                x = _random_points(rng, n, d, params.cap_radius)
                norm = row_norms(x)
                lhs = row_norms(x - project(x, params))
                rhs = 2.0 * theta ** (-4 * gamma) * d ** -2.0 * h ** 2 * norm ** (4 * gamma + 1)
                margins.append(lhs - rhs)
    return _tally("projection_error", np.concatenate(margins))


def check_scheme_coincidence(d: int = 3, n_steps: int = 1000, n_trajectories: int = 8,
                             seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    """PLMC equals LMC bit for bit when gamma = 1"""
    model = make_ou(d)
    x0 = tuple(float(v) for v in np.linspace(-2.0, 2.0, d))
    results = {}
    for scheme in (SchemeKind.PLMC, SchemeKind.LMC):
        cfg = SamplerConfig(scheme=scheme, model=model, h=2.0 ** -4, n_steps=n_steps, x0=x0,
                            n_trajectories=n_trajectories, master_seed=seed)
        results[scheme] = run_ensemble(cfg, workers=1).states
    gap = np.abs(results[SchemeKind.PLMC] - results[SchemeKind.LMC]).max(axis=1)
    return _tally("scheme_coincidence", gap)


def moment_sequence(d: int = 10, h: float = 0.125, n_steps: int = 800, n_trajectories: int = 2000,
                    every: int = 4, seed: int = config.DEFAULT_SEED, workers: int = 1):
    """(steps, mean (1 + |Y_n|^2)^2) for PLMC on the unit double-well"""
    cfg = SamplerConfig(scheme=SchemeKind.PLMC, model=make_double_well(1.0, 1.0, d), h=h,
                        n_steps=n_steps, n_trajectories=n_trajectories, master_seed=seed,
                        checkpoint_every=every)
    ensemble = run_ensemble(cfg, workers=workers)
    steps, values = [], []
    for step, states in ensemble.checkpoints:
        mean, _ = mean_and_std_error((1.0 + row_sq_norms(states)) ** 2)
        steps.append(step)
        values.append(mean)
    return np.asarray(steps), np.asarray(values)


def check_moment_boundedness(seed: int = config.DEFAULT_SEED, workers: int = 1,
                             n_trajectories: int = 2000) -> AssumptionReport:
    """Second-half trend of mean (1 + |Y_n|^2)^2 stays within 1e-3 per step"""
    steps, values = moment_sequence(seed=seed, workers=workers, n_trajectories=n_trajectories)
    half = steps >= steps[-1] // 2
    slope = np.polyfit(steps[half], values[half], 1)[0]
    margin = abs(slope) - 1e-3 if np.all(np.isfinite(values)) else math.inf
    logger.info(f"Moment trend slope {slope:.3e} per step, max moment {values.max():.4g}")
    return _tally("moment_boundedness", [margin])


def instability_runs(seed: int = config.DEFAULT_SEED, n_trajectories: int = 100, workers: int = 1):
    """LMC and PLMC from x0 = 10 * 1_4 on the unit double-well, h = 1/8, 100 steps"""
    d = 4
    model = make_double_well(1.0, 1.0, d)
    runs = {}
    for scheme in (SchemeKind.LMC, SchemeKind.PLMC):
        cfg = SamplerConfig(scheme=scheme, model=model, h=0.125, n_steps=100, x0=(10.0,) * d,
                            n_trajectories=n_trajectories, master_seed=seed)
        runs[scheme] = run_ensemble(cfg, workers=workers)
    return runs[SchemeKind.LMC], runs[SchemeKind.PLMC]


def check_instability_contrast(seed: int = config.DEFAULT_SEED, workers: int = 1):
    lmc, plmc = instability_runs(seed=seed, workers=workers)
    blown = ~lmc.finite_mask | ~(row_norms(lmc.states) <= 1e10)
    fraction = float(np.mean(blown))
    return [
        _tally("lmc_divergence", [0.95 - fraction]),
        _tally("plmc_stability", [1.0 if plmc.diverged else 0.0]),
    ]


def check_sde_moment_bound(dims: Sequence[int] = (4, 10), times: Sequence[float] = (1.0, 2.0, 4.0),
                           h_ref: float = config.DESK_H_REF, n_trajectories: int = 1000,
                           seed: int = config.DEFAULT_SEED, workers: int = 1) -> AssumptionReport:
    """Fine-step surrogate satisfies E|X_t|^2 <= bound(p=1, c=a1) + 3 standard errors"""
    margins = []
    for d in dims:
        model = make_double_well(1.0, 1.0, d)
        every = round(min(times) / h_ref)
        horizon_steps = round(max(times) / h_ref)
        cfg = SamplerConfig(scheme=SchemeKind.REFERENCE, model=model, h=h_ref, n_steps=horizon_steps,
                            n_trajectories=n_trajectories, master_seed=seed, checkpoint_every=every)
        ensemble = run_ensemble(cfg, workers=workers)
        by_step = dict(ensemble.checkpoints)
        for t in times:
            mean, se = mean_and_std_error(row_sq_norms(by_step[round(t / h_ref)]))
            bound = sde_moment_bound(p=1, c=model.a1, a1=model.a1, a2=model.a2, d=d, t=t, m0=0.0)
            margins.append(mean - (bound + 3.0 * se))
    return _tally("sde_moment_bound", margins)


def lipschitz_tv_points(h_grid: Sequence[float] = tuple(2.0 ** -k for k in range(3, 8))):
    """(h, TV) between the exact LMC stationary coordinate law on OU and N(0, 1)"""
    return [(h, gaussian_tv_oracle(1.0, math.sqrt(lmc_ou_stationary_variance(h)))) for h in h_grid]


def check_lipschitz_tv_order() -> AssumptionReport:
    """TV order of LMC on OU is 1 within 0.05.

    Both laws are products of one coordinate law that does not depend on d,
    so a single fit covers every dimension.
    """
    fit = fit_order(lipschitz_tv_points(), label="lmc_ou_tv")
    return _tally("lipschitz_tv_order", [abs(fit.slope - 1.0) - 0.05])


def check_mixing_plan(n_tuples: int = 1000, seed: int = config.DEFAULT_SEED) -> AssumptionReport:
    """Worked example plus k h >= required time over random constant tuples"""
    example = plan_mixing(0.1, 1.0, 1)
    margins = [0.0 if (example.h == 0.05 and example.k == 60) else 1.0]
    rng = np.random.default_rng(seed)
    for _ in range(n_tuples):
        plan = plan_mixing(
            epsilon=float(rng.uniform(0.01, 0.99)),
            gamma=float(rng.choice([1.0, 1.5, 2.0, 3.0])),
            d=int(rng.integers(1, 50)),
            C=float(rng.uniform(0.5, 10.0)),
            C_star=float(rng.uniform(0.1, 10.0)),
            c_star=float(rng.uniform(0.1, 10.0)),
            mean_x0_norm=float(rng.uniform(0.0, 10.0)),
        )
        margins.append(plan.required_time - plan.k * plan.h)
    return _tally("mixing_plan", margins)


def increment_second_moments(h_grid: Sequence[float] = tuple(2.0 ** -k for k in range(5, 10)),
                             d: int = 4, horizon: float = 2.0, n_trajectories: int = 500,
                             seed: int = config.DEFAULT_SEED, workers: int = 1):
    """(h, mean |Y_(n+1) - P(Y_n)|^2) after PLMC has run to the horizon"""
    model = make_double_well(1.0, 1.0, d)
    points = []
    for h in h_grid:
        cfg = SamplerConfig(scheme=SchemeKind.PLMC, model=model, h=h, n_steps=round(horizon / h),
                            n_trajectories=n_trajectories, master_seed=seed)
        states = run_ensemble(cfg, workers=workers).states
        stream = derive_stream(seed, 0, config.INDEPENDENT_REFERENCE_LANE)
        xi = gaussian_block(stream, n_trajectories, d)
        following = advance(SchemeKind.PLMC, states, model, h, cfg.theta, xi)
        increment = following - project(states, projection_for(model, h, cfg.theta))
        mean, _ = mean_and_std_error(row_sq_norms(increment))
        points.append((h, mean))
    return points


def check_increment_scaling(seed: int = config.DEFAULT_SEED, workers: int = 1) -> AssumptionReport:
    fit = fit_order(increment_second_moments(seed=seed, workers=workers), label="increment")
    return _tally("increment_scaling", [abs(fit.slope - 1.0) - 0.2])
