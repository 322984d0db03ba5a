"""
Experiment drivers: convergence, density, dimension dependence, property
verification, sampling and mixing plans.

Cells may run in any order; reports are assembled sorted by (d, h, phi) so
output files do not depend on scheduling.
"""
import logging
import os
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from common.errors import ConfigurationError, InvalidParameterError
from common.parsers import LiteralParser
from models import (DriftModel, Ensemble, ErrorRecord, ExperimentKind, ExperimentReport,
                    ExperimentSpec, HistogramRow, ModelKind, OrderFit, PointSampling,
                    ProjectionParams, SamplerConfig, SchemeKind)
from services import assumptions, properties
from services.drift_models import check_gradient_consistency, make_double_well, make_ou
from services.ensemble import dump_ensemble, run_ensemble, run_reference
from services.estimators import (estimate_expectation, fit_order, histogram, ks_statistic,
                                 standard_test_functions, weak_error)
from services.mixing import plan_mixing, tv_error_budget

logger = logging.getLogger(__name__)

_OVERRIDES = ("a1", "a2", "atilde1", "atilde2", "radius_R")


def build_model(spec: ExperimentSpec, d: int) -> DriftModel:
    """Model named by the spec, with any constant overrides applied as given.

    Overrides bypass validation so deliberately wrong constants reach the
    checkers instead of being rejected up front.
    """
    if spec.model == ModelKind.OU:
        model = make_ou(d)
    else:
        model = make_double_well(spec.alpha, spec.beta, d)
    overrides = {key: getattr(spec, key) for key in _OVERRIDES if getattr(spec, key) is not None}
    return model.model_copy(update=overrides) if overrides else model


def _row_context(spec: ExperimentSpec, scheme: SchemeKind) -> Dict[str, object]:
    is_double_well = spec.model == ModelKind.DOUBLEWELL
    return {
        "scheme": scheme.value,
        "model": spec.model.value,
        "alpha": spec.alpha if is_double_well else None,
        "beta": spec.beta if is_double_well else None,
    }


def _sorted_rows(rows: List[ErrorRecord]) -> List[ErrorRecord]:
    return sorted(rows, key=lambda r: (r.d, r.h, r.phi))


def _fit_or_note(points: List[Tuple[float, float]], label: str, notes: List[str]) -> Optional[OrderFit]:
    if sum(1 for _, e in points if e > 0) < 2:
        notes.append(f"order fit skipped for {label}: fewer than two positive errors")
        return None
    return fit_order(points, label=label)


def _dump(spec: ExperimentSpec, ensemble: Ensemble, tag: Optional[str] = None) -> None:
    """Write final states to spec.dump; tagged dumps go to <root>.<tag><ext>"""
    if not spec.dump:
        return
    root, ext = os.path.splitext(spec.dump)
    path = f"{root}.{tag}{ext}" if tag else spec.dump
    dump_ensemble(ensemble, path, "npy" if ext == ".npy" else "csv")


def _phi2_note(spec: ExperimentSpec, report: ExperimentReport) -> None:
    report.notes.append(f"PHI2 on [5/2, 3) takes the value {spec.phi2_gap:g}")


def _error_cell(spec: ExperimentSpec, cfg: SamplerConfig, reference: Ensemble, key: str,
                report: ExperimentReport) -> List[ErrorRecord]:
    coarse = run_ensemble(cfg, spec.workers)
    _dump(spec, coarse, f"d{cfg.model.dimension}_h{cfg.h!r}")
    report.divergence_counts[key] = coarse.n_diverged
    if coarse.n_diverged > config.MAX_DIVERGED_FRACTION * cfg.n_trajectories:
        logger.error(f"Cell {key}: {coarse.n_diverged}/{cfg.n_trajectories} trajectories diverged")
        report.failed_cells.append(key)
        if coarse.n_diverged == cfg.n_trajectories:
            return []
    context = _row_context(spec, cfg.scheme)
    return [weak_error(coarse, reference, phi, **context) for phi in standard_test_functions(spec.phi2_gap)]


def _coarse_config(spec: ExperimentSpec, model: DriftModel, h: float, n_steps: int) -> SamplerConfig:
    coupled = not spec.independent_ref
    substeps = 1
    if coupled:
        substeps = round(h / spec.h_ref)
        if substeps < 1 or abs(substeps * spec.h_ref - h) > 1e-12 * h:
            raise InvalidParameterError(f"h={h} is not a multiple of h_ref={spec.h_ref}")
    return SamplerConfig(scheme=spec.scheme, model=model, h=h, n_steps=n_steps, theta=spec.theta,
                         n_trajectories=spec.n_trajectories, master_seed=spec.seed,
                         coupled_reference=coupled, noise_substeps=substeps)


def run_convergence(spec: ExperimentSpec) -> ExperimentReport:
    """Weak errors of the scheme against a fine PLMC reference, per (d, h, phi), with fitted orders"""
    horizon = spec.horizon or config.CONVERGE_T
    grid = spec.h_grid or config.CONVERGE_H_GRID
    report = ExperimentReport(spec=spec)
    _phi2_note(spec, report)
    started = time.perf_counter()

    rows: List[ErrorRecord] = []
    for d in sorted(spec.dimensions):
        model = build_model(spec, d)
        reference = None
        for h in grid:
            cfg = _coarse_config(spec, model, h, LiteralParser.steps_for_horizon(horizon, h))
            if reference is None:
                reference = run_reference(cfg, spec.h_ref, spec.workers)
            logger.info(f"Convergence cell d={d} h={h:.6g} N={cfg.n_steps} M={cfg.n_trajectories}")
            rows.extend(_error_cell(spec, cfg, reference, f"d={d},h={h!r}", report))

    report.rows = _sorted_rows(rows)
    for d in sorted(spec.dimensions):
        for phi in sorted({r.phi for r in report.rows}):
            points = [(r.h, r.abs_error) for r in report.rows if r.d == d and r.phi == phi]
            fit = _fit_or_note(points, f"{phi}@d{d}", report.notes)
            if fit is not None:
                report.orders.append(fit)
    report.runtime = time.perf_counter() - started
    return report


def compare_densities(ens_a: Ensemble, ens_b: Ensemble, bins: int = config.DENSITY_BINS):
    """First-coordinate histograms over the pooled range plus their two-sample KS statistic"""
    first_a = ens_a.states[ens_a.finite_mask, 0]
    first_b = ens_b.states[ens_b.finite_mask, 0]
    pooled = np.concatenate([first_a, first_b])
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    rows = []
    for ens, samples in ((ens_a, first_a), (ens_b, first_b)):
        rows.extend(HistogramRow(scheme=ens.scheme.value, bin_center=c, density=p)
                    for c, p in histogram(samples, bins, lo, hi))
    return rows, ks_statistic(first_a, first_b)


def run_density(spec: ExperimentSpec) -> ExperimentReport:
    """PLMC against tamed MTLMC at a matched fine step: histograms and KS of the first coordinate"""
    if spec.model != ModelKind.DOUBLEWELL:
        raise ConfigurationError("the density study needs the double-well model")
    horizon = spec.horizon or config.CONVERGE_T
    h = spec.h_grid[0] if spec.h_grid else config.DENSITY_H
    d = spec.dimensions[0]
    model = build_model(spec, d)
    report = ExperimentReport(spec=spec)
    started = time.perf_counter()

    ensembles = {}
    for scheme in (SchemeKind.PLMC, SchemeKind.MTLMC):
        cfg = SamplerConfig(scheme=scheme, model=model, h=h, n_steps=LiteralParser.steps_for_horizon(horizon, h),
                            theta=spec.theta, n_trajectories=spec.n_trajectories, master_seed=spec.seed)
        ensembles[scheme] = run_ensemble(cfg, spec.workers)
        _dump(spec, ensembles[scheme], scheme.value)
        key = f"{scheme.value},d={d},h={h!r}"
        report.divergence_counts[key] = ensembles[scheme].n_diverged
        if ensembles[scheme].n_diverged > config.MAX_DIVERGED_FRACTION * spec.n_trajectories:
            report.failed_cells.append(key)

    report.histograms, ks = compare_densities(ensembles[SchemeKind.PLMC], ensembles[SchemeKind.MTLMC])
    report.scalars["ks_first_coordinate"] = ks
    logger.info(f"Density test d={d} h={h:.6g}: KS={ks:.4f}")
    report.runtime = time.perf_counter() - started
    return report


def run_dimdep(spec: ExperimentSpec) -> ExperimentReport:
    """Weak errors after a fixed number of iterations across dimensions; slope of ln error in ln d"""
    h = spec.h_grid[0] if spec.h_grid else config.DIMDEP_H
    n_steps = spec.n_iterations or config.DIMDEP_ITERATIONS
    report = ExperimentReport(spec=spec)
    _phi2_note(spec, report)
    started = time.perf_counter()

    rows: List[ErrorRecord] = []
    for d in sorted(spec.dimensions):
        cfg = _coarse_config(spec, build_model(spec, d), h, n_steps)
        reference = run_reference(cfg, spec.h_ref, spec.workers)
        logger.info(f"Dimension cell d={d} h={h:.6g} N={n_steps}")
        rows.extend(_error_cell(spec, cfg, reference, f"d={d},h={h!r}", report))

    report.rows = _sorted_rows(rows)
    for phi in sorted({r.phi for r in report.rows}):
        points = [(float(r.d), r.abs_error) for r in report.rows if r.phi == phi]
        if len(points) < 2:
            report.notes.append(f"dimension slope undefined for {phi}: single dimension")
            continue
        fit = _fit_or_note(points, phi, report.notes)
        if fit is not None:
            report.orders.append(fit)
    report.runtime = time.perf_counter() - started
    return report


def run_verify(spec: ExperimentSpec) -> ExperimentReport:
    """The full property suite with fixed seeds"""
    if spec.dump:
        raise InvalidParameterError("verify produces no ensemble to dump")
    report = ExperimentReport(spec=spec)
    started = time.perf_counter()
    seed, workers = spec.seed, spec.workers
    d = spec.dimensions[0]
    model = build_model(spec, d)

    checks = [check_gradient_consistency(model, seed=seed)]
    try:
        checks.append(assumptions.check_dissipativity(model, seed=seed))
    except ConfigurationError as e:
        report.notes.append(f"dissipativity skipped: {e}")
    try:
        checks.append(assumptions.check_contractivity_at_infinity(model, seed=seed))
        radial = assumptions.check_contractivity_at_infinity(model, seed=seed, sampling=PointSampling.RADIAL)
        checks.append(radial.model_copy(update={"assumption_id": "contractivity[radial]"}))
    except ConfigurationError as e:
        report.notes.append(f"contractivity skipped: {e}")
    if model.atilde1 is not None and model.atilde2 is not None and model.atilde1 > model.atilde2:
        checks.append(assumptions.check_one_sided_lipschitz(model, model.atilde1 - model.atilde2, seed=seed))
    ou_check = assumptions.check_one_sided_lipschitz(make_ou(d), 1.0, seed=seed)
    checks.append(ou_check.model_copy(update={"assumption_id": "ou_one_sided_lipschitz"}))

    for gamma in (1.5, 3.0):
        params = ProjectionParams(gamma=gamma, theta=spec.theta, dimension=max(d, 2), step=2.0 ** -5)
        for check in (properties.check_projection_norm_bounds, properties.check_projection_idempotence,
                      properties.check_projection_lipschitz, properties.check_projection_equivariance):
            result = check(params, seed=seed)
            checks.append(result.model_copy(update={"assumption_id": f"{result.assumption_id}[gamma={gamma}]"}))
    checks.append(properties.check_projection_error(seed=seed))
    checks.append(properties.check_scheme_coincidence(seed=seed))
    checks.append(properties.check_moment_boundedness(seed=seed, workers=workers))
    checks.extend(properties.check_instability_contrast(seed=seed, workers=workers))
    checks.append(properties.check_increment_scaling(seed=seed, workers=workers))
    checks.append(properties.check_sde_moment_bound(h_ref=spec.h_ref, n_trajectories=spec.n_trajectories,
                                                    seed=seed, workers=workers))
    checks.append(properties.check_lipschitz_tv_order())
    _, tv_fit = run_lipschitz_oracle()
    report.scalars["lipschitz_tv_slope"] = tv_fit.slope
    checks.append(properties.check_mixing_plan(seed=seed))

    report.checks = checks
    for failure in report.property_failures:
        logger.error(f"Check {failure.assumption_id} failed: {failure.violations}/{failure.samples} "
                     f"violations, worst margin {failure.worst_margin:.4g}")
    report.runtime = time.perf_counter() - started
    return report


def run_lipschitz_oracle(h_grid: Sequence[float] = tuple(2.0 ** -k for k in range(3, 8)),
                         dims: Sequence[int] = (1, 10)) -> Tuple[List[ErrorRecord], OrderFit]:
    """Exact TV between the LMC stationary law on OU and its target, per (d, h), with the fitted order

    Both laws are products of identical coordinates, so the per-coordinate
    distance is reported for every d.
    """
    rows = []
    for d in sorted(dims):
        for h, tv in properties.lipschitz_tv_points(h_grid):
            rows.append(ErrorRecord(scheme=SchemeKind.LMC.value, model=ModelKind.OU.value, phi="TV", h=h, d=d,
                                    estimate=tv, reference=0.0, abs_error=abs(tv), std_error=0.0))
    rows = _sorted_rows(rows)
    first = [(r.h, r.abs_error) for r in rows if r.d == rows[0].d]
    return rows, fit_order(first, label="lmc_ou_tv")


def run_sample(spec: ExperimentSpec) -> ExperimentReport:
    """One ensemble of the chosen scheme, expectations of the standard test functions"""
    h = spec.h_grid[0] if spec.h_grid else config.CONVERGE_H_GRID[0]
    if spec.n_iterations is not None:
        n_steps = spec.n_iterations
    else:
        n_steps = LiteralParser.steps_for_horizon(spec.horizon or config.CONVERGE_T, h)
    d = spec.dimensions[0]
    cfg = SamplerConfig(scheme=spec.scheme, model=build_model(spec, d), h=h, n_steps=n_steps,
                        theta=spec.theta, n_trajectories=spec.n_trajectories, master_seed=spec.seed)
    report = ExperimentReport(spec=spec)
    _phi2_note(spec, report)
    started = time.perf_counter()

    ensemble = run_ensemble(cfg, spec.workers)
    key = f"{spec.scheme.value},d={d},h={h!r}"
    report.divergence_counts[key] = ensemble.n_diverged
    if ensemble.n_diverged > config.MAX_DIVERGED_FRACTION * spec.n_trajectories:
        report.failed_cells.append(key)
    _dump(spec, ensemble)
    if ensemble.n_diverged < ensemble.n_trajectories:
        for phi in standard_test_functions(spec.phi2_gap):
            mean, std_error = estimate_expectation(ensemble, phi)
            report.scalars[f"E[{phi.name}]"] = mean
            report.scalars[f"E[{phi.name}].std_error"] = std_error
    report.runtime = time.perf_counter() - started
    return report


def run_mixing(spec: ExperimentSpec, epsilon: float, gamma: float, C: float = 1.0, C_star: float = 1.0,
               c_star: float = 1.0, mean_x0_norm: float = 0.0, phi_sup_norm: float = 1.0) -> ExperimentReport:
    plan = plan_mixing(epsilon, gamma, spec.dimensions[0], C, C_star, c_star, mean_x0_norm, phi_sup_norm)
    mixing, bias = tv_error_budget(plan.k, plan.h, gamma, plan.d, C, C_star, c_star, mean_x0_norm,
                                   phi_sup_norm)
    report = ExperimentReport(spec=spec, mixing_plan=plan)
    report.scalars["mixing_term"] = mixing
    report.scalars["bias_term"] = bias
    report.notes.append(plan.note)
    return report


DRIVERS = {
    ExperimentKind.CONVERGE: run_convergence,
    ExperimentKind.DENSITY: run_density,
    ExperimentKind.DIMDEP: run_dimdep,
    ExperimentKind.VERIFY: run_verify,
    ExperimentKind.SAMPLE: run_sample,
}
