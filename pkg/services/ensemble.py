"""
Parallel ensemble runner.

Trajectory i is driven by derive_stream(seed, i, lane) and every kernel is
row-wise, so the output does not depend on chunking or on the number of
worker threads.
"""
import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

import config
from common.errors import InvalidParameterError
from common.parsers import LiteralParser
from models import Ensemble, SamplerConfig, SchemeKind
from services.assumptions import admissible_h_max, estimate_cf
from services.drift_models import with_cf
from services.randomness import coarse_increment, derive_stream, gaussian_block
from services.samplers import advance, is_diverged, project, projection_for

logger = logging.getLogger(__name__)

_PROJECTED_SCHEMES = (SchemeKind.PLMC, SchemeKind.REFERENCE)


class _ChunkResult:
    def __init__(self, states: np.ndarray, diverged_step: np.ndarray,
                 checkpoints: List[Tuple[int, np.ndarray]]):
        self.states = states
        self.diverged_step = diverged_step
        self.checkpoints = checkpoints


def _advise_step_size(cfg: SamplerConfig) -> None:
    """Warn when a PLMC step leaves the admissible window; never blocks the run"""
    model = cfg.model
    if cfg.scheme not in _PROJECTED_SCHEMES or model.a1 is None:
        return
    if model.cf is None:
        model = with_cf(model, estimate_cf(model, [cfg.h], cfg.theta))
    h_max = admissible_h_max(model)
    if cfg.h >= h_max:
        logger.warning(f"h={cfg.h:.6g} is outside the admissible window (0, {h_max:.6g}) "
                       f"for {model.name} with C_f={model.cf:.4g}; running anyway")


def _run_chunk(cfg: SamplerConfig, lo: int, hi: int) -> _ChunkResult:
    n, d, m = hi - lo, cfg.dimension, cfg.noise_substeps
    streams = [derive_stream(cfg.master_seed, i, cfg.lane) for i in range(lo, hi)]
    y = np.tile(cfg.initial_state(), (n, 1))
    diverged_step = np.full(n, -1, dtype=np.int64)
    active = ~is_diverged(y)
    diverged_step[~active] = 0
    checkpoints = [(0, y.copy())] if cfg.checkpoint_every else []

    block = max(1, config.NOISE_BLOCK_BUDGET // (n * m * d))
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while step < cfg.n_steps:
            width = min(block, cfg.n_steps - step)
            noise = np.stack([gaussian_block(s, width * m, d) for s in streams]).reshape(n, width, m, d)
            for j in range(width):
                xi = coarse_increment(noise[:, j], m)
                y = advance(cfg.scheme, y, cfg.model, cfg.h, cfg.theta, xi)
                step += 1
                bad = active & is_diverged(y)
                if bad.any():
                    diverged_step[bad] = step
                    active &= ~bad
                y[~active] = np.nan
                if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    checkpoints.append((step, y.copy()))
    return _ChunkResult(y, diverged_step, checkpoints)


def run_ensemble(cfg: SamplerConfig, workers: Optional[int] = None) -> Ensemble:
    """Advance M trajectories N steps; divergent trajectories are flagged, not fatal"""
    workers = workers or config.DEFAULT_WORKERS
    _advise_step_size(cfg)
    started = time.perf_counter()

    M = cfg.n_trajectories
    bounds = [(lo, min(lo + config.TRAJECTORY_CHUNK, M)) for lo in range(0, M, config.TRAJECTORY_CHUNK)]
    if workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(cfg, lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_chunk(cfg, *b), bounds))

    states = np.concatenate([p.states for p in parts])
    diverged_step = np.concatenate([p.diverged_step for p in parts])
    checkpoints = [
        (step, np.concatenate([p.checkpoints[k][1] for p in parts]))
        for k, (step, _) in enumerate(parts[0].checkpoints)
    ]
    projected = None
    if cfg.report_projected and cfg.scheme in _PROJECTED_SCHEMES:
        projected = project(states, projection_for(cfg.model, cfg.h, cfg.theta))

    ensemble = Ensemble(
        scheme=cfg.scheme,
        model_name=cfg.model.name,
        h=cfg.h,
        n_steps=cfg.n_steps,
        master_seed=cfg.master_seed,
        lane=cfg.lane,
        coupled=cfg.coupled_reference,
        config_hash=cfg.config_hash(),
        states=states,
        projected_states=projected,
        checkpoints=checkpoints,
        diverged_step=diverged_step,
        wall_clock=time.perf_counter() - started,
        steps_taken=cfg.n_steps * M,
    )
    if ensemble.diverged:
        logger.warning(f"{cfg.scheme.value} on {cfg.model.name}: {ensemble.n_diverged}/{M} trajectories diverged")
    logger.debug(f"{cfg.scheme.value} d={cfg.dimension} h={cfg.h:.6g} N={cfg.n_steps} M={M} "
                 f"finished in {ensemble.wall_clock:.2f}s")
    return ensemble


def reference_config(cfg: SamplerConfig, h_ref: float) -> SamplerConfig:
    """Fine-step PLMC description reaching the same time T = N h"""
    if cfg.coupled_reference:
        m = round(cfg.h / h_ref)
        if m < 1 or abs(m * h_ref - cfg.h) > 1e-12 * cfg.h:
            raise InvalidParameterError(f"coupled reference needs h={cfg.h} to be a multiple of h_ref={h_ref}")
        n_ref = cfg.n_steps * m
        lane = cfg.lane
    else:
        n_ref = LiteralParser.steps_for_horizon(cfg.horizon, h_ref)
        lane = config.INDEPENDENT_REFERENCE_LANE
    return cfg.model_copy(update={
        "scheme": SchemeKind.REFERENCE,
        "h": h_ref,
        "n_steps": n_ref,
        "noise_substeps": 1,
        "lane": lane,
        "checkpoint_every": None,
    })


def run_reference(cfg: SamplerConfig, h_ref: float, workers: Optional[int] = None) -> Ensemble:
    """Surrogate for the exact law at T; coupled runs share the fine noise of the coarse run"""
    return run_ensemble(reference_config(cfg, h_ref), workers)


def dump_ensemble(ensemble: Ensemble, path: str, fmt: str = "csv") -> None:
    """Terminal states, one row per trajectory"""
    if fmt == "npy":
        np.save(path, ensemble.states)
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("# scheme,model,d,h,N,M,seed\n")
        f.write(f"# {ensemble.scheme.value},{ensemble.model_name},{ensemble.dimension},"
                f"{ensemble.h!r},{ensemble.n_steps},{ensemble.n_trajectories},{ensemble.master_seed}\n")
        writer = csv.writer(f, lineterminator="\n")
        for row in ensemble.states:
            writer.writerow([format(v, config.CSV_FLOAT_FORMAT) for v in row])
    logger.info(f"Dumped {ensemble.n_trajectories} states to {path}")


def load_ensemble_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
