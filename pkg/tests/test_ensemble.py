import numpy as np
import pytest

from common.errors import InvalidParameterError
from common.numerics import row_norms
from models import SamplerConfig, SchemeKind
from services.drift_models import make_double_well, make_ou
from services.ensemble import dump_ensemble, load_ensemble_csv, reference_config, run_ensemble, run_reference
from services.samplers import projection_for


def _config(**overrides):
    fields = dict(scheme=SchemeKind.PLMC, model=make_double_well(1.0, 1.0, 3), h=2.0 ** -4, n_steps=16,
                  n_trajectories=600, master_seed=11)
    fields.update(overrides)
    return SamplerConfig(**fields)


def test_results_do_not_depend_on_worker_count():
    cfg = _config()
    serial = run_ensemble(cfg, workers=1)
    threaded = run_ensemble(cfg, workers=4)
    assert np.array_equal(serial.states, threaded.states)
    assert np.array_equal(serial.diverged_step, threaded.diverged_step)
    assert serial.config_hash == threaded.config_hash


def test_trajectory_count_keeps_shared_prefix():
    small = run_ensemble(_config(n_trajectories=300), workers=1)
    large = run_ensemble(_config(n_trajectories=600), workers=2)
    assert np.array_equal(small.states, large.states[:300])


def test_seed_changes_states():
    a = run_ensemble(_config(n_trajectories=10), workers=1)
    b = run_ensemble(_config(n_trajectories=10, master_seed=12), workers=1)
    assert not np.array_equal(a.states, b.states)


def test_checkpoints():
    ens = run_ensemble(_config(n_trajectories=20, n_steps=10, checkpoint_every=5), workers=1)
    assert [step for step, _ in ens.checkpoints] == [0, 5, 10]
    assert np.array_equal(ens.checkpoints[-1][1], ens.states)
    assert np.all(ens.checkpoints[0][1] == 0.0)


def test_unprojected_scheme_diverges_and_is_flagged():
    cfg = _config(scheme=SchemeKind.LMC, x0=(10.0, 10.0, 10.0), h=0.125, n_steps=50, n_trajectories=40)
    ens = run_ensemble(cfg, workers=1)
    assert ens.n_diverged == 40
    assert np.all(np.isnan(ens.states))
    assert np.all(ens.diverged_step > 0)
    assert not ens.finite_mask.any()

    plmc = run_ensemble(cfg.model_copy(update={"scheme": SchemeKind.PLMC}), workers=1)
    assert not plmc.diverged
    assert np.all(np.isfinite(plmc.states))


def test_projected_states_reported_on_request():
    cfg = _config(n_trajectories=50, report_projected=True, x0=(5.0, 0.0, 0.0), n_steps=1)
    ens = run_ensemble(cfg, workers=1)
    cap = projection_for(cfg.model, cfg.h, cfg.theta).cap_radius
    assert ens.projected_states.shape == ens.states.shape
    assert np.all(row_norms(ens.projected_states) <= cap)
    assert run_ensemble(cfg.model_copy(update={"report_projected": False}), workers=1).projected_states is None


def test_reference_config_coupled_and_independent():
    cfg = _config(coupled_reference=True, noise_substeps=4)
    coupled = reference_config(cfg, 2.0 ** -6)
    assert coupled.scheme == SchemeKind.REFERENCE
    assert coupled.n_steps == 64 and coupled.lane == cfg.lane and coupled.noise_substeps == 1

    independent = reference_config(_config(), 2.0 ** -6)
    assert independent.n_steps == 64 and independent.lane == 1

    with pytest.raises(InvalidParameterError):
        reference_config(cfg, 0.3 * 2.0 ** -4)


def test_coupled_reference_at_the_same_step_reproduces_the_coarse_run():
    cfg = _config(n_trajectories=30, coupled_reference=True)
    coarse = run_ensemble(cfg, workers=1)
    reference = run_reference(cfg, cfg.h, workers=1)
    assert np.array_equal(coarse.states, reference.states)


def test_coupled_coarse_run_tracks_its_fine_reference():
    model = make_ou(2)
    cfg = SamplerConfig(scheme=SchemeKind.LMC, model=model, h=2.0 ** -3, n_steps=8, n_trajectories=200,
                        master_seed=3, coupled_reference=True, noise_substeps=8)
    coarse = run_ensemble(cfg, workers=1)
    fine = run_reference(cfg, 2.0 ** -6, workers=1)
    gap = row_norms(coarse.states - fine.states)
    assert gap.mean() < 0.3


def test_dump_round_trip(tmp_path):
    ens = run_ensemble(_config(n_trajectories=12), workers=1)
    path = tmp_path / "states.csv"
    dump_ensemble(ens, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "# scheme,model,d,h,N,M,seed"
    assert lines[1].startswith("# PLMC,doublewell,3,")
    assert np.array_equal(load_ensemble_csv(str(path)), ens.states)

    npy = tmp_path / "states.npy"
    dump_ensemble(ens, str(npy), "npy")
    assert np.array_equal(np.load(npy), ens.states)
