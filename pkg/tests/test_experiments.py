import numpy as np
import pytest
from pydantic import ValidationError

from common.errors import ConfigurationError, InvalidParameterError
from models import ExperimentKind, ExperimentSpec, ModelKind, PointSampling, SamplerConfig, SchemeKind
from services import assumptions, experiments
from services.drift_models import make_double_well
from services.ensemble import load_ensemble_csv, run_ensemble


def _spec(kind, **fields):
    base = dict(kind=kind, model=ModelKind.OU, dimensions=[2], n_trajectories=40, workers=1, seed=5)
    base.update(fields)
    return ExperimentSpec(**base)


def test_spec_validation():
    with pytest.raises(ValidationError):
        _spec(ExperimentKind.CONVERGE, h_grid=[2.0 ** -3, 2.0 ** -2])
    with pytest.raises(ValidationError):
        _spec(ExperimentKind.CONVERGE, h_grid=[0.3], horizon=1.0)
    with pytest.raises(ValidationError):
        _spec(ExperimentKind.CONVERGE, dimensions=[0])


def test_convergence_rows_are_sorted_and_consistent():
    spec = _spec(ExperimentKind.CONVERGE, h_grid=[2.0 ** -2, 2.0 ** -3], horizon=1.0, h_ref=2.0 ** -5)
    report = experiments.run_convergence(spec)
    assert len(report.rows) == 2 * 4
    assert [(r.d, r.h, r.phi) for r in report.rows] == sorted((r.d, r.h, r.phi) for r in report.rows)
    assert all(r.abs_error == abs(r.estimate - r.reference) for r in report.rows)
    assert all(r.model == "ou" and r.alpha is None for r in report.rows)
    assert not report.failed_cells
    assert all(fit.label.endswith("@d2") for fit in report.orders)


def test_convergence_against_itself_has_zero_error():
    spec = _spec(ExperimentKind.CONVERGE, h_grid=[2.0 ** -5], horizon=1.0, h_ref=2.0 ** -5)
    report = experiments.run_convergence(spec)
    assert len(report.rows) == 4
    assert all(r.abs_error == 0.0 for r in report.rows)
    assert report.orders == []
    assert any("skipped" in note for note in report.notes)


def test_density_study_shapes():
    spec = _spec(ExperimentKind.DENSITY, model=ModelKind.DOUBLEWELL, h_grid=[2.0 ** -4], horizon=1.0,
                 n_trajectories=20)
    report = experiments.run_density(spec)
    assert len(report.histograms) == 2 * 80
    assert {row.scheme for row in report.histograms} == {"PLMC", "MTLMC"}
    assert 0.0 <= report.scalars["ks_first_coordinate"] <= 1.0


def test_density_needs_double_well():
    with pytest.raises(ConfigurationError):
        experiments.run_density(_spec(ExperimentKind.DENSITY))


def test_identical_ensembles_have_zero_ks():
    cfg = SamplerConfig(scheme=SchemeKind.PLMC, model=make_double_well(1.0, 1.0, 2), h=0.125, n_steps=8,
                        n_trajectories=30, master_seed=1)
    ens = run_ensemble(cfg, workers=1)
    rows, ks = experiments.compare_densities(ens, ens)
    assert ks == 0.0
    assert len(rows) == 160


def test_dimdep_with_one_dimension_still_emits_rows():
    spec = _spec(ExperimentKind.DIMDEP, model=ModelKind.DOUBLEWELL, h_grid=[2.0 ** -2], n_iterations=5,
                 h_ref=2.0 ** -4, n_trajectories=30)
    report = experiments.run_dimdep(spec)
    assert len(report.rows) == 4
    assert report.orders == []
    assert any("single dimension" in note for note in report.notes)


def test_overrides_reach_the_checkers():
    spec = _spec(ExperimentKind.VERIFY, model=ModelKind.DOUBLEWELL, dimensions=[4], atilde2=50.0)
    model = experiments.build_model(spec, 4)
    assert model.atilde2 == 50.0
    report = assumptions.check_contractivity_at_infinity(model, n_pairs=20_000, sampling=PointSampling.RADIAL)
    assert not report.passed and report.worst_margin > 0


def test_sample_reports_expectations_and_dumps(tmp_path):
    path = tmp_path / "states.csv"
    spec = _spec(ExperimentKind.SAMPLE, h_grid=[2.0 ** -3], n_iterations=10, n_trajectories=20, dump=str(path))
    report = experiments.run_sample(spec)
    assert set(report.scalars) >= {"E[PHI1]", "E[ATAN_NORM]", "E[PHI2].std_error"}
    assert load_ensemble_csv(str(path)).shape == (20, 2)


def test_mixing_driver():
    spec = ExperimentSpec(kind=ExperimentKind.MIXING, dimensions=[1])
    report = experiments.run_mixing(spec, epsilon=0.1, gamma=1.0)
    assert (report.mixing_plan.h, report.mixing_plan.k) == (0.05, 60)
    assert report.scalars["mixing_term"] <= 0.05


def test_lipschitz_oracle_rows():
    rows, fit = experiments.run_lipschitz_oracle()
    assert len(rows) == 2 * 5
    assert abs(fit.slope - 1.0) <= 0.05
    by_d = {d: [r.abs_error for r in rows if r.d == d] for d in (1, 10)}
    np.testing.assert_array_equal(by_d[1], by_d[10])


@pytest.mark.slow
def test_verify_suite_passes_on_unit_double_well():
    report = experiments.run_verify(_spec(ExperimentKind.VERIFY, model=ModelKind.DOUBLEWELL, dimensions=[4],
                                          n_trajectories=1000, workers=4))
    assert report.property_failures == []


def test_convergence_dumps_every_coarse_cell(tmp_path):
    spec = _spec(ExperimentKind.CONVERGE, h_grid=[2.0 ** -2, 2.0 ** -3], horizon=1.0, h_ref=2.0 ** -5,
                 dump=str(tmp_path / "states.csv"))
    experiments.run_convergence(spec)
    for name in ("states.d2_h0.25.csv", "states.d2_h0.125.csv"):
        assert load_ensemble_csv(str(tmp_path / name)).shape == (40, 2)


def test_density_dumps_both_schemes(tmp_path):
    spec = _spec(ExperimentKind.DENSITY, model=ModelKind.DOUBLEWELL, h_grid=[2.0 ** -4], horizon=0.5,
                 n_trajectories=10, dump=str(tmp_path / "states.npy"))
    experiments.run_density(spec)
    assert np.load(tmp_path / "states.PLMC.npy").shape == (10, 2)
    assert np.load(tmp_path / "states.MTLMC.npy").shape == (10, 2)


def test_verify_rejects_dump(tmp_path):
    spec = _spec(ExperimentKind.VERIFY, dump=str(tmp_path / "states.csv"))
    with pytest.raises(InvalidParameterError):
        experiments.run_verify(spec)


def test_phi2_gap_value_is_noted_and_used():
    spec = _spec(ExperimentKind.SAMPLE, h_grid=[2.0 ** -3], n_iterations=4, n_trajectories=10, phi2_gap=0.0)
    report = experiments.run_sample(spec)
    assert "PHI2 on [5/2, 3) takes the value 0" in report.notes
