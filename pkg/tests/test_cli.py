import pytest

from main import finish, main_cli
from models import AssumptionReport, ExperimentKind, ExperimentReport, ExperimentSpec

SMALL_CONVERGE = ["converge", "--model", "ou", "--d", "2", "--T", "1", "--h", "2^-2,2^-3", "--href", "2^-5",
                  "--traj", "40", "--seed", "3"]


def test_mixing_prints_the_plan(capsys):
    assert main_cli(["mixing", "--gamma", "1", "--d", "1", "--eps", "0.1", "--C", "1", "--Cstar", "1",
                     "--cstar", "1"]) == 0
    assert "h=0.05, k=60" in capsys.readouterr().out


def test_mixing_rejects_epsilon_outside_unit_interval():
    assert main_cli(["mixing", "--gamma", "1", "--d", "1", "--eps", "1.5"]) == 1


def test_unknown_flag_is_a_usage_error(capsys):
    assert main_cli(["converge", "--bogus", "1"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_horizon_must_be_a_multiple_of_every_step():
    assert main_cli(["converge", "--model", "ou", "--T", "1", "--h", "0.3", "--traj", "10"]) == 1


def test_bad_literal_is_rejected():
    assert main_cli(["converge", "--h", "two"]) == 1


def test_converge_writes_identical_reports_for_any_worker_count(tmp_path, capsys):
    paths = []
    for workers in ("1", "4", "16"):
        path = tmp_path / f"r{workers}.csv"
        assert main_cli(SMALL_CONVERGE + ["--workers", workers, "--out", str(path)]) == 0
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()
    assert "converge: 8 rows" in capsys.readouterr().out


def test_json_format(tmp_path):
    path = tmp_path / "r.json"
    assert main_cli(SMALL_CONVERGE + ["--workers", "1", "--format", "json", "--out", str(path)]) == 0
    assert path.read_text().startswith("{")


def test_sample_with_dump(tmp_path):
    dump = tmp_path / "states.csv"
    assert main_cli(["-q", "sample", "--model", "ou", "--d", "3", "--h", "2^-3", "--iterations", "8", "--traj", "16",
                     "--workers", "1", "--dump", str(dump)]) == 0
    assert dump.exists()


def test_converge_dumps_each_cell(tmp_path):
    dump = tmp_path / "states.csv"
    assert main_cli(SMALL_CONVERGE + ["--workers", "1", "--dump", str(dump)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["states.d2_h0.125.csv", "states.d2_h0.25.csv"]


def test_verify_rejects_dump(tmp_path):
    assert main_cli(["verify", "--dump", str(tmp_path / "states.csv")]) == 1


def test_exit_codes_follow_report_outcome(capsys):
    spec = ExperimentSpec(kind=ExperimentKind.SAMPLE)
    assert finish(ExperimentReport(spec=spec)) == 0
    assert finish(ExperimentReport(spec=spec, failed_cells=["d=2,h=0.5"])) == 3
    failing = AssumptionReport(assumption_id="contractivity", samples=10, violations=1, worst_margin=0.5)
    assert finish(ExperimentReport(spec=spec, checks=[failing], failed_cells=["x"])) == 2
    assert "0/1 checks passed" in capsys.readouterr().out


@pytest.mark.slow
def test_verify_is_deterministic(tmp_path):
    outputs = []
    for workers in ("1", "4", "16"):
        path = tmp_path / f"v{workers}.csv"
        assert main_cli(["verify", "--seed", "7", "--workers", workers, "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


@pytest.mark.slow
def test_verify_fails_with_corrupted_constant():
    assert main_cli(["verify", "--atilde2", "50"]) == 2
