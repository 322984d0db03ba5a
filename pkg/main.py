"""
Command-line entry point for the PLMC sampler and its experiment harness.
"""
import logging
import sys
from typing import List, Optional, Sequence

import click
from pydantic import ValidationError

import config
from common.errors import ConfigurationError, EstimationError, InvalidParameterError
from common.parsers import LiteralParser
from models import ExperimentKind, ExperimentReport, ExperimentSpec, ModelKind, OutputFormat, SchemeKind
from services import experiments
from services.reports import write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PROPERTY_FAILURE = 2
EXIT_DIVERGED = 3

DEFAULT_DIMENSIONS = {
    ExperimentKind.SAMPLE: [2],
    ExperimentKind.CONVERGE: [6],
    ExperimentKind.DENSITY: [10],
    ExperimentKind.DIMDEP: config.DIMDEP_DIMENSIONS,
    ExperimentKind.VERIFY: [4],
}


def _literal(parse):
    def callback(ctx, param, value):
        if value is None:
            return None
        try:
            return parse(value)
        except InvalidParameterError as e:
            raise click.BadParameter(str(e), ctx=ctx, param=param)
    return callback


def experiment_options(func):
    """Flags shared by every experiment subcommand"""
    options = [
        click.option("--model", type=click.Choice([m.value for m in ModelKind]), default=ModelKind.DOUBLEWELL.value),
        click.option("--alpha", type=float, default=1.0),
        click.option("--beta", type=float, default=1.0),
        click.option("--scheme", type=click.Choice(["plmc", "lmc", "mtlmc"], case_sensitive=False),
                     default="plmc"),
        click.option("--d", "dimensions", callback=_literal(LiteralParser.parse_int_list),
                     help="Dimension or comma list of dimensions"),
        click.option("--h", "h_grid", callback=_literal(LiteralParser.parse_real_list),
                     help="Step size list, e.g. 2^-5,2^-6"),
        click.option("--href", "h_ref", callback=_literal(LiteralParser.parse_real)),
        click.option("--T", "horizon", callback=_literal(LiteralParser.parse_real)),
        click.option("--iterations", "n_iterations", type=int),
        click.option("--theta", type=float, default=config.DEFAULT_THETA),
        click.option("--phi2-gap", "phi2_gap", type=float, default=config.PHI2_GAP_FILL,
                     help="PHI2 value on [5/2, 3)"),
        click.option("--traj", "n_trajectories", type=int),
        click.option("--seed", type=int, default=config.DEFAULT_SEED),
        click.option("--out", "output", type=click.Path(dir_okay=False)),
        click.option("--format", "fmt", type=click.Choice([f.value for f in OutputFormat]),
                     default=OutputFormat.CSV.value),
        click.option("--desk-scale/--paper-scale", "desk_scale", default=True),
        click.option("--independent-ref", is_flag=True, default=False),
        click.option("--dump", type=click.Path(dir_okay=False)),
        click.option("--workers", type=int, default=config.DEFAULT_WORKERS),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_spec(kind: ExperimentKind, desk_scale: bool, fmt: str, dimensions: Optional[List[int]],
               n_trajectories: Optional[int], h_ref: Optional[float], scheme: str, h_grid: Optional[List[float]],
               **fields) -> ExperimentSpec:
    preset_traj = config.DESK_TRAJECTORIES if desk_scale else config.FULL_TRAJECTORIES
    preset_href = config.DESK_H_REF if desk_scale else config.FULL_H_REF
    return ExperimentSpec(
        kind=kind,
        format=OutputFormat(fmt),
        scheme=SchemeKind(scheme.upper()),
        dimensions=dimensions or DEFAULT_DIMENSIONS[kind],
        n_trajectories=n_trajectories or preset_traj,
        h_ref=h_ref or preset_href,
        h_grid=h_grid or [],
        **fields,
    )


def finish(report: ExperimentReport) -> int:
    """Write the report, print the summary line and pick the exit code"""
    spec = report.spec
    if spec.output:
        write_report(report, spec.output, spec.format)
    failures = report.property_failures
    summary = (f"{spec.kind.value}: {len(report.rows)} rows, {len(report.orders)} orders, "
               f"{len(report.checks) - len(failures)}/{len(report.checks)} checks passed, "
               f"{len(report.failed_cells)} failed cells")
    for name in sorted(report.scalars):
        if not name.endswith(".std_error"):
            summary += f", {name}={report.scalars[name]:.6g}"
    click.echo(summary)
    logger.info(f"{spec.kind.value} finished in {report.runtime:.2f}s")
    if failures:
        return EXIT_PROPERTY_FAILURE
    if report.failed_cells:
        return EXIT_DIVERGED
    return EXIT_OK


@click.group()
@click.version_option(config.VERSION, prog_name=config.APP_NAME)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("-q", "--quiet", is_flag=True, help="Warnings and errors only")
def cli(verbose: bool, quiet: bool):
    """Projected Langevin Monte Carlo sampler and experiment harness"""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else getattr(logging, config.LOG_LEVEL)
    logging.basicConfig(level=level, format=config.LOG_FORMAT)
    logging.getLogger().setLevel(level)


@cli.command()
@experiment_options
def sample(**kwargs):
    """Run one ensemble and report test-function expectations"""
    return finish(experiments.run_sample(build_spec(ExperimentKind.SAMPLE, **kwargs)))


@cli.command()
@experiment_options
def converge(**kwargs):
    """Weak errors and fitted orders against a fine reference"""
    return finish(experiments.run_convergence(build_spec(ExperimentKind.CONVERGE, **kwargs)))


@cli.command()
@experiment_options
def density(**kwargs):
    """PLMC against MTLMC histograms of the first coordinate"""
    return finish(experiments.run_density(build_spec(ExperimentKind.DENSITY, **kwargs)))


@cli.command()
@experiment_options
def dimdep(**kwargs):
    """Weak errors after a fixed number of iterations across dimensions"""
    return finish(experiments.run_dimdep(build_spec(ExperimentKind.DIMDEP, **kwargs)))


@cli.command()
@experiment_options
@click.option("--a1", type=float)
@click.option("--a2", type=float)
@click.option("--atilde1", type=float)
@click.option("--atilde2", type=float)
@click.option("--radius-R", "radius_R", type=float)
def verify(**kwargs):
    """Assumption, projection and moment property suite"""
    return finish(experiments.run_verify(build_spec(ExperimentKind.VERIFY, **kwargs)))


@cli.command()
@click.option("--gamma", type=float, required=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--eps", "epsilon", callback=_literal(LiteralParser.parse_real), required=True)
@click.option("--C", "C", type=float, default=1.0)
@click.option("--Cstar", "C_star", type=float, default=1.0)
@click.option("--cstar", "c_star", type=float, default=1.0)
@click.option("--x0-norm", "mean_x0_norm", type=float, default=0.0, help="E|x0|")
@click.option("--phi-sup", "phi_sup_norm", type=float, default=1.0, help="Sup norm of the test function")
@click.option("--out", "output", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice([f.value for f in OutputFormat]), default=OutputFormat.CSV.value)
def mixing(gamma, d, epsilon, C, C_star, c_star, mean_x0_norm, phi_sup_norm, output, fmt):
    """Step size and iteration count reaching epsilon in TV"""
    spec = ExperimentSpec(kind=ExperimentKind.MIXING, dimensions=[d], output=output, format=OutputFormat(fmt))
    report = experiments.run_mixing(spec, epsilon, gamma, C, C_star, c_star, mean_x0_norm, phi_sup_norm)
    plan = report.mixing_plan
    if output:
        write_report(report, output, spec.format)
    click.echo(f"h={plan.h:g}, k={plan.k} ({plan.note})")
    return EXIT_OK


def main_cli(argv: Optional[Sequence[str]] = None) -> int:
    try:
        code = cli.main(args=list(argv) if argv is not None else None, prog_name=config.APP_NAME,
                        standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_INVALID
    except click.Abort:
        return EXIT_INVALID
    except ValidationError as e:
        click.echo(f"Invalid parameters: {e}", err=True)
        return EXIT_INVALID
    except EstimationError as e:
        logger.error(f"Estimation failed: {e}")
        return EXIT_DIVERGED
    except (InvalidParameterError, ConfigurationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return EXIT_INVALID
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main_cli())
