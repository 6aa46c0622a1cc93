"""CLI interface for the parity bounds toolkit."""

import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, Optional

import click
import structlog

from parity_bounds.application.dtos import CommandReportDto, ProblemSpec, RunOptions
from parity_bounds.application.services import AnalysisService
from parity_bounds.domain.exceptions import (
    CapacityError,
    NumericError,
    ParityBoundsException,
    SpecParseError,
    UsageError,
    ValidationError,
)
from parity_bounds.domain.models import Problem
from parity_bounds.domain.services import IFixtureRepository, IProblemRepository
from parity_bounds.infrastructure.fixtures import FixtureRepository
from parity_bounds.infrastructure.spec_codec import (
    JsonProblemRepository,
    render_report,
    render_trace_csv,
    serialize_spec,
)

# Configure logging
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        structlog.processors.JSONRenderer(),
    ],
    context_class=dict,
    logger_factory=structlog.stdlib.LoggerFactory(),
    wrapper_class=structlog.stdlib.BoundLogger,
    cache_logger_on_first_use=True,
)

logger = structlog.get_logger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2


def problem_options(f: Callable[..., Any]) -> Callable[..., Any]:
    """Problem source and the flags shared by the analysis subcommands."""
    decorators = [
        click.argument(
            "spec",
            required=False,
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
        ),
        click.option("--fixture", "-f", help="Built-in fixture (e.g. chsh, pauli-site-3)"),
        click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0)),
        click.option("--restarts", default=32, show_default=True, type=click.IntRange(min=1)),
        click.option("--max-iters", default=500, show_default=True, type=click.IntRange(min=1)),
        click.option("--tol", default=1e-10, show_default=True, type=float),
        click.option("--max-dim", default=4096, show_default=True, type=click.IntRange(min=1)),
        click.option(
            "--out",
            "-o",
            type=click.Path(dir_okay=False, path_type=Path),
            help="Write the report here instead of stdout",
        ),
    ]
    for decorator in reversed(decorators):
        f = decorator(f)
    return f


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
def cli(verbose: bool) -> None:
    """Parity Bounds CLI.

    Defect-weight norm bounds, product thresholds and total-correlation
    bounds for multipartite observables.
    """
    if verbose:
        logging.basicConfig(level=logging.DEBUG)


@cli.command()
@problem_options
@click.option("--exact", is_flag=True, help="Also compute ||B||^2 densely")
def defects(spec: Optional[Path], fixture: Optional[str], exact: bool, **flags: Any) -> None:
    """Defect weights and the denominator m + sum phi.

    Examples:
        parity-bounds defects --fixture tripartite-pauli
        parity-bounds defects problem.json --exact
    """
    run_command("defects", spec, fixture, RunOptions(exact=exact, **_run_flags(flags)), flags)


@cli.command()
@problem_options
def norm(spec: Optional[Path], fixture: Optional[str], **flags: Any) -> None:
    """Defect report together with the exact ||B||^2."""
    run_command("norm", spec, fixture, RunOptions(exact=True, **_run_flags(flags)), flags)


@cli.command()
@problem_options
@click.option("--site-constants", is_flag=True, help="Also compute C_r and prod C_r^(1/2)")
def threshold(
    spec: Optional[Path], fixture: Optional[str], site_constants: bool, **flags: Any
) -> None:
    """See-saw lower bound on the product threshold, with its certificate."""
    options = RunOptions(site_constants=site_constants, **_run_flags(flags))
    run_command("threshold", spec, fixture, options, flags)


@cli.command()
@problem_options
@click.option("--gamma", type=float, help="Threshold to use (must upper-bound the true one)")
def bound(
    spec: Optional[Path], fixture: Optional[str], gamma: Optional[float], **flags: Any
) -> None:
    """Excess and total-correlation lower bounds for the problem's state."""
    run_command("bound", spec, fixture, RunOptions(gamma=gamma, **_run_flags(flags)), flags)


@cli.command()
@problem_options
@click.option("--gamma", type=float, help="Threshold to use (must upper-bound the true one)")
@click.option("--t-max", type=float, help="End of the time grid")
@click.option("--steps", type=int, help="Number of grid points (>= 2)")
@click.option("--lambda", "lam", type=float, help="Assumed entropy decay rate")
@click.option("--epsilon", type=float, help="Excess tolerance for the survival time")
@click.option(
    "--summary",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the JSON summary here (default: stderr)",
)
def decay(
    spec: Optional[Path],
    fixture: Optional[str],
    gamma: Optional[float],
    t_max: Optional[float],
    steps: Optional[int],
    lam: Optional[float],
    epsilon: Optional[float],
    summary: Optional[Path],
    **flags: Any,
) -> None:
    """CSV trace of the excess under product depolarizing noise.

    Examples:
        parity-bounds decay --fixture depolarizing-demo
        parity-bounds decay --fixture chsh --gamma 1.4142135623730951 --t-max 2 --steps 201
    """
    options = RunOptions(
        gamma=gamma, t_max=t_max, steps=steps, lam=lam, epsilon=epsilon, **_run_flags(flags)
    )
    flags["summary"] = summary
    run_command("decay", spec, fixture, options, flags)


@cli.command()
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--restarts", default=32, show_default=True, type=click.IntRange(min=1))
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the report here instead of stdout",
)
def verify(seed: int, restarts: int, out: Optional[Path]) -> None:
    """Check every built-in fixture against its known values."""
    options = RunOptions(seed=seed, restarts=restarts)
    run_command("verify", None, None, options, {"out": out})


@cli.command("fixtures")
def list_fixtures() -> None:
    """List the built-in fixtures."""
    for name in FixtureRepository().names():
        click.echo(name)
    click.echo("pauli-site-N (any N >= 2)")


@cli.command("export")
@click.argument("name")
@click.option(
    "--out",
    "-o",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the document here instead of stdout",
)
def export_fixture(name: str, out: Optional[Path]) -> None:
    """Write a built-in fixture as a problem document."""
    try:
        problem = FixtureRepository().get(name).problem
        _emit(serialize_spec(ProblemSpec.from_problem(problem)), out)
    except UsageError as e:
        logger.error("Usage error", error=str(e))
        click.echo(f"❌ {e}", err=True)
        sys.exit(EXIT_USAGE)


def _run_flags(flags: dict[str, Any]) -> dict[str, Any]:
    return {key: flags[key] for key in ("seed", "restarts", "max_iters", "tol", "max_dim")}


def _load_problem(
    spec: Optional[Path],
    fixture: Optional[str],
    problems: IProblemRepository,
    fixtures: IFixtureRepository,
) -> Problem:
    if spec is not None and fixture is not None:
        raise UsageError("Give either a problem document or --fixture, not both")
    if fixture is not None:
        return fixtures.get(fixture).problem
    if spec is not None:
        return problems.load(spec)
    raise UsageError("A problem document or --fixture is required")


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        click.echo(text)
    else:
        out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _write_report(report: CommandReportDto, flags: dict[str, Any]) -> None:
    if report.trace is not None:
        _emit(render_trace_csv(report.trace), flags.get("out"))
        summary_path = flags.get("summary")
        if summary_path is None:
            click.echo(render_report(report.document), err=True)
        else:
            _emit(render_report(report.document), summary_path)
        return
    _emit(render_report({"command": report.command, **report.document}), flags.get("out"))


def run_command(
    command: str,
    spec: Optional[Path],
    fixture: Optional[str],
    options: RunOptions,
    flags: dict[str, Any],
) -> None:
    """Load the problem, run the subcommand, write its report and set the exit status."""
    try:
        fixtures = FixtureRepository()
        problems = JsonProblemRepository()
        problem = None if command == "verify" else _load_problem(spec, fixture, problems, fixtures)
        service = AnalysisService(fixtures)
        report = service.run(command, problem, options)
        _write_report(report, flags)
        if not report.passed:
            failed = [f"{row.fixture}/{row.check}" for row in report.rows if not row.passed]
            logger.error("Verification failed", failed=failed)
            click.echo(f"❌ {len(failed)} check(s) failed: {', '.join(failed)}", err=True)
            sys.exit(EXIT_FAILURE)

    except UsageError as e:
        logger.error("Usage error", error=str(e))
        click.echo(f"❌ {e}", err=True)
        sys.exit(EXIT_USAGE)
    except SpecParseError as e:
        logger.error("Malformed problem document", error=str(e), line=e.line, column=e.column)
        click.echo(f"❌ Malformed problem document: {e}", err=True)
        sys.exit(EXIT_FAILURE)
    except ValidationError as e:
        logger.error("Invalid input", error=str(e))
        click.echo(f"❌ Invalid input: {e}", err=True)
        sys.exit(EXIT_FAILURE)
    except CapacityError as e:
        logger.error("Capacity exceeded", requested=e.requested, cap=e.cap)
        click.echo(f"❌ {e} (raise it with --max-dim)", err=True)
        sys.exit(EXIT_FAILURE)
    except NumericError as e:
        logger.error("Numerical failure", error=str(e), iterations=e.iterations)
        click.echo(f"❌ Numerical failure: {e}", err=True)
        sys.exit(EXIT_FAILURE)
    except ParityBoundsException as e:
        logger.error("Parity bounds error", error=str(e))
        click.echo(f"❌ Error: {e}", err=True)
        sys.exit(EXIT_FAILURE)


def main() -> None:
    """Main entry point for CLI."""
    cli(sys.argv[1:])


if __name__ == "__main__":
    main()
