"""Command line interface.

    nasverify check models/steam_boiler.yaml
    nasverify wcrt models/two_stage.yaml
    nasverify simulate models/steam_boiler.yaml --horizon 5 --dt 0.01
    nasverify export models/two_stage.yaml -o two_stage.xta
    nasverify validate models/bad_channels.yaml

Exit codes: 0 satisfied or success, 1 violated, 2 error or exploration cap reached.
"""
from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import click
import rich.console
from rich.logging import RichHandler

from nasverify.core.report import Report, ReportFormatter
from nasverify.core.verifier import ExploreLimits
from nasverify.exceptions import NasVerifyError
from nasverify.generate_report import (
    generate_check_report,
    generate_export_report,
    generate_simulation_report,
    generate_validation_report,
    generate_wcrt_report,
)
from nasverify.model_file import ModelBundle, parse_model, to_ticks

logger = logging.getLogger("nasverify")


class CommandFailed(click.ClickException):
    exit_code = 2


def configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.ERROR if quiet else logging.DEBUG if verbose else logging.WARNING
    handler = RichHandler(console=rich.console.Console(stderr=True), show_path=False)
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def common_options(command: Callable) -> Callable:
    """Options shared by every subcommand."""

    @click.option("--trace", "trace_path", type=click.Path(dir_okay=False, path_type=Path), help="Write the trace as JSON.")
    @click.option("--max-states", type=click.IntRange(min=1), default=100_000, show_default=True)
    @click.option("--order", type=click.Choice(["bfs", "dfs", "random"]), default="bfs", show_default=True)
    @click.option("--seed", type=int, default=None, help="Seed for --order random.")
    @click.option("--format", "fmt", type=click.Choice(["human", "machine"]), default="human", show_default=True)
    @click.option("--quiet", is_flag=True, help="Only print the verdict line; log errors only.")
    @click.option("--verbose", is_flag=True, help="Log debug details.")
    @functools.wraps(command)
    def wrapper(*args, quiet: bool, verbose: bool, max_states: int, order: str, seed: int | None, **kwargs):
        configure_logging(quiet, verbose)
        limits = ExploreLimits(max_states=max_states, order=order, seed=seed)
        try:
            return command(*args, quiet=quiet, limits=limits, **kwargs)
        except NasVerifyError as e:
            raise CommandFailed(str(e)) from e

    return wrapper


def load_model(path: Path) -> ModelBundle:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise CommandFailed(f"cannot read {path}: {e}") from e
    return parse_model(text)


def print_report(report: Report, fmt: str, quiet: bool, trace_path: Path | None) -> None:
    """Print the report using rich in a table, or as JSON for machines."""
    formatter = ReportFormatter(report)
    console = rich.console.Console()
    if fmt == "machine":
        click.echo(formatter.format_machine())
    else:
        click.echo(formatter.verdict_line())
        if not quiet:
            console.print(formatter.format_table())
            if report.trace:
                console.print(formatter.format_trace_human(report.trace), markup=False, highlight=False)
    if trace_path is not None:
        formatter.write_to_file(formatter.format_trace(report.trace), trace_path)


@click.group()
def cli() -> None:
    """Response-time verification of networked automation time-chains."""


model_argument = click.argument("model", type=click.Path(exists=True, dir_okay=False, path_type=Path))


@cli.command()
@model_argument
@click.option(
    "--bound", type=click.FloatRange(min=0), default=None, help="Response bound in ms (default: from the model)."
)
@common_options
@click.pass_context
def check(ctx, model: Path, bound: float | None, fmt: str, quiet: bool, trace_path: Path | None, limits: ExploreLimits):
    """Verify stimulus leads to response within the bound."""
    bundle = load_model(model)
    bound_ticks = None if bound is None else to_ticks(bound, bundle.resolution)
    report = generate_check_report(bundle, str(model), bound_ticks, limits)
    print_report(report, fmt, quiet, trace_path)
    ctx.exit(report.exit_code)


@cli.command()
@model_argument
@common_options
@click.pass_context
def wcrt(ctx, model: Path, fmt: str, quiet: bool, trace_path: Path | None, limits: ExploreLimits):
    """Worst-case response time by binary search over the bound."""
    report = generate_wcrt_report(load_model(model), str(model), limits)
    print_report(report, fmt, quiet, trace_path)
    ctx.exit(report.exit_code)


@cli.command()
@model_argument
@click.option("--horizon", type=float, required=True, help="Simulated time in minutes.")
@click.option("--dt", type=float, required=True, help="Sampling step in minutes.")
@click.option("--threshold", type=float, default=1.0, show_default=True, help="Critical margin in liters.")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="Trajectory as CSV.")
@click.option("--plot", type=click.Path(dir_okay=False, path_type=Path), help="Trajectory plot (needs matplotlib).")
@click.option(
    "--samples", type=click.IntRange(min=1), default=1000, show_default=True, help="Simulated chain events."
)
@common_options
@click.pass_context
def simulate(
    ctx,
    model: Path,
    horizon: float,
    dt: float,
    threshold: float,
    output: Path | None,
    plot: Path | None,
    samples: int,
    fmt: str,
    quiet: bool,
    trace_path: Path | None,
    limits: ExploreLimits,
):
    """Simulate the boiler, list its critical operating points and sample the chain latency."""
    report, _, _ = generate_simulation_report(
        load_model(model), str(model), horizon, dt, threshold, output, plot, samples, limits.seed
    )
    print_report(report, fmt, quiet, trace_path)
    ctx.exit(report.exit_code)


@cli.command()
@model_argument
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option(
    "--bound", type=click.FloatRange(min=0), default=None, help="Response bound in ms (default: from the model)."
)
@common_options
@click.pass_context
def export(
    ctx,
    model: Path,
    output: Path,
    bound: float | None,
    fmt: str,
    quiet: bool,
    trace_path: Path | None,
    limits: ExploreLimits,
):
    """Export the time-chain as an UPPAAL model and query."""
    bundle = load_model(model)
    bound_ticks = None if bound is None else to_ticks(bound, bundle.resolution)
    report = generate_export_report(bundle, str(model), output, bound_ticks)
    print_report(report, fmt, quiet, trace_path)
    ctx.exit(report.exit_code)


@cli.command()
@model_argument
@common_options
@click.pass_context
def validate(ctx, model: Path, fmt: str, quiet: bool, trace_path: Path | None, limits: ExploreLimits):
    """Parse the model and check well-formedness and channel matching."""
    report = generate_validation_report(load_model(model), str(model))
    print_report(report, fmt, quiet, trace_path)
    if report.messages and report.exit_code:
        for message in report.messages:
            click.echo(message, err=True)
    ctx.exit(report.exit_code)


def cli_main(args: Sequence[str]) -> int:
    """Run the CLI without exiting the interpreter; returns the exit code."""
    try:
        rv = cli.main(args=list(args), prog_name="nasverify", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 2
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


def run() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    run()
