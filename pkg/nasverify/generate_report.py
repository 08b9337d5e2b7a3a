"""Generate reports for the CLI commands from a parsed model."""
from __future__ import annotations

import logging
import time
from pathlib import Path

from nasverify.core.boiler import (
    CriticalPoint,
    PumpCommandSchedule,
    Trajectory,
    export_trajectory,
    find_critical_points,
    plot_trajectory,
    simulate,
)
from nasverify.core.jitter import chain_latency_bounds, chain_members, sample_chain_latencies
from nasverify.core.patterns import check_channel_matching
from nasverify.core.report import Report, ReportFormatter
from nasverify.core.verifier import ExploreLimits, ResponseExplorer, worst_case_response
from nasverify.exceptions import ChannelMismatch, InvalidBounds, InvalidConfig, InvalidPeriod, NotComposable
from nasverify.model_file import ModelBundle
from nasverify.uppaal import export_uppaal, parse_xta

logger = logging.getLogger(__name__)


def _static_estimate(bundle: ModelBundle) -> tuple[int, int]:
    bounds = chain_latency_bounds(bundle.chain)
    return bounds.min, bounds.max


def generate_check_report(
    bundle: ModelBundle, model: str, bound_ticks: int | None = None, limits: ExploreLimits | None = None
) -> Report:
    """Verify ``stimulus ->_d response`` on the model's time-chain."""
    started = time.perf_counter()
    query = bundle.query(bound_ticks)
    logger.info(f"Checking {model} with bound {query.bound_d} ticks")
    verdict = ResponseExplorer(bundle.network(), query).explore(limits)
    messages = [verdict.reason] if verdict.reason else []
    return Report(
        command="check",
        model=model,
        verdict=verdict.status.value,
        bound_ticks=query.bound_d,
        bound_ms=bundle.to_ms(query.bound_d),
        static_estimate_ticks=_static_estimate(bundle),
        states_explored=verdict.states_explored,
        timelocks=verdict.timelocks,
        wall_time_s=time.perf_counter() - started,
        messages=tuple(messages),
        trace=verdict.trace,
    )


def generate_wcrt_report(bundle: ModelBundle, model: str, limits: ExploreLimits | None = None) -> Report:
    """Tightest response bound found by binary search over the bound."""
    started = time.perf_counter()
    worst = worst_case_response(bundle.network(), bundle.stimulus, bundle.response, limits)
    messages = []
    if worst is None:
        messages.append("no finite response bound: the response may never follow the stimulus")
    return Report(
        command="wcrt",
        model=model,
        verdict="computed" if worst is not None else "unbounded",
        worst_case_ticks=worst,
        worst_case_ms=None if worst is None else bundle.to_ms(worst),
        static_estimate_ticks=_static_estimate(bundle),
        wall_time_s=time.perf_counter() - started,
        messages=tuple(messages),
    )


def generate_validation_report(bundle: ModelBundle, model: str) -> Report:
    """Well-formedness of every component and channel matching of the chain, without exploring."""
    started = time.perf_counter()
    messages: list[str] = []
    try:
        # asserts well-formedness of each component body
        members = chain_members(bundle.chain)
        messages.extend(str(v) for v in check_channel_matching(members))
    except ChannelMismatch as e:
        messages.extend(str(v) for v in e.violations)
    except (NotComposable, InvalidBounds, InvalidPeriod) as e:
        messages.append(str(e))
    return Report(
        command="validate",
        model=model,
        verdict="invalid" if messages else "valid",
        static_estimate_ticks=None if messages else _static_estimate(bundle),
        wall_time_s=time.perf_counter() - started,
        messages=tuple(messages),
    )


def generate_simulation_report(
    bundle: ModelBundle,
    model: str,
    horizon: float,
    dt: float,
    threshold: float,
    output: Path | None = None,
    plot: Path | None = None,
    samples: int = 1000,
    seed: int | None = None,
) -> tuple[Report, Trajectory, list[CriticalPoint]]:
    """Simulate the boiler section, list its critical operating points and sample the chain latency."""
    started = time.perf_counter()
    if bundle.boiler is None:
        raise InvalidConfig(f"{model} has no boiler section to simulate")
    schedule = bundle.schedule or PumpCommandSchedule()
    traj = simulate(bundle.boiler, schedule, horizon, dt)
    points = find_critical_points(traj, bundle.boiler, threshold)
    if output is not None:
        export_trajectory(traj, output)
    if plot is not None:
        plot_trajectory(traj, bundle.boiler, plot)
    messages = [f"{p.kind.value} at t={p.time:g} min, margin {p.margin:g} l" for p in points]
    latency = sample_chain_latencies(bundle.chain, samples, seed)
    messages.append(
        f"chain latency over {samples} samples: min {bundle.to_ms(latency.min):g} ms, "
        f"mean {bundle.to_ms(latency.mean):g} ms, max {bundle.to_ms(latency.max):g} ms"
    )
    derived = bundle.derived_bound()
    report = Report(
        command="simulate",
        model=model,
        verdict="simulated",
        bound_ticks=derived,
        bound_ms=None if derived is None else bundle.to_ms(derived),
        static_estimate_ticks=_static_estimate(bundle),
        wall_time_s=time.perf_counter() - started,
        messages=tuple(messages),
    )
    return report, traj, points


def generate_export_report(bundle: ModelBundle, model: str, output: Path, bound_ticks: int | None = None) -> Report:
    """Write the UPPAAL model next to its query file (same name, ``.q`` suffix)."""
    started = time.perf_counter()
    query = bundle.query(bound_ticks)
    exported = export_uppaal(bundle.network(), query)
    parse_xta(exported.model)
    query_file = output.with_suffix(".q")
    report = Report(
        command="export",
        model=model,
        verdict="exported",
        bound_ticks=query.bound_d,
        bound_ms=bundle.to_ms(query.bound_d),
        messages=(f"model written to {output}", f"query written to {query_file}"),
    )
    formatter = ReportFormatter(report)
    formatter.write_to_file(exported.model, output)
    formatter.write_to_file(exported.query, query_file)
    return report.model_copy(update={"wall_time_s": time.perf_counter() - started})
