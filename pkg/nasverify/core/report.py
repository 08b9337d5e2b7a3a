"""Report Formatting.

This module provides the verification report and its human (rich) and machine (JSON)
renderings.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import rich.table
from pydantic import BaseModel, ConfigDict

from nasverify.core.verifier import TraceStep

logger = logging.getLogger(__name__)

EXIT_CODES: dict[str, int] = {
    "satisfied": 0,
    "valid": 0,
    "exported": 0,
    "simulated": 0,
    "computed": 0,
    "violated": 1,
    "unbounded": 1,
}


class Report(BaseModel):
    """Outcome of one CLI command; every field shows up in both renderings."""

    model_config = ConfigDict(frozen=True)

    command: str
    model: str
    verdict: str
    bound_ticks: int | None = None
    bound_ms: float | None = None
    worst_case_ticks: int | None = None
    worst_case_ms: float | None = None
    static_estimate_ticks: tuple[int, int] | None = None
    states_explored: int = 0
    timelocks: int = 0
    wall_time_s: float = 0.0
    messages: tuple[str, ...] = ()
    trace: tuple[TraceStep, ...] = ()

    @property
    def exit_code(self) -> int:
        return EXIT_CODES.get(self.verdict, 2)

    def rows(self) -> list[tuple[str, str]]:
        def show(value) -> str:
            return "N/A" if value is None else str(value)

        estimate = self.static_estimate_ticks
        return [
            ("Command", self.command),
            ("Model", self.model),
            ("Verdict", self.verdict),
            ("Bound [ticks]", show(self.bound_ticks)),
            ("Bound [ms]", show(self.bound_ms)),
            ("Worst case [ticks]", show(self.worst_case_ticks)),
            ("Worst case [ms]", show(self.worst_case_ms)),
            ("Static estimate [ticks]", "N/A" if estimate is None else f"[{estimate[0]}, {estimate[1]}]"),
            ("States explored", str(self.states_explored)),
            ("Timelocks", str(self.timelocks)),
            ("Wall time [s]", f"{self.wall_time_s:.3f}"),
            ("Trace steps", str(len(self.trace))),
            ("Messages", "\n".join(self.messages) or "-"),
        ]


class ReportFormatter:
    """Formats a report for the terminal or for machines."""

    def __init__(self, report: Report):
        """
        Initialize the ReportFormatter.

        Args:
            report (Report): The report to render.
        """
        self.report = report

    def verdict_line(self) -> str:
        r = self.report
        line = f"{r.command} {r.model}: {r.verdict.upper()}"
        if r.bound_ticks is not None:
            line += f" (bound {r.bound_ticks} ticks)"
        if r.worst_case_ticks is not None:
            line += f" (worst case {r.worst_case_ticks} ticks)"
        return line

    def format_table(self) -> rich.table.Table:
        """Build the report table, one row per field.

        Returns:
            rich.table.Table: The table, ready for a rich console.
        """
        table = rich.table.Table(title="Verification Report")
        table.add_column("Field", justify="left")
        table.add_column("Value", justify="left")
        for field, value in self.report.rows():
            table.add_row(field, value)
        return table

    def format_machine(self) -> str:
        return self.report.model_dump_json(indent=2)

    @staticmethod
    def format_trace(trace: Sequence[TraceStep]) -> str:
        return json.dumps([step.model_dump(mode="json") for step in trace], indent=2)

    @staticmethod
    def format_trace_human(trace: Sequence[TraceStep]) -> str:
        lines = []
        for k, step in enumerate(trace):
            lines.append(f"{k:3d}. {step.description}")
            lines.append(f"     at {', '.join(step.locations)} [{step.mode.value}]  {step.zone}")
        return "\n".join(lines)

    def write_to_file(self, text: str, output_file: Path):
        """Write rendered text to a file.

        Args:
            text (str): The rendered report or trace.
            output_file (Path): The path to the output file.

        Raises:
            Exception: If there is an error writing to the file.
        """

        try:
            with output_file.open("w", encoding="utf-8") as f:
                f.write(text)
            logger.info(f"Output written to {output_file}")
        except Exception as e:
            logger.error(f"Error writing to file {output_file}: {e}")
            raise


def parse_report(text: str) -> Report:
    return Report.model_validate_json(text)
