"""Steam boiler process simulation.

Two pumps fill the boiler, the heater vaporizes water at a constant rate:

    dw/dt = u1(t) + u2(t) - r

where ``u_i`` is either 0 or the pump rate ``P_i``. A pump switched on delivers water
only ``T_i`` minutes later; switching off is immediate. The rates are piecewise
constant, so the level is computed exactly segment by segment and ``dt`` only sets
the output sampling grid.

Units: liters and minutes.
"""
from __future__ import annotations

import logging
from enum import Enum
from fractions import Fraction
from math import floor
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from nasverify.exceptions import DivisionDegenerate, InvalidConfig

logger = logging.getLogger(__name__)

MS_PER_MINUTE: int = 60_000


class BoilerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: float = Field(gt=0)
    pump_rates: tuple[float, float]
    pump_start_delays: tuple[float, float] = (0.0, 0.0)
    vaporization_rate: float = Field(ge=0)
    # heater power, recorded with the configuration only
    power: float = 0.0
    level_limits: tuple[float, float]

    @model_validator(mode="after")
    def _check(self) -> "BoilerConfig":
        if any(p < 0 for p in self.pump_rates):
            raise ValueError("pump rates must be non-negative")
        if any(t < 0 for t in self.pump_start_delays):
            raise ValueError("pump start delays must be non-negative")
        w_min, w_max = self.level_limits
        if not w_min < self.w0 < w_max:
            raise ValueError(f"initial level {self.w0} must lie strictly inside the limits [{w_min}, {w_max}]")
        return self

    @property
    def w_min(self) -> float:
        return self.level_limits[0]

    @property
    def w_max(self) -> float:
        return self.level_limits[1]


def boiler_config(**values) -> BoilerConfig:
    try:
        return BoilerConfig(**values)
    except ValidationError as e:
        raise InvalidConfig(f"invalid boiler configuration: {e}") from e


class PumpState(str, Enum):
    ON = "on"
    OFF = "off"


class PumpCommand(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: float = Field(ge=0)
    pump: Literal[1, 2]
    command: PumpState


class PumpCommandSchedule(BaseModel):
    model_config = ConfigDict(frozen=True)

    commands: tuple[PumpCommand, ...] = ()

    @model_validator(mode="after")
    def _ordered(self) -> "PumpCommandSchedule":
        times = [c.time for c in self.commands]
        if any(a > b for a, b in zip(times, times[1:])):
            raise ValueError("pump command times must be non-decreasing")
        return self


class ModeSwitch(BaseModel):
    """A pump's delivery actually starting or stopping."""

    model_config = ConfigDict(frozen=True)

    time: float
    pump: Literal[1, 2]
    state: PumpState
    level: float | None = None


class CriticalKind(str, Enum):
    NEAR_LOW_LIMIT = "near_low_limit"
    NEAR_HIGH_LIMIT = "near_high_limit"
    MODE_SWITCH = "mode_switch"


class CriticalPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: float
    kind: CriticalKind
    margin: float = Field(ge=0)


class Trajectory(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: tuple[float, ...]
    w: tuple[float, ...]
    u1: tuple[float, ...]
    u2: tuple[float, ...]
    mode: tuple[str, ...]
    switches: tuple[ModeSwitch, ...] = ()

    @property
    def dt(self) -> float:
        return self.t[1] - self.t[0] if len(self.t) > 1 else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t, "w": self.w, "u1": self.u1, "u2": self.u2, "mode": self.mode})


def mode_label(u1_on: bool, u2_on: bool) -> str:
    return {(False, False): "idle", (True, False): "pump1", (False, True): "pump2", (True, True): "both"}[
        (u1_on, u2_on)
    ]


def effective_switches(cfg: BoilerConfig, sched: PumpCommandSchedule) -> list[ModeSwitch]:
    """Instants at which delivery really changes.

    An On takes effect ``T_i`` later unless an Off for the same pump arrives first
    (an Off at exactly the effect instant cancels it); an Off takes effect at once.
    """
    switches: list[ModeSwitch] = []
    delivering = {1: False, 2: False}
    pending: dict[int, float | None] = {1: None, 2: None}

    def flush(until: float, inclusive: bool) -> None:
        for pump in (1, 2):
            due = pending[pump]
            if due is not None and (due < until or (inclusive and due <= until)):
                delivering[pump] = True
                pending[pump] = None
                switches.append(ModeSwitch(time=due, pump=pump, state=PumpState.ON))

    for cmd in sched.commands:
        flush(cmd.time, inclusive=False)
        pump = cmd.pump
        if cmd.command is PumpState.ON:
            if delivering[pump] or pending[pump] is not None:
                continue
            delay = cfg.pump_start_delays[pump - 1]
            if delay == 0:
                delivering[pump] = True
                switches.append(ModeSwitch(time=cmd.time, pump=pump, state=PumpState.ON))
            else:
                pending[pump] = cmd.time + delay
        else:
            pending[pump] = None
            if delivering[pump]:
                delivering[pump] = False
                switches.append(ModeSwitch(time=cmd.time, pump=pump, state=PumpState.OFF))
    flush(float("inf"), inclusive=True)
    switches.sort(key=lambda s: s.time)
    return switches


def _segments(cfg: BoilerConfig, switches: Sequence[ModeSwitch]) -> tuple[np.ndarray, ...]:
    """Breakpoints with the level, pump on-states, flows and net rate valid from each breakpoint on."""
    starts = [0.0]
    states = [(False, False)]
    on = {1: False, 2: False}
    for s in switches:
        on[s.pump] = s.state is PumpState.ON
        if s.time == starts[-1]:
            states[-1] = (on[1], on[2])
        else:
            starts.append(s.time)
            states.append((on[1], on[2]))
    b = np.asarray(starts, dtype=float)
    pumps = np.asarray(states, dtype=bool)
    u = pumps * np.asarray(cfg.pump_rates, dtype=float)
    rate = u.sum(axis=1) - cfg.vaporization_rate
    levels = np.empty_like(b)
    levels[0] = cfg.w0
    if len(b) > 1:
        levels[1:] = cfg.w0 + np.cumsum(rate[:-1] * np.diff(b))
    return b, levels, pumps, u, rate


def level_at(cfg: BoilerConfig, sched: PumpCommandSchedule, t: float | np.ndarray) -> float | np.ndarray:
    """Exact closed-form water level at time(s) ``t``."""
    b, levels, _, _, rate = _segments(cfg, effective_switches(cfg, sched))
    times = np.asarray(t, dtype=float)
    k = np.searchsorted(b, times, side="right") - 1
    w = levels[k] + rate[k] * (times - b[k])
    return float(w) if np.ndim(w) == 0 else w


def simulate(cfg: BoilerConfig, sched: PumpCommandSchedule, horizon: float, dt: float) -> Trajectory:
    """Sample the exact level on the uniform grid ``0, dt, 2 dt, ... <= horizon``."""
    if dt <= 0:
        raise InvalidConfig(f"sampling step dt={dt} must be positive")
    if horizon < dt:
        raise InvalidConfig(f"horizon {horizon} must be at least one step dt={dt}")
    switches = effective_switches(cfg, sched)
    b, levels, pumps, u, rate = _segments(cfg, switches)
    n = int(floor(horizon / dt + 1e-9))
    t = np.arange(n + 1, dtype=float) * dt
    k = np.searchsorted(b, t, side="right") - 1
    w = levels[k] + rate[k] * (t - b[k])
    mode = [mode_label(bool(p1), bool(p2)) for p1, p2 in pumps[k]]
    switch_at = np.searchsorted(b, [s.time for s in switches], side="right") - 1
    switches = [
        s.model_copy(update={"level": float(levels[j] + rate[j] * (s.time - b[j]))})
        for s, j in zip(switches, switch_at)
        if s.time <= horizon
    ]
    logger.debug(f"Simulated {n + 1} samples over {horizon} min with {len(switches)} mode switches")
    return Trajectory(
        t=tuple(t.tolist()),
        w=tuple(w.tolist()),
        u1=tuple(u[k, 0].tolist()),
        u2=tuple(u[k, 1].tolist()),
        mode=tuple(mode),
        switches=tuple(switches),
    )


def _margin(cfg: BoilerConfig, w: float) -> float:
    return max(0.0, min(w - cfg.w_min, cfg.w_max - w))


def find_critical_points(traj: Trajectory, cfg: BoilerConfig, margin_threshold: float) -> list[CriticalPoint]:
    """First sample of every stretch within ``margin_threshold`` of a limit, plus every mode switch."""
    if not traj.t:
        raise InvalidConfig("cannot search an empty trajectory")
    w = np.asarray(traj.w)
    points: list[CriticalPoint] = []
    for kind, distance in (
        (CriticalKind.NEAR_LOW_LIMIT, np.abs(w - cfg.w_min)),
        (CriticalKind.NEAR_HIGH_LIMIT, np.abs(cfg.w_max - w)),
    ):
        near = distance <= margin_threshold
        starts = np.flatnonzero(near & ~np.concatenate(([False], near[:-1])))
        for i in starts:
            points.append(CriticalPoint(time=traj.t[i], kind=kind, margin=_margin(cfg, float(w[i]))))
    for s in traj.switches:
        level = s.level if s.level is not None else float(np.interp(s.time, traj.t, traj.w))
        points.append(CriticalPoint(time=s.time, kind=CriticalKind.MODE_SWITCH, margin=_margin(cfg, level)))
    points.sort(key=lambda p: (p.time, p.kind.value))
    return points


def _exact(value: float) -> Fraction:
    return Fraction(repr(value))


def slack_minutes(cfg: BoilerConfig, w_at_stimulus: float) -> tuple[Fraction | None, Fraction | None]:
    """Minutes until the low and the high limit are reached in the worst case (None: never)."""
    w = _exact(w_at_stimulus)
    w_min, w_max = _exact(cfg.w_min), _exact(cfg.w_max)
    if not w_min < w < w_max:
        raise InvalidConfig(f"level {w_at_stimulus} must lie strictly inside [{cfg.w_min}, {cfg.w_max}]")
    r = _exact(cfg.vaporization_rate)
    fill = _exact(cfg.pump_rates[0]) + _exact(cfg.pump_rates[1]) - r
    low = (w - w_min) / r if r > 0 else None
    high = (w_max - w) / fill if fill > 0 else None
    return low, high


def required_response_bound(cfg: BoilerConfig, w_at_stimulus: float, resolution: float = 1) -> int:
    """Largest actuation delay in ticks that keeps the level inside its limits.

    ``resolution`` is ticks per millisecond. The draining side assumes both pumps stay off,
    the filling side assumes both pumps deliver.
    """
    low, high = slack_minutes(cfg, w_at_stimulus)
    sides = [s for s in (low, high) if s is not None]
    if not sides:
        raise DivisionDegenerate("both the drain and the fill rate are zero; the level never reaches a limit")
    ticks = min(sides) * MS_PER_MINUTE * _exact(resolution)
    bound = floor(ticks)
    logger.info(f"Slack low={low} min, high={high} min; required response bound {bound} ticks")
    return bound


def export_trajectory(traj: Trajectory, path: Path) -> None:
    try:
        traj.to_frame().to_csv(path, index=False)
        logger.info(f"Trajectory written to {path}")
    except Exception as e:
        logger.error(f"Error writing trajectory to {path}: {e}")
        raise


def plot_trajectory(traj: Trajectory, cfg: BoilerConfig, path: Path) -> None:
    """Level and pump flows over time, with the level limits."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_w, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    ax_w.plot(traj.t, traj.w, label="w")
    ax_w.axhline(cfg.w_min, color="tab:red", linestyle="--", label="w_min")
    ax_w.axhline(cfg.w_max, color="tab:red", linestyle=":", label="w_max")
    ax_w.set_ylabel("level [l]")
    ax_w.legend(loc="best")
    ax_u.step(traj.t, traj.u1, where="post", label="u1")
    ax_u.step(traj.t, traj.u2, where="post", label="u2")
    ax_u.set_xlabel("time [min]")
    ax_u.set_ylabel("flow [l/min]")
    ax_u.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Plot written to {path}")
