"""Bounded response verification.

Forward zone-graph exploration of a network with a response monitor fused into the
symbolic state. The monitor owns one extra clock ``z`` (the last zone index):

* Idle -> Armed when a step makes the stimulus formula true (rising edge); ``z`` is reset.
* Armed -> Idle when a step reaches a location vector satisfying the response formula.
* While Armed a later stimulus keeps ``z``, so ``z`` times the oldest unanswered stimulus.
* While Idle ``z`` is free and takes no part in subsumption.

The property ``stimulus ->_d response`` is violated iff some reachable Armed state
admits ``z > d``, or some valuation of an Armed state can neither delay nor take a
discrete step (a timelock).
"""
from __future__ import annotations

import logging
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from nasverify.core.automaton import fresh_name
from nasverify.core.formula import LocationPredicate, StateFormula, compile_formula
from nasverify.core.network import CompiledNetwork, DiffConstraint, EdgeStep, Network, compile_network, enabled_edges
from nasverify.core.zone import (
    INF,
    LE_ZERO,
    Zone,
    constrain,
    extrapolate,
    free,
    raw_bound,
    raw_strict,
    raw_value,
    reset,
    subtract,
    up,
)
from nasverify.exceptions import MalformedNetwork, ResourceExhausted

logger = logging.getLogger(__name__)


class MonitorMode(str, Enum):
    IDLE = "idle"
    ARMED = "armed"


class Query(BaseModel):
    """``stimulus ->_d response``: every stimulus is answered within ``bound_d`` ticks."""

    model_config = ConfigDict(frozen=True)

    stimulus: StateFormula
    response: StateFormula
    bound_d: int = Field(ge=0)

    @model_validator(mode="after")
    def _warn_identical(self) -> "Query":
        if self.stimulus == self.response:
            logger.warning(f"stimulus and response are the same formula ({self.stimulus}); the query holds trivially")
        return self


class ExploreLimits(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_states: int = Field(100_000, gt=0)
    order: Literal["bfs", "dfs", "random"] = "bfs"
    seed: int | None = None


@dataclass(frozen=True, slots=True)
class SymbolicState:
    locations: tuple[str, ...]
    mode: MonitorMode
    zone: Zone


class TraceStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    description: str
    locations: tuple[str, ...]
    mode: MonitorMode
    zone: str


class VerdictStatus(str, Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    EXHAUSTED = "exhausted"


class Verdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: VerdictStatus
    trace: tuple[TraceStep, ...] = ()
    states_explored: int = 0
    timelocks: int = 0
    reason: str | None = None

    @property
    def satisfied(self) -> bool:
        return self.status is VerdictStatus.SATISFIED

    @property
    def violated(self) -> bool:
        return self.status is VerdictStatus.VIOLATED


@dataclass(slots=True)
class _Node:
    state: SymbolicState
    parent: int | None
    description: str


def _never(_: object) -> bool:
    return False


class ResponseExplorer:
    """Symbolic semantics of a network instrumented for one query.

    Without a query the monitor stays Idle and the explorer computes plain reachability.
    """

    def __init__(self, network: Network, query: Query | None = None):
        self.network = network
        self.query = query
        self.compiled: CompiledNetwork = compile_network(network)
        self.z = self.compiled.dim
        self.dim = self.compiled.dim + 1
        self.clock_names = self.compiled.clock_names + (fresh_name("z", self.compiled.clock_names),)
        bound = query.bound_d if query is not None else 0
        self.max_constants = list(self.compiled.max_constants) + [bound]
        self._stimulus: LocationPredicate = _never
        self._response: LocationPredicate = _never
        if query is not None:
            self._stimulus = compile_formula(query.stimulus, network)
            self._response = compile_formula(query.response, network)

    # semantics

    def _invariant(self, zone: Zone, locations: tuple[str, ...]) -> Zone:
        for i, j, raw in self.compiled.invariant(locations):
            zone = constrain(zone, i, j, raw)
        return zone

    def _monitor(
        self, zone: Zone, locations: tuple[str, ...], mode: MonitorMode, source: tuple[str, ...] | None
    ) -> tuple[MonitorMode, Zone]:
        if mode is MonitorMode.IDLE and self._stimulus(locations):
            if source is None or not self._stimulus(source):
                mode = MonitorMode.ARMED
                zone = reset(zone, [self.z])
        if mode is MonitorMode.ARMED and self._response(locations):
            mode = MonitorMode.IDLE
        if mode is MonitorMode.IDLE:
            zone = free(zone, self.z)
        return mode, zone

    def _settle(
        self, zone: Zone, locations: tuple[str, ...], mode: MonitorMode, source: tuple[str, ...] | None
    ) -> SymbolicState | None:
        """Monitor update, delay, invariant and extrapolation after entering ``locations``."""
        zone = self._invariant(zone, locations)
        if zone.is_empty():
            return None
        mode, zone = self._monitor(zone, locations, mode, source)
        zone = self._invariant(up(zone), locations)
        return SymbolicState(locations, mode, extrapolate(zone, self.max_constants))

    def initial_state(self) -> SymbolicState:
        locations = self.network.initial_locations()
        state = self._settle(Zone.zero(self.dim), locations, MonitorMode.IDLE, None)
        if state is None:
            raise MalformedNetwork(f"the initial locations {locations} violate their invariants at time zero")
        return state

    def successors(self, state: SymbolicState) -> Iterator[tuple[str, SymbolicState]]:
        """Every discrete step from ``state`` followed by the maximal delay."""
        for step in enabled_edges(self.compiled, state.locations, state.zone):
            zone = state.zone
            for i, j, raw in step.guard:
                zone = constrain(zone, i, j, raw)
            if zone.is_empty():
                continue
            zone = reset(zone, step.resets)
            target = step.targets(state.locations)
            succ = self._settle(zone, target, state.mode, state.locations)
            if succ is not None:
                yield step.describe(self.network), succ

    def _enabling(self, step: EdgeStep, source: tuple[str, ...]) -> tuple[DiffConstraint, ...] | None:
        """Constraints on the source valuation under which ``step`` fires; None if it never does."""
        resets = set(step.resets)
        target: list[DiffConstraint] = []
        for i, j, raw in self.compiled.invariant(step.targets(source)):
            if i in resets and j in resets:
                if raw < LE_ZERO:
                    return None
            elif i in resets:
                target.append((0, j, raw))
            elif j in resets:
                target.append((i, 0, raw))
            else:
                target.append((i, j, raw))
        return step.guard + tuple(target)

    def stuck(self, state: SymbolicState) -> Zone | None:
        """Valuations of ``state`` at an invariant's upper bound from which no discrete step fires."""
        remaining = [
            constrain(state.zone, 0, i, raw_bound(-raw_value(raw)))
            for i, j, raw in self.compiled.invariant(state.locations)
            if j == 0 and raw < INF and not raw_strict(raw)
        ]
        remaining = [z for z in remaining if not z.is_empty()]
        if not remaining:
            return None
        for step in enabled_edges(self.compiled, state.locations, state.zone):
            enabling = self._enabling(step, state.locations)
            if enabling is None:
                continue
            remaining = [piece for z in remaining for piece in subtract(z, enabling)]
            if not remaining:
                return None
        return remaining[0]

    def deadline_exceeded(self, state: SymbolicState) -> Zone | None:
        """The part of an Armed state's zone where ``z > d``, if any."""
        if self.query is None or state.mode is not MonitorMode.ARMED:
            return None
        late = constrain(state.zone, 0, self.z, raw_bound(-self.query.bound_d, strict=True))
        return None if late.is_empty() else late

    def trace_step(self, description: str, state: SymbolicState, zone: Zone | None = None) -> TraceStep:
        return TraceStep(
            description=description,
            locations=state.locations,
            mode=state.mode,
            zone=(zone or state.zone).render(self.clock_names),
        )

    # exploration

    def explore(self, limits: ExploreLimits | None = None) -> Verdict:
        limits = limits or ExploreLimits()
        rng = random.Random(limits.seed)
        nodes: list[_Node] = []
        passed: dict[tuple[tuple[str, ...], MonitorMode], list[Zone]] = {}
        waiting: deque[int] = deque()
        timelocks = 0

        def trace(index: int, final: TraceStep | None = None) -> tuple[TraceStep, ...]:
            steps: list[TraceStep] = []
            at: int | None = index
            while at is not None:
                node = nodes[at]
                steps.append(self.trace_step(node.description, node.state))
                at = node.parent
            steps.reverse()
            if final is not None:
                steps.append(final)
            return tuple(steps)

        def violated(index: int, reason: str, late: Zone | None) -> Verdict:
            final = None
            if late is not None:
                final = self.trace_step(reason, nodes[index].state, late)
            logger.info(f"Violation after {len(nodes)} states: {reason}")
            return Verdict(
                status=VerdictStatus.VIOLATED,
                trace=trace(index, final),
                states_explored=len(nodes),
                timelocks=timelocks,
                reason=reason,
            )

        def add(state: SymbolicState, parent: int | None, description: str) -> int | None:
            key = (state.locations, state.mode)
            zones = passed.setdefault(key, [])
            if any(z.includes(state.zone) for z in zones):
                return None
            zones[:] = [z for z in zones if not state.zone.includes(z)]
            zones.append(state.zone)
            nodes.append(_Node(state, parent, description))
            waiting.append(len(nodes) - 1)
            return len(nodes) - 1

        d = self.query.bound_d if self.query is not None else None
        initial = self.initial_state()
        index = add(initial, None, "initial")
        late = self.deadline_exceeded(initial)
        if late is not None:
            return violated(index, f"response deadline {d} exceeded", late)

        while waiting:
            if limits.order == "bfs":
                current = waiting.popleft()
            elif limits.order == "dfs":
                current = waiting.pop()
            else:
                k = rng.randrange(len(waiting))
                waiting[k], waiting[-1] = waiting[-1], waiting[k]
                current = waiting.pop()
            state = nodes[current].state
            if not any(z is state.zone for z in passed.get((state.locations, state.mode), ())):
                # subsumed after it was queued
                continue
            for description, succ in self.successors(state):
                late = self.deadline_exceeded(succ)
                if late is not None:
                    nodes.append(_Node(succ, current, description))
                    return violated(len(nodes) - 1, f"response deadline {d} exceeded", late)
                if len(nodes) >= limits.max_states:
                    logger.warning(f"State cap of {limits.max_states} reached")
                    return Verdict(
                        status=VerdictStatus.EXHAUSTED,
                        states_explored=len(nodes),
                        timelocks=timelocks,
                        reason=f"state cap {limits.max_states} reached",
                    )
                add(succ, current, description)
            blocked = self.stuck(state)
            if blocked is not None:
                if state.mode is MonitorMode.ARMED:
                    return violated(current, "timelock while a stimulus is pending", blocked)
                timelocks += 1
                logger.warning(f"Timelock at {state.locations}: time cannot progress and no edge is enabled")
        logger.info(f"Explored {len(nodes)} symbolic states, no violation")
        return Verdict(status=VerdictStatus.SATISFIED, states_explored=len(nodes), timelocks=timelocks)


def explore(n: Network, q: Query, limits: ExploreLimits | None = None) -> Verdict:
    return ResponseExplorer(n, q).explore(limits)


def successor(s: SymbolicState, n: Network, q: Query | None = None) -> list[SymbolicState]:
    return [state for _, state in ResponseExplorer(n, q).successors(s)]


def default_search_cap(n: Network) -> int:
    return 2 * sum(compile_network(n).max_constants) + 1


def worst_case_response(
    n: Network,
    stimulus: StateFormula,
    response: StateFormula,
    limits: ExploreLimits | None = None,
    cap: int | None = None,
) -> int | None:
    """Smallest ``d`` for which ``stimulus ->_d response`` holds, or None if none up to ``cap``."""
    cap = default_search_cap(n) if cap is None else cap

    def holds(d: int) -> bool:
        verdict = explore(n, Query(stimulus=stimulus, response=response, bound_d=d), limits)
        if verdict.status is VerdictStatus.EXHAUSTED:
            raise ResourceExhausted(f"exploration for d={d} hit the state cap", verdict.states_explored)
        return verdict.satisfied

    if not holds(cap):
        logger.info(f"No response bound up to {cap}")
        return None
    lo, hi = 0, cap
    while lo < hi:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid + 1
    logger.info(f"Worst-case response time: {lo}")
    return lo
