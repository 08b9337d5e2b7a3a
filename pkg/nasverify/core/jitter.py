"""Jitter taxonomy and time-chain construction.

A component's total jitter is the interval sum of its hardware (constant), software
(execution-time bounds) and communication (time-varying) jitter. A time-chain turns
each component into an atomic action bounded by its total jitter and composes the
actions in parallel, connected by their channels.
"""
from __future__ import annotations

import logging
from typing import Annotated, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nasverify.core.automaton import Direction, Edge, Location, Sync, TimedAutomaton, fresh_name, upper
from nasverify.core.formula import Atom
from nasverify.core.network import Network
from nasverify.core.patterns import (
    DelayBounds,
    PeriodSpec,
    Violation,
    atomic_action,
    is_well_formed,
    par_compose,
    wrap_periodic,
)
from nasverify.exceptions import ChannelMismatch, InvalidBounds, InvalidConfig, InvalidPeriod, NotComposable

logger = logging.getLogger(__name__)

# signed 32-bit clock constants, the range of the exported UPPAAL model
MAX_TICKS: int = 2**31 - 1


class JitterInterval(BaseModel):
    model_config = ConfigDict(frozen=True)

    min: int
    max: int

    @model_validator(mode="after")
    def _check(self) -> "JitterInterval":
        if self.min < 0:
            raise ValueError(f"jitter minimum {self.min} is negative")
        if self.min > self.max:
            raise ValueError(f"jitter interval [{self.min}, {self.max}] is inverted")
        return self

    @classmethod
    def constant(cls, value: int) -> "JitterInterval":
        return cls(min=value, max=value)

    def __add__(self, other: "JitterInterval") -> "JitterInterval":
        return JitterInterval(min=self.min + other.min, max=self.max + other.max)

    def widen(self, lower: int = 0, upper: int = 0) -> "JitterInterval":
        """Lower the minimum by ``lower`` (clamped at zero) and raise the maximum by ``upper``."""
        return JitterInterval(min=max(0, self.min - lower), max=self.max + upper)

    def to_bounds(self) -> DelayBounds:
        return DelayBounds(l_bound=self.min, u_bound=self.max)

    def __str__(self) -> str:
        return f"[{self.min}, {self.max}]"


ZERO = JitterInterval(min=0, max=0)


class JitterSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    hardware: JitterInterval = ZERO
    software: JitterInterval = ZERO
    communication: JitterInterval = ZERO

    @model_validator(mode="after")
    def _hardware_is_constant(self) -> "JitterSpec":
        if self.hardware.min != self.hardware.max:
            raise ValueError(f"hardware jitter must be constant, got {self.hardware}")
        return self


def total_jitter(spec: JitterSpec) -> JitterInterval:
    """``J_T = J_H + J_S + J_C`` as an interval sum."""
    total = spec.hardware + spec.software + spec.communication
    if total.max > MAX_TICKS:
        raise OverflowError(f"total jitter {total} exceeds the tick range (max {MAX_TICKS})")
    return total


class EventTriggered(BaseModel):
    """Activated by the previous component's output; the first component may start unprompted."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["event"] = "event"
    in_chan: str | None = None
    out_chan: str


class Periodic(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["periodic"] = "periodic"
    period: PeriodSpec
    out_chan: str


Activation = Annotated[Union[EventTriggered, Periodic], Field(discriminator="kind")]


class ChainComponent(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    spec: JitterSpec
    activation: Activation

    @property
    def in_chan(self) -> str | None:
        return self.activation.in_chan if isinstance(self.activation, EventTriggered) else None

    @property
    def out_chan(self) -> str:
        return self.activation.out_chan


class TimeChain(BaseModel):
    model_config = ConfigDict(frozen=True)

    components: tuple[ChainComponent, ...]
    stimulus_label: str = "stimulus"
    response_label: str = "response"

    @model_validator(mode="after")
    def _check(self) -> "TimeChain":
        if not self.components:
            raise ValueError("a time-chain needs at least one component")
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("component names must be unique within a chain")
        for c in self.components[1:]:
            if isinstance(c.activation, Periodic):
                raise ValueError(f"only the first component may be periodic, {c.name} is periodic")
        outs = [c.out_chan for c in self.components]
        if len(set(outs)) != len(outs):
            raise ValueError("output channels must be unique within a chain")
        ins = [c.in_chan for c in self.components if c.in_chan is not None]
        if len(set(ins)) != len(ins):
            raise ValueError("input channels must be unique within a chain")
        for label in (self.stimulus_label, self.response_label):
            if not label.isidentifier() or label in ("and", "or"):
                raise ValueError(f"label {label!r} must be an identifier")
        if self.stimulus_label == self.response_label:
            raise ValueError(f"stimulus and response share the label {self.stimulus_label!r}")
        return self

    @property
    def first(self) -> ChainComponent:
        return self.components[0]

    @property
    def last(self) -> ChainComponent:
        return self.components[-1]

    @property
    def is_periodic(self) -> bool:
        return isinstance(self.first.activation, Periodic)


def chain_latency_bounds(chain: TimeChain) -> JitterInterval:
    """Static end-to-end estimate: the interval sum of every component's total jitter."""
    total = ZERO
    for c in chain.components:
        total = total + total_jitter(c.spec)
    return total


class LatencySample(BaseModel):
    """End-to-end latencies of simulated events, in ticks."""

    model_config = ConfigDict(frozen=True)

    latencies: tuple[int, ...] = Field(min_length=1)

    @property
    def min(self) -> int:
        return min(self.latencies)

    @property
    def max(self) -> int:
        return max(self.latencies)

    @property
    def mean(self) -> float:
        return float(np.mean(self.latencies))

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.latencies, q))


def sample_chain_latencies(chain: TimeChain, samples: int = 1000, seed: int | None = None) -> LatencySample:
    """Simulate ``samples`` events through the chain.

    Each component delays an event by a tick count drawn uniformly from its total
    jitter, so every latency lies within ``chain_latency_bounds``.
    """
    if samples < 1:
        raise InvalidConfig(f"need at least one sample, got {samples}")
    rng = np.random.default_rng(seed)
    total = np.zeros(samples, dtype=np.int64)
    for c in chain.components:
        try:
            delay = total_jitter(c.spec)
        except OverflowError as e:
            raise InvalidBounds(f"component {c.name}: {e}") from e
        total += rng.integers(delay.min, delay.max, size=samples, endpoint=True)
    logger.debug(f"sampled {samples} latencies of {[c.name for c in chain.components]}")
    return LatencySample(latencies=tuple(int(v) for v in total))


def chain_formulas(chain: TimeChain) -> tuple[Atom, Atom]:
    """Stimulus: the first component starts acting. Response: the last component is done."""
    return Atom(automaton=chain.first.name, location="Act"), Atom(automaton=chain.last.name, location="Post")


def chain_labels(chain: TimeChain) -> dict[str, Atom]:
    """The chain's stimulus and response labels, bound to the atoms of ``chain_formulas``."""
    stimulus, response = chain_formulas(chain)
    return {chain.stimulus_label: stimulus, chain.response_label: response}


def _check_links(chain: TimeChain) -> None:
    violations: list[Violation] = []
    for a, b in zip(chain.components, chain.components[1:]):
        if a.out_chan != b.in_chan:
            violations.append(Violation(channel=a.out_chan, direction=Direction.EMIT, automaton=a.name))
            if b.in_chan is not None:
                violations.append(Violation(channel=b.in_chan, direction=Direction.RECEIVE, automaton=b.name))
    if violations:
        raise ChannelMismatch("; ".join(str(v) for v in violations), violations)


def _recurrent(body: TimedAutomaton) -> TimedAutomaton:
    """Let the body return from Post to Pre so it can carry the next sample.

    Post is left at the instant it is entered, so a finished sample never looks like
    the response to the next one.
    """
    pre, post = body.pre_locations()[0], body.post_locations()[0]
    edges = tuple(
        e.model_copy(update={"resets": e.resets + tuple(c for c in body.clocks if c not in e.resets)})
        if e.target == post.id
        else e
        for e in body.edges
    )
    urgent = post.model_copy(update={"invariant": post.invariant + (upper(body.clocks[0], 0),)})
    locations = tuple(urgent if loc.id == post.id else loc for loc in body.locations)
    return body.model_copy(
        update={"locations": locations, "edges": edges + (Edge(source=post.id, target=pre.id),)}
    )


def _source(channel: str, taken: Sequence[str]) -> TimedAutomaton:
    return TimedAutomaton(
        name=fresh_name("Source", taken),
        locations=(Location(id="Start"), Location(id="Done")),
        edges=(Edge(source="Start", target="Done", sync=Sync(channel=channel, direction=Direction.EMIT)),),
        initial="Start",
    )


def _sink(channel: str, taken: Sequence[str]) -> TimedAutomaton:
    return TimedAutomaton(
        name=fresh_name("Sink", taken),
        locations=(Location(id="Wait"),),
        edges=(Edge(source="Wait", target="Wait", sync=Sync(channel=channel, direction=Direction.RECEIVE)),),
        initial="Wait",
    )


def chain_members(chain: TimeChain) -> list[TimedAutomaton]:
    """The automata of the chain plus its environment, before parallel composition."""
    _check_links(chain)
    bodies: list[TimedAutomaton] = []
    for c in chain.components:
        try:
            bounds = total_jitter(c.spec).to_bounds()
        except OverflowError as e:
            raise InvalidBounds(f"component {c.name}: {e}") from e
        body = atomic_action(bounds, c.in_chan, c.out_chan, name=c.name)
        report = is_well_formed(body)
        if not report:
            raise NotComposable(f"component {c.name} is not well-formed: {'; '.join(report.diagnostics)}")
        bodies.append(body)

    names = [c.name for c in chain.components]
    members: list[TimedAutomaton] = []
    first = chain.first
    if isinstance(first.activation, Periodic):
        period = first.activation.period
        downstream = sum(total_jitter(c.spec).max for c in chain.components[1:])
        if downstream > period.earliest:
            raise InvalidPeriod(
                f"downstream worst case {downstream} of {first.name} exceeds the minimum sampling separation "
                f"{period.earliest}; a sample may still be in the chain when the next one is emitted"
            )
        members.append(wrap_periodic(bodies[0], period))
        members.extend(_recurrent(b) for b in bodies[1:])
    else:
        if first.in_chan is not None:
            members.append(_source(first.in_chan, names))
        members.extend(bodies)
    members.append(_sink(chain.last.out_chan, names + [m.name for m in members]))
    logger.debug(f"time-chain members: {[m.name for m in members]}")
    return members


def build_time_chain(chain: TimeChain) -> Network:
    """Formal model of the chain: one automaton per component, a trigger source and a sink."""
    return par_compose(chain_members(chain))
