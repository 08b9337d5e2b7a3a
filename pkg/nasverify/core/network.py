"""Networks of timed automata and their interleaving/handshake product.

The product is never built eagerly: ``compile_network`` turns a ``Network`` into
index-based lookup tables once, and ``enabled_edges`` computes the discrete steps
available from one symbolic configuration.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from nasverify.core.automaton import ZERO_CLOCK, ClockConstraint, ClockId, Direction, Edge, TimedAutomaton
from nasverify.core.zone import INF, Zone, constrain, raw_bound
from nasverify.exceptions import MalformedNetwork

logger = logging.getLogger(__name__)

# (i, j, raw): x_i - x_j bounded by the raw-encoded bound
DiffConstraint = tuple[int, int, int]


class Network(BaseModel):
    model_config = ConfigDict(frozen=True)

    automata: tuple[TimedAutomaton, ...]
    channels: frozenset[str] = frozenset()

    @model_validator(mode="after")
    def _check_namespaces(self) -> "Network":
        names = [a.name for a in self.automata]
        if len(set(names)) != len(names):
            raise ValueError("automaton names must be unique within a network")
        seen: set[str] = set()
        for a in self.automata:
            clash = seen.intersection(a.clocks)
            if clash:
                raise ValueError(f"clock names {sorted(clash)} are shared between network members")
            seen.update(a.clocks)
        return self

    def clock_table(self) -> tuple[ClockId, ...]:
        names = [ZERO_CLOCK] + [c for a in self.automata for c in a.clocks]
        return tuple(ClockId(index=i, name=n) for i, n in enumerate(names))

    def automaton(self, name: str) -> TimedAutomaton:
        for a in self.automata:
            if a.name == name:
                return a
        raise KeyError(name)

    def initial_locations(self) -> tuple[str, ...]:
        return tuple(a.initial for a in self.automata)


@dataclass(frozen=True, slots=True)
class CompiledEdge:
    automaton: int
    edge: Edge
    guard: tuple[DiffConstraint, ...]
    resets: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class EdgeStep:
    """One discrete step of the product: an internal edge or an emit/receive pair."""

    parts: tuple[CompiledEdge, ...]
    guard: tuple[DiffConstraint, ...]
    resets: tuple[int, ...]

    def targets(self, locations: Sequence[str]) -> tuple[str, ...]:
        new = list(locations)
        for part in self.parts:
            new[part.automaton] = part.edge.target
        return tuple(new)

    def describe(self, network: Network) -> str:
        return " | ".join(f"{network.automata[p.automaton].name}: {p.edge.describe()}" for p in self.parts)


@dataclass(slots=True)
class CompiledNetwork:
    network: Network
    clock_names: tuple[str, ...]
    clock_index: dict[str, int]
    invariants: list[dict[str, tuple[DiffConstraint, ...]]]
    outgoing: list[dict[str, list[CompiledEdge]]]
    receivers: dict[str, set[int]]
    max_constants: list[int] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.clock_names)

    def compile_constraint(self, c: ClockConstraint) -> DiffConstraint:
        raw = INF if c.bound is None else raw_bound(c.bound, c.strict)
        return self.clock_index[c.left], self.clock_index[c.right], raw

    def invariant(self, locations: Sequence[str]) -> tuple[DiffConstraint, ...]:
        out: list[DiffConstraint] = []
        for k, loc in enumerate(locations):
            out.extend(self.invariants[k][loc])
        return tuple(out)


@functools.lru_cache(maxsize=64)
def compile_network(n: Network) -> CompiledNetwork:
    table = n.clock_table()
    clock_names = tuple(c.name for c in table)
    clock_index = {c.name: c.index for c in table}
    compiled = CompiledNetwork(
        network=n,
        clock_names=clock_names,
        clock_index=clock_index,
        invariants=[],
        outgoing=[],
        receivers={},
        max_constants=[0] * len(clock_names),
    )

    def note_constants(constraints: tuple[DiffConstraint, ...]) -> None:
        for i, j, raw in constraints:
            if raw >= INF:
                continue
            value = abs(raw >> 1)
            for k in (i, j):
                if k != 0:
                    compiled.max_constants[k] = max(compiled.max_constants[k], value)

    for k, a in enumerate(n.automata):
        inv = {loc.id: tuple(compiled.compile_constraint(c) for c in loc.invariant) for loc in a.locations}
        for cs in inv.values():
            note_constants(cs)
        out: dict[str, list[CompiledEdge]] = {loc.id: [] for loc in a.locations}
        for e in a.edges:
            guard = tuple(compiled.compile_constraint(c) for c in e.guard)
            note_constants(guard)
            out[e.source].append(
                CompiledEdge(automaton=k, edge=e, guard=guard, resets=tuple(clock_index[c] for c in e.resets))
            )
            if e.sync is not None and e.sync.direction is Direction.RECEIVE:
                compiled.receivers.setdefault(e.sync.channel, set()).add(k)
        compiled.invariants.append(inv)
        compiled.outgoing.append(out)
    logger.debug(f"Compiled network with {len(n.automata)} automata and {len(clock_names) - 1} clocks")
    return compiled


def _satisfiable(zone: Zone, guard: tuple[DiffConstraint, ...]) -> bool:
    for i, j, raw in guard:
        zone = constrain(zone, i, j, raw)
        if zone.is_empty():
            return False
    return True


def enabled_edges(
    n: Network | CompiledNetwork, loc_vector: Sequence[str], zone: Zone
) -> list[EdgeStep]:
    """Every internal edge and every emit/receive pair whose guard meets ``zone``.

    ``zone`` may carry extra clocks after the network's own (e.g. an observer clock).
    """
    compiled = n if isinstance(n, CompiledNetwork) else compile_network(n)
    if len(loc_vector) != len(compiled.network.automata):
        raise ValueError("location vector length does not match the network")
    steps: list[EdgeStep] = []
    for k, loc in enumerate(loc_vector):
        for ce in compiled.outgoing[k][loc]:
            sync = ce.edge.sync
            if sync is None:
                if _satisfiable(zone, ce.guard):
                    steps.append(EdgeStep(parts=(ce,), guard=ce.guard, resets=ce.resets))
                continue
            if sync.direction is not Direction.EMIT:
                continue
            partners = compiled.receivers.get(sync.channel, set()) - {k}
            if not partners:
                raise MalformedNetwork(
                    f"{compiled.network.automata[k].name} emits on {sync.channel!r} but nothing receives it"
                )
            for m in sorted(partners):
                for other in compiled.outgoing[m][loc_vector[m]]:
                    if other.edge.sync is None or other.edge.sync.direction is not Direction.RECEIVE:
                        continue
                    if other.edge.sync.channel != sync.channel:
                        continue
                    guard = ce.guard + other.guard
                    if _satisfiable(zone, guard):
                        steps.append(EdgeStep(parts=(ce, other), guard=guard, resets=ce.resets + other.resets))
    return steps
