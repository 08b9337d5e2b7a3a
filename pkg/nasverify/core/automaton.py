"""Timed automata.

Locations, guarded edges with binary handshake synchronization and clock resets,
and the automaton carrying them. All models are frozen pydantic models, so a built
automaton can be shared freely between verification runs.
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Iterable, Literal

import networkx as nx
from pydantic import BaseModel, ConfigDict, model_validator

logger = logging.getLogger(__name__)

ZERO_CLOCK: str = "0"


class ClockId(BaseModel):
    """A clock of a network; index 0 is the constant-zero reference clock."""

    model_config = ConfigDict(frozen=True)

    index: int
    name: str


class ClockConstraint(BaseModel):
    """``left - right <relation> bound``; ``bound=None`` is +infinity."""

    model_config = ConfigDict(frozen=True)

    left: str
    right: str = ZERO_CLOCK
    relation: Literal["<", "<="] = "<="
    bound: int | None

    @property
    def strict(self) -> bool:
        return self.relation == "<"

    def clocks(self) -> set[str]:
        return {c for c in (self.left, self.right) if c != ZERO_CLOCK}

    def rename(self, mapping: dict[str, str]) -> "ClockConstraint":
        return self.model_copy(
            update={"left": mapping.get(self.left, self.left), "right": mapping.get(self.right, self.right)}
        )

    def __str__(self) -> str:
        if self.bound is None:
            return "true"
        if self.right == ZERO_CLOCK:
            return f"{self.left} {self.relation} {self.bound}"
        if self.left == ZERO_CLOCK:
            op = ">" if self.strict else ">="
            return f"{self.right} {op} {-self.bound}"
        return f"{self.left} - {self.right} {self.relation} {self.bound}"


def upper(clock: str, bound: int, strict: bool = False) -> ClockConstraint:
    """``clock <= bound`` (or ``<``)."""
    return ClockConstraint(left=clock, right=ZERO_CLOCK, relation="<" if strict else "<=", bound=bound)


def lower(clock: str, bound: int, strict: bool = False) -> ClockConstraint:
    """``clock >= bound`` (or ``>``), stored as ``0 - clock <= -bound``."""
    return ClockConstraint(left=ZERO_CLOCK, right=clock, relation="<" if strict else "<=", bound=-bound)


def diagonal(left: str, right: str, bound: int, strict: bool = False) -> ClockConstraint:
    return ClockConstraint(left=left, right=right, relation="<" if strict else "<=", bound=bound)


class LocationKind(str, Enum):
    PRE = "pre"
    POST = "post"
    INTERNAL = "internal"


class Location(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    kind: LocationKind = LocationKind.INTERNAL
    invariant: tuple[ClockConstraint, ...] = ()


class Direction(str, Enum):
    EMIT = "!"
    RECEIVE = "?"

    @property
    def opposite(self) -> "Direction":
        return Direction.RECEIVE if self is Direction.EMIT else Direction.EMIT


class Sync(BaseModel):
    model_config = ConfigDict(frozen=True)

    channel: str
    direction: Direction

    def __str__(self) -> str:
        return f"{self.channel}{self.direction.value}"


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str
    target: str
    guard: tuple[ClockConstraint, ...] = ()
    sync: Sync | None = None
    resets: tuple[str, ...] = ()

    def describe(self) -> str:
        parts = [f"{self.source} -> {self.target}"]
        if self.guard:
            parts.append(" && ".join(str(c) for c in self.guard))
        if self.sync is not None:
            parts.append(str(self.sync))
        if self.resets:
            parts.append(", ".join(f"{c} := 0" for c in self.resets))
        return "; ".join(parts)


class TimedAutomaton(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...] = ()
    clocks: tuple[str, ...] = ()
    initial: str

    @model_validator(mode="after")
    def _check_consistency(self) -> "TimedAutomaton":
        ids = [loc.id for loc in self.locations]
        if len(set(ids)) != len(ids):
            raise ValueError(f"automaton {self.name}: duplicate location ids")
        if len(set(self.clocks)) != len(self.clocks):
            raise ValueError(f"automaton {self.name}: duplicate clock names")
        if ZERO_CLOCK in self.clocks:
            raise ValueError(f"automaton {self.name}: clock name {ZERO_CLOCK!r} is reserved")
        if self.initial not in ids:
            raise ValueError(f"automaton {self.name}: initial location {self.initial} does not exist")
        known = set(self.clocks)
        for loc in self.locations:
            for c in loc.invariant:
                if not c.clocks() <= known:
                    raise ValueError(f"automaton {self.name}: invariant of {loc.id} uses unknown clock")
        for edge in self.edges:
            if edge.source not in ids or edge.target not in ids:
                raise ValueError(f"automaton {self.name}: edge {edge.describe()} references a missing location")
            used = set(edge.resets).union(*(c.clocks() for c in edge.guard))
            if not used <= known:
                raise ValueError(f"automaton {self.name}: edge {edge.describe()} uses unknown clock")
        return self

    def location(self, location_id: str) -> Location:
        for loc in self.locations:
            if loc.id == location_id:
                return loc
        raise KeyError(location_id)

    def pre_locations(self) -> list[Location]:
        return [loc for loc in self.locations if loc.kind is LocationKind.PRE]

    def post_locations(self) -> list[Location]:
        return [loc for loc in self.locations if loc.kind is LocationKind.POST]

    def channel_uses(self) -> set[tuple[str, Direction]]:
        return {(e.sync.channel, e.sync.direction) for e in self.edges if e.sync is not None}


def to_graph(a: TimedAutomaton) -> nx.MultiDiGraph:
    """Location graph of ``a``; node and edge attributes keep the model objects."""
    graph = nx.MultiDiGraph(name=a.name)
    for loc in a.locations:
        graph.add_node(loc.id, kind=loc.kind, invariant=loc.invariant)
    for edge in a.edges:
        graph.add_edge(edge.source, edge.target, edge=edge)
    return graph


def fresh_name(base: str, taken: Iterable[str]) -> str:
    """``base`` itself when free, else the first free ``base_1``, ``base_2``, ..."""
    taken = set(taken)
    if base not in taken:
        return base
    k = 1
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


def rename(
    a: TimedAutomaton,
    *,
    clocks: dict[str, str] | None = None,
    locations: dict[str, str] | None = None,
    channels: dict[str, str] | None = None,
    name: str | None = None,
) -> TimedAutomaton:
    """Apply name mappings to clocks, locations and channels; unmapped names are kept."""
    clocks = clocks or {}
    locations = locations or {}
    channels = channels or {}

    def loc_id(x: str) -> str:
        return locations.get(x, x)

    new_locations = tuple(
        loc.model_copy(update={"id": loc_id(loc.id), "invariant": tuple(c.rename(clocks) for c in loc.invariant)})
        for loc in a.locations
    )
    new_edges = tuple(
        Edge(
            source=loc_id(e.source),
            target=loc_id(e.target),
            guard=tuple(c.rename(clocks) for c in e.guard),
            sync=None if e.sync is None else Sync(
                channel=channels.get(e.sync.channel, e.sync.channel), direction=e.sync.direction
            ),
            resets=tuple(clocks.get(c, c) for c in e.resets),
        )
        for e in a.edges
    )
    return TimedAutomaton(
        name=a.name if name is None else name,
        locations=new_locations,
        edges=new_edges,
        clocks=tuple(clocks.get(c, c) for c in a.clocks),
        initial=loc_id(a.initial),
    )


def namespace(a: TimedAutomaton, prefix: str, *, channels: bool = True) -> TimedAutomaton:
    """Prefix every clock, location and (unless ``channels=False``) channel name with ``prefix.``."""
    if not prefix or not prefix.replace("_", "a").replace(".", "a").isalnum():
        raise ValueError(f"invalid namespace prefix {prefix!r}")
    channel_map = {}
    if channels:
        channel_map = {ch: f"{prefix}.{ch}" for ch, _ in a.channel_uses()}
    return rename(
        a,
        clocks={c: f"{prefix}.{c}" for c in a.clocks},
        locations={loc.id: f"{prefix}.{loc.id}" for loc in a.locations},
        channels=channel_map,
    )
