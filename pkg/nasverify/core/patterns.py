"""Model patterns.

The atomic action pattern, the location-merging compositions (sequential and
alternative), parallel composition with channel matching, the periodic timing
wrapper, and the structural well-formedness check.

Interface locations: every pattern automaton has one Pre location (its initial
location) and, unless an alternative composition kept two, one Post location.
A Pre location that is left by an unsynchronized edge is eager: its invariant pins
the pattern clock to zero, so the action starts the instant Pre is entered.
"""
from __future__ import annotations

import logging
from enum import Enum
from typing import Sequence

import networkx as nx
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from nasverify.core.automaton import (
    Direction,
    Edge,
    Location,
    LocationKind,
    Sync,
    TimedAutomaton,
    fresh_name,
    lower,
    namespace,
    rename,
    to_graph,
    upper,
)
from nasverify.core.network import Network
from nasverify.exceptions import ChannelMismatch, InvalidBounds, InvalidPeriod, NotComposable

logger = logging.getLogger(__name__)


class DelayBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    l_bound: int
    u_bound: int

    @model_validator(mode="after")
    def _check(self) -> "DelayBounds":
        if self.l_bound < 0:
            raise ValueError(f"lower bound {self.l_bound} is negative")
        if self.l_bound > self.u_bound:
            raise ValueError(f"lower bound {self.l_bound} exceeds upper bound {self.u_bound}")
        return self


class PeriodSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    period: int
    jit_lb: int = 0
    jit_ub: int = 0

    @model_validator(mode="after")
    def _check(self) -> "PeriodSpec":
        if self.period <= 0:
            raise ValueError(f"period {self.period} must be positive")
        if self.jit_lb > self.jit_ub:
            raise ValueError(f"jitter interval [{self.jit_lb}, {self.jit_ub}] is inverted")
        if self.period + self.jit_lb <= 0:
            raise ValueError("period + jit_lb must be positive")
        return self

    @property
    def earliest(self) -> int:
        return self.period + self.jit_lb

    @property
    def latest(self) -> int:
        return self.period + self.jit_ub


class AltMergeMode(str, Enum):
    MERGE_PRE = "merge_pre"
    MERGE_POST = "merge_post"
    MERGE_BOTH = "merge_both"


class Violation(BaseModel):
    """An unmatched synchronization: ``automaton`` uses ``channel`` in ``direction`` with no partner."""

    model_config = ConfigDict(frozen=True)

    channel: str
    direction: Direction
    automaton: str

    def __str__(self) -> str:
        return f"{self.automaton}: {self.channel}{self.direction.value} has no matching partner"


class WellFormedness(BaseModel):
    model_config = ConfigDict(frozen=True)

    well_formed: bool
    diagnostics: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.well_formed


def as_bounds(bounds: DelayBounds | Sequence[int]) -> DelayBounds:
    if isinstance(bounds, DelayBounds):
        return bounds
    try:
        l_bound, u_bound = bounds
        return DelayBounds(l_bound=l_bound, u_bound=u_bound)
    except (ValidationError, ValueError, TypeError) as e:
        raise InvalidBounds(f"invalid delay bounds {bounds!r}: {e}") from e


def as_period(p: PeriodSpec | Sequence[int]) -> PeriodSpec:
    if isinstance(p, PeriodSpec):
        return p
    try:
        period, jit_lb, jit_ub = p
        return PeriodSpec(period=period, jit_lb=jit_lb, jit_ub=jit_ub)
    except (ValidationError, ValueError, TypeError) as e:
        raise InvalidPeriod(f"invalid period specification {p!r}: {e}") from e


def atomic_action(
    b: DelayBounds | Sequence[int],
    in_chan: str | None = None,
    out_chan: str | None = None,
    *,
    name: str = "Action",
    clock: str = "x",
) -> TimedAutomaton:
    """Pre -> Act -> Post, spending between ``l_bound`` and ``u_bound`` ticks in Act."""
    b = as_bounds(b)
    pre_invariant = () if in_chan else (upper(clock, 0),)
    return TimedAutomaton(
        name=name,
        locations=(
            Location(id="Pre", kind=LocationKind.PRE, invariant=pre_invariant),
            Location(id="Act", kind=LocationKind.INTERNAL, invariant=(upper(clock, b.u_bound),)),
            Location(id="Post", kind=LocationKind.POST),
        ),
        edges=(
            Edge(
                source="Pre",
                target="Act",
                sync=Sync(channel=in_chan, direction=Direction.RECEIVE) if in_chan else None,
                resets=(clock,),
            ),
            Edge(
                source="Act",
                target="Post",
                guard=(lower(clock, b.l_bound),),
                sync=Sync(channel=out_chan, direction=Direction.EMIT) if out_chan else None,
            ),
        ),
        clocks=(clock,),
        initial="Pre",
    )


def _unique(locations: list[Location], role: str, who: str) -> Location:
    if len(locations) != 1:
        raise NotComposable(f"{who} has {len(locations)} {role} locations, expected exactly one")
    return locations[0]


def _unique_pre(a: TimedAutomaton) -> Location:
    pre = _unique(a.pre_locations(), "Pre", a.name)
    if pre.id != a.initial:
        raise NotComposable(f"Pre location {pre.id} of {a.name} is not its initial location")
    return pre


def _separate(a: TimedAutomaton, b: TimedAutomaton) -> TimedAutomaton:
    """Rename clocks and locations of ``b`` that collide with names of ``a``."""
    taken_clocks = set(a.clocks) | set(b.clocks)
    clock_map: dict[str, str] = {}
    for c in b.clocks:
        if c in a.clocks:
            new = fresh_name(c, taken_clocks)
            taken_clocks.add(new)
            clock_map[c] = new
    a_ids = {loc.id for loc in a.locations}
    taken_ids = a_ids | {loc.id for loc in b.locations}
    loc_map: dict[str, str] = {}
    for loc in b.locations:
        if loc.id in a_ids:
            new = fresh_name(loc.id, taken_ids)
            taken_ids.add(new)
            loc_map[loc.id] = new
    return rename(b, clocks=clock_map, locations=loc_map)


def _merge_invariants(*locations: Location) -> tuple:
    merged: list = []
    for loc in locations:
        for c in loc.invariant:
            if c not in merged:
                merged.append(c)
    return tuple(merged)


def _merge(
    locations: list[Location],
    edges: list[Edge],
    group: Sequence[str],
    merged_id: str,
    kind: LocationKind,
    entry_resets: tuple[str, ...] = (),
) -> tuple[list[Location], list[Edge]]:
    """The location merging operator: fold the locations in ``group`` into one location.

    Edges entering the merged location additionally reset ``entry_resets``.
    """
    members = [loc for loc in locations if loc.id in group]
    merged = Location(id=merged_id, kind=kind, invariant=_merge_invariants(*members))
    new_locations: list[Location] = []
    for loc in locations:
        if loc.id in group:
            if loc is members[0]:
                new_locations.append(merged)
            continue
        new_locations.append(loc)
    new_edges: list[Edge] = []
    for e in edges:
        update: dict = {}
        if e.source in group:
            update["source"] = merged_id
        if e.target in group:
            update["target"] = merged_id
            extra = tuple(c for c in entry_resets if c not in e.resets)
            if extra:
                update["resets"] = e.resets + extra
        new_edges.append(e.model_copy(update=update) if update else e)
    return new_locations, new_edges


def seq_compose(a: TimedAutomaton, b: TimedAutomaton, *, name: str | None = None) -> TimedAutomaton:
    """``Post(a) (+) Pre(b)``: run ``a``, then ``b`` from its Pre location with fresh clocks."""
    post_a = _unique(a.post_locations(), "Post", a.name)
    _unique_pre(b)
    b = _separate(a, b)
    pre_b = _unique_pre(b)
    taken = {loc.id for loc in a.locations} | {loc.id for loc in b.locations}
    merged_id = fresh_name(f"{post_a.id}_{pre_b.id}", taken - {post_a.id, pre_b.id})
    locations, edges = _merge(
        list(a.locations) + list(b.locations),
        list(a.edges) + list(b.edges),
        (post_a.id, pre_b.id),
        merged_id,
        LocationKind.INTERNAL,
        entry_resets=b.clocks,
    )
    result = TimedAutomaton(
        name=name or a.name,
        locations=tuple(locations),
        edges=tuple(edges),
        clocks=a.clocks + b.clocks,
        initial=a.initial,
    )
    logger.debug(f"seq_compose: merged {post_a.id} and {pre_b.id} into {merged_id}")
    return result


def alt_compose(
    a: TimedAutomaton,
    b: TimedAutomaton,
    mode: AltMergeMode = AltMergeMode.MERGE_BOTH,
    *,
    name: str | None = None,
) -> TimedAutomaton:
    """Alternative composition: merge the Pre locations, the Post locations, or both."""
    mode = AltMergeMode(mode)
    merge_pre = mode in (AltMergeMode.MERGE_PRE, AltMergeMode.MERGE_BOTH)
    merge_post = mode in (AltMergeMode.MERGE_POST, AltMergeMode.MERGE_BOTH)
    pre_a = _unique_pre(a) if merge_pre else None
    post_a = _unique(a.post_locations(), "Post", a.name) if merge_post else None
    if merge_pre:
        _unique_pre(b)
    if merge_post:
        _unique(b.post_locations(), "Post", b.name)
    b = _separate(a, b)
    locations = list(a.locations) + list(b.locations)
    edges = list(a.edges) + list(b.edges)
    if merge_pre:
        pre_b = _unique_pre(b)
        locations, edges = _merge(locations, edges, (pre_a.id, pre_b.id), pre_a.id, LocationKind.PRE)
    if merge_post:
        post_b = _unique(b.post_locations(), "Post", b.name)
        locations, edges = _merge(locations, edges, (post_a.id, post_b.id), post_a.id, LocationKind.POST)
    return TimedAutomaton(
        name=name or a.name,
        locations=tuple(locations),
        edges=tuple(edges),
        clocks=a.clocks + b.clocks,
        initial=a.initial,
    )


def check_channel_matching(members: Sequence[TimedAutomaton]) -> list[Violation]:
    """Every emit needs a receive on the same channel in another member, and vice versa."""
    uses = [a.channel_uses() for a in members]
    violations: list[Violation] = []
    for k, a in enumerate(members):
        for channel, direction in sorted(uses[k], key=lambda u: (u[0], u[1].value)):
            wanted = (channel, direction.opposite)
            if not any(wanted in uses[m] for m in range(len(members)) if m != k):
                violations.append(Violation(channel=channel, direction=direction, automaton=a.name))
    return violations


def par_compose(members: Sequence[TimedAutomaton]) -> Network:
    """Parallel composition; the product itself is explored lazily by the verifier."""
    if not members:
        raise NotComposable("parallel composition needs at least one member")
    violations = check_channel_matching(members)
    if violations:
        raise ChannelMismatch("; ".join(str(v) for v in violations), violations)
    taken: set[str] = set()
    namespaced: list[TimedAutomaton] = []
    for a in members:
        member_name = fresh_name(a.name, taken)
        taken.add(member_name)
        if member_name != a.name:
            a = a.model_copy(update={"name": member_name})
        namespaced.append(namespace(a, member_name, channels=False))
    channels = frozenset(ch for a in namespaced for ch, _ in a.channel_uses())
    return Network(automata=tuple(namespaced), channels=channels)


def traversal_upper_bound(a: TimedAutomaton) -> int | None:
    """Longest Pre -> Post stay allowed by location invariants; None if unbounded or cyclic."""
    graph = nx.DiGraph(to_graph(a))
    if not nx.is_directed_acyclic_graph(graph):
        return None
    weights: dict[str, int] = {}
    for loc in a.locations:
        bounds = [c.bound for c in loc.invariant if c.right == "0" and c.left != "0" and c.bound is not None]
        if loc.kind is LocationKind.POST:
            weights[loc.id] = 0
        elif not bounds:
            return None
        else:
            weights[loc.id] = min(bounds)
    longest: dict[str, int] = {}
    for node in nx.topological_sort(graph):
        preds = [longest[p] for p in graph.predecessors(node)]
        longest[node] = (max(preds) if preds else 0) + weights[node]
    posts = [longest[loc.id] for loc in a.post_locations()]
    return max(posts) if posts else None


def wrap_periodic(body: TimedAutomaton, p: PeriodSpec | Sequence[int], *, name: str | None = None) -> TimedAutomaton:
    """Timing wrapper: activate ``body`` every ``period + [jit_lb, jit_ub]`` ticks.

    An auxiliary clock ``Cl`` measures the time since the last activation. The body is
    never cut short: Post is left at the instant it is entered, back to Idle while the
    activation window is still open, or straight into the next activation once the
    body has overrun the window.
    """
    p = as_period(p)
    pre = _unique_pre(body)
    post = _unique(body.post_locations(), "Post", body.name)
    cl = fresh_name("Cl", body.clocks)
    idle = fresh_name("Idle", [loc.id for loc in body.locations])
    worst = traversal_upper_bound(body)
    if worst is not None and worst > p.earliest:
        logger.warning(
            f"wrap_periodic: worst-case traversal {worst} of {body.name} exceeds the earliest activation "
            f"separation {p.earliest}; activations will be delayed by the running body"
        )
    clocks = body.clocks or (fresh_name("u", (cl,)),)
    stay = clocks[0]
    activate = (cl,) + clocks
    locations = [Location(id=idle, kind=LocationKind.INTERNAL, invariant=(upper(cl, p.latest),))]
    for loc in body.locations:
        if loc.id == post.id:
            loc = loc.model_copy(update={"invariant": loc.invariant + (upper(stay, 0),)})
        locations.append(loc)
    body_edges = [
        e.model_copy(update={"resets": e.resets + (stay,)}) if e.target == post.id and stay not in e.resets else e
        for e in body.edges
    ]
    edges = [
        Edge(source=idle, target=pre.id, guard=(lower(cl, p.earliest),), resets=activate),
        *body_edges,
        Edge(source=post.id, target=idle, guard=(upper(cl, p.latest),)),
        Edge(source=post.id, target=pre.id, guard=(lower(cl, p.latest, strict=True),), resets=activate),
    ]
    return TimedAutomaton(
        name=name or body.name,
        locations=tuple(locations),
        edges=tuple(edges),
        clocks=(cl,) + clocks,
        initial=idle,
    )


def _reset_before_use(a: TimedAutomaton) -> list[str]:
    """Clocks read at a location (invariant or outgoing guard) not reset on every path to it.

    The initial location reads the zero initial valuation and is exempt.
    """
    clocks = set(a.clocks)
    must: dict[str, set[str]] = {loc.id: set(clocks) for loc in a.locations}
    must[a.initial] = set()
    changed = True
    while changed:
        changed = False
        for loc in a.locations:
            if loc.id == a.initial:
                continue
            incoming = [e for e in a.edges if e.target == loc.id]
            if not incoming:
                continue
            new = set(clocks)
            for e in incoming:
                new &= must[e.source] | set(e.resets)
            if new != must[loc.id]:
                must[loc.id] = new
                changed = True
    problems: list[str] = []
    for loc in a.locations:
        if loc.id == a.initial:
            continue
        read = set().union(*(c.clocks() for c in loc.invariant))
        for e in a.edges:
            if e.source == loc.id:
                read |= set().union(*(c.clocks() for c in e.guard))
        for c in sorted(read - must[loc.id]):
            problems.append(f"clock {c} is read at {loc.id} without being reset on every path")
    return problems


def is_well_formed(a: TimedAutomaton) -> WellFormedness:
    """Structural check that ``a`` has the shape of an atomic/seq/alt pattern."""
    diagnostics: list[str] = []
    pres, posts = a.pre_locations(), a.post_locations()
    if len(pres) != 1:
        diagnostics.append(f"expected one Pre location, found {len(pres)}")
    elif pres[0].id != a.initial:
        diagnostics.append(f"Pre location {pres[0].id} is not the initial location")
    if len(posts) != 1:
        diagnostics.append(f"expected one Post location, found {len(posts)}")
    if len(pres) == 1 and posts:
        graph = to_graph(a)
        reachable = nx.descendants(graph, pres[0].id) | {pres[0].id}
        coreachable: set[str] = set()
        for post in posts:
            coreachable |= nx.ancestors(graph, post.id) | {post.id}
        for loc in a.locations:
            if loc.id not in reachable:
                diagnostics.append(f"location {loc.id} is unreachable from Pre")
            elif loc.id not in coreachable:
                diagnostics.append(f"location {loc.id} cannot reach Post")
    diagnostics.extend(_reset_before_use(a))
    return WellFormedness(well_formed=not diagnostics, diagnostics=tuple(diagnostics))
