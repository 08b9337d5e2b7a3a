"""Brute-force oracles for the test suite.

``Explicit`` runs a network in discrete time: one tick of delay or one discrete step
at a time, with integer clock values capped just above the largest constant each
clock is compared with. Pattern models only use non-strict constraints with integer
constants, so integer-timed runs reach the same extremes as dense-time runs.

The integer-valuation helpers at the bottom check DBM operations point by point.
"""
from __future__ import annotations

import itertools
from collections import deque
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from nasverify.core.automaton import Direction, TimedAutomaton
from nasverify.core.network import Network
from nasverify.core.zone import INF, Zone, raw_strict, raw_value

Valuation = tuple[int, ...]
Predicate = Callable[[Sequence[str]], bool]


class Explicit:
    """Integer-time semantics of a network; sync labels can be ignored for single automata."""

    def __init__(self, network: Network, *, ignore_sync: bool = False):
        self.network = network
        self.ignore_sync = ignore_sync
        names = [c.name for c in network.clock_table()]
        self.index = {n: i for i, n in enumerate(names)}
        self.cap = [0] * len(names)
        constraints = [c for a in network.automata for loc in a.locations for c in loc.invariant]
        constraints += [c for a in network.automata for e in a.edges for c in e.guard]
        for c in constraints:
            if c.bound is None:
                continue
            for name in c.clocks():
                k = self.index[name]
                self.cap[k] = max(self.cap[k], abs(c.bound))
        self.cap = [c + 1 for c in self.cap]

    def initial(self) -> tuple[tuple[str, ...], Valuation]:
        return self.network.initial_locations(), (0,) * len(self.cap)

    def holds(self, constraints: Iterable, values: Valuation) -> bool:
        for c in constraints:
            if c.bound is None:
                continue
            diff = values[self.index[c.left]] - values[self.index[c.right]]
            if diff > c.bound or (c.strict and diff == c.bound):
                return False
        return True

    def invariant_ok(self, locations: Sequence[str], values: Valuation) -> bool:
        return all(
            self.holds(a.location(loc).invariant, values) for a, loc in zip(self.network.automata, locations)
        )

    def delay(self, values: Valuation) -> Valuation:
        return tuple(0 if k == 0 else min(v + 1, self.cap[k]) for k, v in enumerate(values))

    def _apply(self, values: Valuation, resets: Iterable[str]) -> Valuation:
        new = list(values)
        for c in resets:
            new[self.index[c]] = 0
        return tuple(new)

    def steps(self, locations: tuple[str, ...], values: Valuation) -> Iterator[tuple[tuple[str, ...], Valuation, str]]:
        """Discrete successors whose target invariants hold, with a label naming the edges."""
        automata = self.network.automata
        for k, a in enumerate(automata):
            for e in a.edges:
                if e.source != locations[k] or not self.holds(e.guard, values):
                    continue
                if e.sync is None or self.ignore_sync:
                    target = locations[:k] + (e.target,) + locations[k + 1:]
                    new = self._apply(values, e.resets)
                    if self.invariant_ok(target, new):
                        yield target, new, f"{a.name}:{e.source}->{e.target}"
                    continue
                if e.sync.direction is not Direction.EMIT:
                    continue
                for m, b in enumerate(automata):
                    if m == k:
                        continue
                    for f in b.edges:
                        if f.source != locations[m] or f.sync is None:
                            continue
                        if f.sync.channel != e.sync.channel or f.sync.direction is not Direction.RECEIVE:
                            continue
                        if not self.holds(f.guard, values):
                            continue
                        target = list(locations)
                        target[k], target[m] = e.target, f.target
                        target = tuple(target)
                        new = self._apply(values, e.resets + f.resets)
                        if self.invariant_ok(target, new):
                            yield target, new, f"{a.name}|{b.name}:{e.sync.channel}"

    def successors(self, locations: tuple[str, ...], values: Valuation) -> list[tuple[tuple[str, ...], Valuation, int]]:
        """``(target, values, elapsed)`` for the one-tick delay (if allowed) and every discrete step."""
        out = [(t, v, 0) for t, v, _ in self.steps(locations, values)]
        later = self.delay(values)
        if self.invariant_ok(locations, later):
            out.append((locations, later, 1))
        return out


def single(a: TimedAutomaton) -> Explicit:
    return Explicit(Network(automata=(a,)), ignore_sync=True)


def traversal_times(a: TimedAutomaton, limit: int = 200) -> set[int]:
    """Every integer time at which a run from the initial location first enters a Post location."""
    ex = single(a)
    posts = {loc.id for loc in a.post_locations()}
    start = ex.initial()
    seen = {(start[0], start[1], 0)}
    queue = deque(seen)
    times: set[int] = set()
    while queue:
        locs, values, t = queue.popleft()
        for target, new, elapsed in ex.successors(locs, values):
            now = t + elapsed
            if target[0] in posts and elapsed == 0:
                times.add(now)
                continue
            if now > limit:
                continue
            key = (target, new, now)
            if key not in seen:
                seen.add(key)
                queue.append(key)
    return times


def entry_separations(a: TimedAutomaton, location: str, count: int, limit: int = 1000) -> set[int]:
    """Times between consecutive entries into ``location`` over the first ``count`` entries."""
    ex = single(a)
    start = ex.initial()
    # (locations, values, ticks since last entry or None, entries so far)
    state = (start[0], start[1], None, 0)
    seen = {state}
    queue = deque([state])
    separations: set[int] = set()
    while queue:
        locs, values, since, entries = queue.popleft()
        for target, new, elapsed in ex.successors(locs, values):
            now = None if since is None else since + elapsed
            n = entries
            if elapsed == 0 and target[0] == location and locs[0] != location:
                if now is not None:
                    separations.add(now)
                n += 1
                now = 0
                if n >= count:
                    continue
            if now is not None and now > limit:
                continue
            key = (target, new, now, n)
            if key not in seen:
                seen.add(key)
                queue.append(key)
    return separations


def response_bound(network: Network, stimulus: Predicate, response: Predicate, limit: int = 200) -> int | None:
    """Largest stimulus-to-response delay over all integer runs; None when some stimulus may go unanswered.

    The observer arms when a step makes ``stimulus`` true, keeps the oldest pending stimulus
    and disarms on entering a ``response`` state.
    """
    ex = Explicit(network)
    locs, values = ex.initial()
    if not ex.invariant_ok(locs, values):
        raise ValueError("initial state violates its invariant")
    armed = stimulus(locs) and not response(locs)
    start = (locs, values, armed, 0)
    seen = {start}
    queue = deque([start])
    worst = 0
    while queue:
        locs, values, armed, z = queue.popleft()
        if armed:
            worst = max(worst, z)
            if z > limit:
                return None
        successors = ex.successors(locs, values)
        if armed and not successors:
            return None
        for target, new, elapsed in successors:
            if elapsed:
                nz = z + 1 if armed else 0
                key = (target, new, armed, nz)
            else:
                now_armed, nz = armed, z
                if not armed and stimulus(target) and not stimulus(locs):
                    now_armed, nz = True, 0
                if now_armed and response(target):
                    now_armed, nz = False, 0
                key = (target, new, now_armed, nz)
            if key not in seen:
                seen.add(key)
                queue.append(key)
    return worst


# Integer-valuation sets for DBM checks


def _grid(dim: int, bound: int) -> np.ndarray:
    """Every integer valuation in the box, with the zero clock as column 0."""
    rows = list(itertools.product(range(bound + 1), repeat=dim - 1))
    return np.hstack([np.zeros((len(rows), 1), dtype=int), np.asarray(rows, dtype=int).reshape(len(rows), dim - 1)])


def points(z: Zone, bound: int) -> frozenset[Valuation]:
    """Integer valuations of clocks ``1..dim-1`` inside ``z`` with every clock at most ``bound``."""
    grid = _grid(z.dim, bound)
    inside = np.ones(len(grid), dtype=bool)
    for i in range(z.dim):
        for j in range(z.dim):
            raw = z.cells[i * z.dim + j]
            if i == j or raw >= INF:
                continue
            diff = grid[:, i] - grid[:, j]
            limit = raw_value(raw)
            inside &= (diff < limit) if raw_strict(raw) else (diff <= limit)
    if z.is_empty():
        inside[:] = False
    return frozenset(tuple(int(v) for v in row[1:]) for row in grid[inside])


def delay_points(ps: Iterable[Valuation], bound: int) -> frozenset[Valuation]:
    out = set()
    for p in ps:
        t = 0
        while all(v + t <= bound for v in p):
            out.add(tuple(v + t for v in p))
            t += 1
    return frozenset(out)


def reset_points(ps: Iterable[Valuation], clocks: Iterable[int]) -> frozenset[Valuation]:
    idx = [c - 1 for c in clocks]
    return frozenset(tuple(0 if k in idx else v for k, v in enumerate(p)) for p in ps)


def satisfies(p: Valuation, i: int, j: int, raw: int) -> bool:
    if raw >= INF:
        return True
    values = (0, *p)
    diff = values[i] - values[j]
    bound = raw_value(raw)
    return diff < bound or (not raw_strict(raw) and diff == bound)
