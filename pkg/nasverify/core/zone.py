"""Clock zones as difference bound matrices.

A zone over ``dim`` clocks (index 0 is the constant-zero reference clock) is a
``dim x dim`` matrix whose cell ``(i, j)`` bounds the difference ``x_i - x_j``.
Bounds are stored in the usual raw encoding ``2 * value + (0 if strict else 1)``
so that the bound order is plain integer order and ``(v, <=) > (v, <) > (v-1, <=)``.

Every operation returns a new zone; zones are hashable values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from nasverify.exceptions import EmptyZone

INF: int = 1 << 62
LE_ZERO: int = 1
LT_ZERO: int = 0


def raw_bound(value: int, strict: bool = False) -> int:
    """Encode ``(value, <)`` or ``(value, <=)``."""
    return (value << 1) | (0 if strict else 1)


def raw_value(raw: int) -> int:
    return raw >> 1


def raw_strict(raw: int) -> bool:
    return not raw & 1


def negate(raw: int) -> int:
    """Bound on ``x_j - x_i`` met by exactly the valuations where ``x_i - x_j`` violates ``raw``."""
    return raw_bound(-raw_value(raw), strict=not raw_strict(raw))


def _add(a: int, b: int) -> int:
    if a >= INF or b >= INF:
        return INF
    return (((a >> 1) + (b >> 1)) << 1) | (a & b & 1)


@dataclass(frozen=True, slots=True)
class Bound:
    """A single DBM bound; ``value=None`` is the unique infinity."""

    value: int | None
    strict: bool = False

    @classmethod
    def infinity(cls) -> "Bound":
        return cls(None, True)

    @classmethod
    def from_raw(cls, raw: int) -> "Bound":
        if raw >= INF:
            return cls.infinity()
        return cls(raw_value(raw), raw_strict(raw))

    @property
    def raw(self) -> int:
        if self.value is None:
            return INF
        return raw_bound(self.value, self.strict)

    def __lt__(self, other: "Bound") -> bool:
        return self.raw < other.raw

    def __le__(self, other: "Bound") -> bool:
        return self.raw <= other.raw

    def __add__(self, other: "Bound") -> "Bound":
        return Bound.from_raw(_add(self.raw, other.raw))

    def __str__(self) -> str:
        if self.value is None:
            return "<inf"
        return f"{'<' if self.strict else '<='}{self.value}"


@dataclass(frozen=True, slots=True)
class Zone:
    dim: int
    cells: tuple[int, ...]
    canonical: bool = True

    # construction

    @classmethod
    def zero(cls, dim: int) -> "Zone":
        """All clocks equal to zero."""
        return cls(dim, (LE_ZERO,) * (dim * dim))

    @classmethod
    def universe(cls, dim: int) -> "Zone":
        """All non-negative clock valuations."""
        cells = [INF] * (dim * dim)
        for i in range(dim):
            cells[i * dim + i] = LE_ZERO
            cells[i] = LE_ZERO
        return cls(dim, tuple(cells))

    @classmethod
    def empty(cls, dim: int) -> "Zone":
        cells = list(cls.universe(dim).cells)
        cells[0] = LT_ZERO
        return cls(dim, tuple(cells))

    @classmethod
    def from_constraints(cls, dim: int, constraints: Iterable[tuple[int, int, int]]) -> "Zone":
        """Build the canonical zone of ``x_i - x_j`` raw-bounded constraints over non-negative clocks."""
        cells = list(cls.universe(dim).cells)
        for i, j, raw in constraints:
            if raw < cells[i * dim + j]:
                cells[i * dim + j] = raw
        return canonicalize(cls(dim, tuple(cells), canonical=False))

    # queries

    def cell(self, i: int, j: int) -> Bound:
        return Bound.from_raw(self.cells[i * self.dim + j])

    def is_empty(self) -> bool:
        dim = self.dim
        return any(self.cells[i * dim + i] < LE_ZERO for i in range(dim))

    def upper_bounded(self) -> bool:
        """True when some clock has a finite upper bound, i.e. time cannot diverge."""
        dim = self.dim
        return any(self.cells[i * dim] < INF for i in range(1, dim))

    def contains(self, valuation: Sequence[float]) -> bool:
        """Membership of a valuation of clocks ``1..dim-1`` (the zero clock is implicit)."""
        values = (0, *valuation)
        dim = self.dim
        for i in range(dim):
            for j in range(dim):
                raw = self.cells[i * dim + j]
                if raw >= INF:
                    continue
                diff = values[i] - values[j]
                bound = raw_value(raw)
                if diff > bound or (raw_strict(raw) and diff == bound):
                    return False
        return True

    def render(self, names: Sequence[str] | None = None) -> str:
        """Conjunction of difference constraints, for traces and debugging."""
        if self.is_empty():
            return "false"
        zone = canonicalize(self)
        dim = zone.dim
        names = list(names) if names is not None else [f"x{i}" for i in range(dim)]
        m = zone.cells
        parts: list[str] = []
        for i in range(1, dim):
            lo, hi = m[i], m[i * dim]
            if hi < INF and not raw_strict(lo) and not raw_strict(hi) and raw_value(hi) == -raw_value(lo):
                parts.append(f"{names[i]} == {raw_value(hi)}")
                continue
            if lo != LE_ZERO:
                parts.append(f"{names[i]} {'>' if raw_strict(lo) else '>='} {-raw_value(lo)}")
            if hi < INF:
                parts.append(f"{names[i]} {'<' if raw_strict(hi) else '<='} {raw_value(hi)}")
        for i in range(1, dim):
            for j in range(1, dim):
                raw = m[i * dim + j]
                if i != j and raw < INF:
                    parts.append(f"{names[i]} - {names[j]} {'<' if raw_strict(raw) else '<='} {raw_value(raw)}")
        return " && ".join(parts) if parts else "true"

    # operations, delegating to the module-level functions

    def up(self) -> "Zone":
        return up(self)

    def constrain(self, i: int, j: int, raw: int) -> "Zone":
        return constrain(self, i, j, raw)

    def reset(self, clocks: Iterable[int]) -> "Zone":
        return reset(self, clocks)

    def free(self, clock: int) -> "Zone":
        return free(self, clock)

    def includes(self, other: "Zone") -> bool:
        return includes(self, other)

    def extrapolate(self, max_consts: Sequence[int]) -> "Zone":
        return extrapolate(self, max_consts)


def canonicalize(z: Zone) -> Zone:
    """Shortest-path closure; an empty zone is returned with a negative diagonal."""
    if z.canonical:
        return z
    dim = z.dim
    m = list(z.cells)
    for k in range(dim):
        rk = k * dim
        for i in range(dim):
            mik = m[i * dim + k]
            if mik >= INF:
                continue
            ri = i * dim
            for j in range(dim):
                mkj = m[rk + j]
                if mkj >= INF:
                    continue
                s = (((mik >> 1) + (mkj >> 1)) << 1) | (mik & mkj & 1)
                if s < m[ri + j]:
                    m[ri + j] = s
        if m[rk + k] < LE_ZERO:
            return Zone.empty(dim)
    if any(m[i * dim + i] < LE_ZERO for i in range(dim)):
        return Zone.empty(dim)
    return Zone(dim, tuple(m))


def up(z: Zone) -> Zone:
    """Delay: drop the upper bound of every clock, keep all differences."""
    z = canonicalize(z)
    if z.is_empty():
        raise EmptyZone("cannot delay an empty zone")
    m = list(z.cells)
    for i in range(1, z.dim):
        m[i * z.dim] = INF
    return Zone(z.dim, tuple(m))


def constrain(z: Zone, i: int, j: int, raw: int) -> Zone:
    """Intersect with ``x_i - x_j`` bounded by ``raw``; the result may be empty."""
    if raw >= INF:
        return z
    z = canonicalize(z)
    if z.is_empty():
        return z
    dim = z.dim
    m = list(z.cells)
    if raw >= m[i * dim + j]:
        return z
    if _add(raw, m[j * dim + i]) < LE_ZERO:
        return Zone.empty(dim)
    m[i * dim + j] = raw
    rj = j * dim
    for k in range(dim):
        mki = m[k * dim + i]
        if mki >= INF:
            continue
        through = _add(mki, raw)
        rk = k * dim
        for l in range(dim):
            mjl = m[rj + l]
            if mjl >= INF:
                continue
            s = _add(through, mjl)
            if s < m[rk + l]:
                m[rk + l] = s
    return Zone(dim, tuple(m))


def reset(z: Zone, clocks: Iterable[int]) -> Zone:
    """Pin every clock in ``clocks`` to zero."""
    clocks = list(clocks)
    z = canonicalize(z)
    if z.is_empty():
        raise EmptyZone("cannot reset clocks of an empty zone")
    if not clocks:
        return z
    dim = z.dim
    m = list(z.cells)
    for x in clocks:
        if x == 0:
            raise ValueError("the zero clock cannot be reset")
        rx = x * dim
        for j in range(dim):
            m[rx + j] = m[j]
            m[j * dim + x] = m[j * dim]
        m[rx + x] = LE_ZERO
    return Zone(dim, tuple(m))


def free(z: Zone, clock: int) -> Zone:
    """Remove every constraint on ``clock`` except non-negativity."""
    z = canonicalize(z)
    if z.is_empty():
        return z
    dim = z.dim
    m = list(z.cells)
    rx = clock * dim
    for j in range(dim):
        if j == clock:
            continue
        m[rx + j] = INF
        m[j * dim + clock] = m[j * dim]
    return Zone(dim, tuple(m))


def includes(a: Zone, b: Zone) -> bool:
    """True iff every valuation of ``b`` belongs to ``a``."""
    a, b = canonicalize(a), canonicalize(b)
    if b.is_empty():
        return True
    if a.is_empty():
        return False
    return all(x >= y for x, y in zip(a.cells, b.cells))


def subtract(z: Zone, constraints: Iterable[tuple[int, int, int]]) -> list[Zone]:
    """Zones that together cover the valuations of ``z`` violating some of ``constraints``.

    The pieces may overlap; an empty list means ``z`` satisfies every constraint.
    """
    pieces: list[Zone] = []
    for i, j, raw in constraints:
        if raw >= INF:
            continue
        piece = constrain(z, j, i, negate(raw))
        if not piece.is_empty():
            pieces.append(piece)
    return pieces


def extrapolate(z: Zone, max_consts: Sequence[int]) -> Zone:
    """Classic k-normalization against one maximal constant per clock (``max_consts[0]`` is 0)."""
    z = canonicalize(z)
    if z.is_empty():
        return z
    dim = z.dim
    m = list(z.cells)
    changed = False
    for i in range(dim):
        upper = raw_bound(max_consts[i])
        for j in range(dim):
            if i == j:
                continue
            raw = m[i * dim + j]
            if raw >= INF:
                continue
            if raw > upper:
                m[i * dim + j] = INF
                changed = True
            else:
                lower = raw_bound(-max_consts[j], strict=True)
                if raw < lower:
                    m[i * dim + j] = lower
                    changed = True
    if not changed:
        return z
    return canonicalize(Zone(dim, tuple(m), canonical=False))
