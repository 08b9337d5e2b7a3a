"""DBM operations, checked on examples and against integer-valuation sets."""
from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import delay_points, points, reset_points, satisfies

from nasverify.core.zone import (
    INF,
    LE_ZERO,
    Bound,
    Zone,
    canonicalize,
    constrain,
    extrapolate,
    free,
    includes,
    negate,
    raw_bound,
    reset,
    subtract,
    up,
)
from nasverify.exceptions import EmptyZone

# every clock is kept below this box so that integer points decide the zone
BOX = 8


def box(dim: int) -> list[tuple[int, int, int]]:
    return [(i, 0, raw_bound(BOX)) for i in range(1, dim)]


def random_zone(rng: random.Random) -> Zone:
    dim = rng.choice((2, 3))
    constraints = box(dim)
    for _ in range(rng.randint(0, 4)):
        i, j = rng.sample(range(dim), 2)
        constraints.append((i, j, raw_bound(rng.randint(-BOX, BOX))))
    return Zone.from_constraints(dim, constraints)


def raw_constraint(rng: random.Random, dim: int) -> tuple[int, int, int]:
    i, j = rng.sample(range(dim), 2)
    return i, j, raw_bound(rng.randint(-BOX, BOX))


# examples


def test_bound_order_follows_raw_encoding():
    assert Bound(3, strict=True) < Bound(3) < Bound(4, strict=True)
    assert Bound.infinity().raw == INF
    assert str(Bound(2, strict=True)) == "<2"
    assert str(Bound(2) + Bound(3, strict=True)) == "<5"
    assert (Bound(1) + Bound.infinity()).value is None


def test_zero_zone_contains_only_origin():
    z = Zone.zero(3)
    assert z.contains((0, 0))
    assert not z.contains((0, 1))
    assert not z.is_empty()


def test_up_then_constrain_bounds_delay():
    z = constrain(up(Zone.zero(2)), 1, 0, raw_bound(5))
    assert z.contains((5,))
    assert not z.contains((5.5,))
    assert z.cell(1, 0) == Bound(5)
    assert z.upper_bounded()


def test_contradictory_constraint_gives_empty_zone():
    z = constrain(up(Zone.zero(2)), 1, 0, raw_bound(3))
    z = constrain(z, 0, 1, raw_bound(-4))
    assert z.is_empty()
    assert z.render() == "false"


def test_strict_bounds_meet_at_a_point_is_empty():
    z = up(Zone.zero(2))
    z = constrain(z, 1, 0, raw_bound(3, strict=True))
    z = constrain(z, 0, 1, raw_bound(-3))
    assert z.is_empty()


def test_reset_keeps_other_clocks():
    z = constrain(up(Zone.zero(3)), 1, 0, raw_bound(4))
    z = constrain(z, 0, 1, raw_bound(-2))
    r = reset(z, [2])
    assert r.contains((3, 0))
    assert not r.contains((3, 1))
    assert r.cell(1, 2) == Bound(4)


def test_reset_of_empty_zone_raises():
    with pytest.raises(EmptyZone):
        reset(Zone.empty(2), [1])
    with pytest.raises(EmptyZone):
        up(Zone.empty(2))


def test_zero_clock_cannot_be_reset():
    with pytest.raises(ValueError):
        reset(Zone.zero(2), [0])


def test_free_forgets_one_clock():
    z = constrain(up(Zone.zero(3)), 1, 0, raw_bound(2))
    f = free(z, 2)
    assert f.contains((1, 100))
    assert not f.contains((3, 0))


def test_includes_is_containment():
    small = Zone.from_constraints(2, [(1, 0, raw_bound(2))])
    large = Zone.from_constraints(2, [(1, 0, raw_bound(5))])
    assert includes(large, small)
    assert not includes(small, large)
    assert includes(small, Zone.empty(2))
    assert not includes(Zone.empty(2), small)


def test_extrapolate_drops_bounds_above_max_constant():
    z = Zone.from_constraints(2, [(1, 0, raw_bound(10)), (0, 1, raw_bound(-10))])
    e = extrapolate(z, [0, 3])
    assert e.contains((10,))
    assert e.contains((1000,))
    assert not e.contains((3,))
    assert includes(e, z)


def test_extrapolate_keeps_zone_within_constants():
    z = Zone.from_constraints(2, [(1, 0, raw_bound(2))])
    assert extrapolate(z, [0, 3]) == z


def test_render_names_clocks():
    z = Zone.from_constraints(3, [(1, 0, raw_bound(5)), (0, 1, raw_bound(-2)), (2, 0, raw_bound(0))])
    text = z.render(["0", "x", "y"])
    assert "x >= 2" in text
    assert "x <= 5" in text
    assert "y == 0" in text


def test_universe_is_not_upper_bounded():
    assert not Zone.universe(3).upper_bounded()
    assert Zone.universe(3).cells[0] == LE_ZERO


def test_negate_flips_strictness():
    assert negate(raw_bound(3)) == raw_bound(-3, strict=True)
    assert negate(raw_bound(3, strict=True)) == raw_bound(-3)
    assert negate(negate(raw_bound(-2))) == raw_bound(-2)


def test_subtract_of_satisfied_constraints_is_empty():
    z = Zone.from_constraints(2, [(1, 0, raw_bound(4))])
    assert subtract(z, [(1, 0, raw_bound(5)), (0, 1, INF)]) == []
    (rest,) = subtract(z, [(1, 0, raw_bound(3))])
    assert rest.contains((4,))
    assert not rest.contains((3,))


def test_subtract_leaves_exactly_the_violating_points():
    rng = random.Random(7)
    for _ in range(300):
        z = random_zone(rng)
        constraints = [raw_constraint(rng, z.dim) for _ in range(rng.randint(0, 3))]
        expected = frozenset(p for p in points(z, BOX) if not all(satisfies(p, *c) for c in constraints))
        covered = frozenset().union(*(points(piece, BOX) for piece in subtract(z, constraints)))
        assert covered == expected


# oracle agreement


@pytest.mark.slow
def test_operations_agree_with_integer_points():
    rng = random.Random(20240611)
    mismatches = []
    for n in range(10_000):
        z = random_zone(rng)
        dim = z.dim
        zs = points(z, BOX)
        assert canonicalize(Zone(dim, z.cells, canonical=False)) == z
        if z.is_empty() != (not zs):
            mismatches.append((n, "empty", z))
            continue
        if z.is_empty():
            continue
        if points(up(z), BOX) != delay_points(zs, BOX):
            mismatches.append((n, "up", z))
        i, j, raw = raw_constraint(rng, dim)
        expected = frozenset(p for p in zs if satisfies(p, i, j, raw))
        c = constrain(z, i, j, raw)
        if points(c, BOX) != expected or c.is_empty() != (not expected):
            mismatches.append((n, "constrain", z))
        clocks = rng.sample(range(1, dim), rng.randint(1, dim - 1))
        if points(reset(z, clocks), BOX) != reset_points(zs, clocks):
            mismatches.append((n, "reset", z))
        other = random_zone(rng)
        if other.dim == dim:
            os = points(other, BOX)
            if includes(z, other) != (os <= zs):
                mismatches.append((n, "includes", z, other))
    assert mismatches == []


@given(
    st.integers(2, 3).flatmap(
        lambda dim: st.tuples(
            st.just(dim),
            st.lists(
                st.tuples(st.integers(0, dim - 1), st.integers(0, dim - 1), st.integers(-BOX, BOX), st.booleans()),
                max_size=6,
            ),
        )
    )
)
@settings(max_examples=300)
def test_canonical_form_does_not_depend_on_constraint_order(case):
    dim, raw = case
    constraints = [(i, j, raw_bound(c, s)) for i, j, c, s in raw if i != j]
    forward = Zone.from_constraints(dim, constraints)
    backward = Zone.from_constraints(dim, list(reversed(constraints)))
    assert forward == backward
    assert canonicalize(forward) == forward


@given(st.integers(0, BOX), st.integers(0, BOX))
@settings(max_examples=100)
def test_incremental_constrain_matches_closure(lo, hi):
    z = up(Zone.zero(2))
    stepwise = constrain(constrain(z, 1, 0, raw_bound(hi)), 0, 1, raw_bound(-lo))
    closed = Zone.from_constraints(2, [(1, 0, raw_bound(hi)), (0, 1, raw_bound(-lo))])
    assert stepwise.is_empty() == closed.is_empty()
    if not closed.is_empty():
        assert stepwise == closed
