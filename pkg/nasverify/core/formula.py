"""State formulas.

Positive boolean combinations of location-occupancy atoms ``Automaton.Location``.
The textual syntax accepts ``and``/``&&``, ``or``/``||`` and parentheses; ``and``
binds tighter than ``or``.
"""
from __future__ import annotations

import re
from typing import Annotated, Callable, Literal, Mapping, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field

from nasverify.core.network import Network
from nasverify.exceptions import ParseError, UnknownName

LocationPredicate = Callable[[Sequence[str]], bool]


class Atom(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["atom"] = "atom"
    automaton: str
    location: str

    def __str__(self) -> str:
        return f"{self.automaton}.{self.location}"


class And(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["and"] = "and"
    operands: tuple["StateFormula", ...] = Field(min_length=1)

    def __str__(self) -> str:
        return " and ".join(_wrap(op, (And, Or)) for op in self.operands)


class Or(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["or"] = "or"
    operands: tuple["StateFormula", ...] = Field(min_length=1)

    def __str__(self) -> str:
        return " or ".join(_wrap(op, Or) for op in self.operands)


StateFormula = Annotated[Union[Atom, And, Or], Field(discriminator="kind")]

And.model_rebuild()
Or.model_rebuild()


def _wrap(f: BaseModel, nested: type | tuple[type, ...]) -> str:
    return f"({f})" if isinstance(f, nested) else str(f)


_TOKEN = re.compile(r"\s*(?:(\(|\))|(&&|\|\|)|([A-Za-z_][\w.]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError((1, col), f"unexpected character {text[col - 1]!r} in formula")
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), start + 1))
        pos = m.end()
    return tokens


def parse_formula(text: str, labels: Mapping[str, StateFormula] | None = None) -> StateFormula:
    """Parse ``Sensor.Act and (Bus.Post or Bus.Idle)`` style formulas.

    A bare name found in ``labels`` stands for the formula it is bound to.
    """
    labels = labels or {}
    tokens = _tokenize(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos][0] if pos < len(tokens) else None

    def fail(message: str) -> ParseError:
        col = tokens[pos][1] if pos < len(tokens) else len(text) + 1
        return ParseError((1, col), message)

    def disjunction() -> StateFormula:
        nonlocal pos
        parts = [conjunction()]
        while peek() in ("or", "||"):
            pos += 1
            parts.append(conjunction())
        return parts[0] if len(parts) == 1 else Or(operands=tuple(parts))

    def conjunction() -> StateFormula:
        nonlocal pos
        parts = [primary()]
        while peek() in ("and", "&&"):
            pos += 1
            parts.append(primary())
        return parts[0] if len(parts) == 1 else And(operands=tuple(parts))

    def primary() -> StateFormula:
        nonlocal pos
        token = peek()
        if token is None:
            raise fail("unexpected end of formula")
        if token == "(":
            pos += 1
            inner = disjunction()
            if peek() != ")":
                raise fail("expected ')'")
            pos += 1
            return inner
        if token in ("and", "or", "&&", "||", ")"):
            raise fail(f"unexpected {token!r}")
        if token in labels:
            pos += 1
            return labels[token]
        automaton, dot, location = token.partition(".")
        if not dot or not automaton or not location:
            raise fail(f"atom {token!r} must have the form Automaton.Location or name a chain label")
        pos += 1
        return Atom(automaton=automaton, location=location)

    result = disjunction()
    if pos != len(tokens):
        raise fail(f"unexpected {tokens[pos][0]!r}")
    return result


def atoms(f: StateFormula) -> list[Atom]:
    if isinstance(f, Atom):
        return [f]
    return [a for op in f.operands for a in atoms(op)]


def _resolve(atom: Atom, network: Network) -> tuple[int, str]:
    """Index of the atom's automaton and the location id it denotes.

    Members of a composed network carry namespaced ids (``Sensor.Act``); the short
    form ``Act`` is accepted as well.
    """
    for k, a in enumerate(network.automata):
        if a.name != atom.automaton:
            continue
        ids = {loc.id for loc in a.locations}
        for candidate in (f"{atom.automaton}.{atom.location}", atom.location):
            if candidate in ids:
                return k, candidate
        raise UnknownName(f"automaton {atom.automaton} has no location {atom.location}")
    raise UnknownName(f"network has no automaton {atom.automaton}")


def compile_formula(f: StateFormula, network: Network) -> LocationPredicate:
    """Resolve names once and return a predicate over location vectors."""
    if isinstance(f, Atom):
        k, location = _resolve(f, network)
        return lambda locs: locs[k] == location
    parts = [compile_formula(op, network) for op in f.operands]
    if isinstance(f, And):
        return lambda locs: all(p(locs) for p in parts)
    return lambda locs: any(p(locs) for p in parts)


def evaluate(
    f: StateFormula,
    locations: Sequence[str] | Mapping[str, str],
    network: Network | None = None,
) -> bool:
    """Evaluate ``f`` on a location vector of ``network``, or on an automaton -> location mapping."""
    if network is not None:
        if isinstance(locations, Mapping):
            locations = [locations[a.name] for a in network.automata]
        return compile_formula(f, network)(locations)
    if not isinstance(locations, Mapping):
        raise TypeError("a location vector needs the network to resolve automaton names")
    if isinstance(f, Atom):
        if f.automaton not in locations:
            raise UnknownName(f"no automaton {f.automaton} in the location vector")
        return locations[f.automaton] in (f.location, f"{f.automaton}.{f.location}")
    results = [evaluate(op, locations) for op in f.operands]
    return all(results) if isinstance(f, And) else any(results)
