"""UPPAAL export.

Writes a network in UPPAAL's textual XTA format together with a query file, and
reads the exported subset back for a syntactic self-check.

UPPAAL has no time-bounded leads-to operator, so the model carries an observer: a
clock and an ``armed`` flag updated on the edges that change the query's formulas.
The query file then checks the bound as the safety property ``A[] not (armed && z > d)``
plus the absence of deadlocks while a stimulus is pending.
"""
from __future__ import annotations

import logging
import re
from typing import Iterator

from pydantic import BaseModel, ConfigDict

from nasverify.core.automaton import ZERO_CLOCK, ClockConstraint, Direction, Edge, TimedAutomaton, fresh_name
from nasverify.core.formula import And, Atom, StateFormula, atoms, compile_formula
from nasverify.core.network import Network
from nasverify.core.verifier import Query
from nasverify.exceptions import ParseError, UnknownName, UnsupportedFeature

logger = logging.getLogger(__name__)

XTA_KEYWORDS = frozenset(
    {
        "chan",
        "clock",
        "process",
        "state",
        "init",
        "trans",
        "guard",
        "sync",
        "assign",
        "system",
        "urgent",
        "commit",
        "bool",
        "int",
        "void",
        "if",
        "else",
        "true",
        "false",
        "deadlock",
    }
)


class UppaalExport(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    query: str


def _sanitize_identifier(name: str) -> str:
    """Turn a model name into an XTA identifier (alphanumeric and _)."""
    sanitized: str = name.strip().strip(".")
    # Namespace separators become underscores
    sanitized = sanitized.replace(".", "_")
    sanitized = re.sub(r"[^a-zA-Z0-9_]", "_", sanitized)
    if not sanitized or sanitized[0].isdigit():
        sanitized = f"_{sanitized}"
    if sanitized in XTA_KEYWORDS:
        sanitized = f"{sanitized}_"
    return sanitized


def _local(name: str, automaton: str) -> str:
    prefix = f"{automaton}."
    return name[len(prefix):] if name.startswith(prefix) else name


class _Names:
    """Stable, collision-free XTA identifiers for processes, and for clocks and locations per process."""

    def __init__(self, network: Network):
        self.process: dict[str, str] = {}
        self.clock: dict[str, dict[str, str]] = {}
        self.location: dict[str, dict[str, str]] = {}
        taken: set[str] = set()
        for a in network.automata:
            name = fresh_name(_sanitize_identifier(a.name), taken)
            taken.add(name)
            self.process[a.name] = name
        channels = {_sanitize_identifier(c) for c in network.channels}
        for a in network.automata:
            local_taken = set(channels)
            self.clock[a.name] = {}
            for c in a.clocks:
                ident = fresh_name(_sanitize_identifier(_local(c, a.name)), local_taken)
                local_taken.add(ident)
                self.clock[a.name][c] = ident
            self.location[a.name] = {}
            for loc in a.locations:
                ident = fresh_name(_sanitize_identifier(_local(loc.id, a.name)), local_taken)
                local_taken.add(ident)
                self.location[a.name][loc.id] = ident


def _constraint(c: ClockConstraint, clocks: dict[str, str], *, invariant: bool) -> str | None:
    if c.bound is None:
        return None
    if c.left == ZERO_CLOCK:
        if invariant:
            raise UnsupportedFeature(f"lower-bound invariant {c} cannot be expressed in UPPAAL")
        op = ">" if c.strict else ">="
        return f"{clocks[c.right]} {op} {-c.bound}"
    if c.right == ZERO_CLOCK:
        return f"{clocks[c.left]} {c.relation} {c.bound}"
    if invariant:
        raise UnsupportedFeature(f"diagonal invariant {c} is outside the exported subset")
    return f"{clocks[c.left]} - {clocks[c.right]} {c.relation} {c.bound}"


def _process(a: TimedAutomaton, names: _Names, observer: _Observer) -> list[str]:
    clocks = names.clock[a.name]
    locations = names.location[a.name]
    lines = [f"process {names.process[a.name]}() {{"]
    if a.clocks:
        lines.append(f"clock {', '.join(clocks[c] for c in a.clocks)};")
    states = []
    for loc in a.locations:
        parts = [p for p in (_constraint(c, clocks, invariant=True) for c in loc.invariant) if p]
        states.append(f"    {locations[loc.id]}" + (f" {{{' && '.join(parts)}}}" if parts else ""))
    lines.append("state")
    lines.append(",\n".join(states) + ";")
    lines.append(f"init {locations[a.initial]};")
    if a.edges:
        transitions = []
        for e in a.edges:
            labels = []
            guard = [p for p in (_constraint(c, clocks, invariant=False) for c in e.guard) if p]
            if guard:
                labels.append(f"guard {' && '.join(guard)};")
            if e.sync is not None:
                labels.append(f"sync {_sanitize_identifier(e.sync.channel)}{e.sync.direction.value};")
            updates = [f"{clocks[c]} = 0" for c in e.resets] + observer.updates(a, e)
            if updates:
                labels.append(f"assign {', '.join(updates)};")
            transitions.append(f"    {locations[e.source]} -> {locations[e.target]} {{ {' '.join(labels)} }}")
        lines.append("trans")
        lines.append(",\n".join(transitions) + ";")
    lines.append("}")
    return lines


class _Observer:
    """Global declarations and edge updates that track ``stimulus ->_d response`` inside the model.

    Every automaton named in the query carries an integer ``at_<process>`` holding the
    index of its current location. ``observe()`` re-evaluates both formulas once per
    step: on internal edges and on the receiving side of a handshake, whose update
    UPPAAL runs after the emitter's. A step that makes the stimulus true while nothing
    is pending arms the observer and resets its clock; entering a response state
    disarms it.
    """

    def __init__(self, network: Network, query: Query, names: _Names):
        self.network = network
        self.query = query
        self.names = names
        taken = set(XTA_KEYWORDS) | set(names.process.values())
        taken |= {_sanitize_identifier(c) for c in network.channels}
        for a in network.automata:
            taken |= set(names.clock[a.name].values()) | set(names.location[a.name].values())

        def fresh(base: str) -> str:
            name = fresh_name(base, taken)
            taken.add(name)
            return name

        self.clock = fresh("z")
        self.armed = fresh("armed")
        self.was_stimulus = fresh("was_stimulus")
        self.function = fresh("observe")
        mentioned = {atom.automaton for f in (query.stimulus, query.response) for atom in atoms(f)}
        self.at = {a.name: fresh(f"at_{names.process[a.name]}") for a in network.automata if a.name in mentioned}
        self.observed_channels = {
            e.sync.channel
            for a in network.automata
            if a.name in self.at
            for e in a.edges
            if e.sync is not None
        }

    def updates(self, a: TimedAutomaton, e: Edge) -> list[str]:
        out = []
        if a.name in self.at:
            index = [loc.id for loc in a.locations].index(e.target)
            out.append(f"{self.at[a.name]} = {index}")
        if e.sync is None:
            observe = a.name in self.at
        else:
            observe = e.sync.direction is Direction.RECEIVE and e.sync.channel in self.observed_channels
        if observe:
            out.append(f"{self.function}()")
        return out

    def _condition(self, f: StateFormula) -> str:
        if isinstance(f, Atom):
            for a in self.network.automata:
                if a.name != f.automaton:
                    continue
                ids = [loc.id for loc in a.locations]
                for candidate in (f"{f.automaton}.{f.location}", f.location):
                    if candidate in ids:
                        return f"{self.at[a.name]} == {ids.index(candidate)}"
                raise UnknownName(f"automaton {f.automaton} has no location {f.location}")
            raise UnknownName(f"network has no automaton {f.automaton}")
        joiner = " && " if isinstance(f, And) else " || "
        return joiner.join(f"({self._condition(op)})" for op in f.operands)

    def declarations(self) -> list[str]:
        stimulus, response = self._condition(self.query.stimulus), self._condition(self.query.response)
        initial = self.network.initial_locations()
        stimulus_now = compile_formula(self.query.stimulus, self.network)(initial)
        armed = stimulus_now and not compile_formula(self.query.response, self.network)(initial)
        lines = [f"clock {self.clock};"]
        lines.append(f"bool {self.armed} = {str(armed).lower()};")
        lines.append(f"bool {self.was_stimulus} = {str(stimulus_now).lower()};")
        for a in self.network.automata:
            if a.name in self.at:
                lines.append(f"int {self.at[a.name]} = {[loc.id for loc in a.locations].index(a.initial)};")
        lines += [
            f"void {self.function}() {{",
            f"    if (!{self.armed} && !{self.was_stimulus} && ({stimulus})) {{",
            f"        {self.armed} = true;",
            f"        {self.clock} = 0;",
            "    }",
            f"    if ({self.armed} && ({response})) {{",
            f"        {self.armed} = false;",
            "    }",
            f"    {self.was_stimulus} = {stimulus};",
            "}",
        ]
        return lines

    def queries(self) -> list[str]:
        d = self.query.bound_d
        return [
            f"A[] not ({self.armed} && {self.clock} > {d})",
            f"A[] not ({self.armed} && deadlock)",
        ]


def _formula(f: StateFormula, network: Network, names: _Names) -> str:
    if isinstance(f, Atom):
        for a in network.automata:
            if a.name != f.automaton:
                continue
            for candidate in (f"{f.automaton}.{f.location}", f.location):
                if candidate in names.location[a.name]:
                    return f"{names.process[a.name]}.{names.location[a.name][candidate]}"
            raise UnknownName(f"automaton {f.automaton} has no location {f.location}")
        raise UnknownName(f"network has no automaton {f.automaton}")
    joiner = " && " if isinstance(f, And) else " || "
    parts = []
    for op in f.operands:
        text = _formula(op, network, names)
        parts.append(f"({text})" if not isinstance(op, Atom) else text)
    return joiner.join(parts)


def export_uppaal(n: Network, q: Query) -> UppaalExport:
    """XTA model and query text; the output depends only on the network and query."""
    names = _Names(n)
    observer = _Observer(n, q, names)
    processes: list[str] = []
    for a in n.automata:
        processes.extend(_process(a, names, observer))
        processes.append("")
    lines = ["// timed-automata network exported by nasverify"]
    if n.channels:
        lines.append(f"chan {', '.join(sorted(_sanitize_identifier(c) for c in n.channels))};")
    lines.extend(observer.declarations())
    lines.append("")
    lines.extend(processes)
    lines.append(f"system {', '.join(names.process[a.name] for a in n.automata)};")
    stimulus = _formula(q.stimulus, n, names)
    response = _formula(q.response, n, names)
    query = [
        f"// {q.stimulus} leads to {q.response} within {q.bound_d} ticks",
        f"// ({stimulus}) --> ({response}), timed by the observer clock {observer.clock}",
        *observer.queries(),
    ]
    logger.debug(f"Exported {len(n.automata)} processes to XTA")
    return UppaalExport(model="\n".join(lines) + "\n", query="\n".join(query) + "\n")


# Parsing the exported subset


class XtaTransition(BaseModel):
    source: str
    target: str
    guard: str | None = None
    sync: str | None = None
    assign: str | None = None


class XtaProcess(BaseModel):
    name: str
    clocks: list[str] = []
    states: dict[str, str | None] = {}
    init: str
    transitions: list[XtaTransition] = []


class XtaModel(BaseModel):
    channels: list[str] = []
    clocks: list[str] = []
    variables: dict[str, str | None] = {}
    functions: dict[str, str] = {}
    processes: list[XtaProcess] = []
    system: list[str] = []


_XTA_TOKEN = re.compile(
    r"(?P<ws>\s+|//[^\n]*)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<num>-?\d+)"
    r"|(?P<op>->|<=|>=|==|&&|\|\||[-<>=!?{}(),;.+])"
)


def _tokens(text: str) -> Iterator[tuple[str, str, int, int]]:
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _XTA_TOKEN.match(text, pos)
        if m is None:
            raise ParseError((line, pos - line_start + 1), f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            yield kind, m.group(), line, m.start() - line_start + 1
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rfind("\n") + 1
        pos = m.end()


class _XtaParser:
    def __init__(self, text: str):
        self.tokens = list(_tokens(text))
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos][1] if self.pos < len(self.tokens) else None

    def error(self, message: str) -> ParseError:
        if self.pos < len(self.tokens):
            _, _, line, col = self.tokens[self.pos]
            return ParseError((line, col), message)
        return ParseError(None, f"unexpected end of input: {message}")

    def next(self) -> str:
        if self.pos >= len(self.tokens):
            raise self.error("more input expected")
        value = self.tokens[self.pos][1]
        self.pos += 1
        return value

    def expect(self, value: str) -> None:
        if self.peek() != value:
            raise self.error(f"expected {value!r}, found {self.peek()!r}")
        self.pos += 1

    def identifier(self) -> str:
        if self.pos >= len(self.tokens) or self.tokens[self.pos][0] != "id":
            raise self.error(f"expected an identifier, found {self.peek()!r}")
        return self.next()

    def identifiers(self) -> list[str]:
        names = [self.identifier()]
        while self.peek() == ",":
            self.pos += 1
            names.append(self.identifier())
        return names

    def expression(self, stops: tuple[str, ...]) -> str:
        parts: list[str] = []
        while self.peek() is not None and self.peek() not in stops:
            parts.append(self.next())
        if not parts:
            raise self.error("empty expression")
        return " ".join(parts)

    def model(self) -> XtaModel:
        result = XtaModel()
        while self.peek() is not None:
            keyword = self.peek()
            if keyword == "chan":
                self.pos += 1
                result.channels.extend(self.identifiers())
                self.expect(";")
            elif keyword == "clock":
                self.pos += 1
                result.clocks.extend(self.identifiers())
                self.expect(";")
            elif keyword in ("bool", "int"):
                self.pos += 1
                result.variables.update(self.variables())
            elif keyword == "void":
                self.pos += 1
                name = self.identifier()
                result.functions[name] = self.function()
            elif keyword == "process":
                result.processes.append(self.process())
            elif keyword == "system":
                self.pos += 1
                result.system = self.identifiers()
                self.expect(";")
            else:
                raise self.error(f"unexpected {keyword!r} at top level")
        return result

    def variables(self) -> dict[str, str | None]:
        """``a = 1, b;`` after the type keyword."""
        declared: dict[str, str | None] = {}
        while True:
            name = self.identifier()
            value = None
            if self.peek() == "=":
                self.pos += 1
                value = self.expression((",", ";"))
            declared[name] = value
            if self.peek() != ",":
                break
            self.pos += 1
        self.expect(";")
        return declared

    def function(self) -> str:
        """Parameterless function; the body is kept as text."""
        self.expect("(")
        self.expect(")")
        self.expect("{")
        depth, body = 1, []
        while True:
            token = self.next()
            if token == "{":
                depth += 1
            elif token == "}":
                depth -= 1
                if depth == 0:
                    return " ".join(body)
            body.append(token)

    def process(self) -> XtaProcess:
        self.expect("process")
        name = self.identifier()
        self.expect("(")
        self.expect(")")
        self.expect("{")
        clocks: list[str] = []
        while self.peek() == "clock":
            self.pos += 1
            clocks.extend(self.identifiers())
            self.expect(";")
        self.expect("state")
        states: dict[str, str | None] = {}
        while True:
            state = self.identifier()
            invariant = None
            if self.peek() == "{":
                self.pos += 1
                invariant = self.expression(("}",))
                self.expect("}")
            states[state] = invariant
            if self.peek() != ",":
                break
            self.pos += 1
        self.expect(";")
        self.expect("init")
        init = self.identifier()
        self.expect(";")
        transitions: list[XtaTransition] = []
        if self.peek() == "trans":
            self.pos += 1
            while True:
                transitions.append(self.transition())
                if self.peek() != ",":
                    break
                self.pos += 1
            self.expect(";")
        self.expect("}")
        return XtaProcess(name=name, clocks=clocks, states=states, init=init, transitions=transitions)

    def transition(self) -> XtaTransition:
        source = self.identifier()
        self.expect("->")
        target = self.identifier()
        self.expect("{")
        labels: dict[str, str] = {}
        while self.peek() in ("guard", "sync", "assign"):
            label = self.next()
            if label in labels:
                raise self.error(f"duplicate {label} label")
            labels[label] = self.expression((";",))
            self.expect(";")
        self.expect("}")
        return XtaTransition(source=source, target=target, **labels)


def parse_xta(text: str) -> XtaModel:
    """Parse the exported XTA subset and check its cross references."""
    model = _XtaParser(text).model()
    names = [p.name for p in model.processes]
    for p in model.processes:
        if p.init not in p.states:
            raise ParseError(None, f"process {p.name}: initial state {p.init} is not declared")
        for t in p.transitions:
            for state in (t.source, t.target):
                if state not in p.states:
                    raise ParseError(None, f"process {p.name}: transition uses undeclared state {state}")
            if t.sync is not None:
                channel = t.sync.split()[0]
                if channel not in model.channels:
                    raise ParseError(None, f"process {p.name}: undeclared channel {channel}")
            for call in re.findall(r"([A-Za-z_]\w*) \( \)", t.assign or ""):
                if call not in model.functions:
                    raise ParseError(None, f"process {p.name}: call of undeclared function {call}")
    for s in model.system:
        if s not in names:
            raise ParseError(None, f"system declaration names unknown process {s}")
    return model
