"""Model documents.

A model document is YAML with a versioned schema. Time values are written in
milliseconds and converted to integer ticks with the document's ``resolution``
(ticks per millisecond); a value that does not land on a whole tick is rejected.

    schema_version: 1
    resolution: 10
    components:
      - name: Sensor
        jitter: {hardware: 1, software: [0.5, 2], communication: 0}
        activation: {kind: periodic, period: 1000, jitter: [-10, 10], out: sample}
      - name: Actuator
        jitter: {hardware: 5, software: [2, 10]}
        activation: {kind: event, in: sample, out: actuate}
    query: {stimulus: Sensor.Act, response: Actuator.Post, bound: 50}
"""
from __future__ import annotations

import logging
from decimal import Decimal
from typing import Annotated, Any, Callable, Literal, Sequence, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from nasverify.core.boiler import BoilerConfig, PumpCommand, PumpCommandSchedule, PumpState, required_response_bound
from nasverify.core.formula import StateFormula, parse_formula
from nasverify.core.jitter import (
    ChainComponent,
    EventTriggered,
    JitterInterval,
    JitterSpec,
    Periodic,
    TimeChain,
    build_time_chain,
    chain_formulas,
    chain_labels,
)
from nasverify.core.network import Network
from nasverify.core.patterns import PeriodSpec
from nasverify.core.verifier import Query
from nasverify.exceptions import InvalidConfig, ParseError, ResolutionError

logger = logging.getLogger(__name__)

SCHEMA_VERSION: int = 1

Locator = Callable[[Sequence[Any]], "tuple[int, int] | None"]
JitterValue = Union[float, tuple[float, float]]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class JitterSection(_Section):
    hardware: JitterValue = 0
    software: JitterValue = 0
    communication: JitterValue = 0


class EventSection(_Section):
    kind: Literal["event"]
    in_: str | None = Field(None, alias="in")
    out: str


class PeriodicSection(_Section):
    kind: Literal["periodic"]
    period: float
    jitter: JitterValue = 0
    out: str


class ComponentSection(_Section):
    name: str
    jitter: JitterSection = JitterSection()
    activation: Annotated[Union[EventSection, PeriodicSection], Field(discriminator="kind")]


class LabelsSection(_Section):
    stimulus: str = "stimulus"
    response: str = "response"


class QuerySection(_Section):
    stimulus: str | None = None
    response: str | None = None
    bound: float | None = None


class CommandSection(_Section):
    time: float
    pump: Literal[1, 2]
    command: PumpState


class BoilerSection(_Section):
    w0: float
    pump_rates: tuple[float, float]
    pump_start_delays: tuple[float, float] = (0.0, 0.0)
    vaporization_rate: float
    power: float = 0.0
    level_limits: tuple[float, float]
    stimulus_level: float | None = None
    schedule: list[CommandSection] = []


class ModelDocument(_Section):
    """Logical schema of a model document (times in milliseconds)."""

    schema_version: Literal[1]
    resolution: float = Field(gt=0)
    labels: LabelsSection = LabelsSection()
    components: list[ComponentSection] = Field(min_length=1)
    query: QuerySection | None = None
    boiler: BoilerSection | None = None


class ModelBundle(BaseModel):
    """A parsed model: the time-chain, the query formulas and bound, and the optional boiler."""

    model_config = ConfigDict(frozen=True)

    resolution: float
    chain: TimeChain
    stimulus: StateFormula
    response: StateFormula
    bound: int | None = None
    boiler: BoilerConfig | None = None
    schedule: PumpCommandSchedule | None = None
    stimulus_level: float | None = None

    def network(self) -> Network:
        return build_time_chain(self.chain)

    def derived_bound(self) -> int | None:
        """Response bound in ticks implied by the boiler at its stimulus level."""
        if self.boiler is None or self.stimulus_level is None:
            return None
        return required_response_bound(self.boiler, self.stimulus_level, self.resolution)

    def query(self, bound: int | None = None) -> Query:
        d = bound if bound is not None else self.bound
        if d is None:
            d = self.derived_bound()
        if d is None:
            raise InvalidConfig("no response bound: pass one, set query.bound or give boiler.stimulus_level")
        try:
            return Query(stimulus=self.stimulus, response=self.response, bound_d=d)
        except ValidationError as e:
            raise InvalidConfig(f"invalid response bound {d!r}: {e.errors()[0]['msg']}") from e

    def to_ticks(self, ms: float) -> int:
        return to_ticks(ms, self.resolution)

    def to_ms(self, ticks: int) -> float:
        return to_ms(ticks, self.resolution)


def to_ticks(ms: float, resolution: float, location: tuple[int, int] | None = None) -> int:
    exact = Decimal(repr(ms)) * Decimal(repr(resolution))
    if exact != exact.to_integral_value():
        raise ResolutionError(
            location, f"{ms} ms is {exact.normalize()} ticks at {resolution} ticks/ms, not a whole number of ticks"
        )
    return int(exact)


def to_ms(ticks: int, resolution: float) -> float:
    value = Decimal(ticks) / Decimal(repr(resolution))
    return int(value) if value == value.to_integral_value() else float(value)


def _locator(root: yaml.Node) -> Locator:
    """Map a pydantic error location onto the (line, column) of the YAML node it names."""

    def locate(path: Sequence[Any]) -> tuple[int, int] | None:
        node = root
        for k, key in enumerate(path):
            if isinstance(node, yaml.MappingNode):
                for key_node, value_node in node.value:
                    if key_node.value == str(key):
                        node = key_node if k == len(path) - 1 else value_node
                        break
                # keys absent from the document (union tags, missing fields) keep the parent
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
        mark = node.start_mark
        return mark.line + 1, mark.column + 1

    return locate


def _interval(value: JitterValue, resolution: float, where: tuple[int, int] | None) -> tuple[int, int]:
    lo, hi = (value, value) if isinstance(value, (int, float)) else value
    return to_ticks(lo, resolution, where), to_ticks(hi, resolution, where)


def _build(doc: ModelDocument, locate: Locator) -> ModelBundle:
    res = doc.resolution

    def invalid(path: Sequence[Any], e: Exception) -> ParseError:
        if isinstance(e, ValidationError):
            message = "; ".join(err["msg"] for err in e.errors())
        else:
            message = str(e)
        return ParseError(locate(path), f"{'.'.join(str(p) for p in path)}: {message}")

    components: list[ChainComponent] = []
    for i, c in enumerate(doc.components):
        here = ("components", i)
        jitter = {}
        for part in ("hardware", "software", "communication"):
            path = here + ("jitter", part)
            lo, hi = _interval(getattr(c.jitter, part), res, locate(path))
            try:
                jitter[part] = JitterInterval(min=lo, max=hi)
            except ValidationError as e:
                raise invalid(path, e) from e
        try:
            spec = JitterSpec(**jitter)
        except ValidationError as e:
            raise invalid(here + ("jitter",), e) from e
        act = c.activation
        where = here + ("activation",)
        try:
            if isinstance(act, PeriodicSection):
                jit_lb, jit_ub = _interval(act.jitter, res, locate(where + ("jitter",)))
                period = PeriodSpec(
                    period=to_ticks(act.period, res, locate(where + ("period",))), jit_lb=jit_lb, jit_ub=jit_ub
                )
                activation = Periodic(period=period, out_chan=act.out)
            else:
                activation = EventTriggered(in_chan=act.in_, out_chan=act.out)
        except ValidationError as e:
            raise invalid(where, e) from e
        components.append(ChainComponent(name=c.name, spec=spec, activation=activation))
    try:
        chain = TimeChain(
            components=tuple(components),
            stimulus_label=doc.labels.stimulus,
            response_label=doc.labels.response,
        )
    except ValidationError as e:
        raise invalid(("components",), e) from e

    stimulus, response = chain_formulas(chain)
    bound = None
    if doc.query is not None:
        q = doc.query
        for field in ("stimulus", "response"):
            text = getattr(q, field)
            if text is None:
                continue
            try:
                formula = parse_formula(text, chain_labels(chain))
            except ParseError as e:
                raise ParseError(locate(("query", field)), f"query.{field}: {e.message}") from e
            if field == "stimulus":
                stimulus = formula
            else:
                response = formula
        if q.bound is not None:
            if q.bound < 0:
                raise ParseError(locate(("query", "bound")), "query.bound: must be non-negative")
            bound = to_ticks(q.bound, res, locate(("query", "bound")))

    boiler = schedule = stimulus_level = None
    if doc.boiler is not None:
        b = doc.boiler
        try:
            boiler = BoilerConfig(**b.model_dump(exclude={"stimulus_level", "schedule"}))
            schedule = PumpCommandSchedule(
                commands=tuple(PumpCommand(**cmd.model_dump()) for cmd in b.schedule)
            )
        except ValidationError as e:
            raise invalid(("boiler",), e) from e
        stimulus_level = b.stimulus_level
        if stimulus_level is not None and not boiler.w_min < stimulus_level < boiler.w_max:
            raise ParseError(locate(("boiler", "stimulus_level")), "boiler.stimulus_level: must lie inside level_limits")

    return ModelBundle(
        resolution=res,
        chain=chain,
        stimulus=stimulus,
        response=response,
        bound=bound,
        boiler=boiler,
        schedule=schedule,
        stimulus_level=stimulus_level,
    )


def parse_model(text: str) -> ModelBundle:
    """Parse and validate a model document; errors carry the (line, column) of the offending node."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark or e.context_mark
        location = (mark.line + 1, mark.column + 1) if mark is not None else None
        raise ParseError(location, f"invalid YAML: {e.problem or e}") from e
    except yaml.YAMLError as e:
        raise ParseError(None, f"invalid YAML: {e}") from e
    if root is None:
        raise ParseError(None, "empty model document")
    locate = _locator(root)
    if not isinstance(data, dict):
        raise ParseError(locate(()), "a model document must be a mapping")
    try:
        doc = ModelDocument.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        path = [p for p in err["loc"]]
        raise ParseError(locate(path), f"{'.'.join(str(p) for p in path) or 'document'}: {err['msg']}") from e
    bundle = _build(doc, locate)
    logger.debug(f"Parsed model with {len(bundle.chain.components)} components at {doc.resolution} ticks/ms")
    return bundle


def _number(value: float) -> int | float:
    return int(value) if float(value).is_integer() else value


def _jitter_value(interval: JitterInterval, resolution: float) -> Any:
    if interval.min == interval.max:
        return to_ms(interval.min, resolution)
    return [to_ms(interval.min, resolution), to_ms(interval.max, resolution)]


def render_model(bundle: ModelBundle) -> str:
    """Canonical YAML rendering; ``parse_model(render_model(b)) == b``."""
    res = bundle.resolution
    components = []
    for c in bundle.chain.components:
        jitter = {
            "hardware": _jitter_value(c.spec.hardware, res),
            "software": _jitter_value(c.spec.software, res),
            "communication": _jitter_value(c.spec.communication, res),
        }
        act = c.activation
        if isinstance(act, Periodic):
            activation = {
                "kind": "periodic",
                "period": to_ms(act.period.period, res),
                "jitter": [to_ms(act.period.jit_lb, res), to_ms(act.period.jit_ub, res)],
                "out": act.out_chan,
            }
        else:
            activation = {"kind": "event"}
            if act.in_chan is not None:
                activation["in"] = act.in_chan
            activation["out"] = act.out_chan
        components.append({"name": c.name, "jitter": jitter, "activation": activation})
    document: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "resolution": _number(res),
        "labels": {"stimulus": bundle.chain.stimulus_label, "response": bundle.chain.response_label},
        "components": components,
        "query": {"stimulus": str(bundle.stimulus), "response": str(bundle.response)},
    }
    if bundle.bound is not None:
        document["query"]["bound"] = to_ms(bundle.bound, res)
    if bundle.boiler is not None:
        b = bundle.boiler
        boiler: dict[str, Any] = {
            "w0": b.w0,
            "pump_rates": list(b.pump_rates),
            "pump_start_delays": list(b.pump_start_delays),
            "vaporization_rate": b.vaporization_rate,
            "power": b.power,
            "level_limits": list(b.level_limits),
        }
        if bundle.stimulus_level is not None:
            boiler["stimulus_level"] = bundle.stimulus_level
        if bundle.schedule is not None:
            boiler["schedule"] = [
                {"time": cmd.time, "pump": cmd.pump, "command": cmd.command.value} for cmd in bundle.schedule.commands
            ]
        document["boiler"] = boiler
    return yaml.safe_dump(document, sort_keys=False)
