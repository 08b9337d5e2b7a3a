"""Model builders shared by the test modules."""
from __future__ import annotations

from nasverify.core.formula import Atom
from nasverify.core.jitter import (
    ChainComponent,
    EventTriggered,
    JitterInterval,
    JitterSpec,
    Periodic,
    TimeChain,
)
from nasverify.core.patterns import PeriodSpec


def event_chain(bounds, *, source: bool = False) -> TimeChain:
    """A chain of event-triggered components whose software jitter is ``bounds[k]``."""
    components = []
    for k, (lo, hi) in enumerate(bounds):
        in_chan = f"c{k}" if k or source else None
        components.append(
            ChainComponent(
                name=f"C{k}",
                spec=JitterSpec(software=JitterInterval(min=lo, max=hi)),
                activation=EventTriggered(in_chan=in_chan, out_chan=f"c{k + 1}"),
            )
        )
    return TimeChain(components=tuple(components))


def periodic_chain(bounds, period: int, jit_lb: int = 0, jit_ub: int = 0) -> TimeChain:
    """Like ``event_chain`` but the first component samples every ``period + [jit_lb, jit_ub]``."""
    chain = event_chain(bounds)
    first = chain.components[0].model_copy(
        update={
            "activation": Periodic(
                period=PeriodSpec(period=period, jit_lb=jit_lb, jit_ub=jit_ub), out_chan="c1"
            )
        }
    )
    return TimeChain(components=(first,) + chain.components[1:])


def act(automaton: str) -> Atom:
    return Atom(automaton=automaton, location="Act")


def post(automaton: str) -> Atom:
    return Atom(automaton=automaton, location="Post")
