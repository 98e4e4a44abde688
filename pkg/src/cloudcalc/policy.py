"""Usage automata and history-based policy checks.

An automaton recognises *bad* histories: reaching one of its offending
states means the policy is violated.  Events with no matching arc leave the
state unchanged, and offending states are traps.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .syntax import Event, Resource, Value, is_identifier

WILDCARD = None


class PolicyError(ValueError):
    """An automaton definition violates a well-formedness rule."""


# -- history entries ------------------------------------------------------------


@dataclass(frozen=True)
class LinkEntry:
    service: str

    def __str__(self):
        return f"link {self.service}"


@dataclass(frozen=True)
class InvokeEntry:
    service: str
    value: Value

    def __str__(self):
        return f"invoke {self.service}({self.value})"


def history_events(history) -> list:
    return [h for h in history if isinstance(h, Event)]


# -- automata -----------------------------------------------------------------


@dataclass(frozen=True)
class EventPattern:
    """Event name plus per-argument resource literal or wildcard (``None``)."""

    name: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def matches(self, ev: Event) -> bool:
        if ev.name != self.name or len(ev.args) != len(self.args):
            return False
        return all(p is WILDCARD or (isinstance(a, Resource) and a.id == p)
                   for p, a in zip(self.args, ev.args))

    def overlaps(self, other: "EventPattern") -> bool:
        if self.name != other.name or len(self.args) != len(other.args):
            return False
        return all(p is WILDCARD or q is WILDCARD or p == q
                   for p, q in zip(self.args, other.args))

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join('_' if a is None else a for a in self.args)})"


@dataclass(frozen=True)
class Transition:
    source: str
    pattern: EventPattern
    target: str


@dataclass(frozen=True)
class UsageAutomaton:
    name: str
    states: tuple
    initial: str
    offending: frozenset
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "offending", frozenset(self.offending))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        self._validate()

    def _validate(self):
        if not is_identifier(self.name):
            raise PolicyError(f"bad policy name {self.name!r}")
        states = set(self.states)
        if len(states) != len(self.states):
            raise PolicyError("duplicate state")
        if self.initial not in states:
            raise PolicyError(f"undeclared state {self.initial!r} (initial)")
        for s in self.offending:
            if s not in states:
                raise PolicyError(f"undeclared state {s!r} (offending)")
        arity = {}
        for t in self.transitions:
            for s in (t.source, t.target):
                if s not in states:
                    raise PolicyError(f"undeclared state {s!r} in transition")
            if t.source in self.offending:
                raise PolicyError(f"transition from offending state {t.source}")
            n = arity.setdefault(t.pattern.name, len(t.pattern.args))
            if n != len(t.pattern.args):
                raise PolicyError(f"event {t.pattern.name} used with arities {n} and "
                                  f"{len(t.pattern.args)}")
        for i, t in enumerate(self.transitions):
            for u in self.transitions[i + 1:]:
                if t.source == u.source and t.pattern.overlaps(u.pattern):
                    raise PolicyError(f"nondeterministic overlap at {t.source}/{t.pattern.name}: "
                                      f"{t.pattern} and {u.pattern}")

    @property
    def alphabet(self) -> frozenset:
        return frozenset(t.pattern.name for t in self.transitions)

    def step(self, state: str, ev: Event) -> str:
        return automaton_step(self, state, ev)


def automaton_step(a: UsageAutomaton, state: str, ev: Event) -> str:
    """Successor of ``state`` on ``ev``; unmatched events self-loop."""
    for t in a.transitions:
        if t.source == state and t.pattern.matches(ev):
            return t.target
    return state


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    prefix: Optional[int] = None

    def __bool__(self):
        return self.accepted

    def __str__(self):
        return "accept" if self.accepted else f"reject {self.prefix}"


ACCEPT = Verdict(True)


@lru_cache(maxsize=65536)
def _replay(a: UsageAutomaton, history: tuple):
    state = a.initial
    if state in a.offending:
        return state, 0
    for i, entry in enumerate(history):
        if not isinstance(entry, Event):
            continue
        state = automaton_step(a, state, entry)
        if state in a.offending:
            return state, i + 1
    return state, None


def final_state(a: UsageAutomaton, history) -> str:
    return _replay(a, tuple(history))[0]


def policy_accepts(a: UsageAutomaton, history) -> Verdict:
    """Accept, or reject with the length of the shortest violating prefix.

    Prefix lengths count every history entry, link and invoke bookkeeping
    included; only events drive the automaton.
    """
    _, k = _replay(a, tuple(history))
    return ACCEPT if k is None else Verdict(False, k)


def permits_next(a: UsageAutomaton, history, ev: Event) -> bool:
    """Whether emitting ``ev`` after ``history`` keeps the policy satisfied."""
    return policy_accepts(a, tuple(history) + (ev,)).accepted
