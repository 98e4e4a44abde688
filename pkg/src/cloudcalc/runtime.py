"""Cloud-server transition system.

A configuration is the triple of history, running threads and service
store.  ``enabled_steps`` lists every transition out of a configuration;
``run`` drives one execution under a scheduler.  Evaluation is left-to-right
call-by-value, threads interleave, and events emitted under an active policy
frame are refused (the step is simply absent) when the policy would be
violated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, NamedTuple, Optional

from .policy import InvokeEntry, LinkEntry, permits_next, policy_accepts
from .syntax import (
    QUERY, UNIT, UNIT_EXPR, App, Builtin, Const, Emit, Event, Expr, Frame, Lam,
    Link, Ref, Resource, Seq, Str, Var, _spine, as_expr, is_function, is_value,
    substitute, unref,
)

DEFAULT_DOMAIN = (UNIT, Str("q"), Str("syscmd;q"))

INJECTION_PREFIX = "syscmd;"


class EvaluationError(Exception):
    """Raised for programs that go wrong; ``step`` is set by ``run``."""

    step: Optional[int] = None


class UnknownService(EvaluationError):
    pass


class NonGroundEvent(EvaluationError):
    pass


class StuckError(EvaluationError):
    pass


# -- labels -------------------------------------------------------------------


@dataclass(frozen=True)
class Tau:
    def __str__(self):
        return "tau"


TAU = Tau()


@dataclass(frozen=True)
class Ev:
    event: Event

    def __str__(self):
        return f"ev {self.event}"


@dataclass(frozen=True)
class LinkLabel:
    service: str

    def __str__(self):
        return f"link {self.service}"


@dataclass(frozen=True)
class Invoke:
    service: str
    value: object

    def __str__(self):
        return f"invoke {self.service} {self.value}"


@dataclass(frozen=True)
class Blocked:
    """Refused emission (``event``) or refused frame entry (``event`` is None)."""

    event: Optional[Event]
    policy: str

    def __str__(self):
        what = "entry" if self.event is None else str(self.event)
        return f"BLOCKED {what} by {self.policy}"


def history_entry(label):
    """The history entry a visible label appends, None for tau."""
    if isinstance(label, Ev):
        return label.event
    if isinstance(label, LinkLabel):
        return LinkEntry(label.service)
    if isinstance(label, Invoke):
        return InvokeEntry(label.service, label.value)
    return None


# -- configurations -----------------------------------------------------------


@dataclass(frozen=True)
class Thread:
    tid: int
    expr: Expr

    @property
    def policies(self) -> tuple:
        """Active frames around the current redex, outermost first."""
        if is_value(self.expr):
            return ()
        return _focus(self.expr)[2]


@dataclass(frozen=True)
class ServiceEntry:
    code: Expr
    origin: str = field(default="", compare=False)
    published_at: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Configuration:
    history: tuple = ()
    threads: tuple = ()
    store: tuple = ()
    policies: Mapping = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def make(cls, exprs=(), history=(), store=None, policies=None):
        threads = tuple(Thread(i, e) for i, e in enumerate(exprs))
        entries = {}
        for name, code in (store or {}).items():
            entries[name] = code if isinstance(code, ServiceEntry) else ServiceEntry(code)
        return cls(tuple(history), threads, tuple(sorted(entries.items())), dict(policies or {}))

    def service(self, name) -> Optional[ServiceEntry]:
        for n, entry in self.store:
            if n == name:
                return entry
        return None

    @property
    def store_map(self) -> dict:
        return dict(self.store)

    @property
    def next_tid(self) -> int:
        return max((t.tid for t in self.threads), default=-1) + 1

    @property
    def exprs(self) -> tuple:
        return tuple(t.expr for t in self.threads)


class Step(NamedTuple):
    thread: int
    label: object
    config: Configuration
    pending: tuple


# -- redex search and contraction ---------------------------------------------


def _identity(x):
    return x


def _focus(e: Expr, frames: tuple = ()):
    """Split a non-value into (redex, plug, active-frames)."""
    if isinstance(e, App):
        if not is_value(e.fn):
            r, plug, fr = _focus(e.fn, frames)
            return r, lambda x: App(plug(x), e.arg), fr
        if not is_value(e.arg):
            r, plug, fr = _focus(e.arg, frames)
            return r, lambda x: App(e.fn, plug(x)), fr
        return e, _identity, frames
    if isinstance(e, Seq):
        if not is_value(e.first):
            r, plug, fr = _focus(e.first, frames)
            return r, lambda x: Seq(plug(x), e.second), fr
        return e, _identity, frames
    if isinstance(e, Emit):
        for i, a in enumerate(e.args):
            if not is_value(a):
                r, plug, fr = _focus(a, frames)
                return r, (lambda x, i=i, plug=plug:
                           Emit(e.name, e.args[:i] + (plug(x),) + e.args[i + 1:])), fr
        return e, _identity, frames
    if isinstance(e, Frame) and e.active and not is_value(e.body):
        r, plug, fr = _focus(e.body, frames + (e.policy,))
        return r, lambda x: Frame(e.policy, plug(x), True), fr
    if isinstance(e, Link) and not is_value(e.body):
        r, plug, fr = _focus(e.body, frames)
        return r, lambda x: Link(e.name, plug(x)), fr
    return e, _identity, frames


def _ground(e: Expr):
    e = unref(e)
    if isinstance(e, Const) and isinstance(e.value, (Resource, Str)):
        return e.value
    raise NonGroundEvent(f"event argument does not evaluate to a resource or string: {e!r}")


def _call_builtin(b: Builtin, args):
    if b is QUERY or b == QUERY:
        db, q = args
        text = unref(q)
        if isinstance(text, Const) and isinstance(text.value, Str) \
                and text.value.text.startswith(INJECTION_PREFIX):
            rest = Const(Str(text.value.text[len(INJECTION_PREFIX):]))
            return Seq(Emit("syscmd"), App(App(Const(QUERY), db), rest))
        return Seq(Emit("dbcmd"), UNIT_EXPR)
    raise StuckError(f"unknown builtin {b.name}")


def _policy(c: Configuration, name: str):
    try:
        return c.policies[name]
    except KeyError:
        raise EvaluationError(f"unknown policy {name}") from None


def _contract(redex: Expr, frames: tuple, c: Configuration):
    """Returns (label, replacement, store-update) or a Blocked diagnostic."""
    if isinstance(redex, App):
        head = unref(redex.fn)
        if isinstance(head, Lam):
            return TAU, substitute(head.body, head.param, redex.arg), None
        fn, args = _spine(redex)
        if isinstance(fn, Const) and isinstance(fn.value, Builtin) \
                and len(args) == fn.value.arity:
            return TAU, _call_builtin(fn.value, args), None
        raise StuckError(f"cannot apply a non-function: {redex.fn!r}")
    if isinstance(redex, Seq):
        return TAU, redex.second, None
    if isinstance(redex, Emit):
        ev = Event(redex.name, tuple(_ground(a) for a in redex.args))
        for p in frames:
            if not permits_next(_policy(c, p), c.history, ev):
                return Blocked(ev, p)
        return Ev(ev), UNIT_EXPR, None
    if isinstance(redex, Frame):
        if redex.active:
            return TAU, redex.body, None
        if not policy_accepts(_policy(c, redex.policy), c.history):
            return Blocked(None, redex.policy)
        return TAU, Frame(redex.policy, redex.body, True), None
    if isinstance(redex, Link):
        return LinkLabel(redex.name), UNIT_EXPR, (redex.name, redex.body)
    if isinstance(redex, Ref):
        if redex.target is None:
            raise StuckError(f"unresolved definition {redex.name}")
        return TAU, redex.target, None
    if isinstance(redex, Var):
        raise StuckError(f"unbound variable {redex.name}")
    raise StuckError(f"no rule for {redex!r}")


def _thread_move(c: Configuration, index: int):
    th = c.threads[index]
    if is_value(th.expr):
        return None
    redex, plug, frames = _focus(th.expr)
    out = _contract(redex, frames, c)
    if isinstance(out, Blocked):
        return out
    label, new, publish = out
    threads = c.threads[:index] + (Thread(th.tid, plug(new)),) + c.threads[index + 1:]
    history, store = c.history, c.store
    entry = history_entry(label)
    if publish is not None:
        name, code = publish
        entries = dict(store)
        entries[name] = ServiceEntry(code, origin=f"link@{len(history)}",
                                     published_at=len(history))
        store = tuple(sorted(entries.items()))
    if entry is not None:
        history = history + (entry,)
    return Step(th.tid, label, replace(c, history=history, threads=threads, store=store), ())


def _admissions(c: Configuration, pending: tuple, domain):
    if not pending:
        return []
    name, value = pending[0]
    entry = c.service(name)
    if entry is None:
        return []
    values = domain if value is None else (value,)
    tid = c.next_tid
    steps = []
    for v in values:
        thread = Thread(tid, App(entry.code, as_expr(v)))
        new = replace(c, history=c.history + (InvokeEntry(name, v),),
                      threads=c.threads + (thread,))
        steps.append(Step(tid, Invoke(name, v), new, tuple(pending[1:])))
    return steps


def invoke(c: Configuration, name: str, value) -> Configuration:
    """Admit a single client request right away."""
    if c.service(name) is None:
        raise UnknownService(f"no service named {name}")
    return _admissions(c, ((name, value),), ())[0].config


def enabled_steps(c: Configuration, pending=(), domain=DEFAULT_DOMAIN) -> list:
    """Every transition out of ``c``.

    ``pending`` is a FIFO of client requests ``(service, value)``; a value of
    None is an open request instantiated over ``domain``.  Only the head of
    the queue can be admitted, and only once its service is in the store.
    Admissions come first, then thread moves by ascending thread id.
    """
    pending = tuple(pending)
    steps = _admissions(c, pending, domain)
    for i in range(len(c.threads)):
        move = _thread_move(c, i)
        if isinstance(move, Step):
            steps.append(move._replace(pending=pending))
    return steps


def blocked(c: Configuration) -> list:
    """(thread id, Blocked) for every thread stuck on a policy refusal."""
    out = []
    for i, th in enumerate(c.threads):
        move = _thread_move(c, i)
        if isinstance(move, Blocked):
            out.append((th.tid, move))
    return out


def reap(c: Configuration) -> Configuration:
    """Drop finished threads.

    A thread whose expression is a function value is a published-in-place
    service, not a finished computation, and is kept.
    """
    live = tuple(t for t in c.threads if not is_value(t.expr) or is_function(t.expr))
    return replace(c, threads=live)


# -- driver -------------------------------------------------------------------


class StopReason(str, Enum):
    TERMINATED = "terminated"
    STEP_BUDGET = "step-budget"
    DEADLOCKED = "deadlocked-by-policy"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class TraceRecord:
    step: int
    thread: int
    label: object
    history_len: int

    def to_json(self):
        return {"step": self.step, "thread": self.thread, "label": str(self.label),
                "history_len": self.history_len}


@dataclass
class RunResult:
    config: Configuration
    trace: list
    stop_reason: StopReason
    blocked: list = field(default_factory=list)
    log: list = field(default_factory=list)
    pending: tuple = ()

    @property
    def visible(self) -> list:
        return [lbl for lbl in self.trace if not isinstance(lbl, Tau)]


def run(c: Configuration, pending=(), scheduler="deterministic", max_steps=1000,
        domain=DEFAULT_DOMAIN) -> RunResult:
    """Execute until no step is enabled or ``max_steps`` steps were taken.

    ``scheduler`` is ``"deterministic"`` (pending requests first, then the
    lowest thread id) or an integer seed for uniform random choice.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    rng = None if scheduler == "deterministic" else random.Random(int(scheduler))
    pending = tuple(pending)
    trace, log = [], []
    while True:
        try:
            steps = enabled_steps(c, pending, domain)
        except EvaluationError as err:
            err.step = len(trace)
            raise
        if not steps:
            if pending:
                err = UnknownService(f"no service named {pending[0][0]}")
                err.step = len(trace)
                raise err
            stuck = blocked(c)
            reason = StopReason.DEADLOCKED if stuck else StopReason.TERMINATED
            return RunResult(c, trace, reason, stuck, log, pending)
        if len(trace) >= max_steps:
            return RunResult(c, trace, StopReason.STEP_BUDGET, blocked(c), log, pending)
        step = steps[0] if rng is None else rng.choice(steps)
        c, pending = step.config, step.pending
        trace.append(step.label)
        log.append(TraceRecord(len(trace), step.thread, step.label, len(c.history)))
