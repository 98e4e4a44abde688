"""Executable semantics for a lambda-calculus of cloud services.

Services are functions whose side effects are events recorded in a global
history; usage automata framed around code refuse events that would violate
a policy; a server runs services in parallel, publishes them with ``link``
and spawns them on client requests.
"""

from importlib import resources as _resources

from .analysis import (
    LtsGraph, SimulationQuery, SimulationResult, bounded_weak_simulation, explore,
    traces, weak_traces,
)
from .parser import (
    ParseError, ProgramFile, load_policy, load_program, parse_configuration, parse_expr,
    parse_history, parse_policy, parse_program, pretty_print,
)
from .policy import (
    EventPattern, InvokeEntry, LinkEntry, PolicyError, UsageAutomaton, automaton_step,
    permits_next, policy_accepts,
)
from .runtime import (
    DEFAULT_DOMAIN, TAU, Blocked, Configuration, EvaluationError, Ev, Invoke, LinkLabel,
    NonGroundEvent, RunResult, StopReason, UnknownService, blocked, enabled_steps, reap,
    run,
)
from .syntax import (
    UNIT, App, Const, Emit, Event, Frame, Lam, Link, Ref, Resource, Seq, Str, Var,
    free_vars, substitute,
)

__all__ = [
    "LtsGraph", "SimulationQuery", "SimulationResult", "bounded_weak_simulation", "explore",
    "traces", "weak_traces", "ParseError", "ProgramFile", "load_policy", "load_program",
    "parse_configuration", "parse_expr", "parse_history", "parse_policy", "parse_program",
    "pretty_print", "EventPattern", "InvokeEntry", "LinkEntry", "PolicyError",
    "UsageAutomaton", "automaton_step", "permits_next", "policy_accepts", "DEFAULT_DOMAIN",
    "TAU", "Blocked", "Configuration", "EvaluationError", "Ev", "Invoke", "LinkLabel",
    "NonGroundEvent", "RunResult", "StopReason", "UnknownService", "blocked",
    "enabled_steps", "reap", "run", "UNIT", "App", "Const", "Emit", "Event", "Frame", "Lam",
    "Link", "Ref", "Resource", "Seq", "Str", "Var", "free_vars", "substitute",
    "program_path", "__version__",
]

__version__ = "0.1.0"


def program_path(name: str):
    """Path of one of the bundled example programs or policies."""
    return _resources.files(__name__).joinpath("programs", name)
