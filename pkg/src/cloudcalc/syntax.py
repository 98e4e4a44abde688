"""Abstract syntax of the service calculus.

Expressions are immutable dataclasses.  Functions are represented by closed
``Lam`` terms (substitution semantics), every other runtime value is wrapped
in ``Const``.  Nothing here evaluates anything.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Union

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def is_identifier(text: str) -> bool:
    return bool(IDENT_RE.match(text))


def quote(text: str) -> str:
    """Render a string literal in the concrete syntax (JSON escaping)."""
    return json.dumps(text, ensure_ascii=False)


# -- values -------------------------------------------------------------------


@dataclass(frozen=True)
class Resource:
    id: str

    def __post_init__(self):
        if not is_identifier(self.id):
            raise ValueError(f"bad resource name {self.id!r}")

    def __str__(self):
        return self.id


@dataclass(frozen=True)
class Str:
    text: str

    def __str__(self):
        return quote(self.text)


@dataclass(frozen=True)
class UnitVal:
    def __str__(self):
        return "unit"


UNIT = UnitVal()


@dataclass(frozen=True)
class Builtin:
    """Host primitive, applied curried."""

    name: str
    arity: int

    def __str__(self):
        return self.name


QUERY = Builtin("query", 2)
BUILTINS = {QUERY.name: QUERY}

Ground = Union[Resource, Str]
Value = Union[Resource, Str, UnitVal, Builtin]


@dataclass(frozen=True)
class Event:
    """A ground event such as ``open(db)`` or ``syscmd``."""

    name: str
    args: tuple = ()

    def __post_init__(self):
        if not is_identifier(self.name):
            raise ValueError(f"bad event name {self.name!r}")
        object.__setattr__(self, "args", tuple(self.args))
        for a in self.args:
            if not isinstance(a, (Resource, Str)):
                raise TypeError(f"event argument {a!r} is not a resource or string")

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


# -- expressions --------------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Lam(Expr):
    param: str
    body: Expr


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Emit(Expr):
    name: str
    args: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Seq(Expr):
    first: Expr
    second: Expr


@dataclass(frozen=True)
class Frame(Expr):
    """Policy framing ``phi[e]``; ``active`` once the frame has been entered."""

    policy: str
    body: Expr
    active: bool = False


@dataclass(frozen=True)
class Link(Expr):
    name: str
    body: Expr


@dataclass(frozen=True)
class Const(Expr):
    value: Value


@dataclass(frozen=True)
class Ref(Expr):
    """Reference to a program-level definition.

    Compared by name only; ``target`` is the resolved definition body.
    """

    name: str
    target: Expr = field(compare=False, repr=False, default=None)


UNIT_EXPR = Const(UNIT)


def unref(e: Expr) -> Expr:
    while isinstance(e, Ref):
        e = e.target
    return e


def _spine(e: Expr):
    args = []
    e = unref(e)
    while isinstance(e, App):
        args.append(e.arg)
        e = unref(e.fn)
    args.reverse()
    return e, args


def is_value(e: Expr) -> bool:
    if isinstance(e, (Lam, Const)):
        return True
    if isinstance(e, Ref):
        return e.target is not None and is_value(e.target)
    if isinstance(e, App):
        # a builtin applied to fewer arguments than its arity
        head, args = _spine(e)
        return (isinstance(head, Const) and isinstance(head.value, Builtin)
                and len(args) < head.value.arity and all(is_value(a) for a in args))
    return False


def is_function(e: Expr) -> bool:
    """Values that can be applied: abstractions and partial builtins."""
    e = unref(e)
    if isinstance(e, Lam):
        return True
    head, args = _spine(e)
    return isinstance(head, Const) and isinstance(head.value, Builtin) and is_value(e)


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.param}
    if isinstance(e, App):
        return free_vars(e.fn) | free_vars(e.arg)
    if isinstance(e, Seq):
        return free_vars(e.first) | free_vars(e.second)
    if isinstance(e, Emit):
        return frozenset().union(*(free_vars(a) for a in e.args))
    if isinstance(e, (Frame, Link)):
        return free_vars(e.body)
    return frozenset()


def emitted_names(e: Expr) -> frozenset:
    """Event names of every ``Emit`` node in the tree (definitions not followed)."""
    if isinstance(e, Emit):
        return frozenset([e.name]).union(*(emitted_names(a) for a in e.args))
    if isinstance(e, Lam):
        return emitted_names(e.body)
    if isinstance(e, App):
        return emitted_names(e.fn) | emitted_names(e.arg)
    if isinstance(e, Seq):
        return emitted_names(e.first) | emitted_names(e.second)
    if isinstance(e, (Frame, Link)):
        return emitted_names(e.body)
    return frozenset()


def _fresh(base: str, avoid) -> str:
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def as_expr(value) -> Expr:
    return value if isinstance(value, Expr) else Const(value)


def substitute(body: Expr, param: str, value) -> Expr:
    """Replace free occurrences of ``param`` in ``body`` by ``value``.

    ``value`` is a plain value or an expression; binders that would capture
    one of its free variables are renamed.
    """
    return _subst(body, param, as_expr(value))


def _subst(e: Expr, x: str, r: Expr) -> Expr:
    if isinstance(e, Var):
        return r if e.name == x else e
    if isinstance(e, Lam):
        if e.param == x or x not in free_vars(e.body):
            return e
        fv = free_vars(r)
        if e.param in fv:
            new = _fresh(e.param, fv | free_vars(e.body) | {x})
            body = _subst(e.body, e.param, Var(new))
            return Lam(new, _subst(body, x, r))
        return Lam(e.param, _subst(e.body, x, r))
    if isinstance(e, App):
        return App(_subst(e.fn, x, r), _subst(e.arg, x, r))
    if isinstance(e, Seq):
        return Seq(_subst(e.first, x, r), _subst(e.second, x, r))
    if isinstance(e, Emit):
        return Emit(e.name, tuple(_subst(a, x, r) for a in e.args))
    if isinstance(e, Frame):
        return Frame(e.policy, _subst(e.body, x, r), e.active)
    if isinstance(e, Link):
        return Link(e.name, _subst(e.body, x, r))
    return e


def alpha_key(e: Expr, env: tuple = ()):
    """Nameless (de Bruijn) rendering; equal keys iff alpha-equivalent."""
    if isinstance(e, Var):
        if e.name in env:
            return ("v", env.index(e.name))
        return ("fv", e.name)
    if isinstance(e, Lam):
        return ("lam", alpha_key(e.body, (e.param,) + env))
    if isinstance(e, App):
        return ("app", alpha_key(e.fn, env), alpha_key(e.arg, env))
    if isinstance(e, Seq):
        return ("seq", alpha_key(e.first, env), alpha_key(e.second, env))
    if isinstance(e, Emit):
        return ("emit", e.name, tuple(alpha_key(a, env) for a in e.args))
    if isinstance(e, Frame):
        return ("frame", e.policy, e.active, alpha_key(e.body, env))
    if isinstance(e, Link):
        return ("link", e.name, alpha_key(e.body, env))
    if isinstance(e, Const):
        return ("const", repr(e.value))
    if isinstance(e, Ref):
        return ("ref", e.name)
    raise TypeError(f"not an expression: {e!r}")
