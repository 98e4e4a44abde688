"""Concrete syntax for programs (``.cld``) and policies (``.pol``).

Hand-written recursive descent over a regex tokenizer.  Program grammar::

    program   := resdecl* import* def* config
    resdecl   := "resource" IDENT ";"
    import    := "use" "policy" IDENT "from" STRING ";"
    def       := IDENT "=" expr ";"
    expr      := "fun" IDENT "->" expr | seq
    seq       := app (";" app)*
    app       := atom atom*
    atom      := IDENT | STRING | "emit" IDENT "(" args? ")"
               | "frame" IDENT "{" expr "}" | "link" IDENT "=" atom
               | "(" expr ")" | "unit" | POLICY "[" expr "]"
    config    := "server" "{" ["history" "[" entries? "]" ";"]
                 "run" expr ("||" expr)* ";"
                 ("store" IDENT "->" atom ";")* "}"

``POLICY [ e ]`` is an already-entered frame; it only shows up when
printing runtime configurations.  Definitions may refer to earlier
definitions only.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .policy import (
    EventPattern, InvokeEntry, LinkEntry, PolicyError, Transition, UsageAutomaton,
)
from .runtime import Configuration, ServiceEntry
from .syntax import (
    BUILTINS, UNIT, App, Builtin, Const, Emit, Event, Expr, Frame, Lam, Link, Ref,
    Resource, Seq, Str, UnitVal, Var, free_vars, quote,
)

KEYWORDS = frozenset({
    "fun", "emit", "frame", "link", "unit", "resource", "use", "policy", "from",
    "server", "history", "run", "store", "states", "initial", "offending",
    "invoke", "eps",
})

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>-->|->|--|\|\||\|>|<\||[(){}\[\];,=._])
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
""", re.VERBOSE)

_ESCAPES = {'"': '"', "\\": "\\", "/": "/", "b": "\b", "f": "\f", "n": "\n",
            "r": "\r", "t": "\t"}


class ParseError(Exception):
    def __init__(self, message, line=0, col=0, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "string", "op", "eof"
    text: str
    line: int
    col: int


def _unescape(body: str, line: int, col: int) -> str:
    out, i = [], 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        nxt = body[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        elif nxt == "u" and re.fullmatch(r"[0-9a-fA-F]{4}", body[i + 2:i + 6]):
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        else:
            raise ParseError(f"bad escape \\{nxt} in string", line, col)
    return "".join(out)


def tokenize(text: str) -> list:
    tokens, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "string":
            tokens.append(Token("string", _unescape(chunk[1:-1], line, col), line, col))
        elif kind in ("op", "ident"):
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            return bytes(text).decode("utf-8")
        except UnicodeDecodeError as err:
            raise ParseError(f"input is not UTF-8 ({err.reason})", 1, err.start + 1) from None
    return text


@dataclass
class ProgramFile:
    resources: tuple = ()
    imports: dict = field(default_factory=dict)      # policy name -> path
    policies: dict = field(default_factory=dict)     # policy name -> automaton
    definitions: dict = field(default_factory=dict)  # name -> Expr
    history: tuple = ()
    run: tuple = ()
    store: dict = field(default_factory=dict)        # service -> Expr

    def configuration(self) -> Configuration:
        store = {n: ServiceEntry(e, origin="store") for n, e in self.store.items()}
        return Configuration.make(self.run, self.history, store, self.policies)


class _Parser:
    def __init__(self, text, resources=(), policies=None, definitions=None):
        self.toks = tokenize(_decode(text))
        self.i = 0
        self.resources = set(resources)
        self.policies = dict(policies or {})
        self.definitions = dict(definitions or {})

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message, expected=(), tok=None):
        t = tok or self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        if expected:
            message = f"{message}: expected {' or '.join(expected)}, found {found}"
        return ParseError(message, t.line, t.col, expected)

    def expect(self, text) -> Token:
        if not self.at(text):
            raise self.error("syntax error", [repr(text)])
        return self.advance()

    def ident(self, what="identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error("syntax error", [what])
        self.advance()
        return t.text

    def string(self) -> str:
        if self.tok.kind != "string":
            raise self.error("syntax error", ["string"])
        return self.advance().text

    # -- expressions

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "string":
            return True
        if t.kind == "op":
            return t.text == "("
        if t.kind == "ident":
            return t.text not in KEYWORDS or t.text in ("emit", "frame", "link", "unit")
        return False

    def expr(self, scope=()) -> Expr:
        if self.at("fun"):
            self.advance()
            param = self.ident("parameter name")
            self.expect("->")
            return Lam(param, self.expr(scope + (param,)))
        return self.seq(scope)

    def seq(self, scope) -> Expr:
        items = [self.app(scope)]
        while self.at(";"):
            nxt = self.peek()
            # `; NAME =` ends a definition, not a sequence
            if nxt.kind == "ident" and nxt.text not in KEYWORDS and self.peek(2).text == "=" \
                    and self.peek(2).kind == "op":
                break
            self.advance()
            if not self.starts_atom():
                self.i -= 1
                break
            items.append(self.app(scope))
        e = items[-1]
        for item in reversed(items[:-1]):
            e = Seq(item, e)
        return e

    def app(self, scope) -> Expr:
        e = self.atom(scope)
        while self.starts_atom():
            e = App(e, self.atom(scope))
        return e

    def atom(self, scope) -> Expr:
        t = self.tok
        if t.kind == "string":
            self.advance()
            return Const(Str(t.text))
        if self.at("("):
            self.advance()
            e = self.expr(scope)
            self.expect(")")
            return e
        if self.at("unit"):
            self.advance()
            return Const(UNIT)
        if self.at("emit"):
            self.advance()
            name = self.ident("event name")
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.expr(scope))
                while self.at(","):
                    self.advance()
                    args.append(self.expr(scope))
            self.expect(")")
            return Emit(name, tuple(args))
        if self.at("frame"):
            self.advance()
            name = self.policy_name()
            self.expect("{")
            body = self.expr(scope)
            self.expect("}")
            return Frame(name, body)
        if self.at("link"):
            self.advance()
            name = self.ident("service name")
            self.expect("=")
            body = self.atom(scope)
            if free_vars(body):
                raise self.error(f"link body must be closed (free: {', '.join(sorted(free_vars(body)))})",
                                 tok=t)
            return Link(name, body)
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.advance()
            return self.resolve(t, scope)
        raise self.error("syntax error", ["expression"])

    def policy_name(self) -> str:
        t = self.tok
        name = self.ident("policy name")
        if name not in self.policies:
            raise self.error(f"unknown policy {name}", tok=t)
        return name

    def resolve(self, t: Token, scope) -> Expr:
        name = t.text
        if name in self.policies and self.at("["):
            self.advance()
            body = self.expr(scope)
            self.expect("]")
            return Frame(name, body, True)
        if name in scope:
            return Var(name)
        if name in self.definitions:
            return Ref(name, self.definitions[name])
        if name in self.resources:
            return Const(Resource(name))
        if name in BUILTINS:
            return Const(BUILTINS[name])
        raise self.error(f"unknown identifier {name}", tok=t)

    # -- literals and history entries

    def literal(self):
        t = self.tok
        if t.kind == "string":
            self.advance()
            return Str(t.text)
        if self.at("unit"):
            self.advance()
            return UNIT
        name = self.ident("literal")
        if name not in self.resources:
            raise self.error(f"unknown resource {name}", tok=t)
        return Resource(name)

    def event(self) -> Event:
        name = self.ident("event name")
        args = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                args.append(self.ground())
                while self.at(","):
                    self.advance()
                    args.append(self.ground())
            self.expect(")")
        return Event(name, tuple(args))

    def ground(self):
        t = self.tok
        value = self.literal()
        if value is UNIT:
            raise self.error("event arguments must be resources or strings", tok=t)
        return value

    def history_entry(self):
        if self.at("link"):
            self.advance()
            return LinkEntry(self.ident("service name"))
        if self.at("invoke"):
            self.advance()
            name = self.ident("service name")
            self.expect("(")
            value = self.literal()
            self.expect(")")
            return InvokeEntry(name, value)
        return self.event()

    def history(self, sep=",", closer="]") -> tuple:
        entries = []
        if not self.at(closer) and self.tok.kind != "eof":
            entries.append(self.history_entry())
            while self.at(sep):
                self.advance()
                entries.append(self.history_entry())
        return tuple(entries)

    # -- files

    def program(self, loader) -> ProgramFile:
        prog = ProgramFile()
        while self.at("resource"):
            self.advance()
            name = self.ident("resource name")
            self.resources.add(name)
            self.expect(";")
        while self.at("use"):
            self.advance()
            self.expect("policy")
            t = self.tok
            name = self.ident("policy name")
            self.expect("from")
            path = self.string()
            self.expect(";")
            if name in self.policies:
                raise self.error(f"duplicate policy {name}", tok=t)
            automaton = loader(name, path, t)
            if automaton.name != name:
                raise self.error(f"{path} defines policy {automaton.name}, not {name}", tok=t)
            self.policies[name] = automaton
            prog.imports[name] = path
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            t = self.tok
            name = self.ident()
            if name in self.definitions:
                raise self.error(f"duplicate definition {name}", tok=t)
            if name in self.resources:
                raise self.error(f"{name} is already a resource", tok=t)
            self.expect("=")
            body = self.expr()
            self.expect(";")
            self.definitions[name] = body
        if self.tok.kind == "eof":
            raise self.error("missing configuration block", ["'server'"])
        self.config(prog)
        if self.tok.kind != "eof":
            raise self.error("syntax error", ["end of input"])
        prog.resources = tuple(sorted(self.resources))
        prog.policies = self.policies
        prog.definitions = self.definitions
        return prog

    def config(self, prog: ProgramFile):
        self.expect("server")
        self.expect("{")
        if self.at("history"):
            self.advance()
            self.expect("[")
            prog.history = self.history()
            self.expect("]")
            self.expect(";")
        self.expect("run")
        exprs = [self.expr()]
        while self.at("||"):
            self.advance()
            exprs.append(self.expr())
        self.expect(";")
        for e in exprs:
            if free_vars(e):
                raise self.error(f"running expression has free variables "
                                 f"{', '.join(sorted(free_vars(e)))}")
        prog.run = tuple(exprs)
        while self.at("store"):
            self.advance()
            name = self.ident("service name")
            self.expect("->")
            prog.store[name] = self.atom(())
            self.expect(";")
        self.expect("}")

    def automaton(self) -> UsageAutomaton:
        start = self.expect("policy")
        name = self.ident("policy name")
        self.expect("{")
        self.expect("states")
        states = []
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            states.append(self.ident())
        self.expect(";")
        self.expect("initial")
        initial = self.ident("state")
        self.expect(";")
        self.expect("offending")
        offending = []
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            offending.append(self.ident())
        self.expect(";")
        transitions = []
        while not self.at("}"):
            source = self.ident("state")
            self.expect("--")
            pattern = self.pattern()
            self.expect("-->")
            target = self.ident("state")
            self.expect(";")
            transitions.append(Transition(source, pattern, target))
        self.expect("}")
        if self.tok.kind != "eof":
            raise self.error("syntax error", ["end of input"])
        try:
            return UsageAutomaton(name, tuple(states), initial, frozenset(offending),
                                  tuple(transitions))
        except PolicyError as err:
            raise ParseError(str(err), start.line, start.col) from err

    def pattern(self) -> EventPattern:
        name = self.ident("event name")
        args = []
        if self.at("("):
            self.advance()
            if not self.at(")"):
                args.append(self.pattern_arg())
                while self.at(","):
                    self.advance()
                    args.append(self.pattern_arg())
            self.expect(")")
        return EventPattern(name, tuple(args))

    def pattern_arg(self):
        if self.at("_"):
            self.advance()
            return None
        return self.ident("resource or _")

    def configuration(self) -> Configuration:
        if self.at("eps"):
            self.advance()
            history = ()
        else:
            history = self.history(sep=".", closer="|>")
        self.expect("|>")
        exprs = [self.expr()]
        while self.at("||"):
            self.advance()
            exprs.append(self.expr())
        self.expect("<|")
        self.expect("[")
        store = {}
        if not self.at("]"):
            while True:
                name = self.ident("service name")
                self.expect("->")
                store[name] = self.atom(())
                if not self.at(","):
                    break
                self.advance()
        self.expect("]")
        if self.tok.kind != "eof":
            raise self.error("syntax error", ["end of input"])
        return Configuration.make(exprs, history, store, self.policies)


def _guard(fn):
    try:
        return fn()
    except RecursionError:
        raise ParseError("input nested too deeply") from None


def _file_loader(base_dir):
    def load(name, path, tok):
        full = Path(base_dir or ".") / path
        try:
            text = full.read_bytes()
        except OSError as err:
            raise ParseError(f"cannot read policy {name} from {full}: {err.strerror}",
                             tok.line, tok.col) from None
        try:
            return parse_policy(text)
        except ParseError as err:
            raise ParseError(f"in {full}: {err}", tok.line, tok.col) from err
    return load


def parse_program(text, base_dir=None, policies=None) -> ProgramFile:
    """Parse a program file.

    Policy imports are read relative to ``base_dir``; ``policies`` may
    pre-supply automata by name, bypassing the filesystem.
    """
    supplied = dict(policies or {})
    file_loader = _file_loader(base_dir)

    def loader(name, path, tok):
        if name in supplied:
            return supplied[name]
        return file_loader(name, path, tok)

    return _guard(lambda: _Parser(text).program(loader))


def load_program(path, policies=None) -> ProgramFile:
    path = Path(path)
    return parse_program(path.read_bytes(), base_dir=path.parent, policies=policies)


def parse_policy(text) -> UsageAutomaton:
    return _guard(lambda: _Parser(text).automaton())


def load_policy(path) -> UsageAutomaton:
    return parse_policy(Path(path).read_bytes())


def parse_expr(text, resources=(), policies=None, definitions=None) -> Expr:
    """Parse a closed expression in the given naming context."""
    def go():
        p = _Parser(text, resources, policies, definitions)
        e = p.expr()
        if p.tok.kind != "eof":
            raise p.error("syntax error", ["end of input"])
        return e
    return _guard(go)


def parse_configuration(text, resources=(), policies=None, definitions=None) -> Configuration:
    """Parse the ``h1 . h2 |> e1 || e2 <| [Q -> e]`` notation."""
    return _guard(lambda: _Parser(text, resources, policies, definitions).configuration())


def parse_literal(text, resources=()):
    """A client-supplied value; anything that is not a single literal is a string."""
    try:
        p = _Parser(text, resources)
        value = p.literal()
        if p.tok.kind == "eof":
            return value
    except ParseError:
        pass
    return Str(text)


def parse_history(text, resources=()) -> tuple:
    """Comma-separated history entries, e.g. ``open(db),dbcmd,close(db)``.

    Event arguments that are not declared resources are taken as resources
    anyway, since a bare history has no declarations.
    """
    def go():
        p = _Parser(text, resources)
        p.resources = _AnyResource()
        h = p.history(closer="")
        if p.tok.kind != "eof":
            raise p.error("syntax error", ["',' or end of input"])
        return h
    return _guard(go)


class _AnyResource(set):
    def __contains__(self, item):
        return True


# -- pretty printing ----------------------------------------------------------

_EXPR, _SEQ, _APP, _ATOM = range(4)


def _value_text(v) -> str:
    if isinstance(v, (Resource, Str, UnitVal, Builtin)):
        return str(v)
    raise TypeError(f"not a value: {v!r}")


def format_expr(e: Expr, level: int = _EXPR) -> str:
    if isinstance(e, Lam):
        text = f"fun {e.param} -> {format_expr(e.body, _EXPR)}"
        return text if level <= _EXPR else f"({text})"
    if isinstance(e, Seq):
        text = f"{format_expr(e.first, _APP)}; {format_expr(e.second, _SEQ)}"
        return text if level <= _SEQ else f"({text})"
    if isinstance(e, App):
        text = f"{format_expr(e.fn, _APP)} {format_expr(e.arg, _ATOM)}"
        return text if level <= _APP else f"({text})"
    if isinstance(e, (Var, Ref)):
        return e.name
    if isinstance(e, Const):
        return _value_text(e.value)
    if isinstance(e, Emit):
        return f"emit {e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Frame):
        if e.active:
            return f"{e.policy}[{format_expr(e.body)}]"
        return f"frame {e.policy} {{ {format_expr(e.body)} }}"
    if isinstance(e, Link):
        return f"link {e.name} = {format_expr(e.body, _ATOM)}"
    raise TypeError(f"not an expression: {e!r}")


def format_automaton(a: UsageAutomaton) -> str:
    lines = [f"policy {a.name} {{",
             f"  states {' '.join(a.states)};",
             f"  initial {a.initial};",
             "  offending " + " ".join(s for s in a.states if s in a.offending) + ";"]
    for t in a.transitions:
        lines.append(f"  {t.source} -- {t.pattern} --> {t.target};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def format_history_entry(entry) -> str:
    return str(entry)


def format_configuration(c: Configuration) -> str:
    history = " . ".join(format_history_entry(h) for h in c.history) or "eps"
    running = " || ".join(format_expr(t.expr) for t in c.threads)
    store = ", ".join(f"{n} -> {format_expr(entry.code, _ATOM)}" for n, entry in c.store)
    return f"{history} |> {running} <| [{store}]"


def format_program(p: ProgramFile) -> str:
    out = [f"resource {r};" for r in p.resources]
    out += [f"use policy {n} from {quote(path)};" for n, path in p.imports.items()]
    out += [f"{n} = {format_expr(e)};" for n, e in p.definitions.items()]
    out.append("server {")
    out.append(f"  history [{', '.join(format_history_entry(h) for h in p.history)}];")
    out.append(f"  run {' || '.join(format_expr(e) for e in p.run)};")
    out += [f"  store {n} -> {format_expr(e, _ATOM)};" for n, e in p.store.items()]
    out.append("}")
    return "\n".join(out) + "\n"


def pretty_print(x) -> str:
    if isinstance(x, Expr):
        return format_expr(x)
    if isinstance(x, UsageAutomaton):
        return format_automaton(x)
    if isinstance(x, Configuration):
        return format_configuration(x)
    if isinstance(x, ProgramFile):
        return format_program(x)
    raise TypeError(f"cannot print {type(x).__name__}")
