"""Bounded exploration of the server transition system.

States are canonicalised (alpha-equivalence, thread ids and finished threads
ignored) so that interleavings reaching the same state share a node.  On top
of the explored graphs this module computes trace sets and a depth-bounded
weak simulation check.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .parser import format_configuration
from .runtime import DEFAULT_DOMAIN, Configuration, Tau, enabled_steps
from .syntax import alpha_key, is_function, is_value

DEFAULT_MAX_STATES = 50_000


def canonical_key(c: Configuration, pending=()) -> tuple:
    threads = sorted(repr(alpha_key(t.expr)) for t in c.threads
                     if not is_value(t.expr) or is_function(t.expr))
    store = tuple((name, repr(alpha_key(entry.code))) for name, entry in c.store)
    return (c.history, tuple(threads), store, tuple(pending))


def digest(key) -> str:
    return hashlib.sha256(repr(key).encode()).hexdigest()[:12]


class Edge(NamedTuple):
    src: int
    label: object
    dst: int
    thread: int


class _Lts:
    """Hash-consed state space, successors computed on demand."""

    def __init__(self, root: Configuration, pending=(), domain=DEFAULT_DOMAIN,
                 max_states=DEFAULT_MAX_STATES):
        self.domain = tuple(domain)
        self.max_states = max_states
        self.configs, self.pendings, self.keys = [], [], []
        self.index = {}
        self.succ = {}
        self.truncated = False
        self.incomplete = set()  # states that lost successors to the cap
        self.intern(root, tuple(pending))

    def intern(self, c, pending) -> Optional[int]:
        key = canonical_key(c, pending)
        i = self.index.get(key)
        if i is not None:
            return i
        if len(self.configs) >= self.max_states:
            self.truncated = True
            return None
        i = len(self.configs)
        self.index[key] = i
        self.configs.append(c)
        self.pendings.append(pending)
        self.keys.append(key)
        return i

    def successors(self, i) -> list:
        out = self.succ.get(i)
        if out is None:
            out, seen = [], set()
            for step in enabled_steps(self.configs[i], self.pendings[i], self.domain):
                j = self.intern(step.config, step.pending)
                if j is None:
                    self.incomplete.add(i)
                    continue
                if (step.label, j) in seen:
                    continue
                seen.add((step.label, j))
                out.append(Edge(i, step.label, j, step.thread))
            self.succ[i] = out
        return out


@dataclass
class LtsGraph:
    configs: list
    pendings: list
    depths: list
    edges: list
    depth_bound: int
    truncated: bool = False
    root: int = 0
    keys: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._out = {}
        for e in self.edges:
            self._out.setdefault(e.src, []).append(e)

    def out_edges(self, i) -> list:
        return self._out.get(i, [])

    @property
    def expanded(self):
        """Nodes whose successors are all present in the graph."""
        return {i for i, d in enumerate(self.depths) if d < self.depth_bound}

    def digest(self, i) -> str:
        return digest(self.keys[i])

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": i, "digest": self.digest(i), "depth": self.depths[i],
                       "config": format_configuration(c)}
                      for i, c in enumerate(self.configs)],
            "edges": [{"src": e.src, "dst": e.dst, "label": str(e.label), "thread": e.thread}
                      for e in self.edges],
            "root": self.root,
            "truncated": self.truncated,
        }

    def to_dot(self) -> str:
        def esc(s):
            return s.replace("\\", "\\\\").replace('"', '\\"')
        lines = ["digraph lts {"]
        for i in range(len(self.configs)):
            shape = ', shape="doublecircle"' if i == self.root else ""
            lines.append(f'  n{i} [label="{self.digest(i)}"{shape}];')
        for e in self.edges:
            lines.append(f'  n{e.src} -> n{e.dst} [label="{esc(str(e.label))}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _bfs(lts: _Lts, depth: int) -> LtsGraph:
    depths = {0: 0}
    edges = []
    queue = deque([0])
    while queue:
        i = queue.popleft()
        if depths[i] >= depth:
            continue
        for e in lts.successors(i):
            edges.append(e)
            if e.dst not in depths:
                depths[e.dst] = depths[i] + 1
                queue.append(e.dst)
    # nodes interned by successor calls are always reached, so ids are dense
    n = len(lts.configs)
    return LtsGraph(list(lts.configs), list(lts.pendings), [depths[i] for i in range(n)],
                    edges, depth, lts.truncated, 0, list(lts.keys))


def explore(c: Configuration, pending=(), depth: int = 12, domain=DEFAULT_DOMAIN,
            max_states: int = DEFAULT_MAX_STATES) -> LtsGraph:
    """Breadth-first closure of ``enabled_steps`` up to ``depth`` transitions."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return _bfs(_Lts(c, pending, domain, max_states), depth)


class TraceSet(frozenset):
    """Set of label sequences; ``partial`` when the graph was truncated."""

    partial = False

    def __new__(cls, items=(), partial=False):
        self = super().__new__(cls, items)
        self.partial = partial
        return self


def _maximal_paths(g: LtsGraph) -> set:
    memo = {}

    def paths(i, remaining):
        key = (i, remaining)
        if key in memo:
            return memo[key]
        edges = g.out_edges(i) if remaining > 0 else []
        if not edges:
            result = {()}
        else:
            result = set()
            for e in edges:
                for rest in paths(e.dst, remaining - 1):
                    result.add((e.label,) + rest)
        memo[key] = result
        return result

    return paths(g.root, g.depth_bound)


def traces(g: LtsGraph) -> TraceSet:
    """Maximal label sequences from the root (cut off at the depth bound)."""
    return TraceSet(_maximal_paths(g), g.truncated)


def weak(trace) -> tuple:
    return tuple(lbl for lbl in trace if not isinstance(lbl, Tau))


def weak_traces(g: LtsGraph, prefixes: bool = False) -> TraceSet:
    """Tau-erased traces; maximal ones, or all prefixes when ``prefixes``."""
    out = set()
    for t in _maximal_paths(g):
        w = weak(t)
        if prefixes:
            out.update(w[:k] for k in range(len(w) + 1))
        else:
            out.add(w)
    return TraceSet(out, g.truncated)


# -- weak simulation ----------------------------------------------------------

HOLDS = "holds"
HOLDS_UP_TO_DEPTH = "holds-up-to-depth"
FAILS = "fails"


@dataclass(frozen=True)
class SimulationQuery:
    left: Configuration
    right: Configuration
    depth: int
    domain: tuple = DEFAULT_DOMAIN
    pending: tuple = ()
    max_states: int = DEFAULT_MAX_STATES

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if any(v is None for _, v in self.pending) and not self.domain:
            raise ValueError("open invocations need a non-empty value domain")


@dataclass(frozen=True)
class SimulationResult:
    verdict: str
    witness: Optional[tuple] = None
    left_states: int = 0
    right_states: int = 0
    pairs: int = 0

    @property
    def holds(self) -> bool:
        return self.verdict != FAILS

    def __str__(self):
        if self.witness is None:
            return self.verdict
        return f"{self.verdict}: " + " . ".join(str(lbl) for lbl in self.witness)


class _WeakMoves:
    def __init__(self, lts: _Lts):
        self.lts = lts
        self.closures = {}
        self.moves = {}

    def closure(self, r) -> frozenset:
        out = self.closures.get(r)
        if out is None:
            seen, stack = {r}, [r]
            while stack:
                for e in self.lts.successors(stack.pop()):
                    if isinstance(e.label, Tau) and e.dst not in seen:
                        seen.add(e.dst)
                        stack.append(e.dst)
            out = self.closures[r] = frozenset(seen)
        return out

    def after(self, r, label) -> frozenset:
        """States reachable by tau* label tau* (just tau* for a tau label)."""
        if isinstance(label, Tau):
            return self.closure(r)
        key = (r, label)
        out = self.moves.get(key)
        if out is None:
            found = set()
            for mid in sorted(self.closure(r)):
                for e in self.lts.successors(mid):
                    if e.label == label:
                        found |= self.closure(e.dst)
            out = self.moves[key] = frozenset(found)
        return out

    def complete(self, r, label) -> bool:
        """False when the cap may have hidden some answer to ``label`` from ``r``."""
        states = set(self.closure(r))
        if not isinstance(label, Tau):
            states |= self.after(r, label)
        return not (states & self.lts.incomplete)


def bounded_weak_simulation(q: SimulationQuery) -> SimulationResult:
    """Is the left configuration weakly simulated by the right one?

    Left moves are explored to ``q.depth``; the right side is explored on
    demand as far as needed to answer them.  The result is the greatest
    relation satisfying the weak simulation clauses on the explored part.
    On failure the witness is the visible label sequence along which the
    left side escapes, taking the fastest-failing branch at each step.
    """
    left_lts = _Lts(q.left, q.pending, q.domain, q.max_states)
    left = _bfs(left_lts, q.depth)
    right = _Lts(q.right, q.pending, q.domain, q.max_states)
    moves = _WeakMoves(right)

    root = (left.root, 0)
    obligations = {}
    queue = deque([root])
    seen = {root}
    while queue:
        pair = queue.popleft()
        l, r = pair
        obs = []
        if left.depths[l] < q.depth:
            for e in left.out_edges(l):
                succ = tuple(sorted(moves.after(r, e.label)))
                if not moves.complete(r, e.label):
                    continue  # undecided, assumed answerable
                obs.append((e.label, e.dst, succ))
                for r2 in succ:
                    nxt = (e.dst, r2)
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
        obligations[pair] = obs

    alive = set(obligations)
    removed, reason = {}, {}
    rounds = 0
    while True:
        rounds += 1
        kill = {}
        for pair in alive:
            for label, l2, succ in obligations[pair]:
                if not any((l2, r2) in alive for r2 in succ):
                    kill[pair] = (label, l2, succ)
                    break
        if not kill:
            break
        for pair, why in kill.items():
            alive.discard(pair)
            removed[pair] = rounds
            reason[pair] = why

    stats = dict(left_states=len(left.configs), right_states=len(right.configs),
                 pairs=len(obligations))
    if root in alive:
        truncated = left.truncated or right.truncated
        return SimulationResult(HOLDS_UP_TO_DEPTH if truncated else HOLDS, **stats)
    return SimulationResult(FAILS, _witness(root, removed, reason), **stats)


def _witness(pair, removed, reason) -> tuple:
    out = []
    while True:
        label, l2, succ = reason[pair]
        if not isinstance(label, Tau):
            out.append(label)
        if not succ:
            return tuple(out)
        pair = min(((l2, r2) for r2 in succ), key=lambda p: (removed[p], p))


def simulates(left: Configuration, right: Configuration, depth: int, **kw) -> SimulationResult:
    return bounded_weak_simulation(SimulationQuery(left, right, depth, **kw))


def graph_json(g: LtsGraph) -> str:
    return json.dumps(g.to_json(), indent=2, ensure_ascii=False)
