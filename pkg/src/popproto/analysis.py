"""Exact analysis on one fixed population.

The reachable configurations from an initial configuration form a finite
graph. A fair execution ends up in a terminal (bottom) strongly connected
component and visits all of it, so the output of the protocol on that input
is ``b`` exactly when every terminal SCC consists of ``b``-consensus
configurations.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .core import (Multiset, Protocol, ProtocolError, Transition, initial_configuration)

DEFAULT_NODE_LIMIT = 5_000_000

ILL = "ill-specified"
INCONCLUSIVE = "inconclusive"


class ExplorationLimitError(RuntimeError):
    """Raised when exploration would exceed ``node_limit``; carries the partial graph."""

    def __init__(self, message: str, partial: "ReachabilityGraph"):
        super().__init__(message)
        self.partial = partial


class InvalidQ1Error(ProtocolError):
    pass


@dataclass
class ReachabilityGraph:
    """Explicit graph of configurations reachable from ``nodes[0]``.

    Nodes are dense count vectors over ``protocol.states``. Edges only come
    from non-silent transitions; ``labels[v][e]`` is the index into
    ``protocol.kernel.transitions`` of the transition behind ``succ[v][e]``.
    """

    protocol: Protocol
    nodes: List[Tuple[int, ...]]
    index: Dict[Tuple[int, ...], int]
    succ: List[List[int]]
    labels: List[List[int]]
    parent: List[int]
    parent_label: List[int]

    @property
    def root(self) -> Multiset:
        return self.configuration(0)

    def __len__(self) -> int:
        return len(self.nodes)

    def configuration(self, v: int) -> Multiset:
        return self.protocol.sparse(self.nodes[v])

    def configurations(self) -> Iterable[Multiset]:
        return (self.configuration(v) for v in range(len(self.nodes)))

    def node_of(self, c: Mapping[str, int]) -> Optional[int]:
        return self.index.get(self.protocol.dense(c))

    def num_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    def path_to(self, v: int) -> List[Transition]:
        """Transitions along the BFS tree from the root to node ``v``."""
        ts = self.protocol.kernel.transitions
        path = []
        while v != 0:
            path.append(ts[self.parent_label[v]])
            v = self.parent[v]
        return path[::-1]


def explore(p: Protocol, c0: Mapping[str, int],
            node_limit: int = DEFAULT_NODE_LIMIT) -> ReachabilityGraph:
    """Breadth-first construction of the reachability graph from ``c0``."""
    if sum(c0.values()) <= 0:
        raise ProtocolError("cannot explore from an empty configuration")
    kern = p.kernel
    root = p.dense(c0)
    g = ReachabilityGraph(p, [root], {root: 0}, [], [], [-1], [-1])
    nodes, index, succ, labels = g.nodes, g.index, g.succ, g.labels
    parent, parent_label = g.parent, g.parent_label
    v = 0
    while v < len(nodes):
        out: List[int] = []
        lab: List[int] = []
        for ti, nxt in kern.successors(nodes[v]):
            w = index.get(nxt)
            if w is None:
                if len(nodes) >= node_limit:
                    succ.append(out)
                    labels.append(lab)
                    raise ExplorationLimitError(
                        f"exploration exceeded node limit {node_limit}", g)
                w = len(nodes)
                index[nxt] = w
                nodes.append(nxt)
                parent.append(v)
                parent_label.append(ti)
            out.append(w)
            lab.append(ti)
        succ.append(out)
        labels.append(lab)
        v += 1
    return g


def strongly_connected_components(succ: Sequence[Sequence[int]]) -> Tuple[List[List[int]], List[int]]:
    """Iterative Tarjan. Returns ``(components, component id per node)``."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    onstack = [False] * n
    comp_of = [-1] * n
    stack: List[int] = []
    comps: List[List[int]] = []
    counter = 0
    for s in range(n):
        if index[s] != -1:
            continue
        index[s] = low[s] = counter
        counter += 1
        stack.append(s)
        onstack[s] = True
        work = [[s, 0]]
        while work:
            frame = work[-1]
            v, i = frame
            edges = succ[v]
            if i < len(edges):
                frame[1] = i + 1
                w = edges[i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    onstack[w] = True
                    work.append([w, 0])
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                cid = len(comps)
                while True:
                    w = stack.pop()
                    onstack[w] = False
                    comp_of[w] = cid
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps, comp_of


def terminal_sccs(g: ReachabilityGraph) -> List[List[int]]:
    """Bottom SCCs, each sorted by node id, listed by their smallest node."""
    comps, comp_of = strongly_connected_components(g.succ)
    bottom = []
    for cid, comp in enumerate(comps):
        if all(comp_of[w] == cid for v in comp for w in g.succ[v]):
            bottom.append(sorted(comp))
    return sorted(bottom)


@dataclass
class Decision:
    output: Optional[int]           # 0, 1 or None for ill-specified
    nodes: int
    terminal_sccs: int
    witness: Optional[int] = None   # node inside an offending terminal SCC


def decide(g: ReachabilityGraph, expected: Optional[int] = None) -> Decision:
    """Terminal-SCC verdict for ``g``.

    With ``expected`` given, ``witness`` points into a terminal SCC that does
    not stabilise to ``expected`` (if any).
    """
    kern = g.protocol.kernel
    bottoms = terminal_sccs(g)
    verdicts = []
    witness = None
    for comp in bottoms:
        outs = {kern.consensus(g.nodes[v]) for v in comp}
        b = outs.pop() if len(outs) == 1 else None
        verdicts.append(b)
        if witness is None and b is None:
            witness = next((v for v in comp if kern.consensus(g.nodes[v]) is None), comp[0])
        elif witness is None and expected is not None and b != expected:
            witness = comp[0]
    distinct = set(verdicts)
    output = verdicts[0] if len(distinct) == 1 and verdicts[0] is not None else None
    if expected is None and output is not None:
        witness = None
    return Decision(output, len(g), len(bottoms), witness)


def decide_output(p: Protocol, c0: Mapping[str, int],
                  node_limit: int = DEFAULT_NODE_LIMIT) -> Optional[int]:
    """0 or 1 if every fair execution from ``c0`` stabilises to it, else ``None``."""
    return decide(explore(p, c0, node_limit)).output


# -- predicate verification ----------------------------------------------------


@dataclass
class ReportEntry:
    inputs: Dict[str, int]
    expected: int
    decided: Any                      # 0, 1, ILL or INCONCLUSIVE
    nodes: int
    terminal_sccs: int
    counterexample: Optional[List[str]] = None

    @property
    def ok(self) -> bool:
        return self.decided == self.expected


@dataclass
class VerificationReport:
    entries: List[ReportEntry] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if any(e.decided != e.expected and e.decided != INCONCLUSIVE for e in self.entries):
            return "fail"
        if any(e.decided == INCONCLUSIVE for e in self.entries):
            return INCONCLUSIVE
        return "pass"

    @property
    def failures(self) -> List[ReportEntry]:
        return [e for e in self.entries if not e.ok and e.decided != INCONCLUSIVE]

    def to_json(self) -> str:
        doc = {"verdict": self.verdict, "meta": self.meta,
               "entries": [asdict(e) for e in self.entries]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["input", "expected", "decided", "nodes", "terminal_sccs"])
        for e in self.entries:
            w.writerow([format_inputs(e.inputs), e.expected, e.decided,
                        e.nodes, e.terminal_sccs])
        return buf.getvalue()


def format_inputs(inputs: Mapping[str, int]) -> str:
    return ";".join(f"{k}={v}" for k, v in sorted(inputs.items()))


def verify_predicate(p: Protocol, expected: Callable[[Mapping[str, int]], Any],
                     domain: Iterable[Mapping[str, int]],
                     node_limit: int = DEFAULT_NODE_LIMIT) -> VerificationReport:
    """Decide every input of ``domain`` exactly and compare with ``expected``.

    ``domain`` holds input vectors keyed by initial state; ``expected`` maps
    such a vector to the predicate's truth value.
    """
    report = VerificationReport(meta={"node_limit": node_limit})
    for inputs in domain:
        inputs = {k: int(v) for k, v in inputs.items()}
        want = int(bool(expected(inputs)))
        c0 = initial_configuration(p, inputs)
        try:
            g = explore(p, c0, node_limit)
        except ExplorationLimitError as exc:
            report.entries.append(ReportEntry(inputs, want, INCONCLUSIVE, len(exc.partial), 0))
            continue
        d = decide(g, expected=want)
        decided = ILL if d.output is None else d.output
        cex = None
        if decided != want and d.witness is not None:
            cex = [str(t) for t in g.path_to(d.witness)]
        report.entries.append(ReportEntry(inputs, want, decided, d.nodes,
                                          d.terminal_sccs, cex))
    if not report.entries:
        raise ValueError("verification domain is empty")
    return report


# -- coverability and 1-awareness ------------------------------------------------


def coverable(p: Protocol, c0: Mapping[str, int], targets: Iterable[str],
              node_limit: int = DEFAULT_NODE_LIMIT) -> bool:
    """Whether some configuration reachable from ``c0`` has an agent in ``targets``."""
    idx = [p.index[q] for q in targets]
    kern = p.kernel
    root = p.dense(c0)
    if any(root[i] for i in idx):
        return True
    seen = {root}
    queue = deque([root])
    while queue:
        c = queue.popleft()
        for _, nxt in kern.successors(c):
            if nxt in seen:
                continue
            if any(nxt[i] for i in idx):
                return True
            if len(seen) >= node_limit:
                raise ExplorationLimitError(
                    f"coverability search exceeded node limit {node_limit}", None)
            seen.add(nxt)
            queue.append(nxt)
    return False


@dataclass
class OneAwareResult:
    aware: bool
    coverability_agrees: bool
    entries: List[Dict[str, Any]]

    def __bool__(self) -> bool:
        return self.aware


def check_1aware(p: Protocol, q1: Iterable[str], domain: Iterable[Mapping[str, int]],
                 node_limit: int = DEFAULT_NODE_LIMIT) -> OneAwareResult:
    """Check the 1-awareness conditions for ``q1`` on every input of ``domain``.

    (1) on 0-inputs no reachable configuration touches ``q1``;
    (2) on 1-inputs every configuration of every terminal SCC lies inside
    ``q1``. Independently records whether "output 1 iff ``q1`` coverable"
    holds per input.
    """
    q1 = set(q1)
    forbidden = q1 & (set(p.initial) | set(p.leaders.support))
    if forbidden:
        raise InvalidQ1Error(f"Q1 meets initial/leader states: {sorted(forbidden)}")
    q1_idx = [p.index[q] for q in q1]
    rest_idx = [i for i, q in enumerate(p.states) if q not in q1]
    aware = coverability_agrees = True
    entries = []
    for inputs in domain:
        c0 = initial_configuration(p, inputs)
        g = explore(p, c0, node_limit)
        d = decide(g)
        touched = any(c[i] for c in g.nodes for i in q1_idx)
        if d.output == 0:
            ok = not touched
        elif d.output == 1:
            ok = all(not g.nodes[v][i] for comp in terminal_sccs(g) for v in comp
                     for i in rest_idx)
        else:
            ok = False
        cov = coverable(p, c0, q1, node_limit) if q1 else False
        agrees = (d.output == 1) == cov
        aware &= ok
        coverability_agrees &= agrees
        entries.append({"inputs": dict(inputs), "output": d.output, "condition": ok,
                        "q1_coverable": cov, "coverability_agrees": agrees})
    return OneAwareResult(aware, coverability_agrees, entries)
