"""Independent brute-force references used to cross-check the library.

Nothing here imports the analysis module: configurations are plain sorted
tuples, successors come straight from the transition lists, and outputs
are decided from full reachability sets instead of an SCC algorithm.
"""

from __future__ import annotations

from collections import Counter, deque
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

Conf = Tuple[Tuple[str, int], ...]


def canon(c: Mapping[str, int]) -> Conf:
    return tuple(sorted((q, v) for q, v in c.items() if v))


def successors(transitions: Iterable[Tuple[Tuple[str, ...], Tuple[str, ...]]], c: Conf) -> Set[Conf]:
    cnt = Counter(dict(c))
    out = set()
    for pre, post in transitions:
        need = Counter(pre)
        if Counter(post) == need:
            continue
        if all(cnt[q] >= k for q, k in need.items()):
            nxt = cnt.copy()
            nxt.subtract(need)
            nxt.update(Counter(post))
            out.add(canon(nxt))
    out.discard(c)
    return out


def reachable(transitions, c0: Mapping[str, int], limit: int = 200_000) -> Dict[Conf, Set[Conf]]:
    """Reachable configurations with their successor sets."""
    transitions = [(tuple(a), tuple(b)) for a, b in transitions]
    root = canon(c0)
    graph: Dict[Conf, Set[Conf]] = {}
    queue = deque([root])
    while queue:
        c = queue.popleft()
        if c in graph:
            continue
        succ = successors(transitions, c)
        graph[c] = succ
        if len(graph) > limit:
            raise RuntimeError("oracle graph too large")
        queue.extend(s for s in succ if s not in graph)
    return graph


def closure(graph: Dict[Conf, Set[Conf]], c: Conf) -> FrozenSet[Conf]:
    seen = {c}
    stack = [c]
    while stack:
        for s in graph[stack.pop()]:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return frozenset(seen)


def consensus(output: Mapping[str, int], c: Conf) -> Optional[int]:
    outs = {output.get(q, 0) for q, _ in c}
    return outs.pop() if len(outs) == 1 else None


def decide(transitions, output: Mapping[str, int], c0: Mapping[str, int]) -> Optional[int]:
    """b if every bottom configuration set is a b-consensus, else None.

    A configuration is "bottom" when everything it reaches can reach it
    back; this is the quadratic textbook definition, fine for tiny graphs.
    """
    graph = reachable(transitions, c0)
    reach = {c: closure(graph, c) for c in graph}
    verdicts = set()
    for c, rc in reach.items():
        if all(c in reach[d] for d in rc):
            verdicts.add(consensus(output, c))
    if len(verdicts) == 1:
        return verdicts.pop()
    return None


def protocol_decide(p, c0: Mapping[str, int]) -> Optional[int]:
    return decide([(t.pre, t.post) for t in p.transitions], p.output, c0)


def protocol_reachable(p, c0: Mapping[str, int]) -> Dict[Conf, Set[Conf]]:
    return reachable([(t.pre, t.post) for t in p.transitions], c0)


# -- string rewriting -------------------------------------------------------------


def rewrite_closure(productions: List[Tuple[str, str]], start: str, max_len: int) -> Set[str]:
    """Words reachable from ``start`` by substring replacement (length-capped).

    Commutation productions make this the commutative closure; the letter
    order of the words is therefore irrelevant for membership questions
    asked in sorted form.
    """
    seen = {start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        for l, r in productions:
            i = w.find(l)
            while i >= 0:
                v = w[:i] + r + w[i + len(l):]
                if len(v) <= max_len and v not in seen:
                    seen.add(v)
                    queue.append(v)
                i = w.find(l, i + 1)
    return seen
