"""Protocol compilers.

``to_2way`` replaces every k-way transition by a chain of pairwise
interactions that collects the participants one by one, can be undone while
collecting, and releases them into their targets once the last one joined.

``from_semigroup`` turns a reversible commutative semigroup presentation
into a protocol whose single input state ``x`` supplies padding agents.
"""

from __future__ import annotations

import copy
import json
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .analysis import (DEFAULT_NODE_LIMIT, decide_output, explore,
                       strongly_connected_components)
from .core import (Multiset, Protocol, ProtocolError, Transition, fire,
                   initial_configuration)
from .constructions import gadget_states, gadget_bound
from .interchange import canonical_meta

# -- k-way to 2-way -----------------------------------------------------------------


def gadget(t: Transition, tag: str) -> Tuple[List[Transition], Dict[str, Tuple[str, int]]]:
    """Pairwise transitions simulating ``t`` and the new states they use.

    The returned mapping sends each new state to ``("pre" | "post", j)``: the
    state whose output it inherits (``q_j`` or ``r_j``, 1-based).
    """
    k = t.arity
    q, r = t.pre, t.post
    d = {j: f"{tag}.d{j}" for j in range(1, k - 1)}
    a = {j: f"{tag}.a{j}" for j in range(2, k)}
    b = {j: f"{tag}.b{j}" for j in range(2, k)}
    forth = [Transition((q[0], q[1]), (d[1], a[2]), f"forth_1^{tag}")]
    for j in range(2, k - 1):
        forth.append(Transition((a[j], q[j]), (d[j], a[j + 1]), f"forth_{j}^{tag}"))
    ts = forth + [f.inverse() for f in forth]
    ts.append(Transition((a[k - 1], q[k - 1]), (b[k - 1], r[k - 1]), f"success^{tag}"))
    ts.append(Transition((d[1], b[2]), (r[0], r[1]), f"back_1^{tag}"))
    for j in range(2, k - 1):
        ts.append(Transition((d[j], b[j + 1]), (b[j], r[j]), f"back_{j}^{tag}"))
    origin = {s: ("pre", j) for j, s in d.items()}
    origin.update({s: ("pre", j) for j, s in a.items()})
    origin.update({s: ("post", j) for j, s in b.items()})
    return ts, origin


def to_2way(p: Protocol) -> Protocol:
    """Lower every transition of arity > 2 to a pairwise gadget."""
    if any(t.arity < 2 for t in p.transitions):
        raise ProtocolError("transition of arity < 2")
    states = list(p.states)
    output = dict(p.output)
    ts: List[Transition] = []
    lowered: Dict[int, int] = {}
    for idx, t in enumerate(p.transitions):
        if t.arity <= 2:
            ts.append(t)
            continue
        if t.silent:
            continue
        g_ts, origin = gadget(t, str(idx))
        clash = set(origin) & set(p.states)
        if clash:
            raise ProtocolError(f"gadget state names {sorted(clash)} already in use")
        for s, (side, j) in origin.items():
            src = t.pre if side == "pre" else t.post
            output[s] = p.output[src[j - 1]]
        states.extend(origin)
        ts.extend(g_ts)
        lowered[t.arity] = lowered.get(t.arity, 0) + 1
    meta = copy.deepcopy(p.meta)
    arities = [i for i, c in lowered.items() for _ in range(c)]
    added = gadget_states(arities)
    meta["lowering"] = {"states_before": len(p.states), "states_after": len(states),
                        "gadget_states": added,
                        "lowered_by_arity": {str(i): c for i, c in sorted(lowered.items())},
                        "gadget_bound": gadget_bound(len(p.states), arities)}
    cert = dict(meta.get("certificate", {}))
    cert.update({"states": len(states), "max_arity": 2, "lowered_states": len(states),
                 "transitions": None})
    meta["certificate"] = cert
    out = Protocol(tuple(states), tuple(ts), p.initial, p.leaders, output, meta)
    cert["transitions"] = len(out.transitions)
    canonical_meta(meta)
    return out


@dataclass
class CheckResult:
    ok: bool
    entries: List[Dict[str, Any]] = field(default_factory=list)
    witness: Any = None

    def __bool__(self) -> bool:
        return self.ok


def _reach_sets(succ: Sequence[Sequence[int]], marked: Dict[int, int]) -> List[int]:
    """Per node, bitset (over ``marked`` positions) of marked nodes it reaches."""
    comps, comp_of = strongly_connected_components(succ)
    # Tarjan emits components in reverse topological order.
    comp_bits = [0] * len(comps)
    for cid, comp in enumerate(comps):
        acc = 0
        for v in comp:
            if v in marked:
                acc |= 1 << marked[v]
            for w in succ[v]:
                if comp_of[w] != cid:
                    acc |= comp_bits[comp_of[w]]
        comp_bits[cid] = acc
    return [comp_bits[comp_of[v]] for v in range(len(succ))]


def check_simulation(p: Protocol, p2: Protocol, domain: Iterable[Mapping[str, int]],
                     node_limit: int = DEFAULT_NODE_LIMIT,
                     pairwise_limit: int = 4000) -> CheckResult:
    """Check that ``p2`` simulates ``p`` on every input of ``domain``.

    Checked per input, over the configurations reachable from the initial
    one: the reachable configurations of ``p`` coincide with the helper-free
    ones of ``p2``; for every such configuration the helper-free
    configurations it reaches coincide too (skipped when there are more than
    ``pairwise_limit`` of them); and every configuration of ``p2`` can get
    back to a helper-free one.
    """
    if not set(p.states) <= set(p2.states):
        return CheckResult(False, witness="Q is not contained in Q2")
    if p.initial != p2.initial or p.leaders != p2.leaders:
        return CheckResult(False, witness="initial states or leaders differ")
    if any(p.output[q] != p2.output[q] for q in p.states):
        return CheckResult(False, witness="outputs differ on Q")
    helper = [i for i, q in enumerate(p2.states) if q not in set(p.states)]
    result = CheckResult(True)
    for inputs in domain:
        c0 = initial_configuration(p, inputs)
        g1 = explore(p, c0, node_limit)
        g2 = explore(p2, c0, node_limit)
        q_nodes2 = [v for v, c in enumerate(g2.nodes) if not any(c[i] for i in helper)]
        confs1 = {g1.configuration(v): v for v in range(len(g1))}
        confs2 = {g2.configuration(v): v for v in q_nodes2}
        entry = {"inputs": dict(inputs), "nodes": len(g1), "nodes_2way": len(g2)}
        same = set(confs1) == set(confs2)
        entry["reachable_equal"] = same
        if not same:
            result.ok = False
            result.witness = next(iter(set(confs1) ^ set(confs2)))
            result.entries.append(entry)
            continue
        # back to a helper-free configuration from everywhere
        pred: List[List[int]] = [[] for _ in g2.nodes]
        for v, out in enumerate(g2.succ):
            for w in out:
                pred[w].append(v)
        back = set(q_nodes2)
        queue = deque(q_nodes2)
        while queue:
            v = queue.popleft()
            for u in pred[v]:
                if u not in back:
                    back.add(u)
                    queue.append(u)
        entry["extension"] = len(back) == len(g2)
        if not entry["extension"]:
            result.ok = False
            result.witness = g2.configuration(next(v for v in range(len(g2)) if v not in back))
        if len(confs1) <= pairwise_limit:
            order = {c: i for i, c in enumerate(sorted(confs1, key=repr))}
            r1 = _reach_sets(g1.succ, {v: order[c] for c, v in confs1.items()})
            r2 = _reach_sets(g2.succ, {v: order[c] for c, v in confs2.items()})
            bad = [c for c in confs1 if r1[confs1[c]] != r2[confs2[c]]]
            entry["pairwise_equal"] = not bad
            if bad:
                result.ok = False
                result.witness = bad[0]
        else:
            entry["pairwise_equal"] = None
        result.entries.append(entry)
    return result


# -- semigroup presentations -------------------------------------------------------


@dataclass(frozen=True)
class SemigroupPresentation:
    """Productions ``l -> r`` over ``alphabet`` with designated letters.

    Words are tuples of letters. In files a word is a string: one letter per
    character when every letter is a single character, otherwise
    whitespace-separated letters.
    """

    alphabet: Tuple[str, ...]
    productions: Tuple[Tuple[Tuple[str, ...], Tuple[str, ...]], ...]
    s: str
    f: str
    c: str
    b: Optional[str] = None

    def __post_init__(self) -> None:
        alphabet = tuple(self.alphabet)
        prods = tuple((tuple(l), tuple(r)) for l, r in self.productions)
        letters = set(alphabet)
        for l, r in prods:
            if not l and not r:
                raise ValueError("production with empty left and right sides")
            if not set(l) | set(r) <= letters:
                raise ValueError(f"production {l} -> {r} uses letters outside the alphabet")
        for name in (self.s, self.f, self.c) + ((self.b,) if self.b else ()):
            if name not in letters:
                raise ValueError(f"designated letter {name!r} not in alphabet")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "productions", prods)

    @property
    def max_length(self) -> int:
        return max(max(len(l), len(r)) for l, r in self.productions)

    @staticmethod
    def _key(l, r):
        return (tuple(sorted(l)), tuple(sorted(r)))

    def is_commutation(self, l, r) -> bool:
        return Counter(l) == Counter(r)

    def is_reversible(self) -> bool:
        keys = {self._key(l, r) for l, r in self.productions}
        return all((rk, lk) in keys for lk, rk in keys)

    def effective_productions(self) -> List[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
        """Productions that change the letter counts (commutations dropped)."""
        return [(l, r) for l, r in self.productions if not self.is_commutation(l, r)]

    def parse_word(self, word: str) -> Tuple[str, ...]:
        if all(len(a) == 1 for a in self.alphabet) and not any(ch.isspace() for ch in word):
            return tuple(word)
        return tuple(word.split())

    def format_word(self, word: Sequence[str]) -> str:
        sep = "" if all(len(a) == 1 for a in self.alphabet) else " "
        return sep.join(word)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SemigroupPresentation":
        alphabet = tuple(doc["alphabet"])
        proto = cls(alphabet, (), doc["s"], doc["f"], doc["c"], doc.get("b"))
        prods = []
        for pr in doc["productions"]:
            l, r = (pr["l"], pr["r"]) if isinstance(pr, Mapping) else pr
            prods.append((proto.parse_word(l), proto.parse_word(r)))
        return cls(alphabet, tuple(prods), doc["s"], doc["f"], doc["c"], doc.get("b"))

    def to_dict(self) -> Dict[str, Any]:
        doc = {"alphabet": list(self.alphabet),
               "productions": [{"l": self.format_word(l), "r": self.format_word(r)}
                               for l, r in self.productions],
               "s": self.s, "f": self.f, "c": self.c}
        if self.b:
            doc["b"] = self.b
        return doc

    @classmethod
    def load(cls, path) -> "SemigroupPresentation":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def bundled_presentation() -> SemigroupPresentation:
    """Small reversible test presentation shipped with the package."""
    from importlib import resources
    text = resources.files("popproto").joinpath("data/test_presentation.json").read_text("utf-8")
    return SemigroupPresentation.from_dict(json.loads(text))


def pad(l: Sequence[str], r: Sequence[str], x: str = "x") -> Transition:
    """Pad both sides of ``l -> r`` with ``x`` to length max(|l|, |r|, 2)."""
    if not l and not r:
        raise ValueError("cannot pad a production with empty sides")
    width = max(len(l), len(r), 2)
    return Transition(tuple(l) + (x,) * (width - len(l)), tuple(r) + (x,) * (width - len(r)),
                      f"pad({''.join(l)}->{''.join(r)})")


def _fresh_x(alphabet: Sequence[str]) -> str:
    x = "x"
    while x in alphabet:
        x += "'"
    return x


def from_semigroup(sp: SemigroupPresentation) -> Protocol:
    """Protocol with leaders ``c, s`` and input ``x`` computing some x >= threshold."""
    if not sp.is_reversible():
        raise ValueError("presentation is not reversible")
    x = _fresh_x(sp.alphabet)
    states = list(sp.alphabet) + [x]
    t1 = [pad(l, r, x) for l, r in sp.effective_productions()]
    t2 = [Transition((sp.f, q), (sp.f, sp.f), f"attract_{q}") for q in states]
    arities = sorted({t.arity for t in t1})
    meta = {"construction": "semigroup", "params": {"presentation": sp.to_dict()},
            "variables": {"x": x}, "padding_state": x,
            "t1": [[list(t.pre), list(t.post)] for t in t1]}
    p = Protocol(tuple(states), tuple(t1 + t2), frozenset({x}),
                 Multiset([sp.c, sp.s]), {sp.f: 1}, meta)
    active = [t.arity for t in p.transitions if not t.silent]
    meta["certificate"] = {
        "states": len(p.states), "leaders": p.num_leaders,
        "transitions": len(p.transitions), "max_arity": max(active, default=2),
        "lowered_states": len(p.states) + gadget_states(active),
        "gadget_bound": gadget_bound(len(p.states), active),
        "t1_arities": arities}
    canonical_meta(meta)
    return p


def t1_transitions(p: Protocol) -> List[Transition]:
    """The padded productions of a protocol built by :func:`from_semigroup`."""
    wanted = {Transition(tuple(a), tuple(b)).key() for a, b in p.meta["t1"]}
    return [t for t in p.transitions if t.key() in wanted]


def presentation_family_states(n: int) -> int:
    """Lowered state bound for the 5-way protocol over a presentation with
    14n+10 letters and 20n+8 productions: (14n+11) + 3*5*(20n+8)."""
    letters, productions = 14 * n + 10, 20 * n + 8
    return gadget_bound(letters + 1, [5] * productions)


# -- brute-force oracles on words ----------------------------------------------------


def _apply_string(word: Tuple[str, ...], l: Tuple[str, ...], r: Tuple[str, ...]):
    n = len(l)
    for i in range(len(word) - n + 1):
        if word[i:i + n] == l:
            yield word[:i] + r + word[i + n:]


def derives_final(sp: SemigroupPresentation, start: Sequence[str], agents: int) -> bool:
    """Whether ``start`` derives a word beginning with ``f`` using ``agents`` agents.

    Plain string rewriting with every production plus all commutations
    ``ab -> ba``. A step ``l -> r`` on word ``w`` is allowed when the padded
    interaction fits the population: ``|w| - |l| + max(|l|, |r|, 2) <= agents``.
    """
    start = tuple(start)
    if len(start) > agents:
        return False
    rules = list(sp.productions)
    rules += [((a, b), (b, a)) for a in sp.alphabet for b in sp.alphabet if a != b]
    seen = {start}
    queue = deque([start])
    while queue:
        w = queue.popleft()
        if w and w[0] == sp.f:
            return True
        for l, r in rules:
            if len(w) - len(l) + max(len(l), len(r), 2) > agents:
                continue
            for nxt in _apply_string(w, l, r):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
    return False


def word_threshold(sp: SemigroupPresentation, max_padding: int) -> Optional[int]:
    """Smallest number m of padding agents with ``s c`` deriving ``f ...``."""
    for m in range(max_padding + 1):
        if derives_final(sp, (sp.s, sp.c), m + 2):
            return m
    return None


def protocol_threshold(p: Protocol, max_input: int,
                       node_limit: int = DEFAULT_NODE_LIMIT) -> Optional[int]:
    """Smallest input size with decided output 1 (single-input protocols)."""
    (x,) = tuple(p.initial)
    for m in range(max_input + 1):
        if p.leaders.size == 0 and m == 0:
            continue
        if decide_output(p, initial_configuration(p, {x: m}), node_limit) == 1:
            return m
    return None


def _derivations(sp: SemigroupPresentation, alpha: Sequence[str], k_max: int):
    """All production sequences of length <= k_max applicable to ``alpha`` (multiset view)."""
    prods = sp.effective_productions()

    def rec(word: Counter, seq):
        yield list(seq), word
        if len(seq) == k_max:
            return
        for pi, (l, r) in enumerate(prods):
            need = Counter(l)
            if all(word[a] >= v for a, v in need.items()):
                nxt = word - need
                nxt.update(r)
                seq.append(pi)
                yield from rec(nxt, seq)
                seq.pop()

    yield from rec(Counter(alpha), [])


def _replay(prods, alpha: Sequence[str], seq: Sequence[int]) -> Optional[Counter]:
    """Letter counts after applying productions ``seq`` to ``alpha``; None if stuck."""
    w = Counter(alpha)
    for pi in seq:
        l, r = prods[pi]
        need = Counter(l)
        if any(w[a] < v for a, v in need.items()):
            return None
        w -= need
        w.update(r)
    return +w


def simulation_lemma_check(sp: SemigroupPresentation, p: Protocol,
                           words: Optional[Iterable[Sequence[str]]] = None,
                           k_max: int = 4, m_extra: Sequence[int] = (0, 1, 3)) -> CheckResult:
    """Check both directions of the derivation/execution correspondence.

    Forward: for every derivation ``alpha -> beta`` of length k <= k_max and
    padding m >= (L-1)*k (L the longest production side) the padded
    transitions fire in order from C(alpha, m) and end in C(beta, m').
    Backward: every sequence of padded transitions of length <= k_max from
    those configurations maps to a derivation between the letter contents.
    """
    x = p.meta.get("padding_state", "x")
    prods = sp.effective_productions()
    pads = [pad(l, r, x) for l, r in prods]
    factor = sp.max_length - 1
    words = [(sp.s, sp.c)] if words is None else [tuple(w) for w in words]
    result = CheckResult(True)
    forward = backward = 0
    for alpha in words:
        for seq, beta in _derivations(sp, alpha, k_max):
            for extra in m_extra:
                m = factor * len(seq) + extra
                c = Multiset(alpha) + Multiset({x: m})
                try:
                    for pi in seq:
                        c = fire(p, pads[pi], c)
                except ProtocolError:
                    result.ok = False
                    result.witness = ("forward", alpha, seq, m)
                    continue
                letters = c - Multiset({x: c[x]})
                if letters != Multiset(dict(beta)):
                    result.ok = False
                    result.witness = ("forward", alpha, seq, m)
                forward += 1
        # backward: exhaustive over short padded-transition paths
        for m in range(0, factor * k_max + 1, max(1, factor)):
            start = Multiset(alpha) + Multiset({x: m})
            stack = [(start, [])]
            while stack:
                c, seq = stack.pop()
                if seq:
                    backward += 1
                    if _replay(prods, alpha, seq) != Counter(dict(c - Multiset({x: c[x]}))):
                        result.ok = False
                        result.witness = ("backward", alpha, seq, m)
                if len(seq) < k_max:
                    for pi, t in enumerate(pads):
                        if t.prem <= c:
                            stack.append((fire(p, t, c), seq + [pi]))
    result.entries.append({"forward_checked": forward, "backward_checked": backward})
    return result


def t1_reversible(p: Protocol, c0: Mapping[str, int],
                  node_limit: int = DEFAULT_NODE_LIMIT) -> bool:
    """Whether reachability using only padded productions is symmetric from ``c0``."""
    t1 = t1_transitions(p)
    sub = Protocol(p.states, tuple(t1), p.initial, p.leaders, p.output)
    return symmetric_reachability(sub, c0, node_limit)


def symmetric_reachability(p: Protocol, c0: Mapping[str, int],
                           node_limit: int = DEFAULT_NODE_LIMIT) -> bool:
    """True iff every edge of the reachability graph stays inside one SCC."""
    g = explore(p, c0, node_limit)
    _, comp_of = strongly_connected_components(g.succ)
    return all(comp_of[v] == comp_of[w] for v, out in enumerate(g.succ) for w in out)
