"""Multisets, transitions, protocols and single-step firing.

A configuration is just a :class:`Multiset` over the protocol's states with
positive size. Transitions keep their ordered pre/post lists (the k-way to
2-way lowering needs the order), but enabling, firing and equality are all
defined on the derived multisets.

Any pair of states without an explicit transition interacts silently; those
silent transitions are never materialised.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

COUNT_LIMIT = 2**63 - 1


class ProtocolError(ValueError):
    """Base class for malformed protocols and invalid operations on them."""


class MalformedTransitionError(ProtocolError):
    pass


class DisabledTransitionError(ProtocolError):
    pass


class InvalidInputError(ProtocolError):
    pass


class EmptyPopulationError(ProtocolError):
    pass


class Multiset(Mapping[str, int]):
    """Immutable multiset of state names.

    Zero counts are never stored, so two multisets are equal iff their stored
    entries are identical.
    """

    __slots__ = ("_counts", "_hash")

    def __init__(self, counts: Optional[Mapping[str, int] | Iterable[str]] = None):
        items: Dict[str, int] = {}
        if counts is None:
            pass
        elif isinstance(counts, Mapping):
            for key, value in counts.items():
                value = int(value)
                if value < 0:
                    raise ValueError(f"negative count {value} for {key!r}")
                if value > COUNT_LIMIT:
                    raise OverflowError(f"count for {key!r} exceeds 64-bit range")
                if value:
                    items[key] = value
        else:
            items = dict(Counter(counts))
        self._counts = dict(sorted(items.items()))
        self._hash: Optional[int] = None

    @classmethod
    def of(cls, *states: str) -> "Multiset":
        return cls(states)

    def __getitem__(self, key: str) -> int:
        return self._counts.get(key, 0)

    def __iter__(self) -> Iterator[str]:
        return iter(self._counts)

    def __len__(self) -> int:
        """Number of distinct states in the support (Mapping protocol)."""
        return len(self._counts)

    def __contains__(self, key: object) -> bool:
        return key in self._counts

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Multiset):
            return self._counts == other._counts
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._counts.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(k if v == 1 else f"{v}·{k}" for k, v in self._counts.items())
        return f"⟨{inner}⟩"

    @property
    def size(self) -> int:
        return sum(self._counts.values())

    @property
    def support(self) -> frozenset:
        return frozenset(self._counts)

    def count(self, states: Iterable[str]) -> int:
        """M(E') = sum of M(e) over e in E'."""
        return sum(self._counts.get(s, 0) for s in set(states))

    def __add__(self, other: Mapping[str, int]) -> "Multiset":
        out = dict(self._counts)
        for key, value in other.items():
            out[key] = out.get(key, 0) + value
        return Multiset(out)

    def __sub__(self, other: Mapping[str, int]) -> "Multiset":
        return Multiset({k: max(v - other.get(k, 0), 0) for k, v in self._counts.items()})

    def __le__(self, other: Mapping[str, int]) -> bool:
        return all(v <= other.get(k, 0) for k, v in self._counts.items())

    def __ge__(self, other: Mapping[str, int]) -> bool:
        return Multiset(other) <= self

    def __lt__(self, other: Mapping[str, int]) -> bool:
        return self <= other and self != Multiset(other)

    def __gt__(self, other: Mapping[str, int]) -> bool:
        return self >= other and self != Multiset(other)

    def elements(self) -> List[str]:
        return [k for k, v in self._counts.items() for _ in range(v)]


Configuration = Multiset


@dataclass(frozen=True)
class Transition:
    """``p1, ..., pi -> q1, ..., qi`` with 2 <= i."""

    pre: Tuple[str, ...]
    post: Tuple[str, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pre", tuple(self.pre))
        object.__setattr__(self, "post", tuple(self.post))
        if len(self.pre) != len(self.post):
            raise MalformedTransitionError(
                f"pre and post of {self} have different lengths")
        if len(self.pre) < 2:
            raise MalformedTransitionError(f"transition {self} has arity < 2")

    @property
    def arity(self) -> int:
        return len(self.pre)

    @cached_property
    def prem(self) -> Multiset:
        return Multiset(self.pre)

    @cached_property
    def postm(self) -> Multiset:
        return Multiset(self.post)

    @property
    def silent(self) -> bool:
        return self.prem == self.postm

    def inverse(self) -> "Transition":
        return Transition(self.post, self.pre, name=f"{self.name}^-1" if self.name else "")

    def key(self) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
        """Multiset identity, used for deduplication."""
        return (tuple(self.prem.elements()), tuple(self.postm.elements()))

    def __str__(self) -> str:
        return f"{', '.join(self.pre)} -> {', '.join(self.post)}"


@dataclass(frozen=True, eq=False)
class Protocol:
    """A k-way population protocol ``(Q, T, I, L, O)`` plus free-form metadata."""

    states: Tuple[str, ...]
    transitions: Tuple[Transition, ...]
    initial: frozenset
    leaders: Multiset
    output: Mapping[str, int]
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        states = tuple(sorted(set(self.states)))
        if not states:
            raise ProtocolError("protocol has no states")
        qs = set(states)
        # Deduplicate on multiset identity; keep the first ordered form seen.
        seen: Dict[Any, Transition] = {}
        for t in self.transitions:
            if not isinstance(t, Transition):
                t = Transition(*t)
            missing = (set(t.pre) | set(t.post)) - qs
            if missing:
                raise MalformedTransitionError(
                    f"transition {t} uses unknown states {sorted(missing)}")
            seen.setdefault(t.key(), t)
        transitions = tuple(sorted(seen.values(), key=lambda t: (t.pre, t.post)))
        initial = frozenset(self.initial)
        if not initial <= qs:
            raise ProtocolError(f"initial states {sorted(initial - qs)} not in Q")
        leaders = self.leaders if isinstance(self.leaders, Multiset) else Multiset(self.leaders)
        if not leaders.support <= qs:
            raise ProtocolError(f"leaders {sorted(leaders.support - qs)} not in Q")
        output = {q: int(self.output.get(q, 0)) for q in states}
        if any(v not in (0, 1) for v in output.values()):
            raise ProtocolError("output map must take values in {0, 1}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "leaders", leaders)
        object.__setattr__(self, "output", output)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Protocol):
            return NotImplemented
        return (self.states == other.states
                and [t.key() for t in self.transitions] == [t.key() for t in other.transitions]
                and [(t.pre, t.post) for t in self.transitions]
                == [(t.pre, t.post) for t in other.transitions]
                and self.initial == other.initial
                and self.leaders == other.leaders
                and dict(self.output) == dict(other.output)
                and self.meta == other.meta)

    __hash__ = object.__hash__

    @property
    def max_arity(self) -> int:
        return max((t.arity for t in self.transitions), default=2)

    @property
    def num_leaders(self) -> int:
        return self.leaders.size

    @cached_property
    def index(self) -> Dict[str, int]:
        return {q: i for i, q in enumerate(self.states)}

    @cached_property
    def active_transitions(self) -> Tuple[Transition, ...]:
        return tuple(t for t in self.transitions if not t.silent)

    def arity_histogram(self) -> Dict[int, int]:
        hist: Dict[int, int] = {}
        for t in self.transitions:
            hist[t.arity] = hist.get(t.arity, 0) + 1
        return dict(sorted(hist.items()))

    @cached_property
    def kernel(self) -> "Kernel":
        return Kernel(self)

    # dense <-> sparse configuration helpers

    def dense(self, c: Mapping[str, int]) -> Tuple[int, ...]:
        vec = [0] * len(self.states)
        for q, v in c.items():
            if v:
                try:
                    vec[self.index[q]] = v
                except KeyError:
                    raise ProtocolError(f"state {q!r} not in protocol") from None
        return tuple(vec)

    def sparse(self, vec: Iterable[int]) -> Multiset:
        return Multiset({q: v for q, v in zip(self.states, vec) if v})


class Kernel:
    """Dense-index view of a protocol's non-silent transitions.

    ``pre[t]`` lists ``(state index, needed count)`` and ``delta[t]`` lists
    ``(state index, change)``; both are what the explorers and the simulator
    iterate over in their inner loops.
    """

    def __init__(self, p: Protocol):
        idx = p.index
        self.protocol = p
        self.transitions = p.active_transitions
        self.pre: List[Tuple[Tuple[int, int], ...]] = []
        self.delta: List[Tuple[Tuple[int, int], ...]] = []
        for t in self.transitions:
            pre = tuple(sorted((idx[q], v) for q, v in t.prem.items()))
            change: Dict[int, int] = {}
            for q, v in t.prem.items():
                change[idx[q]] = change.get(idx[q], 0) - v
            for q, v in t.postm.items():
                change[idx[q]] = change.get(idx[q], 0) + v
            self.pre.append(pre)
            self.delta.append(tuple(sorted((i, d) for i, d in change.items() if d)))
        # transitions grouped by the lowest-index state of their preset
        self.by_anchor: List[List[int]] = [[] for _ in p.states]
        for ti, pre in enumerate(self.pre):
            self.by_anchor[pre[0][0]].append(ti)
        self.out = tuple(p.output[q] for q in p.states)

    def successors(self, c: Tuple[int, ...]) -> Iterator[Tuple[int, Tuple[int, ...]]]:
        """Yield ``(transition index, successor)`` for every enabled non-silent transition."""
        pre_all, delta_all = self.pre, self.delta
        for i, ci in enumerate(c):
            if not ci:
                continue
            for ti in self.by_anchor[i]:
                for j, k in pre_all[ti]:
                    if c[j] < k:
                        break
                else:
                    nxt = list(c)
                    for j, d in delta_all[ti]:
                        nxt[j] += d
                    yield ti, tuple(nxt)

    def consensus(self, c: Tuple[int, ...]) -> Optional[int]:
        seen = None
        for v, o in zip(c, self.out):
            if v:
                if seen is None:
                    seen = o
                elif seen != o:
                    return None
        return seen


def _check_known(p: Protocol, t: Transition) -> None:
    missing = (set(t.pre) | set(t.post)) - set(p.index)
    if missing:
        raise MalformedTransitionError(f"transition {t} uses unknown states {sorted(missing)}")


def enabled(p: Protocol, t: Transition, c: Mapping[str, int]) -> bool:
    _check_known(p, t)
    return t.prem <= c


def fire(p: Protocol, t: Transition, c: Mapping[str, int]) -> Multiset:
    """Return ``(c - prem(t)) + postm(t)``."""
    if not enabled(p, t, c):
        raise DisabledTransitionError(f"{t} is not enabled at {Multiset(c)!r}")
    c = c if isinstance(c, Multiset) else Multiset(c)
    return (c - t.prem) + t.postm


def initial_configuration(p: Protocol, inputs: Mapping[str, int]) -> Multiset:
    """Return ``D + L`` where ``D`` puts ``inputs[q]`` agents in initial state ``q``."""
    bad = set(inputs) - p.initial
    if bad:
        raise InvalidInputError(f"input keys {sorted(bad)} are not initial states")
    d = Multiset(inputs)
    c = d + p.leaders
    if c.size == 0:
        raise EmptyPopulationError("initial configuration would be empty")
    return c


def consensus_output(p: Protocol, c: Mapping[str, int]) -> Optional[int]:
    """0 or 1 if every supported state has that output, ``None`` (bottom) otherwise."""
    outs = {p.output[q] for q, v in c.items() if v}
    if not outs:
        raise EmptyPopulationError("configuration is empty")
    return outs.pop() if len(outs) == 1 else None
