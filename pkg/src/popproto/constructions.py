"""Builders for the concrete protocol families.

State naming (stable across interchange files):

* flock protocols: the number a state stands for, e.g. ``"0"``, ``"4"``, ``"13"``.
* majority: ``x``, ``y``, ``xbar``, ``ybar``.
* single inequality: ``x{i}`` (1-based), ``p{i}`` / ``m{i}`` for +2^i / -2^i,
  ``z+`` / ``z-`` for the reservoir.
* systems: ``x{j}``, ``p{i}.{row}.{flag}``, ``m{i}.{row}``, ``z0`` / ``z1``.

Every builder stores a size certificate in ``meta``: counts before lowering,
the exact state count after :func:`popproto.compilers.to_2way`, and the
bound proved for the construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .core import Multiset, Protocol, ProtocolError, Transition
from .interchange import canonical_meta


def bits(n: int) -> List[int]:
    """Indices of the 1-bits of ``n``; ``bits(13) == [0, 2, 3]``."""
    if n < 0:
        raise ValueError("bits() needs a non-negative integer")
    return [i for i in range(n.bit_length()) if n >> i & 1]


def size(n: int) -> int:
    """Number of binary digits of ``n`` (floor(log2 n) + 1 for n >= 1)."""
    if n < 1:
        raise ValueError("size() needs a positive integer")
    return n.bit_length()


def gadget_states(arities: Sequence[int]) -> int:
    """States added by the 2-way lowering for transitions of the given arities."""
    return sum(3 * (i - 2) for i in arities if i > 2)


def gadget_bound(num_states: int, arities: Sequence[int]) -> int:
    """|Q| + sum over i >= 3 of 3*i*n_i."""
    return num_states + sum(3 * i for i in arities if i > 2)


def _certificate(states: int, leaders: int, transitions: Sequence[Transition],
                 **bounds) -> Dict:
    arities = [t.arity for t in transitions if not t.silent]
    return {
        "states": states,
        "leaders": leaders,
        "transitions": len(transitions),
        "max_arity": max(arities, default=2),
        "lowered_states": states + gadget_states(arities),
        "gadget_bound": gadget_bound(states, arities),
        **bounds,
    }


def _protocol(states, transitions, initial, leaders, output, meta) -> Protocol:
    p = Protocol(tuple(states), tuple(transitions), frozenset(initial),
                 Multiset(leaders), output, meta)
    meta["certificate"] = _certificate(len(p.states), p.num_leaders, p.transitions,
                                       **meta.pop("bounds", {}))
    canonical_meta(meta)
    return p


# -- flock of birds ------------------------------------------------------------


def flock_standard(n: int) -> Protocol:
    """The (n+1)-state leaderless protocol for x >= n."""
    if n < 1:
        raise ProtocolError("flock_standard needs n >= 1 (x >= 0 is trivially true)")
    states = [str(a) for a in range(n + 1)]
    ts = []
    for a in range(n):
        for b in range(n):
            ts.append(Transition((str(a), str(b)), ("0", str(min(a + b, n))), f"s_{a},{b}"))
    for a in range(n + 1):
        ts.append(Transition((str(a), str(n)), (str(n), str(n)), f"t_{a}"))
    meta = {"construction": "flock-standard", "params": {"n": n},
            "variables": {"x": "1"}, "predicate": f"x>={n}"}
    return _protocol(states, ts, {"1"}, {}, {str(n): 1}, meta)


def flock_binary(n: int) -> Protocol:
    """Leaderless protocol for x >= n over binary representations.

    States are ``0``, the powers ``2^0 .. 2^size(n)`` and ``n``. When n is a
    power of two the collection transition would be unary, so the power
    ``n`` itself plays the role of state ``n`` and no larger powers exist.
    """
    if n < 1:
        raise ProtocolError("flock_binary needs n >= 1")
    b = bits(n)
    ns = str(n)
    merged = len(b) == 1
    top = b[0] if merged else size(n)
    powers = [str(2**i) for i in range(top + 1)]
    states = (["0"] + powers + [ns]) if n > 1 else [ns]
    ts: List[Transition] = []
    for i in range(top):
        lo, hi = str(2**i), str(2**(i + 1))
        ts.append(Transition((lo, lo), (hi, "0"), f"double_{i}"))
        ts.append(Transition((hi, "0"), (lo, lo), f"halve_{i}"))
    if not merged:
        ts.append(Transition(tuple(str(2**i) for i in b),
                             (ns,) + ("0",) * (len(b) - 1), "collect"))
    for q in dict.fromkeys(states):
        ts.append(Transition((ns, q), (ns, ns), f"attract_{q}"))
    lowered = len(set(states)) + gadget_states([len(b)])
    meta = {"construction": "flock-binary", "params": {"n": n}, "bits": b,
            "variables": {"x": "1"}, "predicate": f"x>={n}",
            "bounds": {"lowered_states_bound": 4 * (n.bit_length() - 1) + 7,
                       "lowered_states_expected": lowered}}
    return _protocol(states, ts, {"1"}, {}, {ns: 1}, meta)


def majority_leaders(n: int) -> Protocol:
    """Four-state majority protocol with n leaders in ``y``; computes x >= n."""
    if n < 1:
        raise ProtocolError("majority_leaders needs n >= 1")
    ts = [Transition(("x", "y"), ("xbar", "ybar"), "collide"),
          Transition(("x", "ybar"), ("x", "xbar"), "x_wins"),
          Transition(("y", "xbar"), ("y", "ybar"), "y_wins"),
          Transition(("xbar", "ybar"), ("xbar", "xbar"), "tie_break")]
    meta = {"construction": "majority", "params": {"n": n},
            "variables": {"x": "x"}, "predicate": f"x>={n}",
            "bounds": {"states_bound": 4, "leaders_bound": n}}
    return _protocol(["x", "y", "xbar", "ybar"], ts, {"x"}, {"y": n},
                     {"x": 1, "xbar": 1, "y": 0, "ybar": 0}, meta)


# -- linear inequalities ---------------------------------------------------------


def rep(z: int, n: int, row: Optional[int] = None) -> Multiset:
    """Signed binary representation of ``z`` over power states.

    ``row=None`` uses the single-inequality names (``p{i}``, ``m{i}``,
    ``z-``); otherwise the row-``row`` names of a system, with 0 mapped to
    the reservoir state ``z0``.
    """
    if abs(z) >= 2**n:
        raise ValueError(f"|{z}| does not fit below 2^{n}")
    if row is None:
        pos, neg, zero = "p{}", "m{}", "z-"
    else:
        pos, neg, zero = "p{}.%d.0" % row, "m{}.%d" % row, "z0"
    if z > 0:
        return Multiset(pos.format(i) for i in bits(z))
    if z < 0:
        return Multiset(neg.format(i) for i in bits(-z))
    return Multiset([zero])


def _add_transition(var: str, r: str, produced: Multiset, name: str) -> Transition:
    out = produced.elements()
    if len(out) == 1:
        # arity must be >= 2: let a reservoir agent watch
        return Transition((var, r), (out[0], r), name)
    return Transition((var,) + (r,) * (len(out) - 1), tuple(out), name)


def _fmt_linear(a: Sequence[int], c: int) -> str:
    terms = "+".join(f"{ai}*x{i + 1}" for i, ai in enumerate(a))
    return f"{terms}+{c}>0".replace("+-", "-")


def linear_inequality(a: Sequence[int], c: int) -> Protocol:
    """Protocol with leaders computing ``sum(a_i * x_i) + c > 0``."""
    a = [int(v) for v in a]
    k = len(a)
    if k < 1:
        raise ProtocolError("linear_inequality needs at least one variable")
    n = size(max([abs(v) for v in a] + [abs(c), 1]))
    X = [f"x{i + 1}" for i in range(k)]
    P = [f"p{i}" for i in range(n + 1)]
    M = [f"m{i}" for i in range(n + 1)]
    R = ["z+", "z-"]
    ts: List[Transition] = []
    for i, ai in enumerate(a):
        for r in R:
            ts.append(_add_transition(X[i], r, rep(ai, n), f"add_{X[i]},{r}"))
    for i in range(n + 1):
        ts.append(Transition((P[i], M[i]), ("z+", "z-"), f"cancel_{i}"))
    for i in range(n):
        ts.append(Transition((P[i], P[i]), (P[i + 1], "z+"), f"up+_{i}"))
        ts.append(Transition((M[i], M[i]), (M[i + 1], "z-"), f"up-_{i}"))
        for r in R:
            ts.append(Transition((P[i + 1], r), (P[i], P[i]), f"down+_{i + 1},{r}"))
            ts.append(Transition((M[i + 1], r), (M[i], M[i]), f"down-_{i + 1},{r}"))
    for i in range(n + 1):
        ts.append(Transition((P[i], "z-"), (P[i], "z+"), f"signal+_{i}"))
        ts.append(Transition((M[i], "z+"), (M[i], "z-"), f"signal-_{i}"))
    ts.append(Transition(("z-", "z+"), ("z-", "z-"), "signal"))
    leaders = rep(c, n) + Multiset({"z-": 4 * n + 2})
    output = {q: 1 for q in P + ["z+"]}
    meta = {"construction": "linear", "params": {"a": a, "c": c}, "n": n,
            "variables": {x: x for x in X}, "predicate": _fmt_linear(a, c),
            "bounds": {"lowered_states_bound": 10 * k * n,
                       "leaders_bound": 5 * n + 2}}
    return _protocol(X + P + M + R, ts, set(X), leaders, output, meta)


@dataclass(frozen=True)
class LinearSystemSpec:
    """``A x + c > 0`` (componentwise) with ``A`` an m x k integer matrix."""

    A: Tuple[Tuple[int, ...], ...]
    c: Tuple[int, ...]

    def __post_init__(self) -> None:
        A = tuple(tuple(int(v) for v in row) for row in self.A)
        c = tuple(int(v) for v in self.c)
        if not A or not A[0]:
            raise ProtocolError("linear system needs m >= 1 rows and k >= 1 columns")
        if any(len(row) != len(A[0]) for row in A):
            raise ProtocolError("ragged coefficient matrix")
        if len(c) != len(A):
            raise ProtocolError("constant vector length differs from row count")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return len(self.A)

    @property
    def k(self) -> int:
        return len(self.A[0])

    @property
    def b_max(self) -> int:
        return max([1] + [abs(v) for row in self.A for v in row] + [abs(v) for v in self.c])

    @property
    def n(self) -> int:
        """Index of the largest power: ceil(log2(2 m^2)) + size(b_max)."""
        return (2 * self.m * self.m - 1).bit_length() + size(self.b_max)

    @property
    def coeff_size(self) -> int:
        """size(b_max), the ``n`` of the size bounds."""
        return size(self.b_max)

    def holds(self, x: Sequence[int]) -> bool:
        return all(sum(a * v for a, v in zip(row, x)) + ci > 0
                   for row, ci in zip(self.A, self.c))


def linear_system(spec: LinearSystemSpec) -> Protocol:
    """Protocol with leaders computing the conjunction ``A x + c > 0``."""
    m, k, n = spec.m, spec.k, spec.n
    rows = range(1, m + 1)
    X = [f"x{j + 1}" for j in range(k)]

    def pos(i: int, j: int, a: int) -> str:
        return f"p{i}.{j}.{a}"

    def neg(i: int, j: int) -> str:
        return f"m{i}.{j}"

    def z(a: int) -> str:
        return f"z{a}"

    P = [pos(i, j, a) for j in rows for i in range(n + 1) for a in (0, 1)]
    M = [neg(i, j) for j in rows for i in range(n + 1)]
    ts: List[Transition] = []
    for j in rows:
        for i in range(n):
            for a in (0, 1):
                for b in (0, 1):
                    ab = a & b
                    ts.append(Transition((pos(i, j, a), pos(i, j, b)),
                                         (pos(i + 1, j, ab), z(ab)), f"up+_{i},{j},{a},{b}"))
                    ts.append(Transition((pos(i + 1, j, a), z(b)),
                                         (pos(i, j, ab), pos(i, j, ab)),
                                         f"down+_{i + 1},{j},{a},{b}"))
                ts.append(Transition((neg(i + 1, j), z(a)), (neg(i, j), neg(i, j)),
                                     f"down-_{i + 1},{j},{a}"))
            ts.append(Transition((neg(i, j), neg(i, j)), (neg(i + 1, j), z(0)),
                                 f"up-_{i},{j}"))
        for i in range(n + 1):
            for a in (0, 1):
                ts.append(Transition((pos(i, j, a), neg(i, j)), (z(a), z(0)),
                                     f"cancel_{i},{j},{a}"))
            ts.append(Transition((z(0), pos(i, j, 1)), (z(0), pos(i, j, 0)), f"false+_{i},{j}"))
            ts.append(Transition((neg(i, j), z(1)), (neg(i, j), z(0)), f"false-_{i},{j}"))
            ts.append(Transition((z(1), pos(i, j, 0)), (z(1), pos(i, j, 1)), f"true_{i},{j}"))
    ts.append(Transition((z(0), z(1)), (z(0), z(0)), "false"))
    ts.append(Transition(tuple(pos(0, j, 0) for j in rows) + (z(0),),
                         tuple(pos(0, j, 1) for j in rows) + (z(1),), "true"))
    for col in range(k):
        produced = Multiset()
        for j in rows:
            produced = produced + rep(spec.A[j - 1][col], n, row=j)
        for a in (0, 1):
            ts.append(_add_transition(X[col], z(a), produced, f"add_{col + 1},{a}"))
    leaders = Multiset({z(0): 5 * m * n + 1})
    for j in rows:
        leaders = leaders + rep(spec.c[j - 1], n, row=j)
    output = {q: 1 for q in P if q.endswith(".1")}
    output[z(1)] = 1
    ns = spec.coeff_size
    log_m = math.log2(m)
    meta = {"construction": "system",
            "params": {"A": [list(r) for r in spec.A], "c": list(spec.c)},
            "n": n, "b_max": spec.b_max, "coeff_size": ns,
            "variables": {x: x for x in X},
            "predicate": " & ".join(_fmt_linear(r, ci) for r, ci in zip(spec.A, spec.c)),
            "bounds": {"lowered_states_bound": 27 * (log_m + ns) * (m + k),
                       "leaders_bound": 14 * m * (log_m + ns)}}
    return _protocol(X + P + M + [z(0), z(1)], ts, set(X), leaders, output, meta)


# -- value bookkeeping -----------------------------------------------------------


def flock_value(c: Mapping[str, int]) -> int:
    """val(C) for flock protocols: every state names the number it stands for."""
    return sum(int(q) * v for q, v in c.items())


def row_values(p: Protocol, c: Mapping[str, int]) -> List[Tuple[int, int, int]]:
    """Per row ``(val_i, val_i^+, val_i^-)`` for linear / system protocols.

    ``val^+`` / ``val^-`` cover the power states only, so they are the
    quantities whose monotonicity holds once every variable agent has been
    consumed; ``val_i`` also counts unconsumed variable agents.
    """
    kind = p.meta.get("construction")
    if kind == "linear":
        a = p.meta["params"]["a"]
        plus = minus = 0
        xs = 0
        for q, v in c.items():
            if q[0] == "p":
                plus += v * 2 ** int(q[1:])
            elif q[0] == "m":
                minus -= v * 2 ** int(q[1:])
            elif q[0] == "x":
                xs += a[int(q[1:]) - 1] * v
        return [(plus + minus + xs, plus, minus)]
    if kind == "system":
        A = p.meta["params"]["A"]
        m = len(A)
        plus, minus, xs = [0] * m, [0] * m, [0] * m
        for q, v in c.items():
            if q[0] == "p":
                i, j, _ = q[1:].split(".")
                plus[int(j) - 1] += v * 2 ** int(i)
            elif q[0] == "m":
                i, j = q[1:].split(".")
                minus[int(j) - 1] -= v * 2 ** int(i)
            elif q[0] == "x":
                col = int(q[1:]) - 1
                for r in range(m):
                    xs[r] += A[r][col] * v
        return [(plus[r] + minus[r] + xs[r], plus[r], minus[r]) for r in range(m)]
    raise ProtocolError(f"no value function for construction {kind!r}")


def variable_states(p: Protocol) -> List[str]:
    """States holding unconsumed input agents (the set X)."""
    return sorted(p.meta.get("variables", {}).values())
