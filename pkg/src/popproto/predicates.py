"""Ground-truth predicates and input domains for the verification harness.

Predicates are conjunctions of linear atoms over input variable names::

    x >= 3
    2*x - 3*y > 0
    x >= 1 & y >= 1        (also ``&&``, ``and``, ``∧``)

They are only ever evaluated on concrete inputs. Input ranges look like
``x=1..6,y=0..3`` (a single value ``x=4`` is also accepted) and denote the
Cartesian product of the per-variable ranges.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple


class ParseError(ValueError):
    """Raised for malformed predicate or range expressions."""


_CMP = {">=": lambda a: a >= 0, ">": lambda a: a > 0,
        "<=": lambda a: a <= 0, "<": lambda a: a < 0,
        "=": lambda a: a == 0, "==": lambda a: a == 0}
_CMP_RE = re.compile(r"(>=|<=|==|>|<|=|≥|≤)")
_AND_RE = re.compile(r"\s*(?:&&|&|∧|\band\b)\s*")
_TERM_RE = re.compile(r"\s*([+-])?\s*(\d+)?\s*(\*)?\s*([A-Za-z_][A-Za-z0-9_]*)?\s*")


@dataclass(frozen=True)
class Atom:
    """``sum coeffs[v] * v + const  <op>  0``."""

    coeffs: Tuple[Tuple[str, int], ...]
    const: int
    op: str

    def holds(self, env: Mapping[str, int]) -> bool:
        total = self.const + sum(a * int(env.get(v, 0)) for v, a in self.coeffs)
        return _CMP[self.op](total)


@dataclass(frozen=True)
class Predicate:
    atoms: Tuple[Atom, ...]
    text: str = ""

    def __call__(self, env: Mapping[str, int]) -> bool:
        return all(a.holds(env) for a in self.atoms)

    @property
    def variables(self) -> List[str]:
        return sorted({v for a in self.atoms for v, _ in a.coeffs})


def _linear(expr: str) -> Tuple[Dict[str, int], int]:
    expr = expr.strip()
    if not expr:
        raise ParseError("empty side in comparison")
    coeffs: Dict[str, int] = {}
    const = 0
    pos = 0
    first = True
    while pos < len(expr):
        m = _TERM_RE.match(expr, pos)
        sign, num, star, var = m.groups()
        if m.end() == pos or (num is None and var is None):
            raise ParseError(f"cannot parse term at {expr[pos:]!r}")
        if sign is None and not first:
            raise ParseError(f"missing operator before {expr[pos:]!r}")
        if star and (num is None or var is None):
            raise ParseError(f"dangling '*' in {expr!r}")
        k = int(num) if num is not None else 1
        if sign == "-":
            k = -k
        if var is None:
            const += k
        else:
            coeffs[var] = coeffs.get(var, 0) + k
        pos = m.end()
        first = False
    return coeffs, const


def parse_predicate(text: str) -> Predicate:
    if not text or not text.strip():
        raise ParseError("empty predicate")
    atoms = []
    for part in _AND_RE.split(text.strip()):
        pieces = _CMP_RE.split(part)
        if len(pieces) != 3:
            raise ParseError(f"expected exactly one comparison in {part!r}")
        lhs, op, rhs = pieces
        op = {"≥": ">=", "≤": "<="}.get(op, op)
        lc, lk = _linear(lhs)
        rc, rk = _linear(rhs)
        coeffs = dict(lc)
        for v, a in rc.items():
            coeffs[v] = coeffs.get(v, 0) - a
        atoms.append(Atom(tuple(sorted((v, a) for v, a in coeffs.items() if a)), lk - rk, op))
    return Predicate(tuple(atoms), text.strip())


def parse_ranges(text: str) -> Dict[str, range]:
    """``"x=1..6,y=0..3"`` -> ``{"x": range(1, 7), "y": range(0, 4)}``."""
    if not text or not text.strip():
        raise ParseError("empty input range")
    out: Dict[str, range] = {}
    for item in text.split(","):
        m = re.fullmatch(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", item)
        if not m:
            raise ParseError(f"bad range item {item!r}")
        var, lo, hi = m.group(1), int(m.group(2)), m.group(3)
        hi = lo if hi is None else int(hi)
        if var in out:
            raise ParseError(f"variable {var!r} given twice")
        if hi < lo:
            raise ParseError(f"empty range for {var!r}: {lo}..{hi}")
        out[var] = range(lo, hi + 1)
    return out


def input_domain(ranges: Mapping[str, range], allow_empty: bool = False) -> List[Dict[str, int]]:
    """Cartesian product of ``ranges``; the all-zero input only if ``allow_empty``."""
    names = list(ranges)
    dom = []
    for values in itertools.product(*(ranges[v] for v in names)):
        if not allow_empty and not any(values):
            continue
        dom.append(dict(zip(names, values)))
    if not dom:
        raise ParseError("input domain is empty")
    return dom
