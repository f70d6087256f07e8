"""Protocol interchange files (UTF-8 JSON).

A document has the fields ``states``, ``transitions`` (objects with equal
length ``pre``/``post`` lists), ``initial``, ``leaders`` (state -> count),
``output`` (state -> 0|1) and a free-form ``meta`` object. Serialisation is
canonical: states sorted, transitions sorted by ``(pre, post)``, keys sorted,
so equal protocols produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from .core import Multiset, Protocol, ProtocolError, Transition

PathLike = Union[str, Path]

FIELDS = ("states", "transitions", "initial", "leaders", "output", "meta")


class FormatError(ProtocolError):
    """Raised for documents that are not valid protocol files."""


def _transition(t: Transition) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"pre": list(t.pre), "post": list(t.post)}
    if t.name:
        doc["name"] = t.name
    return doc


def to_dict(p: Protocol) -> Dict[str, Any]:
    return {
        "states": list(p.states),
        "transitions": [_transition(t) for t in p.transitions],
        "initial": sorted(p.initial),
        "leaders": {q: p.leaders[q] for q in sorted(p.leaders)},
        "output": {q: p.output[q] for q in p.states},
        "meta": p.meta,
    }


def from_dict(doc: Mapping[str, Any]) -> Protocol:
    if not isinstance(doc, Mapping):
        raise FormatError("protocol document must be a JSON object")
    missing = [f for f in FIELDS[:-1] if f not in doc]
    if missing:
        raise FormatError(f"missing fields: {', '.join(missing)}")
    try:
        transitions = []
        for t in doc["transitions"]:
            if not isinstance(t, Mapping) or set(t) - {"pre", "post", "name"}:
                raise FormatError(f"bad transition entry: {t!r}")
            transitions.append(Transition(tuple(t["pre"]), tuple(t["post"]), t.get("name", "")))
        leaders = {str(q): int(v) for q, v in doc["leaders"].items()}
        return Protocol(
            states=tuple(doc["states"]),
            transitions=tuple(transitions),
            initial=frozenset(doc["initial"]),
            leaders=Multiset(leaders),
            output={str(q): int(v) for q, v in doc["output"].items()},
            meta=dict(doc.get("meta") or {}),
        )
    except ProtocolError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"malformed protocol document: {exc}") from exc


def canonical_meta(meta: Dict[str, Any]) -> Dict[str, Any]:
    """Rewrite ``meta`` in place to the form it reads back from JSON."""
    fresh = json.loads(json.dumps(meta, sort_keys=True))
    meta.clear()
    meta.update(fresh)
    return meta


def dumps(p: Protocol) -> str:
    return json.dumps(to_dict(p), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def loads(text: str) -> Protocol:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return from_dict(doc)


def dump(p: Protocol, path: PathLike) -> None:
    Path(path).write_text(dumps(p), encoding="utf-8")


def load(path: PathLike) -> Protocol:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return loads(text)
