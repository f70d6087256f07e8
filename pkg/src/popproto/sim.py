"""Randomised fair simulation.

Scheduler model: at every step an ordered tuple of agents meets. A non-silent
transition ``t`` is chosen with weight ``i! * prod_q C(c_q, prem(t)_q)``, the
number of ordered ``i``-tuples of distinct agents whose states form
``prem(t)``; the step is silent with the remaining mass of the ``N(N-1)``
ordered pairs (if any). For 2-way protocols this is the classic
uniform-random-pair scheduler. Runs of silent steps are skipped in one
geometric draw, so long stretches of no-ops cost nothing.

Randomness comes from numpy's Philox4x64 counter-based generator keyed by a
``numpy.random.SeedSequence``; trial ``t`` of an estimate uses the entropy
``[seed, input index, t]``.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from bisect import bisect_right
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .analysis import format_inputs
from .core import Multiset, Protocol, Transition, initial_configuration

DEFAULT_WINDOW = 1000
DEFAULT_MAX_STEPS = 10**7
DEFAULT_CHECK_BUDGET = 5000
_BLOCK = 1 << 16

STABLE = ("stabilized-0", "stabilized-1")
UNDECIDED = "undecided"


def make_rng(seed) -> np.random.Generator:
    """Philox-backed generator; ``seed`` may be an int or a sequence of ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derive_seed(seed: int, *path: int) -> int:
    """64-bit seed for a sub-run, stable across platforms."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1, np.uint64)[0])


class _Uniforms:
    """Buffered uniform doubles from a numpy generator."""

    def __init__(self, rng: np.random.Generator, batch: int = 4096):
        self.rng = rng
        self.batch = batch
        self.buf: List[float] = []
        self.pos = 0

    def __call__(self) -> float:
        if self.pos >= len(self.buf):
            self.buf = self.rng.random(self.batch).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


class _Weights:
    """Per-transition interaction weights kept up to date incrementally."""

    def __init__(self, p: Protocol):
        kern = p.kernel
        self.kernel = kern
        self.pre = kern.pre
        self.delta = kern.delta
        self.factor = [math.factorial(t.arity) for t in kern.transitions]
        touching: List[List[int]] = [[] for _ in p.states]
        for ti, pre in enumerate(self.pre):
            for j, _ in pre:
                touching[j].append(ti)
        self.affected = []
        for delta in self.delta:
            hit = sorted({ti for j, _ in delta for ti in touching[j]})
            self.affected.append(hit)

    def weight(self, ti: int, c: Sequence[int]) -> int:
        w = self.factor[ti]
        for j, k in self.pre[ti]:
            cj = c[j]
            if cj < k:
                return 0
            w *= cj if k == 1 else math.comb(cj, k)
        return w


def step_random(p: Protocol, c: Mapping[str, int],
                rng: np.random.Generator) -> Tuple[Optional[Transition], Multiset]:
    """One scheduler step; returns ``(None, c)`` for a silent interaction."""
    wts = _Weights(p)
    vec = p.dense(c)
    w = [wts.weight(ti, vec) for ti in range(len(wts.pre))]
    total = sum(w)
    n = sum(vec)
    mass = max(total, n * (n - 1))
    c = c if isinstance(c, Multiset) else Multiset(c)
    if total == 0:
        return None, c
    u = rng.random() * mass
    if u >= total:
        return None, c
    ti = bisect_right(list(accumulate(w)), u)
    t = wts.kernel.transitions[ti]
    return t, (c - t.prem) + t.postm


@dataclass
class RunOutcome:
    status: str
    steps: int
    seed: Any
    interactions: int = 0
    final: Optional[Multiset] = None
    trace: Optional[List[str]] = None

    @property
    def output(self) -> Optional[int]:
        return int(self.status[-1]) if self.status in STABLE else None


def _escapes(kern, c: Tuple[int, ...], b: int, budget: int) -> bool:
    """Bounded BFS: can ``c`` reach a configuration that is not a ``b``-consensus?"""
    seen = {c}
    queue = deque([c])
    while queue and len(seen) < budget:
        cur = queue.popleft()
        for _, nxt in kern.successors(cur):
            if nxt in seen:
                continue
            if kern.consensus(nxt) != b:
                return True
            seen.add(nxt)
            queue.append(nxt)
    return False


# Kernel status codes.
_NEED_RANDOM, _WINDOW, _STUCK, _MAX_STEPS = 0, 1, 2, 3


class _Tables:
    """Flat arrays describing a protocol for the compiled kernel."""

    def __init__(self, p: Protocol):
        wts = _Weights(p)
        self.kernel = wts.kernel
        self.factor = np.array(wts.factor, dtype=np.float64)
        self.pre_ptr, self.pre_idx, self.pre_k = _csr([list(x) for x in wts.pre])
        self.d_ptr, self.d_idx, self.d_val = _csr([list(x) for x in wts.delta])
        self.a_ptr = np.zeros(len(wts.affected) + 1, dtype=np.int64)
        self.a_ptr[1:] = np.cumsum([len(a) for a in wts.affected])
        self.a_idx = np.array([t for a in wts.affected for t in a], dtype=np.int64)
        self.out = np.array(wts.kernel.out, dtype=np.int64)


def _csr(rows):
    ptr = np.zeros(len(rows) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(r) for r in rows])
    idx = np.array([j for r in rows for j, _ in r], dtype=np.int64)
    val = np.array([v for r in rows for _, v in r], dtype=np.int64)
    return ptr, idx, val


@njit(cache=True)
def _weight(ti, c, factor, pre_ptr, pre_idx, pre_k):
    w = factor[ti]
    for e in range(pre_ptr[ti], pre_ptr[ti + 1]):
        cj = c[pre_idx[e]]
        k = pre_k[e]
        if cj < k:
            return 0.0
        num = 1.0
        den = 1.0
        for r in range(k):
            num *= cj - r
            den *= r + 1
        w *= num / den
    return w


@njit(cache=True)
def _store(state, steps, inter, streak, last, ones, traced):
    state[0] = steps
    state[1] = inter
    state[2] = streak
    state[3] = last
    state[4] = ones
    state[5] = traced


@njit(cache=True)
def _advance(c, w, state, u, upos, max_steps, window, pairs, n,
             factor, pre_ptr, pre_idx, pre_k, d_ptr, d_idx, d_val,
             a_ptr, a_idx, out, trace):
    # state = [steps, interactions, streak, last, ones, traced]
    steps, inter, streak = state[0], state[1], state[2]
    last, ones, traced = state[3], state[4], state[5]
    nt = w.shape[0]
    total = 0.0
    for ti in range(nt):
        total += w[ti]
    while steps < max_steps:
        if total <= 0.0:
            _store(state, steps, inter, streak, last, ones, traced)
            return _STUCK, upos
        if upos + 2 > u.shape[0]:
            _store(state, steps, inter, streak, last, ones, traced)
            return _NEED_RANDOM, upos
        if total < pairs:
            x = u[upos]
            upos += 1
            if x > 0.0:
                steps += int(np.log(x) / np.log1p(-total / pairs))
            if steps >= max_steps:
                steps = max_steps
                break
        r = u[upos] * total
        upos += 1
        acc = 0.0
        ti = nt - 1
        for tj in range(nt):
            acc += w[tj]
            if acc > r:
                ti = tj
                break
        for e in range(d_ptr[ti], d_ptr[ti + 1]):
            j = d_idx[e]
            c[j] += d_val[e]
            if out[j]:
                ones += d_val[e]
        for e in range(a_ptr[ti], a_ptr[ti + 1]):
            tj = a_idx[e]
            nw = _weight(tj, c, factor, pre_ptr, pre_idx, pre_k)
            total += nw - w[tj]
            w[tj] = nw
        steps += 1
        inter += 1
        if traced < trace.shape[0]:
            trace[traced] = ti
            traced += 1
        b = 1 if ones == n else (0 if ones == 0 else -1)
        if b < 0:
            streak = 0
        elif b == last:
            streak += 1
        else:
            streak = 1
        last = b
        if b >= 0 and streak >= window:
            _store(state, steps, inter, streak, last, ones, traced)
            return _WINDOW, upos
    _store(state, steps, inter, streak, last, ones, traced)
    return _MAX_STEPS, upos


def run(p: Protocol, c0: Mapping[str, int], max_steps: int = DEFAULT_MAX_STEPS,
        window: int = DEFAULT_WINDOW, seed=0, trace_limit: int = 0,
        check_budget: int = DEFAULT_CHECK_BUDGET) -> RunOutcome:
    """Simulate from ``c0`` until stabilisation is detected or ``max_steps`` pass.

    ``stabilized-b`` is declared once ``window`` consecutive non-silent steps
    produced ``b``-consensus configurations and a bounded search from the
    current configuration (``check_budget`` nodes) finds no way out of
    ``b``-consensus. A configuration with no enabled non-silent transition
    is decided on the spot. This is evidence, not proof.

    The inner loop is compiled with numba; uniforms are drawn from the
    Philox stream in fixed-size blocks, so results depend only on ``seed``.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    rng = make_rng(seed)
    tab = _Tables(p)
    kern = tab.kernel
    c = np.array(p.dense(c0), dtype=np.int64)
    n = int(c.sum())
    ones = int(c[tab.out == 1].sum())
    w = np.array([_weight(ti, c, tab.factor, tab.pre_ptr, tab.pre_idx, tab.pre_k)
                  for ti in range(len(kern.transitions))], dtype=np.float64)
    trace_buf = np.zeros(max(0, trace_limit), dtype=np.int64)
    state = np.array([0, 0, 0, -1, ones, 0], dtype=np.int64)
    u = np.zeros(0)
    upos = 0
    while True:
        code, upos = _advance(c, w, state, u, upos, max_steps, window,
                              float(n * (n - 1)), n, tab.factor, tab.pre_ptr,
                              tab.pre_idx, tab.pre_k, tab.d_ptr, tab.d_idx,
                              tab.d_val, tab.a_ptr, tab.a_idx, tab.out, trace_buf)
        if code == _NEED_RANDOM:
            u = rng.random(_BLOCK)
            upos = 0
            continue
        if code == _WINDOW:
            b = int(state[3])
            if not _escapes(kern, tuple(int(v) for v in c), b, check_budget):
                status = STABLE[b]
                break
            state[2] = 0
            continue
        if code == _STUCK:
            ones = int(state[4])
            status = STABLE[1] if ones == n else STABLE[0] if ones == 0 else UNDECIDED
            break
        status = UNDECIDED
        break
    trace = None
    if trace_limit:
        trace = [str(kern.transitions[ti]) for ti in trace_buf[:state[5]]]
    return RunOutcome(status, int(state[0]), seed, int(state[1]),
                      p.sparse(int(v) for v in c), trace)


@dataclass
class InputStats:
    inputs: Dict[str, int]
    trials: int
    fractions: Dict[str, float]
    mean_steps: Optional[float]
    median_steps: Optional[float]


@dataclass
class Estimate:
    runs: List[Tuple[Dict[str, int], int, RunOutcome]] = field(default_factory=list)
    stats: List[InputStats] = field(default_factory=list)

    def runs_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["input", "trial", "seed", "status", "steps"])
        for inputs, trial, r in self.runs:
            wr.writerow([format_inputs(inputs), trial, r.seed, r.status, r.steps])
        return buf.getvalue()

    def stats_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["input", "trials", "stabilized-0", "stabilized-1", "undecided",
                     "mean_steps", "median_steps"])
        for s in self.stats:
            wr.writerow([format_inputs(s.inputs), s.trials,
                         f"{s.fractions['stabilized-0']:.6f}",
                         f"{s.fractions['stabilized-1']:.6f}",
                         f"{s.fractions[UNDECIDED]:.6f}",
                         "" if s.mean_steps is None else f"{s.mean_steps:.3f}",
                         "" if s.median_steps is None else f"{s.median_steps:.1f}"])
        return buf.getvalue()


def _run_job(args):
    p, c0, kwargs = args
    return run(p, c0, **kwargs)


def estimate(p: Protocol, inputs: Sequence[Mapping[str, int]], trials: int,
             max_steps: int = DEFAULT_MAX_STEPS, seed: int = 0,
             window: int = DEFAULT_WINDOW, check_budget: int = DEFAULT_CHECK_BUDGET,
             workers: int = 1) -> Estimate:
    """Run ``trials`` independent simulations per input and summarise them.

    Trial seeds are derived from ``(seed, input index, trial)``, so results
    do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = []
    keys = []
    for ii, inp in enumerate(inputs):
        inp = {k: int(v) for k, v in inp.items()}
        c0 = initial_configuration(p, inp)
        for t in range(trials):
            s = derive_seed(seed, ii, t)
            jobs.append((p, c0, {"max_steps": max_steps, "window": window,
                                 "seed": s, "check_budget": check_budget}))
            keys.append((inp, t))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outcomes = [_run_job(j) for j in jobs]
    est = Estimate()
    for (inp, t), r in zip(keys, outcomes):
        r.final = None
        est.runs.append((inp, t, r))
    for ii in range(len(inputs)):
        chunk = [r for _, _, r in est.runs[ii * trials:(ii + 1) * trials]]
        fr = {s: sum(r.status == s for r in chunk) / trials for s in STABLE + (UNDECIDED,)}
        st = [r.steps for r in chunk if r.status in STABLE]
        est.stats.append(InputStats(est.runs[ii * trials][0], trials, fr,
                                    statistics.fmean(st) if st else None,
                                    statistics.median(st) if st else None))
    return est
