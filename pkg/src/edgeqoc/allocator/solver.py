"""Exact branch-and-bound allocator.

Only a few quantities of an allocation enter any objective: the globally
first and last uplink slots ``(F, L)`` and every robot's downlink window.
The search therefore enumerates ``(F, L)``, checks that the uplink traffic
fits between them, and branches over downlink windows robot by robot.

Robots are interchangeable, so windows are assigned in non-decreasing
lexicographic order; the resulting sorted sequence is also the tie-break
order. Scores are compared as exact integers (QoC floats scaled by 2**1100)
so ties are real ties.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InfeasibleError, SchemeInfeasibleError
from .model import (
    MAX_DELAY,
    MAX_QOC,
    MIN_DELAY,
    MIN_DELAY_STABLE,
    AllocationInstance,
    AllocationSolution,
    scheme_name,
)
from .packing import feasible, pack

SCALE = 2**1100

Window = Tuple[int, int]


def exact(q: float) -> int:
    n, d = float(q).as_integer_ratio()
    return n * (SCALE // d)


def windows_for(slots: Sequence[int], need: int, lo: int, hi: int) -> List[Window]:
    """All ``(first, last)`` windows over ``slots`` inside ``[lo, hi]``, lex order."""
    inside = [j for j in slots if lo <= j <= hi]
    return [(a, b) for a in inside for b in inside if a == b or (a < b and need >= 2)]


def window_score(instance: AllocationInstance, scheme: str, F: int, L: int, c: int, e: int):
    """Per-robot score (higher is better) for downlink window ``(c, e)``, or None."""
    e2e, alloc = e - F, c - L
    table = instance.qoc_table
    if alloc < 1 or not table.has(e2e, alloc):
        return None
    if scheme == MAX_QOC:
        return exact(table.qoc_at(e2e, alloc))
    if scheme == MAX_DELAY:
        return e2e
    if scheme == MIN_DELAY_STABLE and not table.qoc_at(e2e, alloc) > 0:
        return None
    return -e2e


def build_solution(
    instance: AllocationInstance,
    scheme: str,
    ul_windows: Sequence[Window],
    dl_windows: Sequence[Window],
    optimal: bool = True,
    nodes: int = 0,
) -> AllocationSolution:
    """Materialize PRB matrices and derived fields for robot windows."""
    frame = instance.frame
    n = instance.n_slots
    ul = pack(ul_windows, instance.ul_need, frame.uplink_slots, instance.capacity, n)
    dl = pack(dl_windows, instance.dl_need, frame.downlink_slots, instance.capacity, n)
    if ul is None or dl is None:
        raise InfeasibleError("windows admit no packing", "packing")
    F = min(w[0] for w in ul_windows)
    L = max(w[1] for w in ul_windows)
    dur = frame.slot_duration
    table = instance.qoc_table
    e2e_slots = [e - F for _, e in dl_windows]
    alloc_slots = [c - L for c, _ in dl_windows]
    qoc = [table.qoc_at(e, a) for e, a in zip(e2e_slots, alloc_slots)]
    e2e_ms = [e * dur for e in e2e_slots]
    if scheme == MAX_QOC:
        objective = math.fsum(qoc)
    else:
        objective = math.fsum(e2e_ms)
    return AllocationSolution(
        scheme=scheme,
        ul_alloc=ul,
        dl_alloc=dl,
        ul_sched=(ul > 0).astype(int),
        dl_sched=(dl > 0).astype(int),
        first_ul=[w[0] for w in ul_windows],
        last_ul=[w[1] for w in ul_windows],
        first_dl=[w[0] for w in dl_windows],
        last_dl=[w[1] for w in dl_windows],
        e2e_delay=e2e_ms,
        alloc_delay=[a * dur for a in alloc_slots],
        delay_choice=[table.choice_index(e, a) for e, a in zip(e2e_slots, alloc_slots)],
        qoc=qoc,
        objective_value=objective,
        optimal=optimal,
        nodes=nodes,
    )


def interleave(ul_seq: Sequence[Window], dl_seq: Sequence[Window]) -> Tuple[int, ...]:
    """Robot-major slot tuple ``(first_ul, last_ul, first_dl, last_dl, ...)``."""
    out: List[int] = []
    for u, d in zip(ul_seq, dl_seq):
        out.extend((u[0], u[1], d[0], d[1]))
    return tuple(out)


class _Timeout(Exception):
    pass


@dataclass
class _Best:
    score: int
    e2e: int
    key: Tuple[int, ...]
    FL: Tuple[int, int]
    ul: List[Window]
    dl: List[Window]


class _Search:
    def __init__(self, instance: AllocationInstance, scheme: str, deadline: Optional[float]):
        self.inst = instance
        self.scheme = scheme
        self.deadline = deadline
        self.nodes = 0
        self.best: Optional[_Best] = None
        frame = instance.frame
        self.ul_slots = frame.uplink_slots
        self.dl_slots = frame.downlink_slots
        self.R = instance.capacity
        self.N = instance.n_robots
        self.phi = instance.n_slots

    def _tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise _Timeout

    # -- uplink ---------------------------------------------------------
    def lexmin_uplink(self, F: int, L: int) -> Optional[List[Window]]:
        """Lexicographically smallest sorted uplink windows spanning exactly F..L."""
        U, N = self.inst.ul_need, self.N
        span_cap = self.R * sum(1 for j in self.ul_slots if F <= j <= L)
        if N * U > span_cap or (F < L and N * U < 2):
            return None
        wins = windows_for(self.ul_slots, U, F, L)

        def dfs(seq: List[Window], start: int, has_last: bool):
            self._tick()
            k = len(seq)
            if k == N:
                return list(seq) if has_last else None
            for idx in range(start, len(wins)):
                w = wins[idx]
                if k == 0 and w[0] != F:
                    break
                if k == N - 1 and not has_last and w[1] != L:
                    continue
                seq.append(w)
                if feasible(seq, U, self.ul_slots, self.R, self.phi):
                    found = dfs(seq, idx, has_last or w[1] == L)
                    if found is not None:
                        return found
                seq.pop()
            return None

        return dfs([], 0, False)

    # -- downlink -------------------------------------------------------
    def candidates(self, F: int, L: int):
        D = self.inst.dl_need
        out = []
        for c, e in windows_for(self.dl_slots, D, L + 1, self.phi):
            s = window_score(self.inst, self.scheme, F, L, c, e)
            if s is not None:
                out.append((c, e, s, e - F))
        return out

    def _ends_bound(self, cands, start, placed_ends: List[int], m: int, L: int) -> Tuple[int, int]:
        """Optimistic (score, e2e) for ``m`` more robots using ``cands[start:]``.

        Robots ending by slot ``e`` need ``D`` PRBs each inside ``(L, e]``;
        these nested limits form a laminar matroid, so greedy by score is exact
        for the relaxation.
        """
        if m == 0:
            return 0, 0
        best_s: Dict[int, int] = {}
        min_e2e = None
        for c, e, s, d in cands[start:]:
            if e not in best_s or s > best_s[e]:
                best_s[e] = s
            if min_e2e is None or d < min_e2e:
                min_e2e = d
        if not best_s:
            return None, None
        D, R = self.inst.dl_need, self.R
        ends = sorted(best_s)
        dl_sorted = self.dl_slots
        limit = {}
        for e in ends:
            slots_in = sum(1 for j in dl_sorted if L < j <= e)
            limit[e] = (R * slots_in) // D - sum(1 for pe in placed_ends if pe <= e)
        taken = {e: 0 for e in ends}
        total, left = 0, m
        for e in sorted(ends, key=lambda x: (-best_s[x], x)):
            if left == 0:
                break
            room = min(limit[x] - sum(taken[y] for y in ends if y <= x) for x in ends if x >= e)
            t = min(left, max(0, room))
            taken[e] += t
            total += t * best_s[e]
            left -= t
        if left > 0:
            return None, None
        return total, m * min_e2e

    def search_downlink(self, F: int, L: int, ul_seq: List[Window]):
        cands = self.candidates(F, L)
        if not cands:
            return
        D, N = self.inst.dl_need, self.N
        wins = [(c, e) for c, e, _, _ in cands]

        def worse(score, e2e):
            b = self.best
            if b is None:
                return False
            if score != b.score:
                return score < b.score
            if e2e != b.e2e:
                return e2e > b.e2e
            # A tie from this (F, L) arrives later in lex order: not better.
            return b.FL == (F, L)

        seq: List[Window] = []
        ends: List[int] = []

        def dfs(start: int, score: int, e2e: int):
            self._tick()
            k = len(seq)
            if k == N:
                key = interleave(ul_seq, seq)
                b = self.best
                if b is None or (score, -e2e) > (b.score, -b.e2e) or (
                    (score, e2e) == (b.score, b.e2e) and key < b.key
                ):
                    self.best = _Best(score, e2e, key, (F, L), list(ul_seq), list(seq))
                return
            ub_s, lb_e = self._ends_bound(cands, start, ends, N - k, L)
            if ub_s is None or worse(score + ub_s, e2e + lb_e):
                return
            for idx in range(start, len(cands)):
                c, e, s, d = cands[idx]
                seq.append((c, e))
                ends.append(e)
                if feasible(seq, D, self.dl_slots, self.R, self.phi):
                    dfs(idx, score + s, e2e + d)
                seq.pop()
                ends.pop()

        dfs(0, 0, 0)

    def run(self):
        pairs = []
        for F in self.ul_slots:
            for L in self.ul_slots:
                if F > L:
                    continue
                cands = self.candidates(F, L)
                if not cands:
                    continue
                ub, lb = self._ends_bound(cands, 0, [], self.N, L)
                if ub is None:
                    continue
                pairs.append((ub, lb, F, L))
        pairs.sort(key=lambda p: (-p[0], p[1], p[2], p[3]))
        for ub, lb, F, L in pairs:
            b = self.best
            if b is not None and (ub < b.score or (ub == b.score and lb > b.e2e)):
                continue
            ul_seq = self.lexmin_uplink(F, L)
            if ul_seq is None:
                continue
            self.search_downlink(F, L, ul_seq)


def solve(instance: AllocationInstance, scheme, time_limit: Optional[float] = None) -> AllocationSolution:
    """Optimal allocation for ``scheme`` (name or number 1-4).

    Ties are broken by lower total end-to-end delay, then by the smallest
    robot-major tuple of window slot indices. With ``time_limit`` (seconds)
    the best allocation found so far is returned with ``optimal=False``.
    """
    scheme = scheme_name(scheme)
    instance.check_aggregate()
    deadline = None if time_limit is None else time.monotonic() + time_limit
    search = _Search(instance, scheme, deadline)
    optimal = True
    try:
        search.run()
    except _Timeout:
        optimal = False
    best = search.best
    if best is None:
        if not optimal:
            raise InfeasibleError("time limit reached before any allocation was found", "time-limit")
        if scheme == MIN_DELAY_STABLE:
            try:
                solve(instance, MIN_DELAY, time_limit)
            except InfeasibleError:
                pass
            else:
                raise SchemeInfeasibleError(
                    "no allocation gives every robot a positive QoC", "qoc-positive"
                )
        raise InfeasibleError(
            "no slot assignment satisfies capacity, edge gating and table coverage",
            "packing",
        )
    return build_solution(instance, scheme, best.ul, best.dl, optimal, search.nodes)
