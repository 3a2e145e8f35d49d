"""Exhaustive reference allocator used to check ``solve``.

Every robot independently takes any uplink window and any downlink window of
the frame; a combination counts if some integer PRB assignment realizes it,
which is decided by enumerating the assignments themselves.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import InfeasibleError, SchemeInfeasibleError, SearchSpaceTooLargeError
from .model import MAX_DELAY, MAX_QOC, MIN_DELAY_STABLE, AllocationInstance, scheme_name
from .solver import build_solution, interleave

MAX_CANDIDATES = 10**7

Window = Tuple[int, int]


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _placements(window: Window, need: int, slots: Sequence[int]):
    """All PRB vectors over ``slots`` using exactly the window's end slots."""
    a, b = window
    inside = [j for j in slots if a <= j <= b]
    if a not in inside or b not in inside:
        return []
    out = []
    for comp in _compositions(need, len(inside)):
        alloc = dict(zip(inside, comp))
        if alloc[a] >= 1 and alloc[b] >= 1:
            out.append(alloc)
    return out


class _PackingOracle:
    def __init__(self, slots, need, capacity):
        self.slots = list(slots)
        self.need = need
        self.capacity = capacity
        self._memo: Dict[Tuple[Window, ...], bool] = {}
        self._place: Dict[Window, list] = {}

    def placements(self, w):
        if w not in self._place:
            self._place[w] = _placements(w, self.need, self.slots)
        return self._place[w]

    def __call__(self, windows: Sequence[Window]) -> bool:
        key = tuple(sorted(windows))
        if key not in self._memo:
            self._memo[key] = self._search(key, 0, {j: self.capacity for j in self.slots})
        return self._memo[key]

    def _search(self, windows, i, cap) -> bool:
        if i == len(windows):
            return True
        for alloc in self.placements(windows[i]):
            if all(cap[j] >= v for j, v in alloc.items()):
                for j, v in alloc.items():
                    cap[j] -= v
                ok = self._search(windows, i + 1, cap)
                for j, v in alloc.items():
                    cap[j] += v
                if ok:
                    return True
        return False


def _all_windows(slots: Sequence[int]) -> List[Window]:
    return [(a, b) for a in slots for b in slots if a <= b]


def search_space(instance: AllocationInstance) -> int:
    frame = instance.frame
    per_robot = len(_all_windows(frame.uplink_slots)) * len(_all_windows(frame.downlink_slots))
    return per_robot**instance.n_robots


def brute_force(instance: AllocationInstance, scheme, max_candidates: int = MAX_CANDIDATES):
    """Optimal allocation by full enumeration, with the same tie-breaking as ``solve``."""
    scheme = scheme_name(scheme)
    space = search_space(instance)
    if space > max_candidates:
        raise SearchSpaceTooLargeError(
            f"{space} window assignments exceed the guard of {max_candidates}"
        )
    instance.check_aggregate()
    frame = instance.frame
    table = instance.qoc_table
    ul_ok = _PackingOracle(frame.uplink_slots, instance.ul_need, instance.capacity)
    dl_ok = _PackingOracle(frame.downlink_slots, instance.dl_need, instance.capacity)
    per_robot = list(
        itertools.product(_all_windows(frame.uplink_slots), _all_windows(frame.downlink_slots))
    )
    best = None
    best_any_stable_blocked = False
    for combo in itertools.product(per_robot, repeat=instance.n_robots):
        ul = [u for u, _ in combo]
        dl = [d for _, d in combo]
        F = min(a for a, _ in ul)
        L = max(b for _, b in ul)
        if any(c <= L for c, _ in dl):
            continue
        pairs = [(e - F, c - L) for c, e in dl]
        if not all(table.has(e, a) for e, a in pairs):
            continue
        if not (ul_ok(ul) and dl_ok(dl)):
            continue
        qoc = [Fraction(table.qoc_at(e, a)) for e, a in pairs]
        if scheme == MIN_DELAY_STABLE and not all(q > 0 for q in qoc):
            best_any_stable_blocked = True
            continue
        total_e2e = sum(e for e, _ in pairs)
        if scheme == MAX_QOC:
            score = sum(qoc)
        elif scheme == MAX_DELAY:
            score = total_e2e
        else:
            score = -total_e2e
        key = (-score, total_e2e, interleave(ul, dl))
        if best is None or key < best[0]:
            best = (key, ul, dl)
    if best is None:
        if scheme == MIN_DELAY_STABLE and best_any_stable_blocked:
            raise SchemeInfeasibleError("no allocation gives every robot a positive QoC", "qoc-positive")
        raise InfeasibleError("no slot assignment satisfies all constraints", "packing")
    return build_solution(instance, scheme, best[1], best[2])
