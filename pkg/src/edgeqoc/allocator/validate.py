"""Constraint checker for allocations, independent of how they were found."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .model import MAX_QOC, MIN_DELAY_STABLE, AllocationInstance, AllocationSolution

# Constraint tags follow the numbering of the allocation model.
CAPACITY = "13-capacity"
TOTALS = "14-totals"
LINK = "15-16-link"
FIRST_LAST = "17-18-first/last"
CHOICE = "19-delay-choice"
BRACKET = "20-21-delay"
QOC_MAP = "22-qoc"
SLOT_KIND = "slot-kind"
GATING = "edge-gating"
SHAPE = "shape"
OBJECTIVE = "objective"
SCHEME = "scheme"


@dataclass(frozen=True)
class Violation:
    constraint: str
    message: str
    robot: Optional[int] = None
    slot: Optional[int] = None

    def __str__(self):
        where = []
        if self.robot is not None:
            where.append(f"robot {self.robot}")
        if self.slot is not None:
            where.append(f"slot {self.slot}")
        loc = f" ({', '.join(where)})" if where else ""
        return f"[{self.constraint}]{loc} {self.message}"


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


def validate(solution: AllocationSolution, instance: AllocationInstance) -> List[Violation]:
    """Return every violated constraint; an empty list means the allocation is valid.

    Robot and slot numbers in violations are 1-based.
    """
    out: List[Violation] = []
    N, phi, R = instance.n_robots, instance.n_slots, instance.capacity
    U, D = instance.ul_need, instance.dl_need
    X = np.asarray(solution.ul_alloc)
    Y = np.asarray(solution.dl_alloc)
    ZU = np.asarray(solution.ul_sched)
    ZD = np.asarray(solution.dl_sched)
    for name, arr in (("ul_alloc", X), ("dl_alloc", Y), ("ul_sched", ZU), ("dl_sched", ZD)):
        if arr.shape != (N, phi):
            out.append(Violation(SHAPE, f"{name} has shape {arr.shape}, expected {(N, phi)}"))
    per_robot = (
        solution.first_ul, solution.last_ul, solution.first_dl, solution.last_dl,
        solution.e2e_delay, solution.alloc_delay, solution.delay_choice, solution.qoc,
    )
    if any(len(v) != N for v in per_robot):
        out.append(Violation(SHAPE, f"per-robot fields must have {N} entries"))
    if out:
        return out

    kinds = instance.frame.kinds
    for j in range(1, phi + 1):
        col_x, col_y = X[:, j - 1], Y[:, j - 1]
        if (col_x < 0).any() or (col_y < 0).any():
            out.append(Violation(CAPACITY, "negative allocation", slot=j))
        if kinds[j - 1] == "U":
            if col_y.any():
                out.append(Violation(SLOT_KIND, "downlink PRBs in an uplink slot", slot=j))
            if col_x.sum() > R:
                out.append(Violation(CAPACITY, f"uplink load {int(col_x.sum())} exceeds R={R}", slot=j))
        else:
            if col_x.any():
                out.append(Violation(SLOT_KIND, "uplink PRBs in a downlink slot", slot=j))
            if col_y.sum() > R:
                out.append(Violation(CAPACITY, f"downlink load {int(col_y.sum())} exceeds R={R}", slot=j))

    for i in range(N):
        r = i + 1
        if X[i].sum() != U:
            out.append(Violation(TOTALS, f"uplink total {int(X[i].sum())} != U={U}", robot=r))
        if Y[i].sum() != D:
            out.append(Violation(TOTALS, f"downlink total {int(Y[i].sum())} != D={D}", robot=r))
        for j in range(1, phi + 1):
            if int(ZU[i, j - 1]) != int(X[i, j - 1] > 0):
                out.append(Violation(LINK, "uplink indicator disagrees with allocation", r, j))
            if int(ZD[i, j - 1]) != int(Y[i, j - 1] > 0):
                out.append(Violation(LINK, "downlink indicator disagrees with allocation", r, j))
        ul_used = np.flatnonzero(X[i] > 0) + 1
        dl_used = np.flatnonzero(Y[i] > 0) + 1
        for label, used, first, last in (
            ("uplink", ul_used, solution.first_ul[i], solution.last_ul[i]),
            ("downlink", dl_used, solution.first_dl[i], solution.last_dl[i]),
        ):
            if len(used) == 0:
                continue
            if first != used.min():
                out.append(Violation(FIRST_LAST, f"first {label} slot is {first}, scheduled from {used.min()}", r))
            if last != used.max():
                out.append(Violation(FIRST_LAST, f"last {label} slot is {last}, scheduled until {used.max()}", r))

    if out:
        return out

    F = min(solution.first_ul)
    L = max(solution.last_ul)
    dur = instance.frame.slot_duration
    table = instance.qoc_table
    for i in range(N):
        r = i + 1
        if solution.first_dl[i] <= L:
            out.append(Violation(GATING, f"first downlink slot {solution.first_dl[i]} not after last uplink {L}", r))
        e2e = solution.last_dl[i] - F
        alloc = solution.first_dl[i] - L
        if not _close(solution.e2e_delay[i], e2e * dur):
            out.append(Violation(BRACKET, f"e2e delay {solution.e2e_delay[i]} ms, expected {e2e * dur}", r))
        if not _close(solution.alloc_delay[i], alloc * dur):
            out.append(Violation(BRACKET, f"allocation delay {solution.alloc_delay[i]} ms, expected {alloc * dur}", r))
        if not table.has(e2e, alloc):
            out.append(Violation(CHOICE, f"no table entry for e2e={e2e} alloc={alloc} slots", r))
            continue
        expected_choice = table.choice_index(e2e, alloc)
        if solution.delay_choice[i] != expected_choice:
            out.append(Violation(CHOICE, f"delay index {solution.delay_choice[i]}, expected {expected_choice}", r))
        q = table.qoc_at(e2e, alloc)
        if solution.qoc[i] != q:
            out.append(Violation(QOC_MAP, f"QoC {solution.qoc[i]}, table gives {q}", r))
        if solution.scheme == MIN_DELAY_STABLE and not q > 0:
            out.append(Violation(SCHEME, "scheme requires positive QoC", r))

    expected = math.fsum(solution.qoc) if solution.scheme == MAX_QOC else math.fsum(solution.e2e_delay)
    if solution.objective_value != expected:
        out.append(Violation(OBJECTIVE, f"objective {solution.objective_value}, fields give {expected}"))
    return out
