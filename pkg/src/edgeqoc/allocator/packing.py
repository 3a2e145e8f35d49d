"""Exact feasibility of per-robot slot windows under per-slot PRB capacity.

A window ``(first, last)`` requires at least one PRB in both end slots and
places the rest anywhere on same-kind slots in between. Reserving the forced
end PRBs and then filling slots left to right, earliest window end first,
finds a packing whenever one exists.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

Window = Tuple[int, int]


def pack(
    windows: Sequence[Window],
    need: int,
    slots: Sequence[int],
    capacity: int,
    n_slots: int,
) -> Optional[np.ndarray]:
    """Return an ``(len(windows), n_slots)`` PRB matrix, or None if infeasible.

    ``slots`` are the 1-based slot indices of the direction being packed.
    """
    slot_set = set(slots)
    cap: Dict[int, int] = {j: capacity for j in slots}
    alloc = np.zeros((len(windows), n_slots), dtype=int)
    remaining: List[int] = []
    for i, (a, b) in enumerate(windows):
        if a not in slot_set or b not in slot_set or a > b:
            return None
        if a == b:
            cap[a] -= need
            alloc[i, a - 1] = need
            remaining.append(0)
        else:
            if need < 2:
                return None
            cap[a] -= 1
            cap[b] -= 1
            alloc[i, a - 1] += 1
            alloc[i, b - 1] += 1
            remaining.append(need - 2)
    if any(c < 0 for c in cap.values()):
        return None
    order = sorted(range(len(windows)), key=lambda i: (windows[i][1], i))
    for j in sorted(slot_set):
        free = cap[j]
        for i in order:
            if free == 0:
                break
            a, b = windows[i]
            if remaining[i] and a <= j <= b:
                take = min(free, remaining[i])
                alloc[i, j - 1] += take
                remaining[i] -= take
                free -= take
        for i in order:
            if remaining[i] and windows[i][1] == j:
                return None
    return alloc


def feasible(windows, need, slots, capacity, n_slots) -> bool:
    return pack(windows, need, slots, capacity, n_slots) is not None
