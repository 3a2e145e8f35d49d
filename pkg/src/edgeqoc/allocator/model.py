from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import InfeasibleError, InvalidConfigError
from ..network import TddFrame
from ..qoc import QocTable

MAX_QOC = "max-qoc"
MIN_DELAY = "min-delay"
MAX_DELAY = "max-delay"
MIN_DELAY_STABLE = "min-delay-stable"

SCHEMES = (MAX_QOC, MIN_DELAY, MAX_DELAY, MIN_DELAY_STABLE)

SCHEME_NUMBER = {MAX_QOC: 1, MIN_DELAY: 2, MAX_DELAY: 3, MIN_DELAY_STABLE: 4}

# Labels used in reports. Scheme 3 keeps its historical name even though it
# maximizes total end-to-end delay.
SCHEME_LABEL = {
    MAX_QOC: "Maximize QoC",
    MIN_DELAY: "Minimize delay",
    MAX_DELAY: "Maximize reliability",
    MIN_DELAY_STABLE: "Minimize delay (QoC > 0)",
}


def scheme_name(scheme) -> str:
    """Accept a scheme name or its number 1-4."""
    if isinstance(scheme, int) or (isinstance(scheme, str) and scheme.isdigit()):
        n = int(scheme)
        for name, num in SCHEME_NUMBER.items():
            if num == n:
                return name
    elif scheme in SCHEMES:
        return scheme
    raise InvalidConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES} or 1-4")


@dataclass(frozen=True)
class AllocationInstance:
    frame: TddFrame
    n_robots: int
    ul_need: int
    dl_need: int
    qoc_table: QocTable
    big_m: Optional[int] = None

    def __post_init__(self):
        self.frame.validate()
        if self.n_robots < 1:
            raise InvalidConfigError(f"n_robots must be >= 1, got {self.n_robots}")
        if self.ul_need < 1 or self.dl_need < 1:
            raise InvalidConfigError("ul_need and dl_need must be >= 1 PRB")
        if self.big_m is None:
            object.__setattr__(self, "big_m", self.frame.n_slots + 1)
        if self.big_m < self.frame.n_slots + 1:
            raise InvalidConfigError(f"big_m must be >= phi + 1 = {self.frame.n_slots + 1}")
        if abs(self.qoc_table.slot_duration - self.frame.slot_duration) > 1e-12:
            raise InvalidConfigError("QoC table slot duration differs from the frame's")

    @property
    def n_slots(self) -> int:
        return self.frame.n_slots

    @property
    def capacity(self) -> int:
        return self.frame.capacity

    def check_aggregate(self) -> None:
        """Raise ``InfeasibleError`` if total demand exceeds a direction's capacity."""
        ul_cap = self.capacity * len(self.frame.uplink_slots)
        dl_cap = self.capacity * len(self.frame.downlink_slots)
        if self.n_robots * self.ul_need > ul_cap:
            raise InfeasibleError(
                f"uplink demand {self.n_robots}x{self.ul_need} PRBs exceeds frame capacity {ul_cap}",
                "aggregate-uplink",
            )
        if self.n_robots * self.dl_need > dl_cap:
            raise InfeasibleError(
                f"downlink demand {self.n_robots}x{self.dl_need} PRBs exceeds frame capacity {dl_cap}",
                "aggregate-downlink",
            )


@dataclass
class AllocationSolution:
    """A slot/PRB assignment. Slot indices are 1-based; delays are in ms.

    ``ul_alloc[i, j - 1]`` holds the uplink PRBs of robot ``i`` in slot ``j``.
    """

    scheme: str
    ul_alloc: np.ndarray
    dl_alloc: np.ndarray
    ul_sched: np.ndarray
    dl_sched: np.ndarray
    first_ul: List[int]
    last_ul: List[int]
    first_dl: List[int]
    last_dl: List[int]
    e2e_delay: List[float]
    alloc_delay: List[float]
    delay_choice: List[int]
    qoc: List[float]
    objective_value: float
    optimal: bool = True
    nodes: int = 0

    @property
    def n_robots(self) -> int:
        return len(self.first_ul)

    @property
    def total_qoc(self) -> float:
        import math

        return math.fsum(self.qoc)

    @property
    def total_e2e(self) -> float:
        import math

        return math.fsum(self.e2e_delay)

    def windows(self):
        return [
            (self.first_ul[i], self.last_ul[i], self.first_dl[i], self.last_dl[i])
            for i in range(self.n_robots)
        ]

    def to_dict(self) -> Dict:
        return {
            "scheme": self.scheme,
            "objective_value": self.objective_value,
            "optimal": self.optimal,
            "first_ul": list(self.first_ul),
            "last_ul": list(self.last_ul),
            "first_dl": list(self.first_dl),
            "last_dl": list(self.last_dl),
            "e2e_delay_ms": list(self.e2e_delay),
            "alloc_delay_ms": list(self.alloc_delay),
            "delay_choice": list(self.delay_choice),
            "qoc": list(self.qoc),
            "ul_alloc": self.ul_alloc.tolist(),
            "dl_alloc": self.dl_alloc.tolist(),
            "ul_sched": self.ul_sched.tolist(),
            "dl_sched": self.dl_sched.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "AllocationSolution":
        return cls(
            scheme=data["scheme"],
            ul_alloc=np.asarray(data["ul_alloc"], dtype=int),
            dl_alloc=np.asarray(data["dl_alloc"], dtype=int),
            ul_sched=np.asarray(data["ul_sched"], dtype=int),
            dl_sched=np.asarray(data["dl_sched"], dtype=int),
            first_ul=list(data["first_ul"]),
            last_ul=list(data["last_ul"]),
            first_dl=list(data["first_dl"]),
            last_dl=list(data["last_dl"]),
            e2e_delay=list(data["e2e_delay_ms"]),
            alloc_delay=list(data["alloc_delay_ms"]),
            delay_choice=list(data["delay_choice"]),
            qoc=list(data["qoc"]),
            objective_value=data["objective_value"],
            optimal=data.get("optimal", True),
        )
