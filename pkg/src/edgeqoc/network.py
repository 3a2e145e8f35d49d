"""Radio and backend model: delay distribution, loop reliability, TDD frames, PRBs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

from .errors import InvalidConfigError

__all__ = [
    "DelayModel",
    "TddFrame",
    "Slot",
    "LinkBudget",
    "PrbRequirement",
    "backend_cdf",
    "clipped_cdf",
    "loop_reliability",
    "sample_backend_delay",
    "expand_tdd",
    "load_mcs_table",
    "bits_per_prb_slot",
    "prb_requirement",
    "PrbCapacityError",
]

UPLINK = "U"
DOWNLINK = "D"

SUBCARRIERS_PER_PRB = 12
SYMBOLS_PER_SLOT = 14


@dataclass(frozen=True)
class DelayModel:
    """Gaussian backend delay restricted to ``[lower, upper]`` ms.

    ``p_ul`` and ``p_dl`` are per-direction packet *success* probabilities.
    """

    mean: float = 0.5
    std: float = 1.0
    lower: float = 0.0
    upper: float = 10.0
    p_ul: float = 0.99
    p_dl: float = 0.99

    def __post_init__(self):
        if not self.std > 0:
            raise InvalidConfigError(f"std must be > 0, got {self.std}")
        if not (self.lower == 0 and self.upper > self.lower):
            raise InvalidConfigError(
                f"need lower == 0 < upper, got lower={self.lower} upper={self.upper}"
            )
        for name in ("p_ul", "p_dl"):
            p = getattr(self, name)
            if not (0.0 < p <= 1.0):
                raise InvalidConfigError(f"{name} must lie in (0, 1], got {p}")
        if not math.isfinite(self.mean):
            raise InvalidConfigError("mean must be finite")


def _z(model: DelayModel, d: float) -> float:
    return (d - model.mean) / model.std


def backend_cdf(model: DelayModel, d: float) -> float:
    """CDF of the truncated, renormalized Gaussian backend delay."""
    if d <= model.lower:
        return 0.0
    if d >= model.upper:
        return 1.0
    # scipy's truncated normal stays accurate when [lower, upper] sits deep
    # in a tail, where a plain ratio of normal CDFs degenerates to 0/0.
    a, b = _z(model, model.lower), _z(model, model.upper)
    value = truncnorm.cdf(d, a, b, loc=model.mean, scale=model.std)
    return float(min(1.0, max(0.0, value)))


def clipped_cdf(model: DelayModel, d: float) -> float:
    """CDF of ``clip(Normal(mean, std), lower, upper)``: atoms at both ends."""
    if d < model.lower:
        return 0.0
    if d >= model.upper:
        return 1.0
    return float(ndtr(_z(model, d)))


def loop_reliability(model: DelayModel, d_alloc: float) -> float:
    """Probability that a loop with allocation delay ``d_alloc`` ms succeeds."""
    if d_alloc < 0 or d_alloc > model.upper:
        raise InvalidConfigError(
            f"d_alloc must lie in [0, {model.upper}] ms, got {d_alloc}"
        )
    return backend_cdf(model, d_alloc) * model.p_ul * model.p_dl


def sample_backend_delay(model: DelayModel, rng: np.random.Generator, size=None):
    """Draw ``Normal(mean, std)`` and clip into ``[lower, upper]``."""
    draw = rng.normal(model.mean, model.std, size=size)
    out = np.clip(draw, model.lower, model.upper)
    return float(out) if size is None else out


class Slot(NamedTuple):
    index: int  # 1-based
    kind: str  # "U" or "D"
    start: float  # ms


@dataclass(frozen=True)
class TddFrame:
    """A TDD slot pattern repeated ``repetitions`` times.

    ``capacity`` is the number of PRBs available in each slot.
    """

    pattern: str = "UDUUD"
    repetitions: int = 4
    numerology: int = 1
    capacity: int = 133

    def __post_init__(self):
        pattern = self.pattern.upper() if isinstance(self.pattern, str) else "".join(self.pattern)
        object.__setattr__(self, "pattern", pattern)
        if not pattern:
            raise InvalidConfigError("TDD pattern is empty")
        bad = set(pattern) - {UPLINK, DOWNLINK}
        if bad:
            raise InvalidConfigError(f"TDD pattern has unknown slot kinds {sorted(bad)}")
        if self.repetitions < 1:
            raise InvalidConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.numerology < 0:
            raise InvalidConfigError(f"numerology must be >= 0, got {self.numerology}")
        if self.capacity < 1:
            raise InvalidConfigError(f"capacity must be >= 1 PRB, got {self.capacity}")

    def validate(self) -> "TddFrame":
        """Raise unless the frame has at least one uplink and one downlink slot."""
        if UPLINK not in self.pattern:
            raise InvalidConfigError(f"TDD pattern {self.pattern!r} has no uplink slot")
        if DOWNLINK not in self.pattern:
            raise InvalidConfigError(f"TDD pattern {self.pattern!r} has no downlink slot")
        return self

    @property
    def slot_duration(self) -> float:
        return 1.0 / 2**self.numerology

    @property
    def n_slots(self) -> int:
        return len(self.pattern) * self.repetitions

    @property
    def kinds(self) -> str:
        return self.pattern * self.repetitions

    @property
    def uplink_slots(self) -> List[int]:
        return [j for j, k in enumerate(self.kinds, start=1) if k == UPLINK]

    @property
    def downlink_slots(self) -> List[int]:
        return [j for j, k in enumerate(self.kinds, start=1) if k == DOWNLINK]

    def describe(self) -> str:
        return (
            f"{self.pattern}x{self.repetitions} mu={self.numerology} "
            f"slot={self.slot_duration}ms R={self.capacity}"
        )


def expand_tdd(frame: TddFrame) -> List[Slot]:
    dur = frame.slot_duration
    return [Slot(j, kind, (j - 1) * dur) for j, kind in enumerate(frame.kinds, start=1)]


@lru_cache(maxsize=None)
def _mcs_rows(name: str) -> Tuple[Tuple[int, int, int], ...]:
    text = resources.files("edgeqoc.data").joinpath(name).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return tuple(
        (int(r["index"]), int(r["modulation_order"]), int(r["code_rate_x1024"]))
        for r in csv.DictReader(lines)
    )


def load_mcs_table(name: str = "mcs_table_64qam.csv") -> Dict[int, Tuple[int, float]]:
    """MCS index -> (modulation order, code rate) from a bundled table file."""
    return {idx: (qm, rate / 1024.0) for idx, qm, rate in _mcs_rows(name)}


@dataclass(frozen=True)
class LinkBudget:
    packet_bits: float
    modulation_order: int
    code_rate: float
    overhead: float
    mcs_index: Optional[int] = None
    periodicity: float = 10.0
    n_layers: int = 1
    scaling: float = 1.0
    n_carriers: int = 1
    max_prbs: int = 133

    def __post_init__(self):
        if not self.packet_bits > 0:
            raise InvalidConfigError(f"packet_bits must be > 0, got {self.packet_bits}")
        if not (0 < self.code_rate < 1):
            raise InvalidConfigError(f"code_rate must lie in (0, 1), got {self.code_rate}")
        if not (0 <= self.overhead < 1):
            raise InvalidConfigError(f"overhead must lie in [0, 1), got {self.overhead}")
        if self.modulation_order < 1 or self.n_layers < 1 or self.n_carriers < 1:
            raise InvalidConfigError("modulation_order, n_layers and n_carriers must be >= 1")
        if not self.scaling > 0:
            raise InvalidConfigError(f"scaling must be > 0, got {self.scaling}")
        if self.max_prbs < 1:
            raise InvalidConfigError(f"max_prbs must be >= 1, got {self.max_prbs}")

    @classmethod
    def from_mcs(cls, packet_bits: float, mcs_index: int, overhead: float, **kwargs) -> "LinkBudget":
        table = load_mcs_table()
        if mcs_index not in table:
            raise InvalidConfigError(f"MCS index {mcs_index} not in the bundled table")
        qm, rate = table[mcs_index]
        return cls(
            packet_bits=packet_bits,
            modulation_order=qm,
            code_rate=rate,
            overhead=overhead,
            mcs_index=mcs_index,
            **kwargs,
        )


class PrbCapacityError(InvalidConfigError):
    pass


class PrbRequirement(NamedTuple):
    prbs: int
    bits_per_prb_slot: float


def bits_per_prb_slot(budget: LinkBudget) -> float:
    return (
        SUBCARRIERS_PER_PRB
        * SYMBOLS_PER_SLOT
        * budget.modulation_order
        * budget.code_rate
        * budget.n_layers
        * budget.scaling
        * (1.0 - budget.overhead)
    )


def prb_requirement(budget: LinkBudget, frame: Optional[TddFrame] = None) -> PrbRequirement:
    """PRBs needed to carry one packet inside a single slot.

    Raises ``PrbCapacityError`` when the packet needs more than ``max_prbs``
    (or, with a frame, more than the frame's per-slot capacity).
    """
    per_prb = bits_per_prb_slot(budget)
    ratio = budget.packet_bits / per_prb
    prbs = max(1, math.ceil(ratio - 1e-9))
    limit = budget.max_prbs if frame is None else min(budget.max_prbs, frame.capacity)
    if prbs > limit:
        raise PrbCapacityError(
            f"packet of {budget.packet_bits} bits needs {prbs} PRBs, above the {limit} PRBs of one slot"
        )
    return PrbRequirement(prbs, per_prb)
