"""AUC tradeoff sweeps and the discretized QoC table fed to the allocator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._parallel import ordered_map
from .consensus import LoopCondition, MonteCarloResult, SimConfig, monte_carlo_auc
from .errors import InvalidConfigError, SimulationError
from .network import DelayModel, TddFrame, loop_reliability
from .textio import csv_text, fmt

__all__ = [
    "SweepResult",
    "QocTable",
    "sweep_deterministic",
    "sweep_reliability",
    "sweep_stochastic",
    "table_pairs",
    "normalize_qoc",
    "build_qoc_table",
    "write_table",
    "read_table",
]

DETERMINISTIC = "deterministic-delay"
RELIABILITY = "reliability-only"
STOCHASTIC = "stochastic"

TABLE_FORMAT = "edgeqoc-qoc-table v1"


@dataclass
class SweepResult:
    sweep_kind: str
    axis: np.ndarray
    auc: np.ndarray
    stderr: np.ndarray
    n_runs: int = 1

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.auc = np.asarray(self.auc, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (len(self.axis) == len(self.auc) == len(self.stderr)):
            raise SimulationError("sweep vectors differ in length")


def _check_axis(values: Sequence[float], lo: float, hi: float, what: str, open_low=False):
    values = [float(v) for v in values]
    if not values:
        raise InvalidConfigError(f"{what} sweep is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidConfigError(f"{what} sweep values must be strictly increasing")
    if values[0] < lo or (open_low and values[0] <= lo) or values[-1] > hi * (1 + 1e-12):
        raise InvalidConfigError(f"{what} sweep values must lie in the allowed range [{lo}, {hi}]")
    return values


def _sweep(kind, config, axis, conditions, n_runs, draw=None) -> SweepResult:
    def one(cond: LoopCondition) -> MonteCarloResult:
        return monte_carlo_auc(config, cond, n_runs, draw=draw(cond) if draw else None)

    results = ordered_map(one, conditions)
    return SweepResult(
        kind,
        axis,
        [r.mean for r in results],
        [r.stderr for r in results],
        n_runs,
    )


def sweep_deterministic(config: SimConfig, delays: Sequence[float], n_runs: int) -> SweepResult:
    """AUC against loop delay when every packet arrives."""
    delays = _check_axis(delays, 0.0, config.period, "delay")
    conds = [LoopCondition(d, 1.0) for d in delays]
    return _sweep(DETERMINISTIC, config, delays, conds, n_runs)


def sweep_reliability(config: SimConfig, reliabilities: Sequence[float], n_runs: int) -> SweepResult:
    """AUC against loop success probability with zero delay."""
    probs = _check_axis(reliabilities, 0.0, 1.0, "reliability", open_low=True)
    conds = [LoopCondition(0.0, p) for p in probs]
    return _sweep(RELIABILITY, config, probs, conds, n_runs)


def _per_iteration_draw(model: DelayModel, budget: float):
    """Each period, sample a clipped backend delay; the loop succeeds if it fits."""
    radio = model.p_ul * model.p_dl

    def draw(rng, n_periods, n_robots):
        backend = np.clip(rng.normal(model.mean, model.std, (n_periods, n_robots)), model.lower, model.upper)
        return (backend <= budget) & (rng.random((n_periods, n_robots)) < radio)

    return draw


def sweep_stochastic(
    config: SimConfig,
    model: DelayModel,
    delays: Sequence[float],
    n_runs: int,
    mode: str = "fixed",
) -> SweepResult:
    """AUC when waiting ``d`` ms also buys loop reliability ``F(d) p_ul p_dl``.

    ``mode="fixed"`` (default) pins the success probability per sweep point and
    randomizes only the drop pattern. ``mode="per-iteration"`` instead samples
    a clipped backend delay for every robot and period.
    """
    delays = _check_axis(delays, 0.0, min(config.period, model.upper), "delay")
    if mode == "fixed":
        conds = [LoopCondition(d, loop_reliability(model, d)) for d in delays]
        return _sweep(STOCHASTIC, config, delays, conds, n_runs)
    if mode == "per-iteration":
        conds = [LoopCondition(d, loop_reliability(model, d)) for d in delays]
        return _sweep(
            STOCHASTIC, config, delays, conds, n_runs,
            draw=lambda c: _per_iteration_draw(model, c.e2e_delay),
        )
    raise InvalidConfigError(f"unknown stochastic sweep mode {mode!r}")


def table_pairs(frame: TddFrame, period: float, mode: str = "pair") -> List[Tuple[int, int]]:
    """Realizable ``(e2e, alloc)`` delays in slots, e2e-major order.

    Delays are whole slots, alloc >= 1 slot, alloc <= e2e, and e2e is bounded
    by both the frame length and the control period.
    """
    frame.validate()
    max_e2e = min(frame.n_slots, int(math.floor(period / frame.slot_duration + 1e-9)))
    if mode == "pair":
        pairs = [(e, a) for e in range(1, max_e2e + 1) for a in range(1, e + 1)]
    elif mode == "single":
        pairs = [(e, e - 1) for e in range(2, max_e2e + 1)]
    else:
        raise InvalidConfigError(f"unknown table mode {mode!r}")
    if not pairs:
        raise InvalidConfigError(f"no realizable delay pair for frame {frame.describe()}")
    return pairs


def normalize_qoc(auc: np.ndarray) -> Tuple[float, np.ndarray]:
    """Map AUC values to QoC in [0, 1]; unstable entries (AUC >= 1) get 0.

    The normalizer is the largest stable AUC, raised to 1.0 when any entry is
    unstable. NaN entries stay NaN.
    """
    auc = np.asarray(auc, dtype=float)
    finite = ~np.isnan(auc)
    stable = finite & (auc < 1.0)
    max_auc = float(auc[stable].max()) if stable.any() else 0.0
    if (finite & ~stable).any():
        max_auc = max(max_auc, 1.0)
    qoc = np.full(auc.shape, np.nan)
    qoc[finite] = 0.0
    if max_auc > 0:
        qoc[stable] = (max_auc - auc[stable]) / max_auc
    return max_auc, qoc


@dataclass
class QocTable:
    """QoC per realizable ``(e2e, alloc)`` pair, both stored in slots.

    Matrices are indexed ``[e2e index, alloc index]`` over the sorted slot
    axes; unrealizable cells hold NaN.
    """

    slot_duration: float
    e2e_slots: List[int]
    alloc_slots: List[int]
    auc: np.ndarray
    stderr: np.ndarray
    max_auc: float
    qoc: np.ndarray
    mode: str = "pair"
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def e2e_delays(self) -> np.ndarray:
        return np.asarray(self.e2e_slots, dtype=float) * self.slot_duration

    @property
    def alloc_delays(self) -> np.ndarray:
        return np.asarray(self.alloc_slots, dtype=float) * self.slot_duration

    def entries(self) -> List[Tuple[int, int]]:
        """Realizable pairs in storage order; position = delay-choice index."""
        return [
            (e, a)
            for li, e in enumerate(self.e2e_slots)
            for mi, a in enumerate(self.alloc_slots)
            if not math.isnan(self.auc[li, mi])
        ]

    def _cell(self, e2e: int, alloc: int):
        if self.mode == "single":
            alloc = e2e - 1
        try:
            li = self.e2e_slots.index(e2e)
            mi = self.alloc_slots.index(alloc)
        except ValueError:
            return None
        if math.isnan(self.auc[li, mi]):
            return None
        return li, mi

    def has(self, e2e: int, alloc: int) -> bool:
        return self._cell(e2e, alloc) is not None

    def qoc_at(self, e2e: int, alloc: int) -> float:
        cell = self._cell(e2e, alloc)
        if cell is None:
            raise KeyError(f"no table entry for e2e={e2e} alloc={alloc} slots")
        return float(self.qoc[cell])

    def auc_at(self, e2e: int, alloc: int) -> float:
        cell = self._cell(e2e, alloc)
        if cell is None:
            raise KeyError(f"no table entry for e2e={e2e} alloc={alloc} slots")
        return float(self.auc[cell])

    def choice_index(self, e2e: int, alloc: int) -> int:
        if self.mode == "single":
            alloc = e2e - 1
        return self.entries().index((e2e, alloc))

    @classmethod
    def from_entries(cls, slot_duration, rows, mode="pair", meta=None, qoc=None, max_auc=None):
        """Assemble from ``(e2e_slots, alloc_slots, auc, stderr)`` rows.

        QoC is derived from the AUC values unless given explicitly.
        """
        e2e_axis = sorted({r[0] for r in rows})
        alloc_axis = sorted({r[1] for r in rows})
        shape = (len(e2e_axis), len(alloc_axis))
        auc = np.full(shape, np.nan)
        err = np.full(shape, np.nan)
        for e, a, v, s in rows:
            auc[e2e_axis.index(e), alloc_axis.index(a)] = v
            err[e2e_axis.index(e), alloc_axis.index(a)] = s
        if qoc is None:
            max_auc, q = normalize_qoc(auc)
        else:
            q = np.full(shape, np.nan)
            for (e, a, *_), g in zip(rows, qoc):
                q[e2e_axis.index(e), alloc_axis.index(a)] = g
        return cls(slot_duration, e2e_axis, alloc_axis, auc, err, float(max_auc), q, mode, dict(meta or {}))


def build_qoc_table(
    config: SimConfig,
    model: DelayModel,
    frame: TddFrame,
    n_runs: int,
    mode: str = "pair",
) -> QocTable:
    """Simulate every realizable delay pair and normalize AUC into QoC.

    Control staleness follows the e2e delay; loop success follows the
    allocation delay through the backend CDF and both radio legs.
    """
    if int(n_runs) != n_runs or n_runs < 1:
        raise InvalidConfigError(f"n_runs must be a positive integer, got {n_runs}")
    pairs = table_pairs(frame, config.period, mode)
    dur = frame.slot_duration

    def cell(pair):
        e, a = pair
        cond = LoopCondition(e * dur, loop_reliability(model, a * dur))
        return monte_carlo_auc(config, cond, n_runs)

    results = ordered_map(cell, pairs)
    rows = [(e, a, r.mean, r.stderr) for (e, a), r in zip(pairs, results)]
    meta = {
        "frame": frame.describe(),
        "delay_model": (
            f"mean={fmt(model.mean)} std={fmt(model.std)} lower={fmt(model.lower)} "
            f"upper={fmt(model.upper)} p_ul={fmt(model.p_ul)} p_dl={fmt(model.p_dl)}"
        ),
        "sim": (
            f"n_robots={config.n_robots} gain={fmt(config.gain)} period={fmt(config.period)} "
            f"horizon={fmt(config.horizon)} step={fmt(config.step)}"
        ),
        "seed": str(config.seed),
        "n_runs": str(int(n_runs)),
    }
    return QocTable.from_entries(dur, rows, mode=mode, meta=meta)


def table_text(table: QocTable) -> str:
    lines = [f"# {TABLE_FORMAT}"]
    for key, value in table.meta.items():
        lines.append(f"# {key}: {value}")
    lines.append(f"# mode: {table.mode}")
    lines.append(f"# slot_duration_ms: {fmt(table.slot_duration)}")
    lines.append(f"# max_auc: {fmt(table.max_auc)}")
    rows = []
    for e, a in table.entries():
        li, mi = table.e2e_slots.index(e), table.alloc_slots.index(a)
        rows.append(
            (
                e * table.slot_duration,
                a * table.slot_duration,
                float(table.auc[li, mi]),
                float(table.stderr[li, mi]),
                float(table.qoc[li, mi]),
            )
        )
    body = csv_text(["e2e_ms", "alloc_ms", "auc", "stderr", "qoc"], rows)
    return "\n".join(lines) + "\n" + body


def write_table(path, table: QocTable) -> None:
    Path(path).write_text(table_text(table))


def read_table(path) -> QocTable:
    text = Path(path).read_text()
    header: Dict[str, str] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition(":")
            if sep:
                header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    if not text.startswith(f"# {TABLE_FORMAT}"):
        raise InvalidConfigError(f"{path} is not a QoC table file")
    dur = float(header.pop("slot_duration_ms"))
    mode = header.pop("mode", "pair")
    max_auc = float(header.pop("max_auc"))
    rows, qoc = [], []
    for line in body[1:]:
        e_ms, a_ms, auc, err, q = (float(v) for v in line.split(","))
        rows.append((int(round(e_ms / dur)), int(round(a_ms / dur)), auc, err))
        qoc.append(q)
    return QocTable.from_entries(dur, rows, mode=mode, meta=header, qoc=qoc, max_auc=max_auc)
