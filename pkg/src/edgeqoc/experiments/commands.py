"""Experiment commands. Each writes its artifacts under the configured output directory."""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy

from .. import __version__
from ..allocator import (
    SCHEME_LABEL,
    SCHEME_NUMBER,
    AllocationInstance,
    export_milp,
    solution_json,
    solve,
    validate,
)
from ..errors import InfeasibleError, InvalidConfigError, SimulationError
from ..network import DelayModel, PrbRequirement, TddFrame, prb_requirement
from ..qoc import (
    TABLE_FORMAT,
    QocTable,
    build_qoc_table,
    read_table,
    sweep_deterministic,
    sweep_reliability,
    sweep_stochastic,
    table_text,
)
from ..textio import csv_text, fmt
from .config import ExperimentConfig

SOLVER_VERSION = "edgeqoc-bnb 1"


class Outcome:
    """Files written by a command and the exit status it asks for."""

    def __init__(self):
        self.paths: List[Path] = []
        self.status = 0
        self.messages: List[str] = []


def _round(value):
    """JSON numbers with the same 12 significant digits as the CSV files."""
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return None
        return float(fmt(value))
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    return value


def _metadata(cfg: ExperimentConfig, command: str, extra: Optional[Dict] = None) -> Dict:
    meta = {
        "command": command,
        "seed": cfg.seed,
        "n_runs": cfg.n_runs,
        "profile": cfg.profile,
        "config_sha256": cfg.digest,
        "versions": {
            "edgeqoc": __version__,
            "qoc_table": TABLE_FORMAT,
            "solver": SOLVER_VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        meta.update(extra)
    return meta


class _Writer:
    def __init__(self, cfg: ExperimentConfig, command: str, outcome: Outcome):
        self.cfg = cfg
        self.command = command
        self.outcome = outcome
        self.root = Path(cfg.output_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def _put(self, name: str, text: str) -> Path:
        path = self.root / name
        path.write_text(text)
        self.outcome.paths.append(path)
        return path

    def sidecar(self, name: str, extra: Optional[Dict] = None) -> None:
        meta = _metadata(self.cfg, self.command, extra)
        self._put(f"{name}.meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    def csv(self, name: str, header: Sequence[str], rows, extra: Optional[Dict] = None) -> None:
        self._put(name, csv_text(header, rows))
        self.sidecar(name, extra)

    def json(self, name: str, data: Dict, sidecar: bool = True) -> None:
        self._put(name, json.dumps(_round(data), indent=2, sort_keys=True) + "\n")
        if sidecar:
            self.sidecar(name)

    def text(self, name: str, body: str, extra: Optional[Dict] = None) -> None:
        self._put(name, body)
        self.sidecar(name, extra)


def _std_tag(std: float) -> str:
    return fmt(float(std)).replace(".", "p")


# -- PRB --------------------------------------------------------------------


def prb_needs(cfg: ExperimentConfig) -> Tuple[int, int]:
    if cfg.link.ul_prbs is not None:
        return cfg.link.ul_prbs, cfg.link.dl_prbs
    ul = prb_requirement(cfg.link.uplink, cfg.frame)
    dl = prb_requirement(cfg.link.downlink, cfg.frame)
    return ul.prbs, dl.prbs


def _prb_entry(req: PrbRequirement, budget, capacity: int) -> Dict:
    return {
        "prbs": req.prbs,
        "bits_per_prb_slot": req.bits_per_prb_slot,
        "robots_per_slot": capacity // req.prbs,
        "packet_bits": budget.packet_bits,
        "mcs_index": budget.mcs_index,
        "modulation_order": budget.modulation_order,
        "code_rate": budget.code_rate,
        "overhead": budget.overhead,
    }


def cmd_prb(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "prb", out)
    R = cfg.frame.capacity
    ul = prb_requirement(cfg.link.uplink, cfg.frame)
    dl = prb_requirement(cfg.link.downlink, cfg.frame)
    report = {
        "capacity_prbs_per_slot": R,
        "uplink": _prb_entry(ul, cfg.link.uplink, R),
        "downlink": _prb_entry(dl, cfg.link.downlink, R),
    }
    if cfg.link.ul_prbs is not None:
        report["override"] = {"ul_prbs": cfg.link.ul_prbs, "dl_prbs": cfg.link.dl_prbs}
    w.json("prb.json", report)
    out.messages.append(f"U={ul.prbs} D={dl.prbs} PRBs per robot")
    return out


# -- tradeoff ---------------------------------------------------------------


def cmd_tradeoff(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "tradeoff", out)
    top = min(cfg.sim.period, cfg.delay_model.upper)
    sto_axis = [d for d in cfg.delays if d <= top]
    sweeps = (
        ("tradeoff_deterministic.csv", sweep_deterministic(cfg.sim, cfg.delays, cfg.n_runs)),
        ("tradeoff_reliability.csv", sweep_reliability(cfg.sim, cfg.reliabilities, cfg.n_runs)),
        (
            "tradeoff_stochastic.csv",
            sweep_stochastic(cfg.sim, cfg.delay_model, sto_axis, cfg.n_runs, cfg.stochastic_mode),
        ),
    )
    header = ["axis_value", "auc_mean", "auc_stderr", "n_runs", "seed"]
    for name, res in sweeps:
        if not np.all(np.isfinite(res.auc)):
            raise SimulationError(f"{res.sweep_kind} sweep produced non-finite AUC values")
        rows = [
            (float(x), float(a), float(s), res.n_runs, cfg.seed)
            for x, a, s in zip(res.axis, res.auc, res.stderr)
        ]
        w.csv(name, header, rows, {"sweep": res.sweep_kind})
    return out


# -- tables and solving -----------------------------------------------------


class _Tables:
    """Builds each distinct QoC table once per command.

    The realizable delay pairs depend on the frame only through its length and
    slot duration, so frames with the same size share one table.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._cache: Dict[Tuple, QocTable] = {}

    def get(self, frame: TddFrame, model: DelayModel) -> QocTable:
        key = (frame.n_slots, frame.slot_duration, model)
        if key not in self._cache:
            self._cache[key] = build_qoc_table(
                self.cfg.sim, model, frame, self.cfg.n_runs, self.cfg.table_mode
            )
        return self._cache[key]


def _scheme_row(table: QocTable, sol) -> Dict:
    n = sol.n_robots
    aucs = [
        table.auc_at(round(e / table.slot_duration), round(a / table.slot_duration))
        for e, a in zip(sol.e2e_delay, sol.alloc_delay)
    ]
    return {
        "scheme": sol.scheme,
        "scheme_number": SCHEME_NUMBER[sol.scheme],
        "label": SCHEME_LABEL[sol.scheme],
        "mean_qoc": sol.total_qoc / n,
        "total_qoc": sol.total_qoc,
        "mean_e2e_ms": sol.total_e2e / n,
        "mean_alloc_ms": math.fsum(sol.alloc_delay) / n,
        "mean_auc": math.fsum(aucs) / n,
        "objective_value": sol.objective_value,
        "optimal": sol.optimal,
    }


def _solve_all(cfg, frame, table, schemes, timings) -> Tuple[List[Dict], List[Dict]]:
    U, D = prb_needs(cfg)
    inst = AllocationInstance(frame, cfg.sim.n_robots, U, D, table)
    rows, failures = [], []
    for scheme in schemes:
        t0 = time.perf_counter()
        try:
            sol = solve(inst, scheme, cfg.time_limit)
        except InfeasibleError as exc:
            failures.append({"scheme": scheme, "constraint": exc.constraint, "message": str(exc)})
            continue
        elapsed = time.perf_counter() - t0
        problems = validate(sol, inst)
        if problems:
            raise SimulationError(f"solver output for {scheme} failed validation: {problems[0]}")
        row = _scheme_row(table, sol)
        if timings:
            row["solve_time_s"] = elapsed
            print(f"{frame.pattern} {scheme}: solved in {elapsed:.3f} s", file=sys.stderr)
        rows.append(row)
    return rows, failures


CORE_COLUMNS = [
    "scheme",
    "scheme_number",
    "mean_qoc",
    "total_qoc",
    "mean_e2e_ms",
    "mean_alloc_ms",
    "mean_auc",
    "objective_value",
    "optimal",
]


def _columns(timings: bool) -> List[str]:
    return CORE_COLUMNS + (["solve_time_s"] if timings else [])


def _pairwise(rows: List[Dict]) -> List[Dict]:
    out = []
    for a in rows:
        for b in rows:
            if a is b:
                continue
            out.append(
                {
                    "scheme_a": a["scheme"],
                    "scheme_b": b["scheme"],
                    "qoc_ratio": a["mean_qoc"] / b["mean_qoc"] if b["mean_qoc"] > 0 else None,
                    # AUC is proportional to the control effort spent reaching
                    # consensus, so this ratio reads as relative energy use.
                    "energy_ratio": a["mean_auc"] / b["mean_auc"] if b["mean_auc"] > 0 else None,
                }
            )
    return out


def cmd_compare_schemes(cfg: ExperimentConfig, timings: bool = False) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "compare-schemes", out)
    if len(cfg.schemes) < 2:
        raise InvalidConfigError("compare-schemes needs at least two schemes")
    tables = _Tables(cfg)
    U, D = prb_needs(cfg)
    cases, csv_rows = [], []
    for std in cfg.compare_stds:
        model = replace(cfg.delay_model, std=std)
        table = tables.get(cfg.frame, model)
        w.text(f"qoc_table_std{_std_tag(std)}.txt", table_text(table))
        rows, failures = _solve_all(cfg, cfg.frame, table, cfg.schemes, timings)
        cases.append(
            {
                "std_ms": std,
                "max_auc": table.max_auc,
                "schemes": rows,
                "pairwise": _pairwise(rows),
                "infeasible": failures,
            }
        )
        for row in rows:
            csv_rows.append([std] + [row[c] for c in _columns(timings)])
        for f in failures:
            out.status = 4
            out.messages.append(f"std={fmt(std)} ms: scheme {f['scheme']} infeasible ({f['constraint']}): {f['message']}")
    report = {
        "frame": cfg.frame.describe(),
        "n_robots": cfg.sim.n_robots,
        "ul_prbs": U,
        "dl_prbs": D,
        "cases": cases,
    }
    w.json("compare_schemes.json", report)
    w.csv("compare_schemes.csv", ["std_ms"] + _columns(timings), csv_rows)
    return out


def cmd_tdd_sweep(cfg: ExperimentConfig, patterns: Optional[Sequence[str]] = None, timings: bool = False) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "tdd-sweep", out)
    patterns = list(patterns or cfg.patterns)
    tables = _Tables(cfg)
    csv_rows = []
    for pattern in patterns:
        frame = replace(cfg.frame, pattern=pattern).validate()
        table = tables.get(frame, cfg.delay_model)
        rows, failures = _solve_all(cfg, frame, table, cfg.schemes, timings)
        for row in rows:
            csv_rows.append([pattern] + [row[c] for c in _columns(timings)])
        for f in failures:
            out.status = 4
            out.messages.append(f"pattern {pattern}: scheme {f['scheme']} infeasible ({f['constraint']}): {f['message']}")
    w.csv("tdd_sweep.csv", ["pattern"] + _columns(timings), csv_rows, {"patterns": patterns})
    return out


def cmd_build_table(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "build-table", out)
    table = build_qoc_table(cfg.sim, cfg.delay_model, cfg.frame, cfg.n_runs, cfg.table_mode)
    w.text("qoc_table.txt", table_text(table))
    return out


def cmd_allocate(
    cfg: ExperimentConfig,
    scheme: str,
    table_path=None,
    export_lp: bool = False,
    timings: bool = False,
) -> Outcome:
    out = Outcome()
    w = _Writer(cfg, "allocate", out)
    if table_path is None:
        table = build_qoc_table(cfg.sim, cfg.delay_model, cfg.frame, cfg.n_runs, cfg.table_mode)
    else:
        table = read_table(table_path)
    U, D = prb_needs(cfg)
    inst = AllocationInstance(cfg.frame, cfg.sim.n_robots, U, D, table)
    if export_lp:
        w.text(f"model_{scheme}.lp", export_milp(inst, scheme))
    t0 = time.perf_counter()
    sol = solve(inst, scheme, cfg.time_limit)
    if timings:
        print(f"{scheme}: solved in {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    problems = validate(sol, inst)
    if problems:
        raise SimulationError(f"solver output failed validation: {problems[0]}")
    w.text(f"allocation_{scheme}.json", solution_json(sol), {"ul_prbs": U, "dl_prbs": D})
    out.messages.append(
        f"{scheme}: objective {fmt(sol.objective_value)}, mean QoC {fmt(sol.total_qoc / sol.n_robots)}"
    )
    return out
