import math

import numpy as np
import pytest

from edgeqoc._parallel import THREADS_ENV
from edgeqoc.consensus import LoopCondition, SimConfig, monte_carlo_auc
from edgeqoc.errors import InvalidConfigError
from edgeqoc.network import DelayModel, TddFrame, loop_reliability
from edgeqoc.qoc import (
    QocTable,
    build_qoc_table,
    normalize_qoc,
    read_table,
    sweep_deterministic,
    sweep_reliability,
    sweep_stochastic,
    table_pairs,
    table_text,
    write_table,
)

SMALL = SimConfig.with_default_gain(4, horizon=400.0)
FRAME5 = TddFrame("UDUUD", 1)


def test_table_pairs_counts():
    pairs = table_pairs(TddFrame("UDUUD", 4), 10.0)
    assert len(pairs) == 20 * 21 // 2
    assert all(1 <= a <= e <= 20 for e, a in pairs)
    assert pairs == sorted(pairs)
    # A 5 ms period caps e2e at 10 slots.
    assert max(e for e, _ in table_pairs(TddFrame("UDUUD", 4), 5.0)) == 10
    single = table_pairs(FRAME5, 10.0, "single")
    assert single == [(e, e - 1) for e in range(2, 6)]
    with pytest.raises(InvalidConfigError):
        table_pairs(FRAME5, 10.0, "triple")


def test_normalize_qoc_rules():
    max_auc, q = normalize_qoc(np.array([0.2, 0.5, 0.1]))
    assert max_auc == 0.5
    assert q[1] == 0.0
    assert q[2] == pytest.approx(0.8)
    assert q.max() == (0.5 - 0.1) / 0.5
    max_auc, q = normalize_qoc(np.array([0.2, 1.0, 3.0, np.nan]))
    assert max_auc == 1.0
    assert q[1] == 0.0 and q[2] == 0.0 and math.isnan(q[3])
    assert q[0] == pytest.approx(0.8)


def test_sweep_deterministic_properties():
    res = sweep_deterministic(SMALL, [0.0, 2.0, 5.0, 10.0], 3)
    assert list(res.auc) == sorted(res.auc)
    assert np.all(res.stderr == 0)
    alone = monte_carlo_auc(SMALL, LoopCondition(0.0, 1.0), 3)
    assert sweep_deterministic(SMALL, [0.0], 3).auc[0] == alone.mean == res.auc[0]
    with pytest.raises(InvalidConfigError):
        sweep_deterministic(SMALL, [2.0, 1.0], 3)
    with pytest.raises(InvalidConfigError):
        sweep_deterministic(SMALL, [11.0], 3)


def test_sweep_reliability_properties():
    res = sweep_reliability(SMALL, [0.3, 0.5, 0.8, 1.0], 100)
    for i in range(3):
        assert res.auc[i + 1] <= res.auc[i] + 2 * math.hypot(res.stderr[i], res.stderr[i + 1])
    assert res.auc[-1] == sweep_deterministic(SMALL, [0.0], 1).auc[0]
    again = sweep_reliability(SMALL, [0.5], 100)
    assert again.auc[0] == res.auc[1] and again.stderr[0] == res.stderr[1]
    with pytest.raises(InvalidConfigError):
        sweep_reliability(SMALL, [0.0, 0.5], 10)


def test_sweep_stochastic_endpoints():
    model = DelayModel()
    res = sweep_stochastic(SMALL, model, [0.0, 10.0], 50)
    assert res.auc[0] == 1.0 and res.stderr[0] == 0.0
    direct = monte_carlo_auc(SMALL, LoopCondition(10.0, 0.9801), 50)
    assert res.auc[1] == direct.mean


def test_sweep_stochastic_reduces_to_deterministic():
    model = DelayModel(mean=-50.0, std=0.1, p_ul=1.0, p_dl=1.0)
    delays = [0.5, 3.0, 7.5]
    sto = sweep_stochastic(SMALL, model, delays, 20)
    det = sweep_deterministic(SMALL, delays, 20)
    assert np.array_equal(sto.auc, det.auc)


def test_sweep_stochastic_per_iteration_mode():
    model = DelayModel()
    res = sweep_stochastic(SMALL, model, [1.0, 10.0], 60, mode="per-iteration")
    fixed = sweep_stochastic(SMALL, model, [1.0, 10.0], 60)
    for i in range(2):
        tol = max(3 * math.hypot(res.stderr[i], fixed.stderr[i]), 0.01)
        assert abs(res.auc[i] - fixed.auc[i]) <= tol
    with pytest.raises(InvalidConfigError):
        sweep_stochastic(SMALL, model, [1.0], 5, mode="sometimes")


def _small_table(mode="pair"):
    return build_qoc_table(SMALL, DelayModel(), FRAME5, 20, mode)


def test_table_invariants():
    table = _small_table()
    entries = table.entries()
    assert entries == table_pairs(FRAME5, 10.0)
    aucs = np.array([table.auc_at(e, a) for e, a in entries])
    qocs = np.array([table.qoc_at(e, a) for e, a in entries])
    assert np.all((qocs >= 0) & (qocs <= 1))
    stable = aucs < 1
    assert np.allclose(qocs[stable], (table.max_auc - aucs[stable]) / table.max_auc, rtol=0, atol=1e-15)
    assert np.all(qocs[~stable] == 0)
    worst = max(entries, key=lambda p: table.auc_at(*p) if table.auc_at(*p) < 1 else -1)
    if not (~stable).any():
        assert table.qoc_at(*worst) == 0.0
    assert table.choice_index(*entries[3]) == 3
    assert not table.has(2, 3)
    with pytest.raises(KeyError):
        table.qoc_at(1, 2)
    # Reliability follows the allocation delay through the backend CDF.
    e2e, alloc = 5, 3
    cond = LoopCondition(e2e * 0.5, loop_reliability(DelayModel(), alloc * 0.5))
    assert table.auc_at(e2e, alloc) == monte_carlo_auc(SMALL, cond, 20).mean


def test_table_deterministic_and_thread_independent(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "1")
    one = table_text(_small_table())
    monkeypatch.setenv(THREADS_ENV, "8")
    eight = table_text(_small_table())
    assert one == eight


def test_table_round_trip(tmp_path):
    table = _small_table()
    path = tmp_path / "t.txt"
    write_table(path, table)
    back = read_table(path)
    assert back.entries() == table.entries()
    assert back.mode == "pair" and back.slot_duration == 0.5
    for e, a in table.entries():
        assert back.qoc_at(e, a) == pytest.approx(table.qoc_at(e, a), rel=1e-11, abs=1e-12)
    assert table_text(back) == table_text(table)
    bad = tmp_path / "bad.txt"
    bad.write_text("e2e_ms,alloc_ms\n")
    with pytest.raises(InvalidConfigError):
        read_table(bad)


def test_single_index_mode():
    table = _small_table("single")
    assert table.entries() == [(e, e - 1) for e in range(2, 6)]
    # Any allocation delay maps onto the e2e-only entry.
    assert table.has(4, 1) and table.qoc_at(4, 1) == table.qoc_at(4, 3)


def test_from_entries_with_explicit_qoc():
    rows = [(1, 1, 0.2, 0.0), (2, 1, 0.4, 0.0)]
    table = QocTable.from_entries(0.5, rows, qoc=[0.9, 0.1], max_auc=0.5)
    assert table.qoc_at(1, 1) == 0.9 and table.max_auc == 0.5
