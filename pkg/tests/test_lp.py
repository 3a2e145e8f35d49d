import os
import re
import tempfile

import pytest
from _corpus import corpus
from fixtures.make_golden import golden_instance

from edgeqoc.allocator import (
    MAX_DELAY,
    MAX_QOC,
    MIN_DELAY,
    MIN_DELAY_STABLE,
    SCHEMES,
    AllocationInstance,
    brute_force,
    export_milp,
)
from edgeqoc.errors import InfeasibleError
from edgeqoc.network import TddFrame
from edgeqoc.qoc import QocTable, table_pairs

NAME = re.compile(r"\b[A-Z]{1,3}(?:_\d+)*\b")


def tiny(mode="pair", unstable=()):
    frame = TddFrame("UD", 1, capacity=3)
    rows = [(e, a, 2.0 if (e, a) in unstable else 0.1 * e + 0.01 * a, 0.0) for e, a in table_pairs(frame, 10.0, mode)]
    return AllocationInstance(frame, 1, 2, 2, QocTable.from_entries(0.5, rows, mode=mode))


def variables(text):
    body = [line for line in text.splitlines() if not line.startswith("\\")]
    names = set()
    for line in body:
        names.update(NAME.findall(line.split(":", 1)[-1]))
    return names


def section(text, head):
    lines = text.splitlines()
    start = lines.index(head) + 1
    out = []
    for line in lines[start:]:
        if not line.startswith(" "):
            break
        out.append(line)
    return out


def test_hand_counted_variables():
    inst = tiny()
    text = export_milp(inst, MAX_QOC)
    names = variables(text)
    # 3 table entries for a 2-slot frame: (1,1), (2,1), (2,2).
    expected = {
        "X_1_1", "X_1_2", "Y_1_1", "Y_1_2", "ZU_1_1", "ZU_1_2", "ZD_1_1", "ZD_1_2",
        "SFU_1", "SLU_1", "SFD_1", "SLD_1",
        "WFU_1_1", "WLU_1_1", "WFD_1_2", "WLD_1_2",
        "GF", "GL", "VF_1", "VL_1", "DE_1", "DA_1", "Q_1",
        "TH_1_1", "TH_1_2", "TH_1_3",
    }
    assert names == expected
    binaries = set(" ".join(section(text, "Binary")).split())
    assert binaries == {n for n in expected if n[:2] in ("ZU", "ZD", "TH") or n[0] in "WV"}
    general = set(" ".join(section(text, "General")).split())
    assert general == {n for n in expected if n[0] in "XYS" or n in ("GF", "GL")}


def test_objective_sense_per_scheme():
    inst = tiny()
    for scheme, sense, var in (
        (MAX_QOC, "Maximize", "Q_1"),
        (MIN_DELAY, "Minimize", "DE_1"),
        (MAX_DELAY, "Maximize", "DE_1"),
        (MIN_DELAY_STABLE, "Minimize", "DE_1"),
    ):
        lines = export_milp(inst, scheme).splitlines()
        at = lines.index(sense)
        assert lines[at + 1] == f" obj: {var}"


def test_stable_scheme_fixes_unstable_selectors():
    inst = tiny(unstable={(2, 1)})
    bounds = section(export_milp(inst, MIN_DELAY_STABLE), "Bounds")
    assert " TH_1_2 = 0" in bounds
    assert " TH_1_2 = 0" not in section(export_milp(inst, MIN_DELAY), "Bounds")


def test_single_mode_drops_allocation_brackets():
    text = export_milp(tiny("single"), MAX_QOC)
    assert "de_hi_1_1" in text and "da_hi_" not in text


def test_long_rows_wrap():
    frame = TddFrame("UDUUD", 2, capacity=4)
    rows = [(e, a, 0.1, 0.0) for e, a in table_pairs(frame, 10.0)]
    inst = AllocationInstance(frame, 8, 1, 1, QocTable.from_entries(0.5, rows))
    text = export_milp(inst, MAX_QOC)
    assert max(len(line) for line in text.splitlines()) < 120
    assert text.endswith("End\n")


def highs_solve(text):
    highspy = pytest.importorskip("highspy")
    with tempfile.NamedTemporaryFile("w", suffix=".lp", delete=False) as f:
        f.write(text)
    try:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(f.name)
        h.run()
    finally:
        os.unlink(f.name)
    status = h.modelStatusToString(h.getModelStatus())
    return status, h.getInfo().objective_function_value


def reference(inst, scheme):
    try:
        return brute_force(inst, scheme).objective_value
    except InfeasibleError:
        return None


@pytest.mark.parametrize("scheme", SCHEMES)
def test_round_trip_golden(scheme):
    inst = golden_instance(2)
    status, value = highs_solve(export_milp(inst, scheme))
    assert status == "Optimal"
    assert value == pytest.approx(reference(inst, scheme), abs=1e-6)
    status, _ = highs_solve(export_milp(golden_instance(1), scheme))
    assert status == "Infeasible"


@pytest.mark.slow
def test_round_trip_corpus():
    checked = 0
    for inst in corpus()[:25]:
        for scheme in SCHEMES:
            want = reference(inst, scheme)
            status, value = highs_solve(export_milp(inst, scheme))
            if want is None:
                assert status == "Infeasible"
            else:
                assert status == "Optimal"
                assert value == pytest.approx(want, abs=1e-6)
                checked += 1
    assert checked >= 10
