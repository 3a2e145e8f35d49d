"""Export of the allocation problem as a mixed-integer program in CPLEX LP format.

The file is meant for external MILP solvers; its optimum equals the
objective value returned by ``solve``. Tie-breaking is not encoded.

Variable families (``i`` robot, ``j`` slot, ``l`` table entry, 1-based):

    X_i_j, Y_i_j        uplink / downlink PRBs
    ZU_i_j, ZD_i_j      scheduled indicators
    SFU_i SLU_i         first / last uplink slot
    SFD_i SLD_i         first / last downlink slot
    WFU_i_j ...         selectors placing each first/last marker on a used slot
    GF, GL              globally first uplink / last uplink slot
    VF_i, VL_i          selectors for the robot attaining GF / GL
    DE_i, DA_i          end-to-end and allocation delay in ms
    TH_i_l              delay-choice selector
    Q_i                 QoC of robot i
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

from .model import MAX_DELAY, MAX_QOC, MIN_DELAY_STABLE, AllocationInstance, scheme_name

Term = Tuple[float, str]

_WRAP = 6


def _num(value) -> str:
    if isinstance(value, int) or float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _expr(terms: Sequence[Term]) -> List[str]:
    pieces = []
    for k, (coef, var) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        if k == 0:
            pieces.append(body if sign == "+" else f"- {body}")
        else:
            pieces.append(f"{sign} {body}")
    return [" ".join(pieces[k : k + _WRAP]) for k in range(0, len(pieces), _WRAP)]


class _Model:
    def __init__(self):
        self.rows: List[str] = []
        self.bounds: List[str] = []
        self.general: List[str] = []
        self.binary: List[str] = []

    def add(self, name: str, terms: Sequence[Term], sense: str, rhs) -> None:
        lines = _expr(terms)
        lines[-1] = f"{lines[-1]} {sense} {_num(rhs)}"
        self.rows.append(f" {name}: {lines[0]}")
        self.rows.extend(f"   {line}" for line in lines[1:])

    def bound(self, var: str, lo, hi) -> None:
        if lo == hi:
            self.bounds.append(f" {var} = {_num(lo)}")
        else:
            self.bounds.append(f" {_num(lo)} <= {var} <= {_num(hi)}")


def _wrap_names(names: Iterable[str]) -> List[str]:
    names = list(names)
    return [" " + " ".join(names[k : k + 8]) for k in range(0, len(names), 8)]


def export_milp(instance: AllocationInstance, scheme) -> str:
    """Full linearized model for ``scheme`` as LP-format text."""
    scheme = scheme_name(scheme)
    frame = instance.frame
    table = instance.qoc_table
    N, phi, R = instance.n_robots, instance.n_slots, instance.capacity
    U, D, M = instance.ul_need, instance.dl_need, instance.big_m
    dur = frame.slot_duration
    horizon = phi * dur
    ul, dl = frame.uplink_slots, frame.downlink_slots
    entries = table.entries()
    qoc = [table.qoc_at(e, a) for e, a in entries]
    robots = range(1, N + 1)
    m = _Model()

    for i in robots:
        for j in range(1, phi + 1):
            up = j in ul
            m.bound(f"X_{i}_{j}", 0, min(U, R) if up else 0)
            m.bound(f"Y_{i}_{j}", 0, 0 if up else min(D, R))
            m.bound(f"ZU_{i}_{j}", 0, 1 if up else 0)
            m.bound(f"ZD_{i}_{j}", 0, 0 if up else 1)
        for s in ("SFU", "SLU", "SFD", "SLD"):
            m.bound(f"{s}_{i}", 1, phi)
    m.bound("GF", 1, phi)
    m.bound("GL", 1, phi)

    # Per-slot capacity.
    for j in ul:
        m.add(f"cap_ul_{j}", [(1, f"X_{i}_{j}") for i in robots], "<=", R)
    for j in dl:
        m.add(f"cap_dl_{j}", [(1, f"Y_{i}_{j}") for i in robots], "<=", R)

    for i in robots:
        # Demand totals.
        m.add(f"need_ul_{i}", [(1, f"X_{i}_{j}") for j in ul], "=", U)
        m.add(f"need_dl_{i}", [(1, f"Y_{i}_{j}") for j in dl], "=", D)
        # Indicators are 1 exactly when PRBs are assigned.
        for j in ul:
            m.add(f"lnk_ul_hi_{i}_{j}", [(1, f"X_{i}_{j}"), (-min(U, R), f"ZU_{i}_{j}")], "<=", 0)
            m.add(f"lnk_ul_lo_{i}_{j}", [(1, f"X_{i}_{j}"), (-1, f"ZU_{i}_{j}")], ">=", 0)
        for j in dl:
            m.add(f"lnk_dl_hi_{i}_{j}", [(1, f"Y_{i}_{j}"), (-min(D, R), f"ZD_{i}_{j}")], "<=", 0)
            m.add(f"lnk_dl_lo_{i}_{j}", [(1, f"Y_{i}_{j}"), (-1, f"ZD_{i}_{j}")], ">=", 0)
        # First/last markers: a selector puts the marker on a used slot and
        # big-M rows keep it below (first) or above (last) every used slot.
        for mark, slots, z, first in (
            ("FU", ul, "ZU", True),
            ("LU", ul, "ZU", False),
            ("FD", dl, "ZD", True),
            ("LD", dl, "ZD", False),
        ):
            s_var = f"S{mark}_{i}"
            m.add(f"sel_{mark}_{i}", [(1, f"W{mark}_{i}_{j}") for j in slots], "=", 1)
            m.add(
                f"pos_{mark}_{i}",
                [(1, s_var)] + [(-j, f"W{mark}_{i}_{j}") for j in slots],
                "=",
                0,
            )
            for j in slots:
                m.add(f"use_{mark}_{i}_{j}", [(1, f"W{mark}_{i}_{j}"), (-1, f"{z}_{i}_{j}")], "<=", 0)
                if first:
                    # S <= j when slot j is used.
                    m.add(f"ord_{mark}_{i}_{j}", [(1, s_var), (M - j, f"{z}_{i}_{j}")], "<=", M)
                else:
                    # S >= j when slot j is used.
                    m.add(f"ord_{mark}_{i}_{j}", [(1, s_var), (-j, f"{z}_{i}_{j}")], ">=", 0)

    # Global first/last uplink slot.
    m.add("sel_GF", [(1, f"VF_{i}") for i in robots], "=", 1)
    m.add("sel_GL", [(1, f"VL_{i}") for i in robots], "=", 1)
    for i in robots:
        m.add(f"gf_le_{i}", [(1, "GF"), (-1, f"SFU_{i}")], "<=", 0)
        m.add(f"gf_ge_{i}", [(1, "GF"), (-1, f"SFU_{i}"), (-M, f"VF_{i}")], ">=", -M)
        m.add(f"gl_ge_{i}", [(1, "GL"), (-1, f"SLU_{i}")], ">=", 0)
        m.add(f"gl_le_{i}", [(1, "GL"), (-1, f"SLU_{i}"), (M, f"VL_{i}")], "<=", M)
        # The edge sends downlink only after every uplink arrived.
        m.add(f"gate_{i}", [(1, f"SFD_{i}"), (-1, "GL")], ">=", 1)
        m.add(f"de_{i}", [(1, f"DE_{i}"), (-dur, f"SLD_{i}"), (dur, "GF")], "=", 0)
        m.add(f"da_{i}", [(1, f"DA_{i}"), (-dur, f"SFD_{i}"), (dur, "GL")], "=", 0)

    # Delay choice, bracketing and QoC mapping.
    for i in robots:
        m.add(f"choice_{i}", [(1, f"TH_{i}_{l}") for l in range(1, len(entries) + 1)], "=", 1)
        for l, (e, a) in enumerate(entries, start=1):
            th = f"TH_{i}_{l}"
            brackets = [("de", f"DE_{i}", e * dur)]
            if table.mode == "pair":
                brackets.append(("da", f"DA_{i}", a * dur))
            for tag, var, delta in brackets:
                m.add(f"{tag}_hi_{i}_{l}", [(1, var), (horizon - delta, th)], "<=", horizon)
                m.add(f"{tag}_lo_{i}_{l}", [(1, var), (-delta, th)], ">=", 0)
            if scheme == MIN_DELAY_STABLE and not qoc[l - 1] > 0:
                m.bound(th, 0, 0)
        m.add(
            f"qoc_{i}",
            [(1, f"Q_{i}")] + [(-g, f"TH_{i}_{l}") for l, g in enumerate(qoc, start=1) if g != 0],
            "=",
            0,
        )

    if scheme == MAX_QOC:
        sense, obj = "Maximize", [(1, f"Q_{i}") for i in robots]
    elif scheme == MAX_DELAY:
        sense, obj = "Maximize", [(1, f"DE_{i}") for i in robots]
    else:
        sense, obj = "Minimize", [(1, f"DE_{i}") for i in robots]

    for i in robots:
        for j in range(1, phi + 1):
            m.general.extend((f"X_{i}_{j}", f"Y_{i}_{j}"))
        m.general.extend(f"{s}_{i}" for s in ("SFU", "SLU", "SFD", "SLD"))
    m.general.extend(("GF", "GL"))
    for i in robots:
        for j in range(1, phi + 1):
            m.binary.extend((f"ZU_{i}_{j}", f"ZD_{i}_{j}"))
        for mark, slots in (("FU", ul), ("LU", ul), ("FD", dl), ("LD", dl)):
            m.binary.extend(f"W{mark}_{i}_{j}" for j in slots)
    m.binary.extend(f"VF_{i}" for i in robots)
    m.binary.extend(f"VL_{i}" for i in robots)
    for i in robots:
        m.binary.extend(f"TH_{i}_{l}" for l in range(1, len(entries) + 1))

    obj_lines = _expr(obj)
    out = [
        f"\\ edgeqoc allocation model, scheme {scheme}",
        f"\\ frame {frame.describe()}, N={N} U={U} D={D} R={R} M={M}",
        sense,
        f" obj: {obj_lines[0]}",
    ]
    out.extend(f"   {line}" for line in obj_lines[1:])
    out.append("Subject To")
    out.extend(m.rows)
    out.append("Bounds")
    out.extend(m.bounds)
    out.append("General")
    out.extend(_wrap_names(m.general))
    out.append("Binary")
    out.extend(_wrap_names(m.binary))
    out.append("End")
    return "\n".join(out) + "\n"

