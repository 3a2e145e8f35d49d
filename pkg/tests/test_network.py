import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from edgeqoc.errors import InvalidConfigError
from edgeqoc.network import (
    DelayModel,
    LinkBudget,
    PrbCapacityError,
    TddFrame,
    backend_cdf,
    bits_per_prb_slot,
    clipped_cdf,
    expand_tdd,
    load_mcs_table,
    loop_reliability,
    prb_requirement,
    sample_backend_delay,
)


def quad_cdf(model, d):
    """Truncated Gaussian CDF by integrating the density directly."""
    pdf = lambda x: math.exp(-0.5 * ((x - model.mean) / model.std) ** 2)
    mass, _ = integrate.quad(pdf, model.lower, model.upper, points=[model.mean], limit=200)
    part, _ = integrate.quad(pdf, model.lower, min(max(d, model.lower), model.upper), limit=200)
    return part / mass


@pytest.mark.parametrize("std", [0.25, 1.0, 3.0])
@pytest.mark.parametrize("d", [0.1, 0.5, 1.0, 1.5, 2.0, 4.0, 9.0])
def test_backend_cdf_matches_quadrature(std, d):
    model = DelayModel(std=std)
    assert backend_cdf(model, d) == pytest.approx(quad_cdf(model, d), abs=1e-9)


def test_backend_cdf_bounds():
    model = DelayModel()
    assert backend_cdf(model, 0.0) == 0.0
    assert backend_cdf(model, -3.0) == 0.0
    assert backend_cdf(model, 10.0) == 1.0
    assert backend_cdf(model, 25.0) == 1.0


def test_backend_cdf_monotone_on_grid():
    model = DelayModel()
    grid = np.linspace(-1, 11, 1000)
    values = np.array([backend_cdf(model, d) for d in grid])
    assert np.all(np.diff(values) >= 0)
    assert values.min() >= 0 and values.max() <= 1


def test_loop_reliability_examples():
    model = DelayModel()
    assert loop_reliability(model, 10.0) == pytest.approx(0.9801, abs=1e-15)
    assert loop_reliability(model, 1.0) == pytest.approx(quad_cdf(model, 1.0) * 0.9801, abs=1e-9)
    ideal = DelayModel(p_ul=1.0, p_dl=1.0)
    assert loop_reliability(ideal, 1.3) == backend_cdf(ideal, 1.3)
    grid = np.linspace(0, 10, 201)
    assert np.all(np.diff([loop_reliability(model, d) for d in grid]) >= 0)
    with pytest.raises(InvalidConfigError):
        loop_reliability(model, 10.5)


def test_sampling_matches_clipped_cdf():
    model = DelayModel()
    draws = sample_backend_delay(model, np.random.default_rng(7), 100_000)
    assert draws.min() >= model.lower and draws.max() <= model.upper
    # The clipped law has atoms at both ends, so compare right-continuous CDFs
    # on a fine grid instead of using a continuous-distribution KS test.
    grid = np.linspace(model.lower, model.upper, 20001)
    empirical = np.searchsorted(np.sort(draws), grid, side="right") / draws.size
    exact = np.array([clipped_cdf(model, x) for x in grid])
    assert exact[0] == pytest.approx(stats.norm.cdf(-0.5), abs=1e-12)
    assert np.max(np.abs(empirical - exact)) < 0.01


def test_sampling_degenerate_cases():
    rng = np.random.default_rng(0)
    narrow = DelayModel(mean=2.0, std=1e-12)
    assert np.allclose(sample_backend_delay(narrow, rng, 100), 2.0)
    low = DelayModel(mean=-100.0, std=1.0)
    assert np.all(sample_backend_delay(low, rng, 1000) == 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(std=0.0), dict(lower=1.0), dict(upper=0.0), dict(p_ul=0.0), dict(p_dl=1.2)],
)
def test_delay_model_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        DelayModel(**kwargs)


def test_udu_ud_expansion():
    slots = expand_tdd(TddFrame("UDUUD", 4))
    assert len(slots) == 20
    assert slots[0].start == 0.0 and slots[-1].start + 0.5 == 10.0
    assert [s.index for s in slots] == list(range(1, 21))


def test_uuudd_hand_expansion():
    frame = TddFrame("UUUDD", 4)
    assert frame.uplink_slots == [1, 2, 3, 6, 7, 8, 11, 12, 13, 16, 17, 18]
    assert frame.downlink_slots == [4, 5, 9, 10, 14, 15, 19, 20]


def test_expansion_round_trip_and_numerology():
    for pattern, reps, mu in (("UUDUD", 3, 0), ("DU", 2, 2), ("UDUUD", 4, 1)):
        frame = TddFrame(pattern, reps, mu)
        slots = expand_tdd(frame)
        assert "".join(s.kind for s in slots) == pattern * reps
        assert frame.slot_duration == 1.0 / 2**mu
        assert all(s.start == (s.index - 1) * frame.slot_duration for s in slots)


def test_frame_needs_both_directions():
    single = TddFrame("U", 1)
    assert len(expand_tdd(single)) == 1
    with pytest.raises(InvalidConfigError):
        single.validate()
    with pytest.raises(InvalidConfigError):
        TddFrame("UXD", 1)
    with pytest.raises(InvalidConfigError):
        TddFrame("UD", 0)


def test_mcs_table_entries():
    table = load_mcs_table()
    assert len(table) == 29
    assert table[0] == (2, 120 / 1024)
    assert table[7] == (2, 526 / 1024)
    assert table[9] == (2, 679 / 1024)
    assert table[28] == (6, 948 / 1024)


def test_prb_hand_evaluation():
    budget = LinkBudget(packet_bits=5120, modulation_order=2, code_rate=679 / 1024, overhead=0.08)
    per_prb = 12 * 14 * 2 * (679 / 1024) * 0.92
    assert bits_per_prb_slot(budget) == pytest.approx(per_prb, rel=1e-15)
    assert prb_requirement(budget).prbs == math.ceil(5120 / per_prb) == 25


def test_prb_bundled_mcs7():
    ul = prb_requirement(LinkBudget.from_mcs(5120, 7, 0.08))
    dl = prb_requirement(LinkBudget.from_mcs(5120, 7, 0.14))
    assert ul.prbs == math.ceil(5120 / (12 * 14 * 2 * 526 / 1024 * 0.92)) == 33
    assert dl.prbs == math.ceil(5120 / (12 * 14 * 2 * 526 / 1024 * 0.86)) == 35


def test_prb_unit_fill_and_doubling():
    budget = LinkBudget(packet_bits=12 * 14 * 2 * 0.5, modulation_order=2, code_rate=0.5, overhead=0.0)
    assert prb_requirement(budget).prbs == 1
    base = LinkBudget.from_mcs(5120, 7, 0.08)
    req = prb_requirement(base).prbs
    doubled = prb_requirement(LinkBudget.from_mcs(10240, 7, 0.08)).prbs
    assert 2 * req - 1 <= doubled <= 2 * req


def test_prb_capacity_limit():
    big = LinkBudget.from_mcs(5120 * 10, 0, 0.1)
    with pytest.raises(PrbCapacityError):
        prb_requirement(big)
    # The cap only gates errors.
    base = LinkBudget.from_mcs(5120, 7, 0.08)
    wide = LinkBudget.from_mcs(5120, 7, 0.08, max_prbs=266)
    assert prb_requirement(base) == prb_requirement(wide)
    with pytest.raises(PrbCapacityError):
        prb_requirement(base, TddFrame("UD", 1, capacity=20))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(packet_bits=0, modulation_order=2, code_rate=0.5, overhead=0.1),
        dict(packet_bits=100, modulation_order=2, code_rate=1.0, overhead=0.1),
        dict(packet_bits=100, modulation_order=2, code_rate=0.5, overhead=1.0),
        dict(packet_bits=100, modulation_order=0, code_rate=0.5, overhead=0.1),
    ],
)
def test_link_budget_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        LinkBudget(**kwargs)


budgets = st.fixed_dictionaries(
    {
        "packet_bits": st.floats(100, 20000),
        "modulation_order": st.sampled_from([2, 4, 6]),
        "code_rate": st.floats(0.05, 0.95),
        "overhead": st.floats(0.0, 0.5),
    }
)


def _prbs(**kw):
    return prb_requirement(LinkBudget(max_prbs=10**6, **kw)).prbs


@settings(max_examples=100, deadline=None)
@given(budgets, st.floats(1.0, 2.0))
def test_prb_monotonicity(b, factor):
    base = _prbs(**b)
    assert _prbs(**{**b, "packet_bits": b["packet_bits"] * factor}) >= base
    assert _prbs(**{**b, "code_rate": min(0.99, b["code_rate"] * factor)}) <= base
    assert _prbs(**{**b, "overhead": min(0.9, b["overhead"] + (factor - 1) * 0.3)}) >= base
    higher = {2: 4, 4: 6, 6: 6}[b["modulation_order"]]
    assert _prbs(**{**b, "modulation_order": higher}) <= base
