import math

import numpy as np
import pytest

from edgeqoc.consensus import (
    LoopCondition,
    SimConfig,
    derive_run_seed,
    disagreement_series,
    grid_positions,
    monte_carlo_auc,
    normalized_auc,
    run_aucs,
    simulate_run,
)
from edgeqoc.errors import InvalidConfigError, SimulationError

PERFECT = LoopCondition(0.0, 1.0)


def continuous(n=10, gain=5.0, step=0.5, horizon=2000.0, **kw):
    """Sampling every integration step: the loop reduces to plain Euler."""
    return SimConfig(n_robots=n, gain=gain, period=step, step=step, horizon=horizon, **kw)


def decay_error(step):
    cfg = continuous(step=step)
    traj = simulate_run(cfg, PERFECT, 0)
    series = disagreement_series(traj, cfg.horizon)
    rate = cfg.gain * cfg.n_robots / 1000.0
    exact = np.exp(-2 * rate * traj.times)
    return np.nanmax(np.abs(series.per_robot_normalized - exact))


def test_symmetric_pair_meets_at_zero():
    cfg = SimConfig(n_robots=2, gain=5.0, initial_positions=(1.0, -1.0))
    traj = simulate_run(cfg, PERFECT, 0)
    assert cfg.consensus_point == 0.0
    assert np.all(np.abs(traj.positions[:, -1]) < 1e-3)


def test_no_delivery_keeps_robots_still():
    cfg = SimConfig.with_default_gain(6)
    traj = simulate_run(cfg, LoopCondition(3.0, 0.0), 11)
    assert np.array_equal(traj.positions, np.repeat(traj.positions[:, :1], traj.positions.shape[1], axis=1))
    assert not traj.controls.any()
    series = disagreement_series(traj, cfg.horizon)
    assert series.auc_mean == 1.0
    assert np.all(series.auc_per_robot == 1.0)


def test_perfect_network_matches_exponential_decay():
    err = decay_error(0.5)
    # Euler error of exp(-2at) is about a^2 t h e^{-2at}, largest near t = 1/(2a).
    assert err < 5e-3


def test_euler_error_halves_with_step():
    ratio = decay_error(0.5) / decay_error(0.25)
    assert 1.7 <= ratio <= 2.3


def test_perfect_network_auc_closed_form():
    cfg = continuous()
    rate = cfg.gain * cfg.n_robots / 1000.0
    exact = (1 - math.exp(-2 * rate * cfg.horizon)) / (2 * rate * cfg.horizon)
    got = monte_carlo_auc(cfg, PERFECT, 5)
    assert abs(got.mean - exact) < 1e-4
    assert got.stderr == 0.0


def test_mean_position_conserved_without_delay_or_loss():
    cfg = SimConfig.with_default_gain(7, initial_positions=(0.3, -0.9, 0.1, 0.75, -0.2, 0.5, -0.6))
    traj = simulate_run(cfg, PERFECT, 0)
    means = traj.positions.mean(axis=0)
    tol = 10 * np.finfo(float).eps * cfg.n_robots * np.arange(len(means))
    assert np.all(np.abs(means - means[0]) <= tol + 1e-15)


def test_trajectory_deterministic_and_seed_sensitive():
    cfg = SimConfig.with_default_gain(5)
    cond = LoopCondition(4.0, 0.6)
    a = simulate_run(cfg, cond, 123)
    b = simulate_run(cfg, cond, 123)
    c = simulate_run(cfg, cond, 124)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.controls, b.controls)
    assert not np.array_equal(a.positions, c.positions)


def test_controls_respect_delay_and_hold():
    cfg = SimConfig.with_default_gain(3, horizon=40.0)
    traj = simulate_run(cfg, LoopCondition(2.0, 1.0), 0)
    # Nothing arrives before the first command lands 2 ms after t = 0.
    first = np.flatnonzero(traj.controls[0] != 0)[0]
    assert traj.times[first] == 2.0
    # Between arrivals the command is held constant.
    assert np.all(traj.controls[:, first : first + 20] == traj.controls[:, first : first + 1])


def test_monte_carlo_single_run_equals_composition():
    cfg = SimConfig.with_default_gain(4, seed=9)
    cond = LoopCondition(5.0, 0.5)
    traj = simulate_run(cfg, cond, derive_run_seed(9, 0))
    single = disagreement_series(traj, cfg.horizon).auc_mean
    assert monte_carlo_auc(cfg, cond, 1).mean == single
    assert normalized_auc(traj.positions, cfg) == single


def test_monte_carlo_self_consistent_across_run_counts():
    cfg = SimConfig.with_default_gain(4, horizon=500.0)
    cond = LoopCondition(5.0, 0.5)
    a = monte_carlo_auc(cfg, cond, 300)
    b = monte_carlo_auc(SimConfig.with_default_gain(4, horizon=500.0, seed=1), cond, 600)
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


def test_auc_grows_with_delay_and_falls_with_reliability():
    cfg = SimConfig.with_default_gain(6)
    by_delay = [monte_carlo_auc(cfg, LoopCondition(d, 1.0), 1).mean for d in (0.0, 3.0, 6.0, 10.0)]
    assert by_delay == sorted(by_delay)
    by_prob = [monte_carlo_auc(cfg, LoopCondition(0.0, p), 200) for p in (0.3, 0.6, 0.9, 1.0)]
    for lo, hi in zip(by_prob, by_prob[1:]):
        assert hi.mean <= lo.mean + 2 * math.hypot(lo.stderr, hi.stderr)


def test_mirrored_trajectory_has_same_auc():
    cfg = SimConfig.with_default_gain(5, initial_positions=(0.9, -0.2, 0.4, -0.7, 0.1))
    traj = simulate_run(cfg, LoopCondition(1.0, 0.7), 3)
    mirrored = 2 * traj.consensus_point - traj.positions
    assert math.isclose(normalized_auc(mirrored, cfg), normalized_auc(traj.positions, cfg), rel_tol=1e-12)


def test_robot_at_consensus_point_excluded():
    cfg = SimConfig.with_default_gain(3, initial_positions=(-1.0, 0.0, 1.0))
    series = disagreement_series(simulate_run(cfg, PERFECT, 0), cfg.horizon)
    assert list(series.included) == [True, False, True]
    assert math.isnan(series.auc_per_robot[1])
    assert series.auc_mean == pytest.approx(np.nanmean(series.auc_per_robot), rel=1e-12)


def test_common_random_numbers_across_conditions():
    cfg = SimConfig.with_default_gain(4, horizon=200.0)
    a = run_aucs(cfg, LoopCondition(1.0, 0.5), 3)
    b = run_aucs(cfg, LoopCondition(1.0, 0.5), 3)
    assert a == b


def test_grid_positions():
    assert grid_positions(3) == (-1.0, 0.0, 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_robots=1, gain=1.0),
        dict(n_robots=3, gain=0.0),
        dict(n_robots=3, gain=1.0, step=0.3),
        dict(n_robots=3, gain=1.0, period=10.0, horizon=5.0),
        dict(n_robots=3, gain=1000.0),
        dict(n_robots=3, gain=1.0, initial_positions=(0.5, 0.5, 0.5)),
        dict(n_robots=3, gain=1.0, initial_positions=(0.5, 0.1)),
    ],
)
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(InvalidConfigError):
        SimConfig(**kwargs).check()


def test_invalid_conditions_rejected():
    with pytest.raises(InvalidConfigError):
        LoopCondition(-1.0, 0.5)
    with pytest.raises(InvalidConfigError):
        LoopCondition(1.0, 1.5)
    with pytest.raises(InvalidConfigError):
        monte_carlo_auc(SimConfig.with_default_gain(3), LoopCondition(12.0, 1.0), 1)
    with pytest.raises(InvalidConfigError):
        monte_carlo_auc(SimConfig.with_default_gain(3), PERFECT, 0)


def test_short_trajectory_rejected():
    cfg = SimConfig.with_default_gain(3, horizon=100.0)
    traj = simulate_run(cfg, PERFECT, 0)
    with pytest.raises(SimulationError):
        disagreement_series(traj, 200.0)
