"""Networked consensus of single-integrator robots under loop delay and drops.

Every ``period`` ms each robot samples its position and sends it to the edge.
One Bernoulli draw per robot per period decides whether the whole loop
(state up, control down) succeeds. On success the edge refreshes its copy of
that robot's state, computes the all-to-all consensus control from its
(possibly stale) copies, and the command reaches the robot ``e2e_delay`` ms
after sampling. Commands are held until the next successful delivery.
Positions integrate with explicit Euler at ``step`` ms.

Times are in milliseconds, the gain is per second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidConfigError, SimulationError

__all__ = [
    "SimConfig",
    "LoopCondition",
    "Trajectory",
    "DisagreementSeries",
    "MonteCarloResult",
    "grid_positions",
    "random_positions",
    "derive_run_seed",
    "simulate_run",
    "simulate_batch",
    "disagreement_series",
    "normalized_auc",
    "monte_carlo_auc",
]

# Runs simulated together; fixed so results never depend on scheduling.
RUN_CHUNK = 50

_GRID_TOL = 1e-9

SuccessDraw = Callable[[np.random.Generator, int, int], np.ndarray]


def grid_positions(n_robots: int, low: float = -1.0, high: float = 1.0) -> tuple:
    """Deterministic, evenly spaced starting positions on ``[low, high]``."""
    return tuple(float(v) for v in np.linspace(low, high, n_robots))


def random_positions(n_robots: int, seed: int, low: float = -1.0, high: float = 1.0) -> tuple:
    rng = np.random.default_rng(seed)
    return tuple(float(v) for v in rng.uniform(low, high, n_robots))


def _steps(length: float, step: float, what: str) -> int:
    ratio = length / step
    n = int(round(ratio))
    if abs(ratio - n) > _GRID_TOL * max(1.0, ratio):
        raise InvalidConfigError(f"{what} ({length} ms) is not a multiple of step ({step} ms)")
    return n


@dataclass(frozen=True)
class SimConfig:
    n_robots: int
    gain: float
    period: float = 10.0
    horizon: float = 2000.0
    step: float = 0.5
    initial_positions: Optional[Sequence[float]] = None
    seed: int = 0

    def __post_init__(self):
        if self.initial_positions is None:
            object.__setattr__(self, "initial_positions", grid_positions(self.n_robots))
        else:
            object.__setattr__(
                self, "initial_positions", tuple(float(v) for v in self.initial_positions)
            )
        self.check()

    @classmethod
    def with_default_gain(cls, n_robots: int, **kwargs) -> "SimConfig":
        """Config whose gain gives a closed-loop rate ``gain * n_robots`` of 10/s."""
        return cls(n_robots=n_robots, gain=10.0 / n_robots, **kwargs)

    def check(self) -> None:
        if int(self.n_robots) != self.n_robots or self.n_robots < 2:
            raise InvalidConfigError(f"n_robots must be an integer >= 2, got {self.n_robots}")
        if not self.gain > 0:
            raise InvalidConfigError(f"gain must be > 0, got {self.gain}")
        if not (0 < self.step <= self.period <= self.horizon):
            raise InvalidConfigError(
                "need 0 < step <= period <= horizon, got "
                f"step={self.step} period={self.period} horizon={self.horizon}"
            )
        if not self.gain * self.n_robots * (self.step / 1000.0) < 1.0:
            raise InvalidConfigError(
                "gain * n_robots * step must be < 1 for a contracting Euler loop, got "
                f"{self.gain * self.n_robots * self.step / 1000.0}"
            )
        if len(self.initial_positions) != self.n_robots:
            raise InvalidConfigError(
                f"initial_positions has {len(self.initial_positions)} entries, "
                f"expected {self.n_robots}"
            )
        if not all(math.isfinite(v) for v in self.initial_positions):
            raise InvalidConfigError("initial_positions must be finite")
        if len(set(self.initial_positions)) == 1:
            raise InvalidConfigError("initial_positions are all equal; nothing to agree on")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        _steps(self.period, self.step, "period")
        _steps(self.horizon, self.step, "horizon")

    @property
    def n_steps(self) -> int:
        return _steps(self.horizon, self.step, "horizon")

    @property
    def steps_per_period(self) -> int:
        return _steps(self.period, self.step, "period")

    @property
    def consensus_point(self) -> float:
        return math.fsum(self.initial_positions) / self.n_robots


@dataclass(frozen=True)
class LoopCondition:
    e2e_delay: float
    success_prob: float

    def __post_init__(self):
        if not (self.e2e_delay >= 0 and math.isfinite(self.e2e_delay)):
            raise InvalidConfigError(f"e2e_delay must be >= 0, got {self.e2e_delay}")
        if not (0.0 <= self.success_prob <= 1.0):
            raise InvalidConfigError(f"success_prob must lie in [0, 1], got {self.success_prob}")

    def check_against(self, config: SimConfig) -> None:
        if self.e2e_delay > config.period * (1 + _GRID_TOL):
            raise InvalidConfigError(
                f"e2e_delay {self.e2e_delay} ms exceeds the period {config.period} ms"
            )

    @property
    def is_deterministic(self) -> bool:
        return self.success_prob in (0.0, 1.0)


@dataclass
class Trajectory:
    times: np.ndarray  # (steps,)
    positions: np.ndarray  # (N, steps)
    controls: np.ndarray  # (N, steps), control in force on [t_k, t_k+1)
    consensus_point: float


@dataclass
class DisagreementSeries:
    per_robot_normalized: np.ndarray  # (N, steps); NaN rows for excluded robots
    auc_per_robot: np.ndarray  # (N,); NaN for excluded robots
    auc_mean: float
    included: np.ndarray = field(default=None)  # (N,) bool


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    n_runs: int


def derive_run_seed(seed: int, run_index: int) -> int:
    """Per-run 64-bit seed derived from the base seed and the run index."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(run_index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _delay_offset(config: SimConfig, e2e_delay: float) -> int:
    # Commands land on the first integration point at or after arrival.
    ratio = e2e_delay / config.step
    return int(math.ceil(ratio - _GRID_TOL))


def bernoulli_draw(success_prob: float) -> SuccessDraw:
    def draw(rng: np.random.Generator, n_periods: int, n_robots: int) -> np.ndarray:
        return rng.random((n_periods, n_robots)) < success_prob

    return draw


def simulate_batch(
    config: SimConfig,
    condition: LoopCondition,
    run_seeds: Sequence[int],
    *,
    draw: Optional[SuccessDraw] = None,
    keep_controls: bool = True,
):
    """Simulate several independent runs at once.

    Returns ``(positions, controls)`` shaped ``(steps + 1, runs, N)``;
    ``controls`` is None when ``keep_controls`` is false. Run ``r`` depends
    only on ``run_seeds[r]``, never on the other runs in the batch.
    """
    config.check()
    condition.check_against(config)
    n = config.n_robots
    n_steps = config.n_steps
    per = config.steps_per_period
    offset = _delay_offset(config, condition.e2e_delay)
    n_periods = -(-n_steps // per)
    dt = config.step / 1000.0
    if draw is None:
        draw = bernoulli_draw(condition.success_prob)

    runs = len(run_seeds)
    success = np.empty((n_periods, runs, n), dtype=bool)
    for r, s in enumerate(run_seeds):
        success[:, r, :] = draw(np.random.default_rng(int(s)), n_periods, n)

    x0 = np.asarray(config.initial_positions, dtype=float)
    positions = np.empty((n_steps + 1, runs, n))
    positions[0] = x0
    controls = np.empty((n_steps + 1, runs, n)) if keep_controls else None

    x_hat = np.broadcast_to(x0, (runs, n)).copy()
    applied = np.zeros((runs, n))
    pending = np.zeros((runs, n))
    pending_mask = np.zeros((runs, n), dtype=bool)
    pending_step = -1

    # Event steps: sampling instants and command arrivals. Between two events
    # the applied control is constant, so the Euler recursion is a running sum.
    events = sorted(
        set(range(0, n_steps, per)) | {k + offset for k in range(0, n_steps, per) if k + offset < n_steps}
    )
    events.append(n_steps)
    for idx in range(len(events) - 1):
        k0, k1 = events[idx], events[idx + 1]
        if k0 == pending_step:
            applied = np.where(pending_mask, pending, applied)
            pending_step = -1
        if k0 % per == 0:
            ok = success[k0 // per]
            x_hat = np.where(ok, positions[k0], x_hat)
            total = x_hat.sum(axis=1, keepdims=True)
            u_new = config.gain * (total - n * x_hat)
            if offset == 0:
                applied = np.where(ok, u_new, applied)
            else:
                pending, pending_mask, pending_step = u_new, ok, k0 + offset
        seg = np.empty((k1 - k0 + 1, runs, n))
        seg[0] = positions[k0]
        seg[1:] = dt * applied
        np.cumsum(seg, axis=0, out=seg)
        positions[k0 + 1 : k1 + 1] = seg[1:]
        if keep_controls:
            controls[k0:k1] = applied
    if keep_controls:
        if n_steps == pending_step:
            applied = np.where(pending_mask, pending, applied)
        controls[n_steps] = applied
    return positions, controls


def simulate_run(
    config: SimConfig,
    condition: LoopCondition,
    run_seed: int,
    *,
    draw: Optional[SuccessDraw] = None,
) -> Trajectory:
    """Simulate one run; identical inputs give bit-identical trajectories."""
    positions, controls = simulate_batch(config, condition, [run_seed], draw=draw)
    times = np.arange(config.n_steps + 1) * config.step
    return Trajectory(
        times=times,
        positions=np.ascontiguousarray(positions[:, 0, :].T),
        controls=np.ascontiguousarray(controls[:, 0, :].T),
        consensus_point=config.consensus_point,
    )


def _normalized_rows(positions: np.ndarray, x_c: float):
    delta = positions - x_c
    d0 = delta[:, 0]
    included = d0 != 0.0
    norm = np.full(positions.shape, np.nan)
    norm[included] = delta[included] ** 2 / (d0[included, None] ** 2)
    return norm, included


def _trapezoid_rows(y: np.ndarray, dx: float, horizon: float) -> np.ndarray:
    return dx * (y.sum(axis=1) - 0.5 * (y[:, 0] + y[:, -1])) / horizon


def disagreement_series(traj: Trajectory, horizon: float) -> DisagreementSeries:
    """Normalized squared disagreement and its time-averaged area per robot.

    The area for robot i is ``(1/T) * integral of delta_i(t)^2 / delta_i(0)^2``
    by the trapezoid rule on the stored samples. A robot that never moves and
    never receives a command scores exactly 1.
    """
    if not horizon > 0:
        raise SimulationError("horizon must be positive")
    times = traj.times
    if times[0] != 0 or times[-1] < horizon * (1 - _GRID_TOL):
        raise SimulationError(
            f"trajectory covers [{times[0]}, {times[-1]}] ms, not [0, {horizon}] ms"
        )
    dx = float(times[1] - times[0])
    last = int(round(horizon / dx))
    norm, included = _normalized_rows(traj.positions[:, : last + 1], traj.consensus_point)
    if not included.any():
        raise SimulationError("every robot starts at the consensus point")
    auc = np.full(norm.shape[0], np.nan)
    auc[included] = _trapezoid_rows(norm[included], dx, horizon)
    auc_mean = math.fsum(auc[included]) / int(included.sum())
    return DisagreementSeries(norm, auc, auc_mean, included)


def normalized_auc(positions: np.ndarray, config: SimConfig) -> float:
    """Mean normalized AUC for an ``(N, steps + 1)`` position array."""
    norm, included = _normalized_rows(positions, config.consensus_point)
    if not included.any():
        raise SimulationError("every robot starts at the consensus point")
    auc = _trapezoid_rows(norm[included], config.step, config.horizon)
    return math.fsum(auc) / int(included.sum())


def _mean_stderr(values: Sequence[float]):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def run_aucs(
    config: SimConfig,
    condition: LoopCondition,
    n_runs: int,
    *,
    draw: Optional[SuccessDraw] = None,
) -> list:
    """Per-run mean AUCs, run ``i`` seeded by ``derive_run_seed(config.seed, i)``."""
    seeds = [derive_run_seed(config.seed, i) for i in range(n_runs)]
    out = []
    for start in range(0, n_runs, RUN_CHUNK):
        chunk = seeds[start : start + RUN_CHUNK]
        positions, _ = simulate_batch(config, condition, chunk, draw=draw, keep_controls=False)
        for r in range(len(chunk)):
            out.append(normalized_auc(np.ascontiguousarray(positions[:, r, :].T), config))
    return out


def monte_carlo_auc(
    config: SimConfig,
    condition: LoopCondition,
    n_runs: int,
    *,
    draw: Optional[SuccessDraw] = None,
) -> MonteCarloResult:
    """Mean and standard error of the run-level AUC over ``n_runs`` runs.

    Run seeds depend only on ``config.seed`` and the run index, so two
    conditions evaluated with the same config share their random streams.
    When the loop never or always succeeds no randomness matters: one run is
    simulated and the standard error is exactly zero.
    """
    if int(n_runs) != n_runs or n_runs < 1:
        raise InvalidConfigError(f"n_runs must be a positive integer, got {n_runs}")
    if draw is None and condition.is_deterministic:
        value = run_aucs(config, condition, 1)[0]
        return MonteCarloResult(value, 0.0, int(n_runs))
    mean, stderr = _mean_stderr(run_aucs(config, condition, int(n_runs), draw=draw))
    return MonteCarloResult(mean, stderr, int(n_runs))
