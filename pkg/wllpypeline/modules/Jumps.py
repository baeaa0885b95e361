import logging
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from wllpypeline.helpers import get_logger
from wllpypeline.modules.LocalLinearization import SchemeConfig, step
from wllpypeline.modules.Model import SdeModel, TimeGrid

logger = get_logger(str(os.path.basename(__file__).split(".")[0]), loglevel=logging.WARNING)

#: relative distance below which two times count as the same grid point
TIME_TOL = 1e-14

JumpCoefficientFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _time_tol(t) -> np.ndarray:
    return TIME_TOL * np.maximum(1.0, np.abs(t))


@dataclass(frozen=True)
class JumpSpec:
    """
    Jump channels ``sum_i h_i(t, z) dq_i`` driven by independent Poisson processes with intensities ``mu_i``.
    The coefficients are evaluated on batches, ``h_i(t: (n,), z: (n, d)) -> (n, d)``.
    """
    mu: Tuple[float, ...]
    coefficients: Tuple[JumpCoefficientFn, ...]
    labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        mu = tuple(float(x) for x in self.mu)
        if len(mu) != len(self.coefficients):
            raise ValueError(f"got {len(mu)} intensities for {len(self.coefficients)} jump coefficients")
        if any(not np.isfinite(x) or x < 0 for x in mu):
            raise ValueError(f"jump intensities must be finite and non-negative, got {mu}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(1, len(mu) + 1)))

    @property
    def p(self) -> int:
        return len(self.mu)

    def apply(self, t: np.ndarray, z: np.ndarray, jumped: np.ndarray) -> np.ndarray:
        """
        Adds ``h_i(t, z)`` to the rows of the batch z whose channel i jumped.

        Parameters
        ----------
        t
            times (n,)
        z
            states right before the jump (n, d)
        jumped
            bool array (n, p)

        """
        out = np.array(z, dtype=float)
        for i, coefficient in enumerate(self.coefficients):
            rows = np.flatnonzero(jumped[:, i])
            if rows.size:
                out[rows] += np.asarray(coefficient(t[rows], z[rows]), dtype=float).reshape(rows.size, -1)
        return out


@dataclass(frozen=True)
class JumpSchedule:
    """Sorted jump times of every channel, all in ``(t0, T]``."""
    times: Tuple[np.ndarray, ...]

    @property
    def p(self) -> int:
        return len(self.times)

    @property
    def n_events(self) -> int:
        return int(sum(ch.size for ch in self.times))

    def all_times(self) -> np.ndarray:
        if not self.times:
            return np.empty(0)
        return np.sort(np.concatenate(self.times))

    def indicators(self, grid_times: np.ndarray) -> np.ndarray:
        """
        Returns
        -------
        np.ndarray
            bool array (len(grid_times), p), True where the channel jumps at the grid time

        """
        grid_times = np.asarray(grid_times, dtype=float)
        out = np.zeros((grid_times.size, self.p), dtype=bool)
        for i, channel in enumerate(self.times):
            if channel.size == 0:
                continue
            idx = np.clip(np.searchsorted(grid_times, channel), 1, grid_times.size - 1)
            # a jump time matches the closer one of its two neighbouring grid points
            left_closer = np.abs(grid_times[idx - 1] - channel) < np.abs(grid_times[idx] - channel)
            idx = np.where(left_closer, idx - 1, idx)
            matched = np.abs(grid_times[idx] - channel) <= _time_tol(channel)
            if not np.all(matched):
                raise ValueError(f"jump times of channel {i + 1} are not points of the grid")
            out[idx, i] = True
        return out

    def channels_at(self, t: float) -> List[int]:
        tol = _time_tol(t)
        return [i for i, channel in enumerate(self.times) if np.any(np.abs(channel - t) <= tol)]


def _draw_channel(rate: float, t0: float, T: float, rng: np.random.Generator) -> np.ndarray:
    if rate == 0:
        return np.empty(0)
    times = []
    t = t0
    while True:
        gap = rng.exponential(1.0 / rate)
        if gap < TIME_TOL:
            continue
        t += gap
        if t > T:
            break
        times.append(t)
    return np.array(times, dtype=float)


def _collides(times: np.ndarray, others: Sequence[np.ndarray]) -> bool:
    for other in others:
        if times.size and other.size and np.any(
                np.abs(times[:, None] - other[None, :]) <= _time_tol(times)[:, None]):
            return True
    return False


def sample_jump_times(mu: Sequence[float], t0: float, T: float, rng: np.random.Generator) -> JumpSchedule:
    """
    Samples the jump times of independent Poisson channels on ``(t0, T]`` from exponential inter-arrival gaps.

    Gaps below 1e-14 are re-drawn. A channel whose times coincide with the times of an earlier channel is re-drawn.

    Raises
    ------
    ValueError
        if T <= t0 or an intensity is negative

    """
    if not T > t0:
        raise ValueError(f"empty time span: t0={t0}, T={T}")
    mu = [float(x) for x in mu]
    if any(not np.isfinite(x) or x < 0 for x in mu):
        raise ValueError(f"jump intensities must be finite and non-negative, got {mu}")
    channels = []
    for i, rate in enumerate(mu):
        times = _draw_channel(rate, t0, T, rng)
        while _collides(times, channels):
            logger.debug("Simultaneous jumps in channel %d, re-drawing", i + 1)
            times = _draw_channel(rate, t0, T, rng)
        channels.append(times)
    return JumpSchedule(tuple(channels))


def merged_grid(base: TimeGrid, sched: JumpSchedule) -> TimeGrid:
    """
    Union of the base grid and all jump times. A jump time within 1e-14 (relative) of a base point is merged into
    that base point, so the maximal step never grows.
    """
    jumps = sched.all_times()
    if jumps.size == 0:
        return base
    jumps = jumps[(jumps > base.t0) & (jumps <= base.T + _time_tol(base.T))]
    idx = np.clip(np.searchsorted(base.times, jumps), 1, base.times.size - 1)
    distance = np.minimum(np.abs(base.times[idx] - jumps), np.abs(base.times[idx - 1] - jumps))
    new_points = jumps[distance > _time_tol(jumps)]
    if new_points.size == 0:
        return base
    return TimeGrid(np.union1d(base.times, new_points))


def jump_step(scheme: SchemeConfig, model: SdeModel, jumps: JumpSpec, sched: JumpSchedule, t_prev: float, t: float,
              z_prev: np.ndarray, rng: Optional[np.random.Generator], xi: Optional[np.ndarray] = None) -> np.ndarray:
    """
    LL step over ``[t_prev, t]`` followed by the jumps of the channels that jump at t,
    ``z = z_- + sum_i h_i(t, z_-)``.

    The interval must not contain interior jump times, which holds on a :func:`merged_grid`.
    """
    z_minus = step(scheme, model, t_prev, z_prev, t - t_prev, rng, xi)
    channels = sched.channels_at(t)
    if not channels:
        return z_minus
    jumped = np.zeros((1, jumps.p), dtype=bool)
    jumped[0, channels] = True
    return jumps.apply(np.array([t]), np.atleast_2d(z_minus), jumped)[0]
