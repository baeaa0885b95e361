"""
Monte Carlo estimation of weak errors ``|E g(x(T)) - E g(y_N)|`` and empirical convergence orders.

Random streams
--------------
Trajectories are simulated in blocks of ``McPlan.block_size``. Trajectory k belongs to block ``b = k // block_size``
and uses row ``k % block_size`` of the block's draws. Every block owns the generators

- ``PCG64(SeedSequence(seed, spawn_key=(stream, b, 0)))`` for the step noise. Each step draws a full
  ``(block_size, k)`` array, so a partial last block sees the same numbers as a full one,
- ``PCG64(SeedSequence(seed, spawn_key=(stream, b, 1)))`` for the initial values,
- ``PCG64(SeedSequence(seed, spawn_key=(stream, b, 2, r)))`` for the jump times of row r,

where ``stream`` is the index of the step size in the plan (:data:`REFERENCE_STREAM` for fine-grid references).
Results therefore do not depend on the number of worker threads, and blocks are concatenated in index order before
any reduction.
"""
import logging
import os
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.random import PCG64, Generator, SeedSequence
from scipy import stats

from wllpypeline.helpers import get_logger
from wllpypeline.modules.Catalog import ReferenceStatistics, ReferenceUnavailableError
from wllpypeline.modules.Jumps import JumpSchedule, JumpSpec, jump_step, merged_grid, sample_jump_times
from wllpypeline.modules.LinAlg import PadeConfig
from wllpypeline.modules.LocalLinearization import SchemeConfig, draw_noise, increment, noise_dimension, step
from wllpypeline.modules.Model import InitialLaw, SdeModel, TestFunctional, TimeGrid

logger = get_logger(str(os.path.basename(__file__).split(".")[0]))

BLOCK_SIZE = 1024
REFERENCE_STREAM = 2 ** 20
#: a fine-grid reference step is at most min(step_sizes) / 16
MIN_REFERENCE_DIVISOR = 16
#: errors at most this many standard errors are excluded from slope fits
NOISE_FLOOR = 3.0
_NOISE_KEY, _INITIAL_KEY, _JUMP_KEY = 0, 1, 2


class NonFiniteStateError(ArithmeticError):
    pass


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class McPlan:
    """
    Plan of a Monte Carlo convergence study.

    Attributes
    ----------
    step_sizes
        strictly decreasing step sizes
    samples
        number of trajectories N per step size, at least 100
    seed
        master seed
    functionals
        test functionals evaluated on the same terminal samples
    reference
        ``analytic`` or ``fine-grid``
    reference_samples
        trajectories of a fine-grid reference, at least 4 N, 4 N if None
    reference_divisor
        the fine-grid reference uses the step ``min(step_sizes) / reference_divisor``, at least 16
    threads
        number of worker threads
    block_size
        trajectories per random stream block

    """
    step_sizes: Tuple[float, ...]
    samples: int
    seed: int
    functionals: Tuple[TestFunctional, ...]
    reference: str = "analytic"
    reference_samples: Optional[int] = None
    reference_divisor: int = 16
    threads: int = 1
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        steps = tuple(float(h) for h in self.step_sizes)
        object.__setattr__(self, "step_sizes", steps)
        object.__setattr__(self, "functionals", tuple(self.functionals))
        if not steps:
            raise ValueError("a plan needs at least one step size")
        if any(not h > 0 for h in steps):
            raise ValueError(f"step sizes must be positive, got {steps}")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ValueError(f"step sizes must be strictly decreasing, got {steps}")
        if self.samples < 100:
            raise ValueError(f"samples should be at least 100, got {self.samples}")
        if not self.functionals:
            raise ValueError("a plan needs at least one functional")
        if self.reference not in ("analytic", "fine-grid"):
            raise ValueError(f"reference should be one of: analytic, fine-grid, got '{self.reference}'")
        if self.reference_divisor < MIN_REFERENCE_DIVISOR:
            raise ValueError(f"reference_divisor should be at least {MIN_REFERENCE_DIVISOR}, "
                             f"got {self.reference_divisor}")
        if self.reference_samples is not None and self.reference_samples < 4 * self.samples:
            raise ValueError(f"reference_samples should be at least 4 * samples = {4 * self.samples}, "
                             f"got {self.reference_samples}")
        if self.threads < 1 or self.block_size < 1:
            raise ValueError("threads and block_size must be positive")

    def check_span(self, model: SdeModel):
        span = model.T - model.t0
        too_large = [h for h in self.step_sizes if h > span * (1 + 1e-12)]
        if too_large:
            raise ValueError(f"step sizes {too_large} exceed the time span {span} of model {model.name}")

    @property
    def n_reference_samples(self) -> int:
        return self.reference_samples if self.reference_samples is not None else 4 * self.samples


class OrderFit(NamedTuple):
    slope: float
    intercept: float
    half_width: float
    n_points: int
    #: ``ok``, ``noise-floor`` (no point above the noise floor) or ``insufficient-points``
    status: str


@dataclass
class WeakErrorReport:
    """
    Weak errors of one scheme: ``table`` has one row per (h, functional) with the columns scheme, functional, h,
    error, stderr, n, estimate, reference, reference_stderr. ``fits`` maps functional labels to their
    :class:`OrderFit`.
    """
    scheme: str
    table: pd.DataFrame
    fits: Dict[str, OrderFit] = field(default_factory=dict)

    csv_columns = ["scheme", "functional", "h", "error", "stderr", "n", "estimate", "reference", "reference_stderr"]

    def summary(self) -> pd.DataFrame:
        rows = [dict(scheme=self.scheme, functional=label, **fit._asdict()) for label, fit in self.fits.items()]
        return pd.DataFrame(rows, columns=["scheme", "functional", "slope", "intercept", "half_width", "n_points",
                                           "status"])

    def to_csv(self, path: str):
        self.table[self.csv_columns].to_csv(path, index=False, float_format="%.17g")


@dataclass
class LocalOrderReport:
    """``table`` with the columns h, phi_error, sigma_error and the log-log fits of both error columns."""
    table: pd.DataFrame
    phi_fit: OrderFit
    sigma_fit: OrderFit


def block_generator(seed: int, stream: int, block: int, *key: int) -> Generator:
    return Generator(PCG64(SeedSequence(seed, spawn_key=(stream, block) + tuple(key))))


def _simulate_block(scheme: SchemeConfig, model: SdeModel, grids: Sequence[np.ndarray], x0: np.ndarray,
                    noise_rng: Generator, block_size: int, jumps: Optional[JumpSpec] = None,
                    indicators: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    n = len(grids)
    length = max(g.size for g in grids)
    times = np.empty((n, length))
    for r, g in enumerate(grids):
        times[r, :g.size] = g
        times[r, g.size:] = g[-1]
    jumped = None
    if jumps is not None:
        jumped = np.zeros((n, length, jumps.p), dtype=bool)
        for r, ind in enumerate(indicators):
            jumped[r, :ind.shape[0]] = ind
    k = noise_dimension(scheme, model)
    y = np.array(x0, dtype=float)
    for j in range(length - 1):
        xi = draw_noise(scheme.noise, (block_size, k), noise_rng)[:n]
        t_prev, t_next = times[:, j], times[:, j + 1]
        h = t_next - t_prev
        active = h > 0
        if active.all():
            y = step(scheme, model, t_prev, y, h, None, xi)
        elif active.any():
            rows = np.flatnonzero(active)
            y[rows] = step(scheme, model, t_prev[rows], y[rows], h[rows], None, xi[rows])
        if jumped is not None and jumped[:, j + 1].any():
            y = jumps.apply(t_next, y, jumped[:, j + 1] & active[:, None])
        if not np.all(np.isfinite(y)):
            bad = np.flatnonzero(~np.all(np.isfinite(y), axis=1))[0]
            raise NonFiniteStateError(f"scheme {scheme.name} produced a non-finite state at t={t_next[bad]:.6g} "
                                      f"(step {j + 1}) on model {model.name}")
    return y


def simulate_terminal(scheme: SchemeConfig, model: SdeModel, grid: TimeGrid, rng: Generator, x0,
                      jumps: Optional[JumpSpec] = None, schedule: Optional[JumpSchedule] = None) -> np.ndarray:
    """
    Iterates the scheme over all intervals of the grid and returns the terminal state.

    Parameters
    ----------
    scheme
        scheme configuration
    model
        the SDE
    grid
        time grid covering ``[t0, T]``
    rng
        random generator of the trajectory
    x0
        initial state
    jumps
        jump channels, the scheme is then applied on the grid merged with the jump times
    schedule
        jump times, sampled from rng before the first step if None

    Raises
    ------
    NonFiniteStateError
        if a state becomes non-finite

    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if jumps is None:
        return _simulate_block(scheme, model, [grid.times], x0, rng, 1)[0]
    if schedule is None:
        schedule = sample_jump_times(jumps.mu, grid.t0, grid.T, rng)
    merged = merged_grid(grid, schedule)
    return _simulate_block(scheme, model, [merged.times], x0, rng, 1, jumps,
                           [schedule.indicators(merged.times)])[0]


def simulate_path(scheme: SchemeConfig, model: SdeModel, grid: TimeGrid, rng: Generator, x0,
                  jumps: Optional[JumpSpec] = None, schedule: Optional[JumpSchedule] = None
                  ) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, ...]]]:
    """
    One sample path.

    Returns
    -------
    tuple
        the grid times (n,), the states (n, d) and, per time, the tuple of (1-based) channels that jumped

    """
    y = np.asarray(x0, dtype=float).reshape(model.d)
    if jumps is not None and schedule is None:
        schedule = sample_jump_times(jumps.mu, grid.t0, grid.T, rng)
    if jumps is not None:
        grid = merged_grid(grid, schedule)
    states = [y]
    channels = [()]
    for t_prev, t in grid.intervals():
        if jumps is None:
            y = step(scheme, model, t_prev, y, t - t_prev, rng)
            channels.append(())
        else:
            y = jump_step(scheme, model, jumps, schedule, t_prev, t, y, rng)
            channels.append(tuple(i + 1 for i in schedule.channels_at(t)))
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(f"scheme {scheme.name} produced a non-finite state at t={t:.6g}")
        states.append(y)
    return grid.times, np.array(states), channels


def run_ensemble(scheme: SchemeConfig, model: SdeModel, initial_law: InitialLaw, h: float, samples: int, seed: int,
                 stream: int, jumps: Optional[JumpSpec] = None, executor: Optional[Executor] = None,
                 block_size: int = BLOCK_SIZE) -> np.ndarray:
    """
    Terminal states (samples, d) of independent trajectories with step h, ordered by trajectory index.
    """
    base = TimeGrid.uniform(model.t0, model.T, h)
    n_blocks = -(-samples // block_size)

    def run_block(b: int) -> np.ndarray:
        n = min(block_size, samples - b * block_size)
        x0 = initial_law.draw(block_generator(seed, stream, b, _INITIAL_KEY), n)
        noise_rng = block_generator(seed, stream, b, _NOISE_KEY)
        if jumps is None:
            return _simulate_block(scheme, model, [base.times] * n, x0, noise_rng, block_size)
        grids, indicators = [], []
        for r in range(n):
            schedule = sample_jump_times(jumps.mu, base.t0, base.T, block_generator(seed, stream, b, _JUMP_KEY, r))
            merged = merged_grid(base, schedule)
            grids.append(merged.times)
            indicators.append(schedule.indicators(merged.times))
        return _simulate_block(scheme, model, grids, x0, noise_rng, block_size, jumps, indicators)

    if executor is None:
        blocks = [run_block(b) for b in range(n_blocks)]
    else:
        blocks = list(executor.map(run_block, range(n_blocks)))
    return np.concatenate(blocks, axis=0)


def fit_order(points: Iterable[Tuple[float, float]]) -> Tuple[float, float, float]:
    """
    Ordinary least squares fit of ``log(error) = intercept + slope log(h)``.

    Parameters
    ----------
    points
        (h, error) pairs with positive entries

    Returns
    -------
    tuple
        slope, intercept and the half-width of the 95% confidence interval of the slope

    Raises
    ------
    InsufficientPointsError
        if fewer than 3 points are given

    """
    points = [(float(h), float(e)) for h, e in points]
    if len(points) < 3:
        raise InsufficientPointsError(f"need at least 3 points for an order fit, got {len(points)}")
    h, e = np.array(points).T
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("step sizes and errors must be positive for a log-log fit")
    res = stats.linregress(np.log(h), np.log(e))
    half_width = stats.t.ppf(0.975, len(points) - 2) * res.stderr
    return float(res.slope), float(res.intercept), float(half_width)


def fit_with_noise_floor(h: Sequence[float], errors: Sequence[float], stderrs: Sequence[float],
                         floor: float = NOISE_FLOOR) -> OrderFit:
    """
    Order fit over the points whose error exceeds ``floor`` standard errors.
    """
    h, errors, stderrs = (np.asarray(a, dtype=float) for a in (h, errors, stderrs))
    usable = errors > floor * stderrs
    if not usable.all():
        logger.debug("Excluded step sizes %s at the noise floor from the order fit", h[~usable].tolist())
    n_usable = int(usable.sum())
    if n_usable == 0:
        return OrderFit(np.nan, np.nan, np.nan, 0, "noise-floor")
    if n_usable < 3:
        return OrderFit(np.nan, np.nan, np.nan, n_usable, "insufficient-points")
    slope, intercept, half_width = fit_order(zip(h[usable], errors[usable]))
    return OrderFit(slope, intercept, half_width, n_usable, "ok")


def _executor(threads: int, executor: Optional[Executor]):
    if executor is not None or threads <= 1:
        return executor, None
    pool = ThreadPoolExecutor(max_workers=threads)
    return pool, pool


def fine_grid_reference(plan: McPlan, model: SdeModel, initial_law: InitialLaw, jumps: Optional[JumpSpec] = None,
                        executor: Optional[Executor] = None, scheme: Optional[SchemeConfig] = None,
                        loglevel=logging.INFO) -> ReferenceStatistics:
    """
    Self-reference from a fine-step run of the beta = 2 pade-general scheme with step
    ``min(step_sizes) / reference_divisor`` and ``reference_samples`` trajectories. The expectations carry their Monte
    Carlo standard errors.
    """
    local_logger = get_logger("WeakError", loglevel)
    scheme = scheme or SchemeConfig("pade-general", beta=2, label="reference")
    h_ref = min(plan.step_sizes) / plan.reference_divisor
    n_ref = plan.n_reference_samples
    local_logger.info("Computing fine-grid reference of %s with h=%.6g and N=%d", model.name, h_ref, n_ref)
    executor, pool = _executor(plan.threads, executor)
    try:
        terminal = run_ensemble(scheme, model, initial_law, h_ref, n_ref, plan.seed, REFERENCE_STREAM, jumps,
                                executor, plan.block_size)
    finally:
        if pool is not None:
            pool.shutdown()
    expectations, stderr = {}, {}
    for functional in plan.functionals:
        values = functional(terminal)
        expectations[functional.label] = float(values.mean())
        stderr[functional.label] = float(values.std(ddof=1) / np.sqrt(values.size))
    return ReferenceStatistics("fine-grid", expectations, stderr, mean=terminal.mean(axis=0))


def estimate_weak_error(plan: McPlan, scheme: SchemeConfig, model: SdeModel, initial_law: InitialLaw,
                        reference: ReferenceStatistics, jumps: Optional[JumpSpec] = None,
                        executor: Optional[Executor] = None, loglevel=logging.INFO) -> WeakErrorReport:
    """
    Weak errors of a scheme for every step size and functional of the plan.

    | The error is ``|mean_N g(y_N) - reference|`` with the Monte Carlo standard error ``std(g(y_N)) / sqrt(N)``.
      Independent streams are used for every step size and for the reference.
    | The slope fit of a functional only uses errors above 3 combined standard errors (Monte Carlo error and
      reference error).

    Parameters
    ----------
    plan
        the Monte Carlo plan
    scheme
        the scheme to assess
    model
        the SDE
    initial_law
        law of the initial value
    reference
        reference statistics; a ``fine-grid`` reference without values is computed with :func:`fine_grid_reference`
    jumps
        optional jump channels
    executor
        executor for the trajectory blocks, a thread pool with ``plan.threads`` workers is used if None
    loglevel
        level of the logger

    Returns
    -------
    WeakErrorReport
        errors and fits

    Raises
    ------
    ReferenceUnavailableError
        if the reference has no value for a functional of the plan
    NonFiniteStateError
        if a trajectory diverges

    """
    local_logger = get_logger("WeakError", loglevel)
    scheme.check_model(model)
    plan.check_span(model)
    executor, pool = _executor(plan.threads, executor)
    try:
        if reference.kind == "fine-grid" and not reference.available:
            reference = fine_grid_reference(plan, model, initial_law, jumps, executor, loglevel=loglevel)
        references = {f.label: reference.expectation(f.label) for f in plan.functionals}
        rows = []
        for i, h in enumerate(plan.step_sizes):
            local_logger.info("Simulating %s on %s with h=%.6g and N=%d", scheme.name, model.name, h, plan.samples)
            terminal = run_ensemble(scheme, model, initial_law, h, plan.samples, plan.seed, i, jumps, executor,
                                    plan.block_size)
            for functional in plan.functionals:
                values = functional(terminal)
                estimate = float(values.mean())
                ref, ref_se = references[functional.label]
                rows.append(dict(scheme=scheme.name, functional=functional.label, h=h,
                                 error=abs(estimate - ref), stderr=float(values.std(ddof=1) / np.sqrt(values.size)),
                                 n=plan.samples, estimate=estimate, reference=ref, reference_stderr=ref_se))
    finally:
        if pool is not None:
            pool.shutdown()
    table = pd.DataFrame(rows, columns=WeakErrorReport.csv_columns)
    fits = {}
    for label, sub in table.groupby("functional", sort=False):
        combined = np.sqrt(sub["stderr"] ** 2 + sub["reference_stderr"] ** 2)
        fits[label] = fit_with_noise_floor(sub["h"], sub["error"], combined)
        local_logger.info("%s, %s: slope %.3f +- %.3f (%s, %d points)", scheme.name, label, fits[label].slope,
                          fits[label].half_width, fits[label].status, fits[label].n_points)
    return WeakErrorReport(scheme.name, table, fits)


def estimate_local_order(scheme: SchemeConfig, model: SdeModel, t: float, y, step_sizes: Sequence[float],
                         reference_scheme: Optional[SchemeConfig] = None, tol: float = 1e-15) -> LocalOrderReport:
    """
    Local errors ``max|phi - phi_ref|`` and ``max|Sigma - Sigma_ref|`` of one step from ``(t, y)`` for every step size,
    against the beta-matching pade-general scheme with (6, 6) Padé approximants unless a reference scheme is given.
    Errors below ``tol`` are left out of the fits.
    """
    reference_scheme = reference_scheme or SchemeConfig("pade-general", beta=scheme.beta, pade=PadeConfig(6, 6))
    rows = []
    for h in step_sizes:
        inc = increment(scheme, model, t, y, h)
        ref = increment(reference_scheme, model, t, y, h)
        rows.append(dict(h=float(h), phi_error=float(np.abs(inc.phi - ref.phi).max()),
                         sigma_error=float(np.abs(inc.sigma - ref.sigma).max())))
    table = pd.DataFrame(rows, columns=["h", "phi_error", "sigma_error"])

    def fit(column: str) -> OrderFit:
        return fit_with_noise_floor(table["h"], table[column], np.full(len(table), tol), floor=1.0)

    return LocalOrderReport(table, fit("phi_error"), fit("sigma_error"))
