import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from wllpypeline.helpers import get_logger


class ModelError(ValueError):
    pass


StateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SdeModel:
    """
    | Coefficients of an SDE with additive noise ``dx = f(t, x) dt + G(t) dw`` on ``[t0, T]``, together with the
      derivatives the local linearization schemes need.
    | All callbacks are evaluated on batches: ``t`` has shape (n,), ``x`` shape (n, d). Callbacks written for a single
      state can be wrapped with :meth:`from_pointwise`. Callbacks must be pure functions, they are called concurrently.

    Attributes
    ----------
    f
        drift, ``f(t, x) -> (n, d)``
    f_x
        Jacobian of the drift, ``f_x(t, x) -> (n, d, d)``
    f_t
        partial time derivative of the drift, ``f_t(t, x) -> (n, d)``
    hess_quad
        ``hess_quad(t, x, g) -> (n, d)`` the Hessian of every drift component contracted twice with the column g,
        i.e. ``(I kron g^T) f_xx g``
    G
        diffusion matrix, ``G(t) -> (n, d, m)``
    dG
        time derivatives of the diffusion, ``dG(t, order) -> (n, d, m)`` with ``dG(t, 0) == G(t)``

    """
    name: str
    d: int
    m: int
    f: StateFn
    f_x: StateFn
    f_t: StateFn
    hess_quad: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    dG: Callable[[np.ndarray, int], np.ndarray]
    t0: float = 0.0
    T: float = 1.0
    autonomous: bool = False
    constant_diffusion: bool = False
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ModelError(f"dimensions must be positive, got d={self.d}, m={self.m}")
        if not self.T > self.t0:
            raise ModelError(f"time span is empty: t0={self.t0}, T={self.T}")

    @classmethod
    def from_pointwise(cls, name: str, d: int, m: int, f, f_x, f_t, hess_quad, G, dG, **kwargs) -> "SdeModel":
        """
        Builds a model from callbacks that evaluate a single state, e.g. ``f(t: float, x: (d,)) -> (d,)``.
        The wrappers loop over the batch.
        """
        def state_fn(fn):
            return lambda t, x: np.stack([np.asarray(fn(ti, xi), dtype=float) for ti, xi in zip(t, x)])

        def hess_fn(t, x, g):
            return np.stack([np.asarray(hess_quad(ti, xi, gi), dtype=float) for ti, xi, gi in zip(t, x, g)])

        def diffusion(t):
            return np.stack([np.asarray(G(ti), dtype=float).reshape(d, m) for ti in t])

        def diffusion_derivative(t, order):
            return np.stack([np.asarray(dG(ti, order), dtype=float).reshape(d, m) for ti in t])

        return cls(name=name, d=d, m=m, f=state_fn(f), f_x=state_fn(f_x), f_t=state_fn(f_t), hess_quad=hess_fn,
                   G=diffusion, dG=diffusion_derivative, **kwargs)

    def hessian_term(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        """``sum_j (I kron g_j^T) f_xx g_j`` over the diffusion columns g_j(t), shape (n, d)."""
        G = self.G(t)
        return sum(self.hess_quad(t, x, G[:, :, j]) for j in range(self.m))


@dataclass(frozen=True)
class InitialLaw:
    """
    Law of the initial value: either a deterministic point or a sampler ``sampler(rng, n) -> (n, d)``.
    A deterministic point consumes no random numbers.
    """
    point: Optional[np.ndarray] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self):
        if (self.point is None) == (self.sampler is None):
            raise ModelError("initial law needs exactly one of point and sampler")
        if self.point is not None:
            point = np.atleast_1d(np.asarray(self.point, dtype=float))
            if point.ndim != 1 or not np.all(np.isfinite(point)):
                raise ModelError(f"initial point should be a finite vector, got {self.point}")
            object.__setattr__(self, "point", point)

    def draw(self, rng: Optional[np.random.Generator], n: int) -> np.ndarray:
        if self.point is not None:
            return np.tile(self.point, (n, 1))
        return np.asarray(self.sampler(rng, n), dtype=float).reshape(n, -1)


@dataclass(frozen=True)
class TestFunctional:
    """Test function ``g`` of the terminal state, evaluated on a batch of states (n, d) -> (n,)."""
    __test__ = False  # not a pytest class
    g: Callable[[np.ndarray], np.ndarray]
    label: str

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.g(np.atleast_2d(x)), dtype=float)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing discretization times ``t_0 < ... < t_N``."""
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time grid needs at least two times")
        if not np.all(np.diff(times) > 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, t0: float, T: float, h: float) -> "TimeGrid":
        """
        Grid with step h starting at t0. If ``(T - t0) / h`` is not an integer the last step is shorter.

        Raises
        ------
        ValueError
            if h is not positive or larger than ``T - t0``

        """
        span = T - t0
        if not h > 0:
            raise ValueError(f"step size should be positive, got {h}")
        if h > span * (1 + 1e-12):
            raise ValueError(f"step size {h} is larger than the time span {span}")
        n = max(int(np.ceil(span / h - 1e-9)), 1)
        times = t0 + h * np.arange(n + 1, dtype=float)
        times[-1] = T
        return cls(times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def max_step(self) -> float:
        return float(np.diff(self.times).max())

    def intervals(self) -> Iterator[Tuple[float, float]]:
        for t_prev, t in zip(self.times[:-1], self.times[1:]):
            yield float(t_prev), float(t)


class ModelViolation(NamedTuple):
    check: str
    t: float
    x: Tuple[float, ...]
    error: float


def sample_probe_points(model: SdeModel, n: int, rng: np.random.Generator, radius: float = 2.0
                        ) -> List[Tuple[float, np.ndarray]]:
    """Uniformly sampled probe points, times in ``[t0, T]`` and states in ``[-radius, radius]^d``."""
    ts = rng.uniform(model.t0, model.T, size=n)
    xs = rng.uniform(-radius, radius, size=(n, model.d))
    return list(zip(ts, xs))


def validate_model(model: SdeModel, probes: Optional[Sequence[Tuple[float, np.ndarray]]] = None,
                   fd_tol: float = 1e-5, rng: Optional[np.random.Generator] = None, n_probes: int = 20,
                   loglevel=logging.WARNING) -> List[ModelViolation]:
    """
    Checks the derivative callbacks of a model against finite differences.

    | Central differences of f confirm f_x and f_t, the directional second difference along every diffusion column
      confirms hess_quad, the central difference of G in time confirms dG(., 1), and dG(., 0) must equal G.
    | A check fails at a probe if its absolute error exceeds ``fd_tol * max(1, |analytic value|)``.

    Parameters
    ----------
    model
        the model to check
    probes
        list of (t, x) points. If None, n_probes points are sampled with :func:`sample_probe_points`
    fd_tol
        tolerance of the checks
    rng
        random generator for the probe sampling, seeded with 0 if None
    n_probes
        number of probes that are sampled if probes is None
    loglevel
        level of the module logger

    Returns
    -------
    list
        the :class:`ModelViolation` records, empty if every check passed. This function never raises for failed
        checks.

    """
    logger = get_logger("Model", loglevel)
    if probes is None:
        probes = sample_probe_points(model, n_probes, np.random.default_rng(0) if rng is None else rng)
    t = np.array([float(p[0]) for p in probes])
    x = np.array([np.asarray(p[1], dtype=float).reshape(model.d) for p in probes])
    n, d = x.shape
    violations = []

    def record(check: str, analytic: np.ndarray, numeric: np.ndarray):
        axes = tuple(range(1, analytic.ndim))
        error = np.abs(analytic - numeric).max(axis=axes)
        scale = np.maximum(1.0, np.abs(analytic).max(axis=axes))
        for i in np.flatnonzero(~(error <= fd_tol * scale)):
            violations.append(ModelViolation(check, float(t[i]), tuple(x[i]), float(error[i])))

    f0 = model.f(t, x)
    eps_x = 1e-6 * (1.0 + np.abs(x).max(axis=1))
    jac = np.empty((n, d, d))
    for k in range(d):
        shift = np.zeros((n, d))
        shift[:, k] = eps_x
        jac[:, :, k] = (model.f(t, x + shift) - model.f(t, x - shift)) / (2 * eps_x[:, None])
    record("f_x", model.f_x(t, x), jac)

    eps_t = 1e-6 * (1.0 + np.abs(t))
    record("f_t", model.f_t(t, x), (model.f(t + eps_t, x) - model.f(t - eps_t, x)) / (2 * eps_t[:, None]))

    G = model.G(t)
    for j in range(model.m):
        g = G[:, :, j]
        g_size = np.abs(g).max(axis=1)
        nonzero = g_size > 0
        if not np.any(nonzero):
            continue
        tn, xn, gn = t[nonzero], x[nonzero], g[nonzero]
        eps = 1e-4 / g_size[nonzero]
        step = eps[:, None] * gn
        second = (model.f(tn, xn + step) - 2 * f0[nonzero] + model.f(tn, xn - step)) / eps[:, None] ** 2
        analytic = model.hess_quad(tn, xn, gn)
        error = np.abs(analytic - second).max(axis=1)
        scale = np.maximum(1.0, np.abs(analytic).max(axis=1))
        for i, idx in enumerate(np.flatnonzero(nonzero)):
            if not error[i] <= fd_tol * scale[i]:
                violations.append(ModelViolation("hess_quad", float(t[idx]), tuple(x[idx]), float(error[i])))

    record("dG0", model.dG(t, 0), G)
    record("dG1", model.dG(t, 1), (model.G(t + eps_t) - model.G(t - eps_t)) / (2 * eps_t[:, None, None]))

    for v in violations:
        logger.warning("Model %s failed the %s check at t=%.4g with error %.3g", model.name, v.check, v.t, v.error)
    logger.debug("Validated model %s at %d probe points, %d violations", model.name, n, len(violations))
    return violations
