"""
Built-in test problems with known (or self-computed) weak statistics.

The problems and their default parameters:

==================  ==================================================================  ==================
name                SDE                                                                 reference
==================  ==================================================================  ==================
``ou-1d``           ``dx = a x dt + sigma dw``                                          analytic
``ou-nd``           ``dx = A x dt + sigma dw`` with a stable, non-normal d x d matrix A  analytic
``pendulum-sin``    ``dx = (-lam x + sin(x)) dt + sigma dw``                            kolmogorov
``time-dep-g``      ``dx = (A x + c sin(t)) dt + G(t) dw`` with d = m = 2               analytic
``jump-ou``         ``dz = a z dt + sigma dw + c dq``, Poisson intensity mu             analytic
``pendulum-jumps``  ``pendulum-sin`` plus a constant jump channel                       kolmogorov
==================  ==================================================================  ==================

The reference statistics of the linear problems are evaluated with :func:`scipy.linalg.expm` and adaptive quadrature,
independent of the exponential kernels of the schemes. The pendulum references solve the backward Kolmogorov equation
of the scalar problem on a fine grid (:func:`kolmogorov_expectations`), computed on first access and cached per
parameter set.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np
from scipy import integrate, linalg, sparse

from wllpypeline.modules.Jumps import JumpSpec
from wllpypeline.modules.Model import InitialLaw, ModelError, SdeModel, TestFunctional


class ReferenceUnavailableError(ValueError):
    pass


@dataclass
class ReferenceStatistics:
    """
    Reference values of ``E g(x(T))`` per functional label.

    ``kind`` is ``"analytic"`` for closed forms (standard error 0), ``"kolmogorov"`` for the deterministic solution of
    the backward equation (the error estimate of its grid extrapolation takes the place of the standard error) or
    ``"fine-grid"`` for Monte Carlo estimates of a fine-step reference run, which carry their standard error.
    Values may be supplied lazily by ``loader``, which is called once on first access.
    """
    kind: str
    expectations: Dict[str, float] = field(default_factory=dict)
    stderr: Dict[str, float] = field(default_factory=dict)
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None
    loader: Optional[Callable[[], Tuple[Dict[str, float], Dict[str, float]]]] = field(
        default=None, repr=False, compare=False)

    def _load(self):
        if self.loader is not None:
            expectations, stderr = self.loader()
            self.loader = None
            self.expectations.update(expectations)
            self.stderr.update(stderr)

    def covers(self, label: str) -> bool:
        self._load()
        return label in self.expectations

    def expectation(self, label: str):
        """
        Returns
        -------
        tuple
            the reference value and its standard error

        Raises
        ------
        ReferenceUnavailableError
            if no reference value is stored for label

        """
        if not self.covers(label):
            raise ReferenceUnavailableError(
                f"No {self.kind} reference for functional '{label}', available: {sorted(self.expectations)}")
        return self.expectations[label], self.stderr.get(label, 0.0)

    @property
    def available(self) -> bool:
        return self.loader is not None or bool(self.expectations)


#: catalog of test functionals addressable by label
FUNCTIONALS: Dict[str, TestFunctional] = {
    "x1": TestFunctional(lambda x: x[:, 0], "x1"),
    "x1^2": TestFunctional(lambda x: x[:, 0] ** 2, "x1^2"),
    "sum": TestFunctional(lambda x: x.sum(axis=1), "sum"),
    "sum_sq": TestFunctional(lambda x: (x ** 2).sum(axis=1), "sum_sq"),
    "cos_x1": TestFunctional(lambda x: np.cos(x[:, 0]), "cos_x1"),
}


def builtin_functional(label: str) -> TestFunctional:
    try:
        return FUNCTIONALS[label]
    except KeyError:
        raise ModelError(f"Unknown functional '{label}', should be one of: {', '.join(FUNCTIONALS)}") from None


def gaussian_reference(mean: np.ndarray, cov: np.ndarray) -> ReferenceStatistics:
    """Analytic expectations of every catalog functional under ``N(mean, cov)``."""
    mean, cov = np.asarray(mean, dtype=float), np.asarray(cov, dtype=float)
    expectations = {
        "x1": mean[0],
        "x1^2": cov[0, 0] + mean[0] ** 2,
        "sum": mean.sum(),
        "sum_sq": np.trace(cov) + mean @ mean,
        "cos_x1": np.cos(mean[0]) * np.exp(-cov[0, 0] / 2),
    }
    return ReferenceStatistics("analytic", {k: float(v) for k, v in expectations.items()}, mean=mean, cov=cov)


def linear_gaussian_moments(A: np.ndarray, x0: np.ndarray, t0: float, T: float,
                            G: Callable[[float], np.ndarray],
                            forcing: Optional[Callable[[float], np.ndarray]] = None,
                            constant_g: bool = False):
    """
    Mean and covariance at T of ``dx = (A x + forcing(t)) dt + G(t) dw``, ``x(t0) = x0``.

    For constant G the covariance is read off the Van Loan block exponential, otherwise both integrals are evaluated
    with :func:`scipy.integrate.quad_vec`.
    """
    d = A.shape[0]
    span = T - t0
    mean = linalg.expm(A * span) @ x0
    if forcing is not None:
        mean = mean + integrate.quad_vec(lambda s: linalg.expm(A * (T - s)) @ forcing(s), t0, T,
                                         epsabs=1e-13, epsrel=1e-12)[0]
    if constant_g:
        GGT = G(t0) @ G(t0).T
        block = np.block([[-A, GGT], [np.zeros((d, d)), A.T]])
        E = linalg.expm(block * span)
        cov = E[d:, d:].T @ E[:d, d:]
    else:
        def integrand(s):
            Phi = linalg.expm(A * (T - s))
            Gs = G(s)
            return (Phi @ Gs @ Gs.T @ Phi.T).ravel()
        cov = integrate.quad_vec(integrand, t0, T, epsabs=1e-13, epsrel=1e-12)[0].reshape(d, d)
    return mean, (cov + cov.T) / 2


class JumpCoefficient(NamedTuple):
    description: str
    build: Callable[[float], Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _constant_jump(c: float):
    return lambda t, z: np.full(np.shape(z), float(c))


def _proportional_jump(c: float):
    return lambda t, z: float(c) * np.asarray(z, dtype=float)


#: jump coefficient families addressable from configuration files, built from a single scale c
JUMP_COEFFICIENTS: Dict[str, JumpCoefficient] = {
    "constant": JumpCoefficient("h(t, z) = c", _constant_jump),
    "proportional": JumpCoefficient("h(t, z) = c z", _proportional_jump),
}


def jump_coefficient(name: str, c: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    try:
        return JUMP_COEFFICIENTS[name].build(c)
    except KeyError:
        raise ModelError(f"Unknown jump coefficient '{name}', should be one of: {', '.join(JUMP_COEFFICIENTS)}"
                         ) from None


def _interpolation_matrix(x: np.ndarray, targets: np.ndarray) -> sparse.csr_matrix:
    """Cubic Lagrange interpolation from the uniform grid x to targets, clamped to the grid ends."""
    n = x.size
    s = np.clip((targets - x[0]) / (x[1] - x[0]), 0.0, n - 1.0)
    first = np.clip(np.floor(s).astype(int) - 1, 0, n - 4)
    theta = s - first
    weights = np.ones((targets.size, 4))
    for node in range(4):
        for other in range(4):
            if other != node:
                weights[:, node] *= (theta - other) / (node - other)
    rows = np.repeat(np.arange(targets.size), 4)
    cols = (first[:, None] + np.arange(4)).ravel()
    return sparse.csr_matrix((weights.ravel(), (rows, cols)), shape=(targets.size, n))


def _backward_generator(model: SdeModel, x: np.ndarray, jumps: Optional[JumpSpec]) -> sparse.csr_matrix:
    n = x.size
    dx = x[1] - x[0]
    t = np.full(n, model.t0)
    drift = model.f(t, x[:, None])[:, 0]
    G = model.G(t[:1])[0]
    diffusion = 0.5 * float(G[0] @ G[0])
    lower = diffusion / dx ** 2 - drift / (2 * dx)
    upper = diffusion / dx ** 2 + drift / (2 * dx)
    L = sparse.diags([lower[1:], np.full(n, -2 * diffusion / dx ** 2), upper[:-1]], [-1, 0, 1], format="csr")
    if jumps is not None:
        identity = sparse.identity(n, format="csr")
        for mu, coefficient in zip(jumps.mu, jumps.coefficients):
            targets = x + coefficient(t, x[:, None])[:, 0]
            L = L + mu * (_interpolation_matrix(x, targets) - identity)
    # boundary rows vanish, u keeps the terminal data there
    interior = np.ones(n)
    interior[[0, -1]] = 0.0
    return (sparse.diags(interior) @ L).tocsr()


def _kolmogorov_solve(model: SdeModel, x: np.ndarray, jumps: Optional[JumpSpec],
                      functional: TestFunctional) -> float:
    L = _backward_generator(model, x, jumps)
    solution = integrate.solve_ivp(lambda tau, u: L @ u, (0.0, model.T - model.t0), functional(x[:, None]),
                                   method="Radau", jac=L, t_eval=[model.T - model.t0], rtol=1e-10, atol=1e-12)
    if not solution.success:
        raise ModelError(f"Backward equation of {model.name} could not be integrated: {solution.message}")
    return float(solution.y[x.size // 2, -1])


def kolmogorov_expectations(model: SdeModel, x0: float, functionals: Mapping[str, TestFunctional],
                            jumps: Optional[JumpSpec] = None, n_points: int = 2001,
                            half_width: Optional[float] = None) -> Tuple[Dict[str, float], Dict[str, float]]:
    """
    ``E g(x(T))`` of a scalar autonomous model with constant diffusion started in the point x0, from the backward
    Kolmogorov equation ``u_tau = f u_x + D u_xx + sum_i mu_i (u(x + h_i(x)) - u(x))``, ``u(0) = g``.

    The equation is discretized with central differences on the uniform grids of ``n_points`` and
    ``2 n_points - 1`` nodes centred on x0, with Dirichlet data ``g`` at the ends, and integrated in time with
    the implicit Radau method. The two values at x0 are Richardson extrapolated.

    Parameters
    ----------
    model
        scalar, autonomous model with constant diffusion; jump coefficients are evaluated at ``model.t0``
    x0
        initial state
    functionals
        test functionals by label
    jumps
        optional jump channels
    n_points
        nodes of the coarse grid, odd
    half_width
        half width of the grid, by default wide enough that the grid ends are not felt at x0

    Returns
    -------
    tuple
        expectations and the estimated discretization error per label

    Raises
    ------
    ModelError
        if the model does not meet the requirements

    """
    if model.d != 1 or not model.autonomous or not model.constant_diffusion:
        raise ModelError(f"The backward equation solver needs a scalar autonomous model with constant diffusion, "
                         f"{model.name} is not")
    if n_points < 5 or n_points % 2 == 0:
        raise ValueError(f"n_points should be odd and at least 5, got {n_points}")
    span = model.T - model.t0
    if half_width is None:
        G = model.G(np.array([model.t0]))[0]
        half_width = max(4.0, 2 * abs(x0)) + 10 * np.sqrt(0.5 * float(G[0] @ G[0]) * span)
        if jumps is not None:
            t = np.array([model.t0])
            for mu, coefficient in zip(jumps.mu, jumps.coefficients):
                reach = abs(float(coefficient(t, np.array([[x0]]))[0, 0]))
                half_width += (mu * span + 10 * np.sqrt(mu * span) + 2) * reach
    coarse = x0 + np.linspace(-half_width, half_width, n_points)
    fine = x0 + np.linspace(-half_width, half_width, 2 * n_points - 1)
    expectations, errors = {}, {}
    for label, functional in functionals.items():
        u_coarse = _kolmogorov_solve(model, coarse, jumps, functional)
        u_fine = _kolmogorov_solve(model, fine, jumps, functional)
        # second order in the grid spacing
        extrapolated = (4 * u_fine - u_coarse) / 3
        expectations[label] = extrapolated
        errors[label] = abs(extrapolated - u_fine)
    return expectations, errors


class CatalogProblem(NamedTuple):
    model: SdeModel
    initial_law: InitialLaw
    reference: ReferenceStatistics
    #: jump channels, None for diffusions
    jumps: Optional[JumpSpec] = None


def _linear_model(name: str, A: np.ndarray, Gmat: np.ndarray, t0: float, T: float, params: dict) -> SdeModel:
    d, m = Gmat.shape
    A = np.array(A, dtype=float)
    Gmat = np.array(Gmat, dtype=float)
    return SdeModel(
        name=name, d=d, m=m,
        f=lambda t, x: x @ A.T,
        f_x=lambda t, x: np.broadcast_to(A, (len(x), d, d)).copy(),
        f_t=lambda t, x: np.zeros_like(x),
        hess_quad=lambda t, x, g: np.zeros_like(x),
        G=lambda t: np.broadcast_to(Gmat, (len(t), d, m)).copy(),
        dG=lambda t, order: (np.broadcast_to(Gmat, (len(t), d, m)) if order == 0
                             else np.zeros((len(t), d, m))).copy(),
        t0=t0, T=T, autonomous=True, constant_diffusion=True, params=params,
    )


def _ou_1d(a: float = -1.0, sigma: float = 1.0, x0: float = 1.0, t0: float = 0.0, T: float = 1.0) -> CatalogProblem:
    params = dict(a=a, sigma=sigma, x0=x0, t0=t0, T=T)
    model = _linear_model("ou-1d", np.array([[a]]), np.array([[sigma]]), t0, T, params)
    span = T - t0
    mean = x0 * np.exp(a * span)
    var = sigma ** 2 * span if a == 0 else sigma ** 2 * np.expm1(2 * a * span) / (2 * a)
    return CatalogProblem(model, InitialLaw(point=[x0]), gaussian_reference([mean], [[var]]))


def ou_nd_drift(d: int, theta: float = 1.0, kappa: float = 0.5) -> np.ndarray:
    """``-theta I`` plus a skew-symmetric coupling of neighbouring components, all eigenvalues have real part -theta."""
    shift = np.eye(d, k=1)
    return -theta * np.eye(d) + kappa * (shift - shift.T)


def _ou_nd(d: int = 3, theta: float = 1.0, kappa: float = 0.5, sigma: float = 0.5, x0: float = 1.0,
           t0: float = 0.0, T: float = 1.0) -> CatalogProblem:
    d = int(d)
    params = dict(d=d, theta=theta, kappa=kappa, sigma=sigma, x0=x0, t0=t0, T=T)
    A = ou_nd_drift(d, theta, kappa)
    # lower bidiagonal noise couples the components
    Gmat = sigma * (np.eye(d) + 0.5 * np.eye(d, k=-1))
    model = _linear_model("ou-nd", A, Gmat, t0, T, params)
    x_init = np.full(d, float(x0))
    mean, cov = linear_gaussian_moments(A, x_init, t0, T, lambda s: Gmat, constant_g=True)
    return CatalogProblem(model, InitialLaw(point=x_init), gaussian_reference(mean, cov))


def _pendulum_model(name: str, lam: float, sigma: float, t0: float, T: float, params: dict) -> SdeModel:
    return SdeModel(
        name=name, d=1, m=1,
        f=lambda t, x: -lam * x + np.sin(x),
        f_x=lambda t, x: (-lam + np.cos(x))[:, :, None],
        f_t=lambda t, x: np.zeros_like(x),
        hess_quad=lambda t, x, g: -np.sin(x) * g ** 2,
        G=lambda t: np.full((len(t), 1, 1), float(sigma)),
        dG=lambda t, order: np.full((len(t), 1, 1), float(sigma) if order == 0 else 0.0),
        t0=t0, T=T, autonomous=True, constant_diffusion=True, params=params,
    )


def _pendulum_sin(lam: float = 1.0, sigma: float = 0.5, x0: float = 1.0, t0: float = 0.0, T: float = 1.0
                  ) -> CatalogProblem:
    params = dict(lam=lam, sigma=sigma, x0=x0, t0=t0, T=T)
    model = _pendulum_model("pendulum-sin", lam, sigma, t0, T, params)
    reference = ReferenceStatistics(
        "kolmogorov", loader=lambda: _pendulum_reference(float(lam), float(sigma), float(x0), float(t0), float(T)))
    return CatalogProblem(model, InitialLaw(point=[x0]), reference)


@lru_cache(maxsize=None)
def _pendulum_reference(lam: float, sigma: float, x0: float, t0: float, T: float,
                        c: Optional[float] = None, mu: Optional[float] = None):
    model = _pendulum_model("pendulum", lam, sigma, t0, T, {})
    jumps = None if c is None else JumpSpec((mu,), (_constant_jump(c),), ("constant",))
    expectations, errors = kolmogorov_expectations(
        model, x0, {label: FUNCTIONALS[label] for label in ("x1", "x1^2", "cos_x1")}, jumps)
    # scalar states
    for alias, label in (("sum", "x1"), ("sum_sq", "x1^2")):
        expectations[alias], errors[alias] = expectations[label], errors[label]
    return expectations, errors


def _time_dep_g(sigma: float = 0.5, omega: float = 2.0, amplitude: float = 0.5, x0: float = 1.0,
                t0: float = 0.0, T: float = 1.0) -> CatalogProblem:
    params = dict(sigma=sigma, omega=omega, amplitude=amplitude, x0=x0, t0=t0, T=T)
    A = np.array([[-1.0, 0.5], [-0.5, -1.0]])
    c = amplitude * np.array([1.0, 0.5])

    def G_single(s):
        return sigma * np.array([[1.0 + 0.5 * np.sin(omega * s), 0.0], [0.5 * np.cos(omega * s), 1.0]])

    def G(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros((t.size, 2, 2))
        out[:, 0, 0] = 1.0 + 0.5 * np.sin(omega * t)
        out[:, 1, 0] = 0.5 * np.cos(omega * t)
        out[:, 1, 1] = 1.0
        return sigma * out

    def dG(t, order):
        if order == 0:
            return G(t)
        t = np.asarray(t, dtype=float)
        out = np.zeros((t.size, 2, 2))
        if order == 1:
            out[:, 0, 0] = 0.5 * omega * np.cos(omega * t)
            out[:, 1, 0] = -0.5 * omega * np.sin(omega * t)
        elif order == 2:
            out[:, 0, 0] = -0.5 * omega ** 2 * np.sin(omega * t)
            out[:, 1, 0] = -0.5 * omega ** 2 * np.cos(omega * t)
        else:
            raise ModelError(f"time-dep-g provides diffusion derivatives up to order 2, got {order}")
        return sigma * out

    model = SdeModel(
        name="time-dep-g", d=2, m=2,
        f=lambda t, x: x @ A.T + np.sin(t)[:, None] * c,
        f_x=lambda t, x: np.broadcast_to(A, (len(x), 2, 2)).copy(),
        f_t=lambda t, x: np.cos(t)[:, None] * c + np.zeros_like(x),
        hess_quad=lambda t, x, g: np.zeros_like(x),
        G=G, dG=dG, t0=t0, T=T, autonomous=False, constant_diffusion=False, params=params,
    )
    x_init = np.full(2, float(x0))
    mean, cov = linear_gaussian_moments(A, x_init, t0, T, G_single, forcing=lambda s: c * np.sin(s))
    return CatalogProblem(model, InitialLaw(point=x_init), gaussian_reference(mean, cov))


def _jump_ou(a: float = -1.0, sigma: float = 0.5, c: float = 0.5, mu: float = 2.0, x0: float = 1.0,
             t0: float = 0.0, T: float = 1.0) -> CatalogProblem:
    params = dict(a=a, sigma=sigma, c=c, mu=mu, x0=x0, t0=t0, T=T)
    model = _linear_model("jump-ou", np.array([[a]]), np.array([[sigma]]), t0, T, params)
    span = T - t0
    if a == 0:
        mean = x0 + c * mu * span
        var = (sigma ** 2 + c ** 2 * mu) * span
    else:
        mean = x0 * np.exp(a * span) + c * mu * np.expm1(a * span) / a
        # compound Poisson part adds c^2 mu int e^{2a(T-s)} ds
        var = (sigma ** 2 + c ** 2 * mu) * np.expm1(2 * a * span) / (2 * a)
    expectations = {"x1": mean, "x1^2": var + mean ** 2, "sum": mean, "sum_sq": var + mean ** 2}
    reference = ReferenceStatistics("analytic", {k: float(v) for k, v in expectations.items()},
                                    mean=np.array([mean]), cov=np.array([[var]]))
    jumps = JumpSpec((mu,), (_constant_jump(c),), ("constant",))
    return CatalogProblem(model, InitialLaw(point=[x0]), reference, jumps)


def _pendulum_jumps(lam: float = 1.0, sigma: float = 0.5, c: float = 0.5, mu: float = 1.0, x0: float = 1.0,
                    t0: float = 0.0, T: float = 1.0) -> CatalogProblem:
    params = dict(lam=lam, sigma=sigma, c=c, mu=mu, x0=x0, t0=t0, T=T)
    model = _pendulum_model("pendulum-jumps", lam, sigma, t0, T, params)
    reference = ReferenceStatistics("kolmogorov", loader=lambda: _pendulum_reference(
        float(lam), float(sigma), float(x0), float(t0), float(T), float(c), float(mu)))
    return CatalogProblem(model, InitialLaw(point=[x0]), reference,
                          JumpSpec((mu,), (_constant_jump(c),), ("constant",)))


PROBLEMS: Dict[str, Callable[..., CatalogProblem]] = {
    "ou-1d": _ou_1d,
    "ou-nd": _ou_nd,
    "pendulum-sin": _pendulum_sin,
    "time-dep-g": _time_dep_g,
    "jump-ou": _jump_ou,
    "pendulum-jumps": _pendulum_jumps,
}


def builtin_problem(name: str, **params) -> CatalogProblem:
    """
    Wires a catalog problem.

    Parameters
    ----------
    name
        one of the keys of :data:`PROBLEMS`
    params
        overrides of the default parameters of the problem

    Returns
    -------
    CatalogProblem
        named tuple of model, initial law, reference statistics and jump channels (None for diffusions)

    Raises
    ------
    ModelError
        if the name or a parameter is unknown

    """
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ModelError(f"Unknown problem '{name}', should be one of: {', '.join(PROBLEMS)}") from None
    try:
        return factory(**params)
    except TypeError as e:
        raise ModelError(f"Invalid parameters for problem '{name}': {e}") from e


def list_problems() -> List[str]:
    return list(PROBLEMS)
