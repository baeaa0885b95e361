"""
Weak local linearization (LL) schemes for SDEs with additive noise.

One step of a weak LL scheme reads ``y_{n+1} = y_n + phi(t_n, y_n; h) + Sigma(t_n, y_n; h)^(1/2) xi_{n+1}``.
Here ``phi`` is the flow increment of the drift linearized around ``(t_n, y_n)``,

    ``phi = int_0^h exp(A (h - s)) (f + c s) ds``,

with Jacobian ``A = f_x(t_n, y_n)`` and time slope ``c``. The slope is ``f_t`` for beta = 1 and
``f_t + 1/2 sum_j (I kron g_j^T) f_xx g_j`` for beta = 2. ``Sigma`` is the covariance of the linear SDE over the
step. The variants differ in how ``(phi, Sigma)`` is computed; see :data:`SCHEME_CATALOG`.

All increment routines accept a single state ``(t: float, y: (d,), h: float)`` or a batch
``(t: (n,), y: (n, d), h: (n,))`` and return arrays of the matching shape.
"""
import logging
import os
import warnings
from dataclasses import dataclass, field, replace
from math import factorial
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import ndtri

from wllpypeline.helpers import get_logger, add_end_docstrings
from wllpypeline.modules.LinAlg import KrylovConfig, LinAlgError, PadeConfig, krylov_expmv, pade_expm, psd_sqrt,\
    solve_pencil
from wllpypeline.modules.Model import ModelError, SdeModel

logger = get_logger(str(os.path.basename(__file__).split(".")[0]), loglevel=logging.WARNING)

SCHEME_VARIANTS = ("pade-general", "pade-const-g", "krylov", "ozaki-shoji", "midpoint")
BASELINE_VARIANTS = ("euler",)
NOISE_KINDS = ("gaussian", "two-point")
#: reciprocal 1-norm condition numbers of the Jacobian below this make the Ozaki-Shoji route fail
SINGULAR_JACOBIAN_RCOND = 1e-12
#: resolution of the uniform variates that are mapped through the inverse normal CDF
_UNIFORM_BITS = 52


class SchemeConfigError(ValueError):
    pass


class SingularJacobianError(LinAlgError):
    pass


class KrylovDimensionWarning(RuntimeWarning):
    pass


class SchemeInfo(NamedTuple):
    description: str
    preconditions: str
    notes: str
    #: the construction the variant implements
    provenance: str


SCHEME_CATALOG: Dict[str, SchemeInfo] = {
    "pade-general": SchemeInfo(
        "weak LL scheme through the block matrix A_beta (truncated Taylor expansion of G), (p,q)-Padé exponential "
        "with scaling and squaring",
        "none (time-dependent drift and diffusion)",
        "weak order min{beta, p+q}",
        "single block exponential with i! H_i blocks for the Taylor coefficients of G"),
    "pade-const-g": SchemeInfo(
        "weak LL scheme through the Van Loan block matrix C_beta, (p,q)-Padé exponential with scaling and squaring",
        "constant-diffusion-only",
        "same increment as pade-general for constant G at a smaller matrix size",
        "Van Loan (1978) block exponential for constant G"),
    "krylov": SchemeInfo(
        "weak LL scheme through Krylov-Padé actions of exp(h C_beta^T) on the first d unit vectors",
        "none (A_beta replaces C_beta for time-dependent diffusion)",
        "advisory m-condition m >= 2 h ||C_beta||_2, violations warn and the step is still taken",
        "Van Loan block matrix, Arnoldi projection with a Padé exponential of the small Hessenberg matrix"),
    "ozaki-shoji": SchemeInfo(
        "LL scheme with explicit inverse Jacobian, covariance from the scalar formula (d=1) or the pencil equation",
        "autonomous, constant diffusion, invertible Jacobian",
        "fails with a singular Jacobian",
        "Ozaki (1985, 1992) for beta=1, Shoji-Ozaki (1997, 1998) for beta=2"),
    "midpoint": SchemeInfo(
        "LL scheme with midpoint-rule covariance and drift remainder",
        "beta=2",
        "covariance of local order 3",
        "midpoint LL variant of Mora (2005)"),
    "euler": SchemeInfo(
        "Euler-Maruyama baseline y + f h + G sqrt(h) xi",
        "none",
        "weak order 1",
        "Euler-Maruyama"),
}


@dataclass(frozen=True)
class SchemeConfig:
    """
    Configuration of a scheme.

    Attributes
    ----------
    variant
        one of :data:`SCHEME_VARIANTS` or the ``euler`` baseline
    beta
        order of the drift approximation, 1 or 2
    pade
        Padé configuration of every matrix exponential of the scheme
    krylov
        Krylov configuration, only used by the ``krylov`` variant (a default is created for it)
    noise
        ``gaussian`` or ``two-point`` (components +-1 with probability 1/2)
    phi_defect
        c in an injected ``c h^2`` defect added to every component of phi, 0 disables it
    label
        name of the scheme in reports, generated from the other fields if None

    """
    variant: str = "pade-general"
    beta: int = 2
    pade: PadeConfig = field(default_factory=PadeConfig)
    krylov: Optional[KrylovConfig] = None
    noise: str = "gaussian"
    phi_defect: float = 0.0
    label: Optional[str] = None

    def __post_init__(self):
        if self.variant not in SCHEME_VARIANTS + BASELINE_VARIANTS:
            raise SchemeConfigError(f"Unknown scheme variant '{self.variant}', should be one of: "
                                    f"{', '.join(SCHEME_VARIANTS + BASELINE_VARIANTS)}")
        if self.beta not in (1, 2):
            raise SchemeConfigError(f"beta should be 1 or 2, got {self.beta}")
        if self.noise not in NOISE_KINDS:
            raise SchemeConfigError(f"noise should be one of: {', '.join(NOISE_KINDS)}, got '{self.noise}'")
        if self.variant == "midpoint" and self.beta != 2:
            raise SchemeConfigError("the midpoint scheme requires beta=2")
        if not np.isfinite(self.phi_defect):
            raise SchemeConfigError(f"phi_defect should be finite, got {self.phi_defect}")
        if self.variant == "krylov" and self.krylov is None:
            object.__setattr__(self, "krylov", KrylovConfig(pade=self.pade))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.variant == "euler":
            name = "euler"
        else:
            name = f"{self.variant}-b{self.beta}-p{self.pade.p}q{self.pade.q}"
            if self.variant == "krylov":
                name += f"-m{self.krylov.m}"
        if self.noise != "gaussian":
            name += f"-{self.noise}"
        if self.phi_defect:
            name += f"-defect{self.phi_defect:g}"
        return name

    def check_model(self, model: SdeModel):
        """
        Raises
        ------
        SchemeConfigError
            if the model violates a precondition of the variant

        """
        if self.variant == "pade-const-g" and not model.constant_diffusion:
            raise SchemeConfigError(f"pade-const-g requires constant diffusion, model {model.name} has G(t)")
        if self.variant == "ozaki-shoji":
            if not model.autonomous:
                raise SchemeConfigError(f"ozaki-shoji requires an autonomous model, got {model.name}")
            if not model.constant_diffusion:
                raise SchemeConfigError(f"ozaki-shoji requires constant diffusion, model {model.name} has G(t)")


@dataclass
class LocalIncrement:
    """Deterministic increment phi, covariance sigma and its symmetric square root sigma_sqrt of one step."""
    phi: np.ndarray
    sigma: np.ndarray
    sigma_sqrt: np.ndarray


@dataclass
class AffinePieces:
    """
    Linearization of the drift at ``(t_n, y_n)``.

    ``A`` is the Jacobian, ``b_beta = f - A y`` the affine remainder, ``slope`` the coefficient of ``(u - t_n)``
    (``f_t``, plus ``hessterm / 2`` for beta = 2). ``H`` holds ``H_0 .. H_{2 beta - 2}`` of the
    Taylor expansion ``G_beta(u) G_beta(u)^T = sum_i H_i (u - t_n)^i``.
    """
    A: np.ndarray
    b_beta: np.ndarray
    f_val: np.ndarray
    hessterm: np.ndarray
    H: List[np.ndarray]
    slope: np.ndarray
    beta: int

    @property
    def d(self) -> int:
        return self.A.shape[-1]


@dataclass
class AugmentedMatrix:
    """
    Block matrix whose exponential contains phi and the covariance factors.

    ``C_beta`` (dimension 2d + 2) has the first block row ``[A, G G^T, c, f]``. ``A_beta`` (dimension 2 beta d + 2)
    has the first block row ``[A, 2! H_2, H_1, H_0, c, f]`` for beta = 2 and ``[A, H_0, c, f]`` for beta = 1. The
    ``-A^T`` blocks on the diagonal are linked by identity blocks above the diagonal, the bottom right 2 x 2 block is
    ``[[0, 1], [0, 0]]``.
    """
    kind: str
    entries: np.ndarray
    d: int
    beta: int

    @property
    def dim(self) -> int:
        return self.entries.shape[-1]

    @property
    def n_cov_blocks(self) -> int:
        return 1 if self.kind == "C_beta" else 2 * self.beta - 1

    def extract(self, E: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Reads phi and the covariance from the first block row of E, the exponential of ``entries * h`` (or the first
        d rows of it). Returns ``(phi, sigma)`` with ``sigma = E_{1,last} E_{11}^T``.
        """
        d, k = self.d, self.n_cov_blocks
        phi = E[..., :d, -1]
        last = E[..., :d, k * d:(k + 1) * d]
        sigma = last @ np.swapaxes(E[..., :d, :d], -1, -2)
        return phi, sigma


def _as_batch(model: SdeModel, t, y, h=None):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    if Y.ndim != 2 or Y.shape[1] != model.d:
        raise ValueError(f"state should have dimension {model.d}, got shape {y.shape}")
    n = Y.shape[0]
    T = np.array(np.broadcast_to(np.asarray(t, dtype=float), (n,)))
    if h is None:
        return T, Y, None, single
    H = np.array(np.broadcast_to(np.asarray(h, dtype=float), (n,)))
    if np.any(H < 0) or not np.all(np.isfinite(H)):
        raise ValueError("step sizes must be finite and non-negative")
    return T, Y, H, single


def _squeeze(single: bool, *arrays):
    if single:
        return tuple(a[0] for a in arrays)
    return arrays


def _check_finite(name: str, value: np.ndarray, model: SdeModel) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise ModelError(f"{name} of model {model.name} returned non-finite values")
    return value


def _affine_pieces(model: SdeModel, t: np.ndarray, y: np.ndarray, beta: int) -> AffinePieces:
    n, d = y.shape
    A = _check_finite("f_x", model.f_x(t, y), model).reshape(n, d, d)
    f_val = _check_finite("f", model.f(t, y), model).reshape(n, d)
    f_t = _check_finite("f_t", model.f_t(t, y), model).reshape(n, d)
    G = _check_finite("G", model.G(t), model).reshape(n, d, model.m)
    GT = np.swapaxes(G, -1, -2)
    b = f_val - np.einsum("bij,bj->bi", A, y)
    if beta == 1:
        hessterm = np.zeros((n, d))
        H = [G @ GT]
        slope = f_t
    else:
        hessterm = _check_finite("hess_quad", model.hessian_term(t, y), model).reshape(n, d)
        dG = _check_finite("dG", model.dG(t, 1), model).reshape(n, d, model.m)
        dGT = np.swapaxes(dG, -1, -2)
        H = [G @ GT, dG @ GT + G @ dGT, dG @ dGT]
        slope = f_t + 0.5 * hessterm
    return AffinePieces(A=A, b_beta=b, f_val=f_val, hessterm=hessterm, H=H, slope=slope, beta=beta)


def affine_pieces(model: SdeModel, t, y, beta: int) -> AffinePieces:
    """
    Evaluates the linearization of the drift at ``(t, y)``.

    Parameters
    ----------
    model
        the SDE
    t
        time, float or array (n,)
    y
        state (d,) or batch of states (n, d)
    beta
        order of the drift approximation

    Returns
    -------
    AffinePieces
        with single-state shapes if y is a single state

    Raises
    ------
    ModelError
        if a callback returns non-finite values

    """
    if beta not in (1, 2):
        raise SchemeConfigError(f"beta should be 1 or 2, got {beta}")
    T, Y, _, single = _as_batch(model, t, y)
    pieces = _affine_pieces(model, T, Y, beta)
    if single:
        pieces = AffinePieces(A=pieces.A[0], b_beta=pieces.b_beta[0], f_val=pieces.f_val[0],
                              hessterm=pieces.hessterm[0], H=[Hi[0] for Hi in pieces.H], slope=pieces.slope[0],
                              beta=beta)
    return pieces


def _check_pieces(pieces: AffinePieces, *arrays: np.ndarray):
    d = pieces.d
    for a in arrays:
        if a.shape[-2:] != (d, d):
            raise ValueError(f"dimension mismatch: expected {d}x{d} blocks, got shape {a.shape}")


def build_c_beta(pieces: AffinePieces, GGT: np.ndarray) -> AugmentedMatrix:
    """
    Van Loan block matrix of a constant-diffusion step, dimension 2d + 2. The third block column carries the time
    slope of the drift, the last one the drift value.
    """
    GGT = np.asarray(GGT, dtype=float)
    _check_pieces(pieces, pieces.A, GGT)
    d = pieces.d
    A = pieces.A
    lead = np.broadcast_shapes(A.shape[:-2], GGT.shape[:-2])
    n = 2 * d + 2
    M = np.zeros(lead + (n, n))
    M[..., :d, :d] = A
    M[..., :d, d:2 * d] = GGT
    M[..., d:2 * d, d:2 * d] = -np.swapaxes(A, -1, -2)
    M[..., :d, 2 * d] = pieces.slope
    M[..., :d, 2 * d + 1] = pieces.f_val
    M[..., 2 * d, 2 * d + 1] = 1.0
    return AugmentedMatrix("C_beta", M, d, pieces.beta)


def build_a_beta(pieces: AffinePieces) -> AugmentedMatrix:
    """
    Block matrix of a step with time-dependent diffusion, dimension 2 beta d + 2.

    The identity chain of the ``-A^T`` diagonal blocks integrates ``H_i`` against ``s^i / i!``, so the block of
    ``H_i`` holds ``i! H_i`` and the covariance block reproduces ``int exp(A(h-s)) G_beta G_beta^T exp(A^T(h-s)) ds``.
    """
    _check_pieces(pieces, pieces.A, *pieces.H)
    d, beta = pieces.d, pieces.beta
    A = pieces.A
    n_cov = 2 * beta - 1
    if len(pieces.H) != n_cov:
        raise ValueError(f"expected {n_cov} H blocks for beta={beta}, got {len(pieces.H)}")
    n = 2 * beta * d + 2
    M = np.zeros(A.shape[:-2] + (n, n))
    M[..., :d, :d] = A
    minus_at = -np.swapaxes(A, -1, -2)
    eye = np.eye(d)
    for k in range(1, n_cov + 1):
        i = n_cov - k
        M[..., :d, k * d:(k + 1) * d] = factorial(i) * pieces.H[i]
        M[..., k * d:(k + 1) * d, k * d:(k + 1) * d] = minus_at
        if k < n_cov:
            M[..., k * d:(k + 1) * d, (k + 1) * d:(k + 2) * d] = eye
    M[..., :d, n_cov * d + d] = pieces.slope
    M[..., :d, n_cov * d + d + 1] = pieces.f_val
    M[..., n - 2, n - 1] = 1.0
    return AugmentedMatrix("A_beta", M, d, beta)


def _finish(phi: np.ndarray, sigma: np.ndarray, cfg: "SchemeConfig", h: np.ndarray, single: bool) -> LocalIncrement:
    if cfg.phi_defect:
        phi = phi + cfg.phi_defect * h[:, None] ** 2
    sigma = (sigma + np.swapaxes(sigma, -1, -2)) / 2
    sigma_sqrt = psd_sqrt(sigma)
    return LocalIncrement(*_squeeze(single, phi, sigma, sigma_sqrt))


_returns_doc = """
    Returns
    -------
    LocalIncrement
        phi, sigma and sigma_sqrt, batched if the input was batched

"""


def _exponential_increment(matrix: AugmentedMatrix, h: np.ndarray, cfg: "SchemeConfig"):
    E = pade_expm(matrix.entries * h[:, None, None], cfg.pade)
    return matrix.extract(E)


@add_end_docstrings(_returns_doc)
def increment_pade_general(model: SdeModel, t, y, h, cfg: SchemeConfig) -> LocalIncrement:
    """
    Increment through the exponential of ``A_beta h``. Valid for time-dependent drift and diffusion.
    """
    T, Y, H, single = _as_batch(model, t, y, h)
    pieces = _affine_pieces(model, T, Y, cfg.beta)
    phi, sigma = _exponential_increment(build_a_beta(pieces), H, cfg)
    return _finish(phi, sigma, cfg, H, single)


@add_end_docstrings(_returns_doc)
def increment_pade_const_g(model: SdeModel, t, y, h, cfg: SchemeConfig) -> LocalIncrement:
    """
    Increment through the exponential of the Van Loan matrix ``C_beta h``.

    Raises
    ------
    SchemeConfigError
        if the diffusion of the model is not constant
    """
    if not model.constant_diffusion:
        raise SchemeConfigError(f"pade-const-g requires constant diffusion, model {model.name} has G(t)")
    T, Y, H, single = _as_batch(model, t, y, h)
    pieces = _affine_pieces(model, T, Y, cfg.beta)
    phi, sigma = _exponential_increment(build_c_beta(pieces, pieces.H[0]), H, cfg)
    return _finish(phi, sigma, cfg, H, single)


@add_end_docstrings(_returns_doc)
def increment_krylov(model: SdeModel, t, y, h, cfg: SchemeConfig) -> LocalIncrement:
    """
    Increment from the first block row ``P^T`` of ``exp(M h)``, where ``P = exp(M^T h) L_1^T`` is computed column by
    column with :func:`krylov_expmv`. M is ``C_beta`` for constant diffusion and ``A_beta`` otherwise.
    Emits a :class:`KrylovDimensionWarning` if ``m < 2 h ||M||_2``.
    """
    T, Y, H, single = _as_batch(model, t, y, h)
    d = model.d
    pieces = _affine_pieces(model, T, Y, cfg.beta)
    matrix = build_c_beta(pieces, pieces.H[0]) if model.constant_diffusion else build_a_beta(pieces)
    krylov = cfg.krylov or KrylovConfig(pade=cfg.pade)
    if krylov.m > matrix.dim:
        logger.debug("Krylov dimension %d reduced to the operator dimension %d", krylov.m, matrix.dim)
        krylov = replace(krylov, m=matrix.dim)
    bound = 2 * H * np.linalg.norm(matrix.entries, 2, axis=(-2, -1))
    if np.any(krylov.m < bound):
        msg = (f"Krylov dimension m={krylov.m} is below 2 h ||M||_2 = {bound.max():.3g}, "
               f"the Krylov error bound does not apply")
        logger.warning(msg)
        warnings.warn(msg, KrylovDimensionWarning)

    Mt = np.swapaxes(matrix.entries, -1, -2) * H[:, None, None]
    n = Mt.shape[0]
    first_rows = np.empty((n, d, matrix.dim))
    for j in range(d):
        e_j = np.zeros((n, matrix.dim))
        e_j[:, j] = 1.0
        first_rows[:, j, :] = krylov_expmv(Mt, e_j, krylov)
    phi, sigma = matrix.extract(first_rows)
    return _finish(phi, sigma, cfg, H, single)


@add_end_docstrings(_returns_doc)
def increment_ozaki_shoji(model: SdeModel, y, h, cfg: SchemeConfig, t=None) -> LocalIncrement:
    """
    Increment of an autonomous model with explicit inverse Jacobian,

    ``phi = A^-1 (e^{Ah} - I) f + delta A^-2 (e^{Ah} - I - A h) hessterm / 2``,

    with ``delta = 0`` for beta = 1 and 1 for beta = 2. The covariance is ``g^2 (e^{2ah} - 1) / (2a)`` for d = 1 and
    the solution of the pencil equation ``A S + S A^T = e^{Ah} G G^T e^{A^T h} - G G^T`` otherwise.

    Raises
    ------
    SchemeConfigError
        if the model is not autonomous or has time-dependent diffusion
    SingularJacobianError
        if the reciprocal condition number of the Jacobian is below 1e-12
    PencilSingularError
        if the pencil equation has no unique solution
    """
    if not model.autonomous:
        raise SchemeConfigError(f"ozaki-shoji requires an autonomous model, got {model.name}")
    if not model.constant_diffusion:
        raise SchemeConfigError(f"ozaki-shoji requires constant diffusion, model {model.name} has G(t)")
    T, Y, H, single = _as_batch(model, model.t0 if t is None else t, y, h)
    d = model.d
    pieces = _affine_pieces(model, T, Y, cfg.beta)
    A = pieces.A
    with np.errstate(all="ignore"):
        rcond = 1.0 / np.linalg.cond(A, 1)
    if np.any(~(rcond >= SINGULAR_JACOBIAN_RCOND)):
        raise SingularJacobianError(f"singular Jacobian in ozaki-shoji step, reciprocal condition number "
                                    f"{np.nanmin(rcond):.3g}")
    Ah = A * H[:, None, None]
    E = pade_expm(Ah, cfg.pade)
    eye = np.eye(d)
    phi = np.linalg.solve(A, np.einsum("bij,bj->bi", E - eye, pieces.f_val)[..., None])[..., 0]
    if cfg.beta == 2:
        second = np.einsum("bij,bj->bi", E - eye - Ah, pieces.slope)[..., None]
        phi = phi + np.linalg.solve(A, np.linalg.solve(A, second))[..., 0]
    GGT = pieces.H[0]
    if d == 1:
        a = A[:, 0, 0]
        sigma = GGT * (np.expm1(2 * a * H) / (2 * a))[:, None, None]
    else:
        sigma = solve_pencil(A, E @ GGT @ np.swapaxes(E, -1, -2) - GGT)
    return _finish(phi, sigma, cfg, H, single)


@add_end_docstrings(_returns_doc)
def increment_midpoint(model: SdeModel, t, y, h, cfg: SchemeConfig) -> LocalIncrement:
    """
    Midpoint-rule increment,

    ``phi = e^{Ah} y - y + h e^{Ah/2} (f - A y + (h/2) f_t + (h/4) hessterm)`` and
    ``Sigma = h e^{Ah/2} G(t + h/2) G(t + h/2)^T e^{A^T h/2}``.
    """
    if cfg.beta != 2:
        raise SchemeConfigError("the midpoint scheme requires beta=2")
    T, Y, H, single = _as_batch(model, t, y, h)
    pieces = _affine_pieces(model, T, Y, 2)
    A = pieces.A
    hh = H[:, None, None]
    E = pade_expm(A * hh, cfg.pade)
    E_half = pade_expm(A * hh / 2, cfg.pade)
    f_t = pieces.slope - 0.5 * pieces.hessterm
    inner = pieces.b_beta + (H[:, None] / 2) * f_t + (H[:, None] / 4) * pieces.hessterm
    phi = np.einsum("bij,bj->bi", E, Y) - Y + H[:, None] * np.einsum("bij,bj->bi", E_half, inner)
    G_mid = _check_finite("G", model.G(T + H / 2), model).reshape(len(T), model.d, model.m)
    L = E_half @ G_mid
    sigma = hh * (L @ np.swapaxes(L, -1, -2))
    return _finish(phi, sigma, cfg, H, single)


@add_end_docstrings(_returns_doc)
def increment_euler(model: SdeModel, t, y, h, cfg: SchemeConfig) -> LocalIncrement:
    """
    Euler-Maruyama increment ``phi = f h``, ``Sigma = G G^T h``.
    """
    T, Y, H, single = _as_batch(model, t, y, h)
    f_val = _check_finite("f", model.f(T, Y), model).reshape(Y.shape)
    G = _check_finite("G", model.G(T), model).reshape(len(T), model.d, model.m)
    phi = f_val * H[:, None]
    sigma = (G @ np.swapaxes(G, -1, -2)) * H[:, None, None]
    return _finish(phi, sigma, cfg, H, single)


_INCREMENTS: Dict[str, Callable] = {
    "pade-general": increment_pade_general,
    "pade-const-g": increment_pade_const_g,
    "krylov": increment_krylov,
    "ozaki-shoji": lambda model, t, y, h, cfg: increment_ozaki_shoji(model, y, h, cfg, t=t),
    "midpoint": increment_midpoint,
    "euler": increment_euler,
}


def increment(scheme: SchemeConfig, model: SdeModel, t, y, h) -> LocalIncrement:
    """Dispatches to the increment routine of ``scheme.variant``."""
    return _INCREMENTS[scheme.variant](model, t, y, h, scheme)


def draw_noise(kind: str, shape, rng: np.random.Generator) -> np.ndarray:
    """
    Draws the noise of a step.

    | ``gaussian``: standard normals by the inverse normal CDF of uniforms on the grid ``(k + 1/2) 2^-52``, which keeps
      every variate finite.
    | ``two-point``: independent components +-1 with probability 1/2.

    """
    if kind == "gaussian":
        u = (rng.integers(0, 2 ** _UNIFORM_BITS, size=shape) + 0.5) / 2.0 ** _UNIFORM_BITS
        return ndtri(u)
    if kind == "two-point":
        return 2.0 * rng.integers(0, 2, size=shape) - 1.0
    raise SchemeConfigError(f"noise should be one of: {', '.join(NOISE_KINDS)}, got '{kind}'")


def noise_dimension(scheme: SchemeConfig, model: SdeModel) -> int:
    """Number of noise components one step consumes: m for the Euler baseline, d for the LL schemes."""
    return model.m if scheme.variant == "euler" else model.d


def euler_step(model: SdeModel, t, y, h, rng: Optional[np.random.Generator], noise: str = "gaussian",
               xi: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Euler-Maruyama step ``y + f(t, y) h + G(t) sqrt(h) xi`` with an m-dimensional noise vector xi.
    """
    T, Y, H, single = _as_batch(model, t, y, h)
    if np.any(H <= 0):
        raise ValueError("step size must be positive")
    if xi is None:
        xi = draw_noise(noise, (len(T), model.m), rng)
    xi = np.asarray(xi, dtype=float).reshape(len(T), model.m)
    f_val = _check_finite("f", model.f(T, Y), model).reshape(Y.shape)
    G = _check_finite("G", model.G(T), model).reshape(len(T), model.d, model.m)
    out = Y + f_val * H[:, None] + np.sqrt(H)[:, None] * np.einsum("bij,bj->bi", G, xi)
    return out[0] if single else out


def step(scheme: SchemeConfig, model: SdeModel, t, y, h, rng: Optional[np.random.Generator],
         xi: Optional[np.ndarray] = None) -> np.ndarray:
    """
    One step ``y + phi + sigma_sqrt xi`` of the scheme.

    Parameters
    ----------
    scheme
        the scheme configuration
    model
        the SDE
    t
        current time, float or (n,)
    y
        current state (d,) or batch (n, d)
    h
        step size (> 0), float or (n,)
    rng
        random generator owned by the caller, used if xi is None
    xi
        pre-drawn noise of shape (n, k) with k from :func:`noise_dimension`

    Returns
    -------
    np.ndarray
        the next state with the shape of y

    """
    if scheme.variant == "euler":
        return euler_step(model, t, y, h, rng, scheme.noise, xi)
    T, Y, H, single = _as_batch(model, t, y, h)
    if np.any(H <= 0):
        raise ValueError("step size must be positive")
    inc = increment(scheme, model, T, Y, H)
    if xi is None:
        xi = draw_noise(scheme.noise, (len(T), model.d), rng)
    xi = np.asarray(xi, dtype=float).reshape(len(T), model.d)
    out = Y + inc.phi + np.einsum("bij,bj->bi", inc.sigma_sqrt, xi)
    return out[0] if single else out
