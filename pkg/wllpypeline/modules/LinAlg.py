"""
Dense small-matrix kernels of the local linearization schemes.

Every function accepts a single matrix (vector) or a stack of them with leading batch axes, in the same way the
functions of :mod:`numpy.linalg` do. Stacked inputs are processed matrix by matrix with identical semantics.
"""
import logging
import os
from dataclasses import dataclass, field
from math import factorial
from typing import Tuple

import numpy as np

from wllpypeline.helpers import get_logger

logger = get_logger(str(os.path.basename(__file__).split(".")[0]), loglevel=logging.WARNING)

#: relative tolerance of the symmetry check and of the eigenvalue clamp in :func:`psd_sqrt`
PSD_TOL = 1e-10
#: eigenvalue sums of the pencil below this (relative) value make the pencil singular
PENCIL_TOL = 1e-12
#: largest dimension the dense Kronecker pencil solver is meant for
PENCIL_MAX_DIM = 30


class LinAlgError(ValueError):
    pass


class PadeSingularError(LinAlgError):
    pass


class NotPositiveSemidefiniteError(LinAlgError):
    pass


class PencilSingularError(LinAlgError):
    pass


@dataclass(frozen=True)
class PadeConfig:
    """
    Degrees of the (p, q) Padé approximant and the threshold of the scaling rule.

    The scaling exponent k is the smallest non-negative integer with ``||2^-k A||_1 <= scaling_threshold``. The 1-norm
    bounds the spectral norm up to a factor of sqrt(n) and is cheap to evaluate.
    """
    p: int = 6
    q: int = 6
    scaling_threshold: float = 0.5

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q or self.p < 0 or self.q < 0:
            raise ValueError(f"Padé degrees must be non-negative integers, got p={self.p}, q={self.q}")
        if self.p + self.q < 1:
            raise ValueError("Padé degrees must satisfy p + q >= 1")
        if not self.scaling_threshold > 0:
            raise ValueError(f"scaling_threshold should be positive, got {self.scaling_threshold}")

    def coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns
        -------
        tuple
            numerator coefficients c_0..c_p and denominator coefficients d_0..d_q (of the powers of -X)

        """
        p, q = self.p, self.q
        num = np.array([factorial(p + q - j) * factorial(p) / (factorial(p + q) * factorial(j) * factorial(p - j))
                        for j in range(p + 1)])
        den = np.array([factorial(p + q - j) * factorial(q) / (factorial(p + q) * factorial(j) * factorial(q - j))
                        for j in range(q + 1)])
        return num, den


@dataclass(frozen=True)
class KrylovConfig:
    """
    Dimension of the Krylov subspace, the Padé configuration used for the projected Hessenberg matrix, and the
    tolerance below which the Arnoldi residual counts as a breakdown.
    """
    m: int = 10
    pade: PadeConfig = field(default_factory=PadeConfig)
    breakdown_tol: float = 1e-12

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"Krylov dimension m should be a positive integer, got {self.m}")
        if not self.breakdown_tol > 0:
            raise ValueError(f"breakdown_tol should be positive, got {self.breakdown_tol}")


def _as_square_stack(A, name: str = "A") -> Tuple[np.ndarray, tuple]:
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} should be a square matrix or a stack of square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    n = A.shape[-1]
    return A.reshape((-1, n, n)), A.shape


def norm1(A: np.ndarray) -> np.ndarray:
    """Matrix 1-norm (maximum absolute column sum) of every matrix of a stack."""
    return np.abs(A).sum(axis=-2).max(axis=-1)


def scaling_exponent(norms: np.ndarray, scaling_threshold: float) -> np.ndarray:
    """
    Smallest non-negative integers k with ``norms / 2**k <= scaling_threshold``.
    """
    norms = np.asarray(norms, dtype=float)
    k = np.zeros(norms.shape, dtype=int)
    large = norms > scaling_threshold
    k[large] = np.ceil(np.log2(norms[large] / scaling_threshold)).astype(int)
    # log2 rounding can leave k one short or one too large
    too_small = norms / np.exp2(k) > scaling_threshold
    k[too_small] += 1
    too_large = (k > 0) & (norms / np.exp2(k - 1) <= scaling_threshold)
    k[too_large] -= 1
    return k


def _pade_approximant(X: np.ndarray, cfg: PadeConfig) -> np.ndarray:
    n = X.shape[-1]
    num_coef, den_coef = cfg.coefficients()
    eye = np.broadcast_to(np.eye(n), X.shape)
    powers = [eye]
    for _ in range(max(cfg.p, cfg.q)):
        powers.append(powers[-1] @ X)
    numerator = sum(c * powers[j] for j, c in enumerate(num_coef))
    denominator = sum(c * (-1) ** j * powers[j] for j, c in enumerate(den_coef))
    if cfg.q == 0:
        return np.array(numerator)

    with np.errstate(all="ignore"):
        cond = np.linalg.cond(denominator, 1)
    if not np.all(np.isfinite(cond)) or np.any(cond * np.finfo(float).eps > 1e-3):
        raise PadeSingularError(f"Padé denominator of degree q={cfg.q} is singular for the scaled matrix, "
                                f"condition number {np.max(cond):.3g}; increase q or lower the scaling threshold")
    return np.linalg.solve(denominator, numerator)


def pade_expm(A, cfg: PadeConfig = None) -> np.ndarray:
    """
    Matrix exponential by (p, q) Padé approximation with scaling and squaring.

    Parameters
    ----------
    A
        square matrix, or a stack of square matrices with shape (..., n, n)
    cfg
        the Padé configuration, default (6, 6) with threshold 1/2

    Returns
    -------
    np.ndarray
        ``(P_pq(2^-k A))^(2^k)`` with the same shape as A, k chosen per matrix

    Raises
    ------
    ValueError
        if A is not square or has non-finite entries
    PadeSingularError
        if the denominator of the approximant is numerically singular

    """
    cfg = PadeConfig() if cfg is None else cfg
    stack, shape = _as_square_stack(A)
    exponents = scaling_exponent(norm1(stack), cfg.scaling_threshold)
    result = np.empty_like(stack)
    for k in np.unique(exponents):
        idx = exponents == k
        R = _pade_approximant(stack[idx] / 2.0 ** k, cfg)
        for _ in range(int(k)):
            R = R @ R
        result[idx] = R
    return result.reshape(shape)


def krylov_expmv(A, v, cfg: KrylovConfig = None) -> np.ndarray:
    """
    Action ``e^A v`` of the matrix exponential on a vector, approximated in the m-dimensional Krylov subspace
    ``span{v, Av, ..., A^(m-1) v}``.

    The Arnoldi process (modified Gram-Schmidt) builds the orthonormal basis V_m and the Hessenberg matrix H_m, the
    result is ``||v|| V_m exp(H_m) e_1`` with exp evaluated by :func:`pade_expm`. When the Arnoldi residual of a
    matrix drops below ``breakdown_tol * ||A||_1`` at step j < m the subspace is invariant, the remaining basis vectors
    are set to zero and the j-dimensional result, which is exact up to the Padé error, is returned.

    Parameters
    ----------
    A
        square matrix (n, n) or stack (..., n, n)
    v
        vector (n,) or stack (..., n); a zero vector yields a zero result
    cfg
        Krylov configuration, m must not exceed n

    Returns
    -------
    np.ndarray
        array with the shape of v

    """
    cfg = KrylovConfig() if cfg is None else cfg
    stack, shape = _as_square_stack(A)
    n = shape[-1]
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (n,) or v.shape[:-1] != shape[:-2]:
        raise ValueError(f"dimension mismatch between A {shape} and v {v.shape}")
    if cfg.m > n:
        raise ValueError(f"Krylov dimension m={cfg.m} exceeds the operator dimension {n}")
    vs = v.reshape((-1, n))
    batch, m = vs.shape[0], cfg.m

    beta = np.linalg.norm(vs, axis=-1)
    tol = cfg.breakdown_tol * np.maximum(norm1(stack), np.finfo(float).tiny)
    V = np.zeros((batch, m, n))
    H = np.zeros((batch, m, m))
    nonzero = beta > 0
    V[nonzero, 0] = vs[nonzero] / beta[nonzero, None]
    broken_at = np.full(batch, m)
    for j in range(m):
        w = np.einsum("bik,bk->bi", stack, V[:, j])
        for i in range(j + 1):
            hij = np.einsum("bi,bi->b", V[:, i], w)
            H[:, i, j] = hij
            w -= hij[:, None] * V[:, i]
        if j + 1 == m:
            break
        residual = np.linalg.norm(w, axis=-1)
        breakdown = residual <= tol
        broken_at[breakdown & (broken_at == m)] = j + 1
        proceed = ~breakdown
        H[proceed, j + 1, j] = residual[proceed]
        V[proceed, j + 1] = w[proceed] / residual[proceed, None]
    if np.any(broken_at < m):
        logger.debug("Arnoldi breakdown for %d of %d vectors, smallest invariant subspace dimension %d",
                     np.count_nonzero(broken_at < m), batch, broken_at.min())

    first_column = pade_expm(H, cfg.pade)[:, :, 0]
    result = beta[:, None] * np.einsum("bjn,bj->bn", V, first_column)
    return result.reshape(v.shape)


def psd_sqrt(S) -> np.ndarray:
    """
    Symmetric square root of a symmetric positive semidefinite matrix via the symmetric eigendecomposition.

    Parameters
    ----------
    S
        symmetric matrix (n, n) or stack (..., n, n). Asymmetry up to 1e-10 times the largest absolute entry is
        removed by symmetrizing, eigenvalues in ``[-1e-10 * ||S||_2, 0)`` are clamped to zero.

    Returns
    -------
    np.ndarray
        symmetric R with ``R @ R == S`` up to rounding

    Raises
    ------
    LinAlgError
        if S is not symmetric within tolerance
    NotPositiveSemidefiniteError
        if an eigenvalue lies below the clamp tolerance

    """
    stack, shape = _as_square_stack(S, "S")
    scale = np.abs(stack).max(axis=(-2, -1))
    asymmetry = np.abs(stack - np.swapaxes(stack, -1, -2)).max(axis=(-2, -1))
    if np.any(asymmetry > PSD_TOL * scale):
        raise LinAlgError(f"matrix is not symmetric, asymmetry {asymmetry.max():.3g}")
    sym = (stack + np.swapaxes(stack, -1, -2)) / 2
    w, Q = np.linalg.eigh(sym)
    clamp_tol = PSD_TOL * np.abs(w).max(axis=-1, initial=0.0)
    if np.any(w < -clamp_tol[:, None]):
        raise NotPositiveSemidefiniteError(f"matrix is not positive semidefinite, smallest eigenvalue {w.min():.3g}")
    clamped = w < 0
    if np.any(clamped):
        logger.debug("Clamped %d slightly negative eigenvalues to zero", np.count_nonzero(clamped))
    w = np.where(clamped, 0.0, w)
    R = (Q * np.sqrt(w)[:, None, :]) @ np.swapaxes(Q, -1, -2)
    R = (R + np.swapaxes(R, -1, -2)) / 2
    return R.reshape(shape)


def solve_pencil(A, Q) -> np.ndarray:
    """
    Solves the pencil equation ``A X + X A^T = Q`` by dense Kronecker vectorization,
    ``(I kron A + A kron I) vec(X) = vec(Q)``.

    Parameters
    ----------
    A
        square matrix (d, d) or stack (..., d, d)
    Q
        symmetric matrix with the shape of A

    Returns
    -------
    np.ndarray
        the symmetric solution X

    Raises
    ------
    PencilSingularError
        if two eigenvalues of A sum to (numerically) zero, in which case there is no unique solution

    """
    A_stack, shape = _as_square_stack(A)
    Q_stack, q_shape = _as_square_stack(Q, "Q")
    if q_shape != shape:
        raise ValueError(f"dimension mismatch between A {shape} and Q {q_shape}")
    d = shape[-1]
    if d > PENCIL_MAX_DIM:
        logger.warning("Dense pencil solve with d=%d above the intended limit %d", d, PENCIL_MAX_DIM)

    eig = np.linalg.eigvals(A_stack)
    sums = np.abs(eig[:, :, None] + eig[:, None, :]).min(axis=(-2, -1))
    radius = np.maximum(np.abs(eig).max(axis=-1), 1.0)
    if np.any(sums <= PENCIL_TOL * radius):
        raise PencilSingularError("pencil equation has no unique solution: eigenvalues of A sum to zero")

    eye = np.eye(d)
    batch = A_stack.shape[0]
    kron_i_a = np.einsum("ij,bkl->bikjl", eye, A_stack).reshape(batch, d * d, d * d)
    kron_a_i = np.einsum("bij,kl->bikjl", A_stack, eye).reshape(batch, d * d, d * d)
    # column-major vec
    vec_q = np.swapaxes(Q_stack, -1, -2).reshape(batch, d * d)
    try:
        vec_x = np.linalg.solve(kron_i_a + kron_a_i, vec_q[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        raise PencilSingularError("pencil equation has no unique solution") from e
    X = np.swapaxes(vec_x.reshape(batch, d, d), -1, -2)
    X = (X + np.swapaxes(X, -1, -2)) / 2
    return X.reshape(shape)
