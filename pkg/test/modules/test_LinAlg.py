import numpy as np
import pytest
from scipy import linalg


def taylor_expm(A: np.ndarray) -> np.ndarray:
    # scaling to ||X|| <= 2^-4 and 30 Taylor terms
    k = max(0, int(np.ceil(np.log2(max(np.abs(A).sum(axis=0).max(), 1e-300) * 16))))
    X = A / 2.0 ** k
    term = np.eye(A.shape[0])
    result = term.copy()
    for j in range(1, 31):
        term = term @ X / j
        result = result + term
    for _ in range(k):
        result = result @ result
    return result


def relative_error(actual, expected) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))


def test_pade_config():
    from wllpypeline.modules.LinAlg import PadeConfig
    with pytest.raises(ValueError):
        PadeConfig(p=-1)
    with pytest.raises(ValueError):
        PadeConfig(p=0, q=0)
    with pytest.raises(ValueError):
        PadeConfig(scaling_threshold=0)
    num, den = PadeConfig(1, 1).coefficients()
    np.testing.assert_allclose(num, [1, 0.5])
    np.testing.assert_allclose(den, [1, 0.5])
    num, den = PadeConfig(2, 0).coefficients()
    np.testing.assert_allclose(num, [1, 1, 0.5])
    np.testing.assert_allclose(den, [1])


def test_scaling_exponent():
    from wllpypeline.modules.LinAlg import scaling_exponent
    norms = np.array([0.0, 0.5, 0.51, 1.0, 4.0, 4.1])
    np.testing.assert_array_equal(scaling_exponent(norms, 0.5), [0, 0, 1, 1, 3, 4])


def test_pade_expm_matches_taylor_oracle(rng):
    from wllpypeline.modules.LinAlg import pade_expm
    for d in (1, 2, 4, 7):
        for target in (1e-3, 0.5, 2.0, 5.0):
            A = rng.standard_normal((d, d))
            A *= target / np.abs(A).sum(axis=0).max()
            expected = taylor_expm(A)
            rel = np.linalg.norm(pade_expm(A) - expected) / np.linalg.norm(expected)
            assert rel < 1e-12


def test_pade_expm_inverse(rng):
    from wllpypeline.modules.LinAlg import pade_expm, norm1
    for d in (2, 5):
        for target in (0.1, 1.0, 5.0, 10.0):
            A = rng.standard_normal((d, d))
            A *= target / norm1(A)
            E, E_inv = pade_expm(A), pade_expm(-A)
            tol = 1e-11 * norm1(E) * norm1(E_inv)
            np.testing.assert_allclose(E @ E_inv, np.eye(d), atol=tol)
            np.testing.assert_allclose(E_inv @ E, np.eye(d), atol=tol)


@pytest.mark.parametrize("problem,t", [("time-dep-g", 0.4), ("pendulum-sin", 0.0), ("ou-nd", 0.0)])
@pytest.mark.parametrize("beta", [1, 2])
def test_block_exponential_structure(problem, t, beta):
    from wllpypeline.modules.LinAlg import pade_expm
    from wllpypeline.modules.LocalLinearization import affine_pieces, build_a_beta, build_c_beta
    from wllpypeline.modules.Catalog import builtin_problem
    catalog_problem = builtin_problem(problem)
    y = 0.5 * np.asarray(catalog_problem.initial_law.point, dtype=float) - 0.2
    pieces = affine_pieces(catalog_problem.model, t, y, beta)
    h = 0.3
    for matrix in (build_a_beta(pieces), build_c_beta(pieces, pieces.H[0])):
        E = pade_expm(matrix.entries * h)
        d, k = matrix.d, matrix.n_cov_blocks
        edges = np.cumsum([0] + [d] * (k + 1) + [1, 1])
        # block upper triangular, as the matrix itself
        for i in range(1, len(edges) - 1):
            for j in range(i):
                np.testing.assert_allclose(E[edges[i]:edges[i + 1], edges[j]:edges[j + 1]], 0.0, atol=1e-14)
        np.testing.assert_allclose(E[:d, :d], linalg.expm(pieces.A * h), rtol=1e-12, atol=1e-14)
        for i in range(1, k + 1):
            np.testing.assert_allclose(E[i * d:(i + 1) * d, i * d:(i + 1) * d], linalg.expm(-pieces.A.T * h),
                                       rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(E[-2:, -2:], [[1.0, h], [0.0, 1.0]], atol=1e-14)


def test_pade_expm_low_order():
    from wllpypeline.modules.LinAlg import pade_expm, PadeConfig
    # (1, 1) is the Cayley transform
    np.testing.assert_allclose(pade_expm([[0.1]], PadeConfig(1, 1)), [[1.05 / 0.95]], rtol=1e-15)
    # (1, 1) with scaling still converges
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    np.testing.assert_allclose(pade_expm(A, PadeConfig(1, 1, scaling_threshold=2 ** -10)), linalg.expm(A),
                               rtol=1e-6, atol=1e-12)


def test_pade_expm_stack(rng):
    from wllpypeline.modules.LinAlg import pade_expm
    stack = rng.standard_normal((3, 2, 4, 4))
    stack[0, 0] *= 1e-3
    stack[2, 1] *= 3
    result = pade_expm(stack)
    assert result.shape == stack.shape
    for i in range(3):
        for j in range(2):
            assert relative_error(result[i, j], pade_expm(stack[i, j])) < 1e-13
            assert relative_error(result[i, j], linalg.expm(stack[i, j])) < 1e-10


def test_pade_expm_errors():
    from wllpypeline.modules.LinAlg import pade_expm, PadeConfig, PadeSingularError, LinAlgError
    with pytest.raises(ValueError):
        pade_expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        pade_expm([[np.nan]])
    # denominator I - X vanishes for X = I
    with pytest.raises(PadeSingularError):
        pade_expm(np.eye(2), PadeConfig(p=0, q=1, scaling_threshold=10))
    assert issubclass(PadeSingularError, LinAlgError)
    np.testing.assert_array_equal(pade_expm(np.zeros((3, 3))), np.eye(3))


def test_krylov_expmv_full_dimension(rng):
    from wllpypeline.modules.LinAlg import krylov_expmv, KrylovConfig
    A = rng.standard_normal((6, 6))
    v = rng.standard_normal(6)
    assert relative_error(krylov_expmv(A, v, KrylovConfig(m=6)), linalg.expm(A) @ v) < 1e-10
    # stack of operators
    As = rng.standard_normal((3, 5, 5)) * 0.5
    vs = rng.standard_normal((3, 5))
    result = krylov_expmv(As, vs, KrylovConfig(m=5))
    for i in range(3):
        assert relative_error(result[i], linalg.expm(As[i]) @ vs[i]) < 1e-10


def test_krylov_expmv_small_subspace(rng):
    from wllpypeline.modules.LinAlg import krylov_expmv, KrylovConfig
    A = -np.eye(30) + 0.01 * rng.standard_normal((30, 30))
    v = rng.standard_normal(30)
    assert relative_error(krylov_expmv(A, v, KrylovConfig(m=10)), linalg.expm(A) @ v) < 1e-9


def test_krylov_expmv_breakdown():
    from wllpypeline.modules.LinAlg import krylov_expmv, KrylovConfig
    A = np.diag([-1.0, 2.0, 3.0])
    v = np.array([2.0, 0.0, 0.0])
    np.testing.assert_allclose(krylov_expmv(A, v, KrylovConfig(m=3)), [2 * np.exp(-1.0), 0, 0], rtol=1e-14)
    np.testing.assert_array_equal(krylov_expmv(A, np.zeros(3), KrylovConfig(m=2)), np.zeros(3))


def test_breakdown_is_not_logged_by_default():
    import logging
    from unittest import mock
    from wllpypeline.modules import LinAlg, LocalLinearization, Jumps
    for module in (LinAlg, LocalLinearization, Jumps):
        assert module.logger.getEffectiveLevel() >= logging.WARNING, module.__name__
    with mock.patch.object(LinAlg.logger, "handle") as handle:
        LinAlg.krylov_expmv(np.diag([-1.0, 2.0, 3.0]), np.array([2.0, 0.0, 0.0]), LinAlg.KrylovConfig(m=3))
    handle.assert_not_called()


def test_krylov_expmv_errors():
    from wllpypeline.modules.LinAlg import krylov_expmv, KrylovConfig
    with pytest.raises(ValueError):
        krylov_expmv(np.eye(3), np.ones(3), KrylovConfig(m=4))
    with pytest.raises(ValueError):
        krylov_expmv(np.eye(3), np.ones(2), KrylovConfig(m=2))
    with pytest.raises(ValueError):
        KrylovConfig(m=0)


def test_psd_sqrt(rng):
    from wllpypeline.modules.LinAlg import psd_sqrt
    for d in (1, 3, 6):
        B = rng.standard_normal((d, max(d - 1, 1)))
        S = B @ B.T
        R = psd_sqrt(S)
        np.testing.assert_allclose(R, R.T, atol=0)
        assert np.abs(R @ R - S).max() < 1e-10 * max(1.0, np.abs(S).max())
        assert np.linalg.eigvalsh(R).min() > -1e-8
    stack = np.stack([np.eye(2) * 4, np.diag([9.0, 0.0])])
    np.testing.assert_allclose(psd_sqrt(stack), np.stack([np.eye(2) * 2, np.diag([3.0, 0.0])]), atol=1e-14)


def test_psd_sqrt_clamp_and_errors():
    from wllpypeline.modules.LinAlg import psd_sqrt, LinAlgError, NotPositiveSemidefiniteError
    np.testing.assert_allclose(psd_sqrt(np.diag([1.0, -1e-12])), np.diag([1.0, 0.0]), atol=1e-14)
    with pytest.raises(NotPositiveSemidefiniteError):
        psd_sqrt(np.diag([1.0, -1e-3]))
    with pytest.raises(LinAlgError):
        psd_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))
    # asymmetry at rounding level is removed
    S = np.array([[2.0, 1.0], [1.0 + 1e-14, 2.0]])
    R = psd_sqrt(S)
    np.testing.assert_allclose(R @ R, (S + S.T) / 2, atol=1e-12)


def test_solve_pencil(rng, stable_matrix):
    from wllpypeline.modules.LinAlg import solve_pencil
    for d in (1, 2, 5):
        A = stable_matrix(d, rng)
        B = rng.standard_normal((d, d))
        Q = B + B.T
        X = solve_pencil(A, Q)
        np.testing.assert_allclose(X, X.T, atol=0)
        assert np.abs(A @ X + X @ A.T - Q).max() < 1e-10 * max(1.0, np.abs(Q).max())
        np.testing.assert_allclose(X, linalg.solve_continuous_lyapunov(A, Q), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(solve_pencil([[-2.0]], [[3.0]]), [[-0.75]])


def test_solve_pencil_singular():
    from wllpypeline.modules.LinAlg import solve_pencil, PencilSingularError
    with pytest.raises(PencilSingularError):
        solve_pencil(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(PencilSingularError):
        solve_pencil(np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ValueError):
        solve_pencil(np.eye(2), np.eye(3))
