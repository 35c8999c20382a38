"""Eigen/linear-solver layer checks against dense oracles."""

import numpy as np
import pytest
import scipy.linalg as dla
import scipy.sparse as sparse

from bielastic.assembly import bielastic_matrix, load_vector, mass_matrix
from bielastic.eigen import (
    ConstrainedOperator,
    KernelProjector,
    eig_quadratic,
    eig_sym_constrained,
    eig_sym_gen,
    norm1,
    solve_sym,
    solve_sym_constrained,
)
from bielastic.mesh import generate_domain
from bielastic.spaces import (
    BrokenSpace,
    b3_space,
    reduce_entities,
    vector_transform,
)

LAM, MU = 0.25, 0.0625


def random_spd(rng, n, density=0.4):
    R = sparse.random(n, n, density=density, random_state=rng, format="csr")
    A = R @ R.T + n * sparse.eye(n)
    return sparse.csr_matrix(A)


class TestSolveSym:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.0])
        assert np.allclose(solve_sym(sparse.eye(3, format="csr"), b), b)

    def test_diagonal(self):
        A = sparse.diags([2.0, 4.0]).tocsr()
        x = solve_sym(A, np.array([2.0, 4.0]))
        assert np.allclose(x, [1.0, 1.0])

    def test_random_spd_residuals(self):
        rng = np.random.default_rng(11)
        for n in (5, 12, 30, 60):
            A = random_spd(rng, n)
            b = rng.standard_normal(n)
            x = solve_sym(A, b)
            assert np.linalg.norm(b - A @ x) <= 1e-12 * np.linalg.norm(b)

    def test_singular_matrix_raises(self):
        A = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(RuntimeError):
            solve_sym(A, np.array([1.0, 0.0]))


class TestEigSymGen:
    def test_diagonal_pencil(self):
        A = sparse.diags([2.0, 3.0]).tocsr()
        B = sparse.eye(2, format="csr")
        res = eig_sym_gen(A, B, 2)
        assert np.allclose(res.values, [2.0, 3.0])

    def test_a_equals_b_gives_ones(self):
        rng = np.random.default_rng(3)
        A = random_spd(rng, 25)
        res = eig_sym_gen(A, A.copy(), 5)
        assert np.allclose(res.values, 1.0, atol=1e-10)

    def test_sparse_path_matches_dense(self):
        rng = np.random.default_rng(7)
        n, k = 120, 6
        A = random_spd(rng, n, density=0.05)
        B = random_spd(rng, n, density=0.05)
        dense = eig_sym_gen(A, B, k, dense_cutoff=10**6)
        arpack = eig_sym_gen(A, B, k, dense_cutoff=0)
        assert dense.method == "dense" and arpack.method == "arpack"
        assert np.allclose(arpack.values, dense.values, rtol=1e-9)
        assert np.all(np.diff(dense.values) >= -1e-12)
        for res in (dense, arpack):
            bn = np.einsum("ij,ij->j", res.vectors, (B @ res.vectors))
            assert np.allclose(bn, 1.0, atol=1e-8)

    def test_residual_bound(self):
        rng = np.random.default_rng(19)
        A = random_spd(rng, 40)
        B = random_spd(rng, 40)
        res = eig_sym_gen(A, B, 4)
        bound = 1e-8 * (norm1(A) + np.abs(res.values) * norm1(B))
        assert np.all(res.residuals <= bound)


@pytest.fixture(scope="module")
def small_system():
    mesh = generate_domain("unit-square", 1)
    space = BrokenSpace(mesh, 3)
    A = bielastic_matrix(space, None, LAM, MU)
    M = mass_matrix(space)
    red = reduce_entities(mesh)
    lift, psi = red.vector()
    basis = b3_space(mesh)
    N = vector_transform(basis.transform)
    f = load_vector(
        space,
        lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        lambda x, y: x * (1 - x) * y * (1 - y),
    )
    return space, A, M, lift, psi, N, f


class TestConstrained:
    def test_projector_annihilates_constraints(self, small_system):
        _, _, _, _, psi, _, _ = small_system
        proj = KernelProjector(psi)
        rng = np.random.default_rng(2)
        x = rng.standard_normal(psi.shape[1])
        px = proj(x)
        assert np.linalg.norm(psi @ px) <= 1e-10 * np.linalg.norm(x)
        assert np.allclose(proj(px), px, atol=1e-12)

    def test_kkt_solve_stays_in_kernel(self, small_system):
        _, A, _, lift, psi, _, f = small_system
        K = (lift.T @ A @ lift).tocsr()
        op = ConstrainedOperator(K, psi)
        x = op.solve(lift.T @ f)
        assert np.linalg.norm(psi @ x) <= 1e-10 * np.linalg.norm(x)

    def test_constrained_solve_matches_explicit_basis(self, small_system):
        _, A, _, lift, psi, N, f = small_system
        K = (lift.T @ A @ lift).tocsr()
        g = solve_sym_constrained(K, psi, lift.T @ f)
        y = solve_sym((N.T @ A @ N).tocsc(), N.T @ f)
        broken_kkt = lift @ g
        broken_dense = N @ y
        scale = np.linalg.norm(broken_dense)
        assert np.linalg.norm(broken_kkt - broken_dense) <= 1e-8 * scale

    def test_constrained_eigs_match_explicit_basis(self, small_system):
        _, A, M, lift, psi, N, _ = small_system
        KA = (lift.T @ A @ lift).tocsr()
        KB = (lift.T @ M @ lift).tocsr()
        res = eig_sym_constrained(KA, KB, psi, 6)
        Ad = (N.T @ A @ N).toarray()
        Bd = (N.T @ M @ N).toarray()
        ref = dla.eigh(Ad, Bd, subset_by_index=[0, 5], eigvals_only=True)
        assert np.allclose(res.values, ref, rtol=1e-9)
        for j in range(6):
            x = res.vectors[:, j]
            assert np.linalg.norm(psi @ x) <= 1e-8 * np.linalg.norm(x)


class TestEigQuadratic:
    def test_scalar_pure_imaginary(self):
        res = eig_quadratic(np.eye(1), np.zeros((1, 1)), np.eye(1))
        assert np.allclose(res.values, [1j, -1j])

    def test_scalar_real_roots(self):
        res = eig_quadratic(
            2 * np.eye(1), -3 * np.eye(1), np.eye(1)
        )
        assert np.allclose(sorted(res.values.real), [1.0, 2.0])
        assert np.allclose(res.values.imag, 0.0)

    def test_companion_roundtrip(self):
        rng = np.random.default_rng(23)
        for n in (4, 9, 17):
            R = rng.standard_normal((n, n))
            M = R @ R.T + n * np.eye(n)
            C = rng.standard_normal((n, n))
            C = C + C.T
            K = rng.standard_normal((n, n))
            K = K + K.T
            res = eig_quadratic(K, C, M)
            scale = norm1(K) + norm1(C) + norm1(M)
            for tau in res.values:
                P = K + tau * C + tau**2 * M
                smin = np.linalg.svd(P, compute_uv=False)[-1]
                bound = (
                    norm1(K)
                    + abs(tau) * norm1(C)
                    + abs(tau) ** 2 * norm1(M)
                )
                assert smin <= 1e-8 * max(bound, scale)

    def test_conjugate_pairs(self):
        rng = np.random.default_rng(5)
        n = 8
        R = rng.standard_normal((n, n))
        M = R @ R.T + n * np.eye(n)
        C = rng.standard_normal((n, n))
        C = C + C.T
        K = rng.standard_normal((n, n))
        K = K + K.T
        vals = eig_quadratic(K, C, M).values
        complex_vals = vals[np.abs(vals.imag) > 1e-8]
        for v in complex_vals:
            dist = np.min(np.abs(complex_vals - np.conj(v)))
            assert dist <= 1e-8 * (1 + abs(v))

    def test_positive_imag_listed_first(self):
        res = eig_quadratic(np.eye(1), np.zeros((1, 1)), np.eye(1))
        assert res.values[0].imag > 0

    def test_dimension_cap(self):
        n = 3001
        big = sparse.eye(n, format="csr")
        with pytest.raises(ValueError, match="cap"):
            eig_quadratic(big, big, big)
