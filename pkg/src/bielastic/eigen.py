"""Linear algebra layer: direct solves, symmetric generalized eigenpairs,
constrained (saddle-point) variants, and the quadratic-pencil companion
solver.

Constrained variants work in entity variables: a matrix K restricted to
ker(Psi) is handled through the KKT system [[K, Psi^T], [Psi, 0]] so the
null-space basis is never formed explicitly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

DENSE_SYM_CAP = 3000
COMPANION_CAP = 6000
EIG_TOL = 1e-10
EIG_MAXITER = 500
RESIDUAL_FACTOR = 1e-8


@dataclass
class EigResult:
    """Eigenpairs sorted ascending (real) or by modulus (complex)."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    method: str


def norm1(A):
    A = sparse.csr_matrix(A)
    if A.nnz == 0:
        return 0.0
    return float(np.max(np.abs(A).sum(axis=0)))


def _sign_fix(vectors):
    """Deterministic orientation: largest-magnitude entry positive real."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        idx = int(np.argmax(np.abs(col)))
        pivot = col[idx]
        if np.iscomplexobj(col):
            if abs(pivot) > 0:
                out[:, j] = col * (abs(pivot) / pivot)
        elif pivot < 0:
            out[:, j] = -col
    return out


def solve_sym(A, b):
    """Direct solve with one step of iterative refinement.

    A must be symmetric positive definite on the solution space; the
    relative residual is verified to 1e-12.
    """
    A = sparse.csc_matrix(A)
    lu = spla.splu(A)
    x = lu.solve(b)
    r = b - A @ x
    x = x + lu.solve(r)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm > 0 and np.linalg.norm(r) > 1e-12 * bnorm:
        raise RuntimeError(
            f"direct solve residual {np.linalg.norm(r) / bnorm:.3e} "
            "exceeds 1e-12; matrix may be ill-conditioned or not SPD"
        )
    return x


def _check_residuals(result, scale_of, check):
    if not check:
        return result
    bounds = np.array([scale_of(v) for v in result.values])
    bad = result.residuals > RESIDUAL_FACTOR * bounds
    if np.any(bad):
        worst = float(np.max(result.residuals / bounds))
        raise RuntimeError(
            f"eigensolver residuals exceed tolerance "
            f"(worst {worst:.3e} of the 1e-8 bound); method "
            f"{result.method}, achieved {result.residuals[bad]}"
        )
    return result


def eig_sym_gen(A, B, k, dense_cutoff=DENSE_SYM_CAP, check=True):
    """k algebraically smallest eigenpairs of A x = lambda B x.

    A symmetric, B symmetric positive definite.  Dense reduction below the
    cutoff, otherwise shift-invert Lanczos about zero (A must then be
    definite so the shift misses the spectrum).
    """
    n = A.shape[0]
    k = min(k, n)
    if n <= dense_cutoff or k >= n - 1:
        Ad = A.toarray() if sparse.issparse(A) else np.asarray(A)
        Bd = B.toarray() if sparse.issparse(B) else np.asarray(B)
        vals, vecs = dla.eigh(Ad, Bd, subset_by_index=[0, k - 1])
        method = "dense"
    else:
        v0 = np.ones(n) / np.sqrt(n)
        vals, vecs = spla.eigsh(
            A, k=k, M=B, sigma=0.0, v0=v0, tol=EIG_TOL, maxiter=EIG_MAXITER
        )
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        method = "arpack"
    # B-normalize (dense path already is, up to roundoff) and fix signs
    bx = B @ vecs
    scale = np.sqrt(np.einsum("ij,ij->j", vecs, bx))
    vecs = _sign_fix(vecs / scale)
    r = A @ vecs - (B @ vecs) * vals
    residuals = np.linalg.norm(r, axis=0) / np.linalg.norm(vecs, axis=0)
    result = EigResult(vals, vecs, residuals, method)
    na, nb = norm1(A), norm1(B)
    return _check_residuals(result, lambda v: na + abs(v) * nb, check)


class ConstrainedOperator:
    """LU factorization of [[K, Psi^T], [Psi, 0]]; solves K-systems on
    ker(Psi)."""

    def __init__(self, K, psi):
        self.n = K.shape[0]
        self.m = psi.shape[0]
        self.kkt = sparse.bmat([[K, psi.T], [psi, None]], format="csc")
        self.lu = spla.splu(self.kkt)

    def solve(self, b, refine=1):
        rhs = np.zeros(self.n + self.m)
        rhs[: self.n] = b
        z = self.lu.solve(rhs)
        for _ in range(refine):
            z = z + self.lu.solve(rhs - self.kkt @ z)
        return z[: self.n]


class KernelProjector:
    """Orthogonal projector onto ker(Psi) via the normal equations."""

    def __init__(self, psi):
        self.psi = sparse.csr_matrix(psi)
        gram = (self.psi @ self.psi.T).tocsc()
        self.lu = spla.splu(gram)

    def __call__(self, x):
        return x - self.psi.T @ self.lu.solve(self.psi @ x)


def solve_sym_constrained(K, psi, b):
    """Minimize 1/2 x'Kx - b'x over ker(Psi); returns the primal part."""
    op = ConstrainedOperator(K, psi)
    x = op.solve(b)
    proj = KernelProjector(psi)
    r = proj(b - K @ x)
    bnorm = np.linalg.norm(proj(b))
    if bnorm > 0 and np.linalg.norm(r) > 1e-10 * bnorm:
        raise RuntimeError(
            "constrained solve residual "
            f"{np.linalg.norm(r) / bnorm:.3e} exceeds 1e-10"
        )
    return x


def _eig_constrained_dense(KA, KB, psi, k):
    """Dense null-space reduction of the constrained pencil; k is clamped
    to the kernel dimension."""
    Z = dla.null_space(psi.toarray() if sparse.issparse(psi) else psi)
    if Z.shape[1] == 0:
        raise RuntimeError("constraint matrix has a trivial kernel")
    k = min(k, Z.shape[1])
    Ar = Z.T @ (KA @ Z)
    Br = Z.T @ (KB @ Z)
    vals, y = dla.eigh(Ar, Br, subset_by_index=[0, k - 1])
    return vals, Z @ y


def eig_sym_constrained(KA, KB, psi, k, check=True):
    """k smallest eigenpairs of KA x = lambda KB x restricted to ker(Psi).

    Shift-invert about zero through the KKT factorization; KA must be
    positive definite on the kernel.  When most of the kernel spectrum is
    requested (the Lanczos basis would exceed the kernel) the problem is
    reduced densely onto an explicit null-space basis instead, and k is
    clamped to the kernel dimension.  Residuals are measured after
    projecting out the constraint range.
    """
    n = KA.shape[0]
    proj = KernelProjector(psi)
    kernel_dim = n - psi.shape[0]
    if k >= kernel_dim - 1:
        vals, vecs = _eig_constrained_dense(KA, KB, psi, k)
        method = "kkt-dense"
    else:
        op = ConstrainedOperator(KA, psi)
        opinv = spla.LinearOperator((n, n), matvec=op.solve, dtype=float)
        v0 = op.solve(KB @ np.ones(n))
        nv0 = np.linalg.norm(v0)
        if nv0 == 0:
            raise RuntimeError("constraint kernel start vector vanished")
        try:
            vals, vecs = spla.eigsh(
                KA, k=k, M=KB, sigma=0.0, OPinv=opinv, v0=v0 / nv0,
                tol=EIG_TOL, maxiter=EIG_MAXITER,
            )
            method = "kkt-arpack"
        except spla.ArpackError:
            vals, vecs = _eig_constrained_dense(KA, KB, psi, k)
            method = "kkt-dense"
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    bx = KB @ vecs
    scale = np.sqrt(np.einsum("ij,ij->j", vecs, bx))
    vecs = _sign_fix(vecs / scale)
    r = KA @ vecs - (KB @ vecs) * vals
    for j in range(r.shape[1]):
        r[:, j] = proj(r[:, j])
    residuals = np.linalg.norm(r, axis=0) / np.linalg.norm(vecs, axis=0)
    result = EigResult(vals, vecs, residuals, method)
    na, nb = norm1(KA), norm1(KB)
    return _check_residuals(result, lambda v: na + abs(v) * nb, check)


def eig_quadratic(K, C, M, k=None, check=True):
    """Eigenvalues of the pencil K + tau C + tau^2 M by companion
    linearization [[-C, -K], [I, 0]] z = tau [[M, 0], [0, I]] z.

    Returns eigenvalues sorted by modulus, the positive-imaginary member
    of each conjugate pair first; infinite eigenvalues are dropped.
    """
    n = K.shape[0]
    if 2 * n > COMPANION_CAP:
        raise ValueError(
            f"companion dimension {2 * n} exceeds the dense cap "
            f"{COMPANION_CAP}"
        )
    Kd = K.toarray() if sparse.issparse(K) else np.asarray(K, float)
    Cd = C.toarray() if sparse.issparse(C) else np.asarray(C, float)
    Md = M.toarray() if sparse.issparse(M) else np.asarray(M, float)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    Amat = np.block([[-Cd, -Kd], [eye, zero]])
    Bmat = np.block([[Md, zero], [zero, eye]])
    vals, vecs = dla.eig(Amat, Bmat)
    finite = np.isfinite(vals) & (np.abs(vals) < 1e12)
    vals, vecs = vals[finite], vecs[:, finite]
    order = np.lexsort((-vals.imag, np.abs(vals)))
    vals, vecs = vals[order], vecs[:, order]
    if k is not None:
        vals, vecs = vals[:k], vecs[:, :k]
    x = vecs[n:, :]
    norms = np.linalg.norm(x, axis=0)
    norms[norms == 0] = 1.0
    x = _sign_fix(x / norms)
    residuals = np.empty(vals.size)
    for j, tau in enumerate(vals):
        r = Kd @ x[:, j] + tau * (Cd @ x[:, j]) + tau**2 * (Md @ x[:, j])
        residuals[j] = np.linalg.norm(r) / np.linalg.norm(x[:, j])
    result = EigResult(vals, x, residuals, "companion")
    nk, nc, nm = norm1(Kd), norm1(Cd), norm1(Md)
    return _check_residuals(
        result, lambda v: nk + abs(v) * nc + abs(v) ** 2 * nm, check
    )
