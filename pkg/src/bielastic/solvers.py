"""Problem drivers: source solves, fourth-order eigenvalue solves, the
tau-parameterized spectral function, and transmission-eigenvalue search
by secant iteration or quadratic linearization.

Two space realizations share one interface.  The cubic element works in
entity variables with saddle-point (KKT) algebra so no explicit null-space
basis is needed at scale; an explicit conforming basis is built lazily for
the dense-only quadratic path.  The Morley element always carries its
explicit (local, sparse) basis.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import (
    bielastic_matrix,
    elastic_matrix,
    error_norms,
    graddiv_matrix,
    hessian_matrix,
    load_vector,
    mass_matrix,
    mixed_divsigma_matrix,
)
from .coefficients import as_coefficient, combine
from .eigen import (
    eig_quadratic,
    eig_sym_constrained,
    eig_sym_gen,
    solve_sym,
    solve_sym_constrained,
)
from .polybasis import triangle_quadrature
from .spaces import (
    BrokenSpace,
    b3_space,
    build_morley,
    reduce_entities,
    vector_transform,
)

SECANT_FTOL = 1e-10
SECANT_MAXITER = 50
CERT_TOL = 1e-9
DEDUPE_TOL = 1e-8
CROSSING_TOL = 1e-8


class B3Realization:
    """Nonconforming cubic space driven through entity variables."""

    element = "b3"

    def __init__(self, mesh):
        self.mesh = mesh
        self.space = BrokenSpace(mesh, 3)
        self.reduction = reduce_entities(mesh)
        self.lift, self.psi = self.reduction.vector()
        self._explicit = None

    @property
    def dofs(self):
        return 2 * self.reduction.dim

    def reduced(self, A):
        return (self.lift.T @ A @ self.lift).tocsr()

    def solve(self, A, f):
        g = solve_sym_constrained(
            self.reduced(A), self.psi, self.lift.T @ f
        )
        return self.lift @ g

    def eig_reduced(self, KA, KB, k):
        return eig_sym_constrained(KA, KB, self.psi, k)

    def eig(self, A, B, k):
        return self.eig_reduced(self.reduced(A), self.reduced(B), k)

    def explicit_basis(self):
        if self._explicit is None:
            self._explicit = vector_transform(b3_space(self.mesh).transform)
        return self._explicit

    def eig_quadratic(self, K, C, M, k=None):
        N = self.explicit_basis()
        return eig_quadratic(
            (N.T @ K @ N).toarray(),
            (N.T @ C @ N).toarray(),
            (N.T @ M @ N).toarray(),
            k,
        )


class MorleyRealization:
    """Stabilized Morley space with its explicit local basis."""

    element = "morley"

    def __init__(self, mesh):
        self.mesh = mesh
        self.morley = build_morley(mesh)
        self.space = BrokenSpace(mesh, 2)
        self.N = vector_transform(self.morley.transform)

    @property
    def dofs(self):
        return 2 * self.morley.ndof

    def reduced(self, A):
        return (self.N.T @ A @ self.N).tocsr()

    def solve(self, A, f):
        x = solve_sym(self.reduced(A).tocsc(), self.N.T @ f)
        return self.N @ x

    def eig_reduced(self, KA, KB, k):
        return eig_sym_gen(KA, KB, k)

    def eig(self, A, B, k):
        return self.eig_reduced(self.reduced(A), self.reduced(B), k)

    def eig_quadratic(self, K, C, M, k=None):
        return eig_quadratic(
            self.reduced(K).toarray(),
            self.reduced(C).toarray(),
            self.reduced(M).toarray(),
            k,
        )


def make_realization(mesh, element):
    if element == "b3":
        return B3Realization(mesh)
    if element == "morley":
        return MorleyRealization(mesh)
    raise ValueError(f"unknown element {element!r}")


def coefficient_min(space, coeff, degree=12):
    """Minimum of a coefficient over the physical quadrature points."""
    coeff = as_coefficient(coeff)
    rule = triangle_quadrature(degree)
    xq = space.physical_points(rule.points)
    return float(np.min(coeff(xq[..., 0], xq[..., 1])))


def coefficient_max(space, coeff, degree=12):
    coeff = as_coefficient(coeff)
    rule = triangle_quadrature(degree)
    xq = space.physical_points(rule.points)
    return float(np.max(coeff(xq[..., 0], xq[..., 1])))


def fourth_order_block(real, coeff, lam, mu, alpha=None, inclusive=False):
    """The weighted (div sigma, div sigma) block.

    On the cubic element the form is assembled directly.  On Morley it is
    replaced by the alpha-split stabilization: (coeff - alpha) times the
    fourth-order form plus alpha mu^2 times the full-Hessian form plus
    alpha (lambda^2 + 2 lambda mu) times the grad-div form.  The admissible
    range is 0 < alpha < min(coeff), with equality allowed for the
    transmission weight (inclusive=True).
    """
    sp = real.space
    coeff = as_coefficient(coeff)
    if real.element == "b3":
        return bielastic_matrix(sp, coeff, lam, mu, positive=True)
    if alpha is None:
        raise ValueError("the Morley element requires a stabilization alpha")
    cmin = coefficient_min(sp, coeff)
    ok = (0.0 < alpha <= cmin) if inclusive else (0.0 < alpha < cmin)
    if not ok:
        bracket = "]" if inclusive else ")"
        raise ValueError(
            f"alpha {alpha} outside the coercivity range "
            f"(0, {cmin:.6g}{bracket}"
        )
    shifted = combine("sub", coeff, alpha)
    K = bielastic_matrix(sp, shifted, lam, mu)
    K = K + alpha * mu**2 * hessian_matrix(sp)
    K = K + alpha * (lam**2 + 2 * lam * mu) * graddiv_matrix(sp)
    return K.tocsr()


def default_alpha(real, coeff):
    """Midpoint of the admissible stabilization interval."""
    return 0.5 * coefficient_min(real.space, coeff)


@dataclass
class SourceResult:
    broken: np.ndarray
    norms: dict
    dofs: int


def solve_source(real, beta, lam, mu, f1, f2, exact=None, alpha=None):
    """Weighted fourth-order source problem with load (f1, f2)."""
    A = fourth_order_block(real, beta, lam, mu, alpha)
    rhs = load_vector(real.space, f1, f2)
    broken = real.solve(A, rhs)
    norms = (
        error_norms(real.space, broken, exact) if exact is not None else {}
    )
    return SourceResult(broken, norms, real.dofs)


def solve_bielastic_eigs(real, beta, lam, mu, k, alpha=None):
    """k smallest eigenvalues of the weighted fourth-order pencil against
    the plain mass form."""
    if real.element == "morley" and alpha is None:
        alpha = default_alpha(real, beta)
    A = fourth_order_block(real, beta, lam, mu, alpha)
    M = mass_matrix(real.space)
    return real.eig(A, M, k)


def detect_density_case(space, rho0, rho1):
    """Which non-intersecting ordering the densities satisfy.

    Returns "standard" when rho0 <= 1 <= rho1 (weight (rho1 - rho0)^-1)
    and "swapped" when rho1 <= 1 <= rho0 (roles exchanged).
    """
    rho0, rho1 = as_coefficient(rho0), as_coefficient(rho1)
    max0, min0 = coefficient_max(space, rho0), coefficient_min(space, rho0)
    max1, min1 = coefficient_max(space, rho1), coefficient_min(space, rho1)
    if max0 <= 1.0 <= min1 and min1 - max0 > 0.0:
        return "standard"
    if max1 <= 1.0 <= min0 and min0 - max1 > 0.0:
        return "swapped"
    raise ValueError(
        "densities must satisfy one of the non-intersecting orderings "
        f"(rho0 range [{min0:.4g}, {max0:.4g}], "
        f"rho1 range [{min1:.4g}, {max1:.4g}])"
    )


class TepBlocks:
    """Cached primitive blocks of the transmission-eigenvalue forms.

    With lo/hi the small/large density and r = (hi - lo)^-1, the
    tau-dependent form is D + tau (F0 + F0') + tau^2 (M1 + M2) where
    D is the r-weighted fourth-order block, F0 mixes values against the
    stress divergence with weight r*lo, M1 = Mass(r*lo^2), M2 = Mass(lo).
    The search pencil subtracts tau times the elastic-energy form B, and
    the quadratic path uses the same algebra arranged as
    K + tau C + tau^2 M with K = D, C = F0 + F0' - B, M = Mass(r*lo*hi).
    """

    def __init__(self, real, lam, mu, rho0, rho1, alpha=None):
        self.real = real
        sp = real.space
        rho0, rho1 = as_coefficient(rho0), as_coefficient(rho1)
        self.case = detect_density_case(sp, rho0, rho1)
        lo, hi = (rho0, rho1) if self.case == "standard" else (rho1, rho0)
        r = combine("div", 1.0, combine("sub", hi, lo))
        self.rho_min = 1.0 / coefficient_max(sp, combine("sub", hi, lo))
        if real.element == "morley" and alpha is None:
            alpha = 0.5 * self.rho_min
        self.alpha = alpha
        D = fourth_order_block(real, r, lam, mu, alpha, inclusive=True)
        F0 = mixed_divsigma_matrix(
            sp, combine("mul", r, lo), lam, mu, positive=True
        )
        M1 = mass_matrix(sp, combine("mul", r, combine("mul", lo, lo)),
                         positive=True)
        M2 = mass_matrix(sp, lo, positive=True)
        B = elastic_matrix(sp, lam, mu)
        Mq = mass_matrix(sp, combine("mul", r, combine("mul", lo, hi)),
                         positive=True)
        self.broken = {
            "D": D.tocsr(),
            "F": (F0 + F0.T).tocsr(),
            "Msum": (M1 + M2).tocsr(),
            "B": B.tocsr(),
            "Mq": Mq.tocsr(),
        }
        self.KD = real.reduced(self.broken["D"])
        self.KF = real.reduced(self.broken["F"])
        self.KM = real.reduced(self.broken["Msum"])
        self.KB = real.reduced(self.broken["B"])

    def a_tau(self, tau):
        return self.KD + tau * self.KF + tau * tau * self.KM

    def lambda_of_tau(self, tau, k):
        """Sorted eigenvalues of the tau-form against the elastic energy."""
        res = self.real.eig_reduced(self.a_tau(tau), self.KB, k)
        if res.values[0] <= 0.0:
            warnings.warn(
                f"coercivity loss at tau={tau}: smallest eigenvalue "
                f"{res.values[0]:.6g}",
                RuntimeWarning,
            )
        return res.values


@dataclass
class TepRoot:
    tau: float
    branch: int
    residual: float
    iterations: int
    crossing_flag: bool


def _secant_refine(f, a, b, fa, fb):
    """Bracketed secant with bisection fallback."""
    t, ft = b, fb
    for it in range(1, SECANT_MAXITER + 1):
        if fb != fa:
            t = b - fb * (b - a) / (fb - fa)
        else:
            t = 0.5 * (a + b)
        lo, hi = min(a, b), max(a, b)
        if not lo < t < hi:
            t = 0.5 * (a + b)
        ft = f(t)
        if abs(ft) <= SECANT_FTOL * (1.0 + abs(t)):
            return t, ft, it, True
        if np.sign(ft) == np.sign(fa):
            a, fa = t, ft
        else:
            b, fb = t, ft
    return t, ft, SECANT_MAXITER, False


def find_teps_secant(blocks, k=12, tau_lo=0.25, tau_hi=None, grid=60):
    """Real transmission eigenvalues: roots of f_j(tau) = lambda_j(tau) - tau.

    Scans each branch for sign changes, refines every bracket by
    safeguarded secant iteration, certifies each root against all branches,
    and deduplicates.
    """
    lam0 = blocks.lambda_of_tau(0.0, k)
    k = min(k, lam0.size)
    if tau_hi is None:
        tau_hi = 1.5 * lam0[-1]
    taus = np.linspace(tau_lo, tau_hi, grid)
    table = np.array([blocks.lambda_of_tau(t, k) for t in taus])
    roots = []
    for j in range(k):
        fj = table[:, j] - taus

        def f(tau, j=j):
            return blocks.lambda_of_tau(tau, k)[j] - tau

        for i in range(grid - 1):
            if fj[i] == 0.0:
                sign_change = True
                a, b, fa, fb = taus[i], taus[i], 0.0, 0.0
            else:
                sign_change = fj[i] * fj[i + 1] < 0.0
                a, b, fa, fb = taus[i], taus[i + 1], fj[i], fj[i + 1]
            if not sign_change:
                continue
            gaps = np.diff(table[i]), np.diff(table[i + 1])
            crossing = any(np.min(np.abs(g)) < CROSSING_TOL for g in gaps)
            if fa == 0.0 and fb == 0.0:
                tau_star, iters = a, 0
            else:
                tau_star, _, iters, ok = _secant_refine(f, a, b, fa, fb)
                if not ok:
                    continue
            lam_at = blocks.lambda_of_tau(tau_star, k)
            residual = float(np.min(np.abs(lam_at - tau_star)))
            if residual <= CERT_TOL * (1.0 + abs(tau_star)):
                roots.append(
                    TepRoot(tau_star, j, residual, iters, crossing)
                )
    roots.sort(key=lambda r: r.tau)
    unique = []
    for root in roots:
        if unique and abs(root.tau - unique[-1].tau) <= DEDUPE_TOL * (
            1.0 + abs(root.tau)
        ):
            continue
        unique.append(root)
    if not unique:
        warnings.warn(
            "no transmission eigenvalue bracketed in the scan range",
            RuntimeWarning,
        )
    return unique


def find_teps_quadratic(blocks, k=10):
    """Transmission eigenvalues through the companion linearization of
    K + tau C + tau^2 M; complex values allowed."""
    C = (blocks.broken["F"] - blocks.broken["B"]).tocsr()
    return blocks.real.eig_quadratic(
        blocks.broken["D"], C, blocks.broken["Mq"], k
    )
