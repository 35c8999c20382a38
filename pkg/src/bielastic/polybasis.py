"""Reference-triangle polynomial bases and quadrature.

The reference triangle has vertices (0,0), (1,0), (0,1).  Lagrange bases of
degree 2 and 3 are tabulated (values, gradients, Hessians) at arbitrary
points via an exact monomial Vandermonde solve.

Triangle quadrature rules are built as collapsed tensor Gauss rules
symmetrized over all six barycentric permutations: symmetric, all weights
positive, and exact for the requested polynomial degree.  Exactness is
checkable against the closed-form barycentric moment

    integral over T of l1^a l2^b l3^c dx = 2|T| a! b! c! / (a+b+c+2)!
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

QUAD_DEGREES = (2, 4, 6, 8, 10, 12)

# default exactness degrees: operator matrices / right-hand sides and norms
DEGREE_STIFFNESS = 6
DEGREE_DATA = 10


def _monomial_exponents(degree):
    return [(i, j) for d in range(degree + 1) for i, j in
            [(d - jj, jj) for jj in range(d + 1)]]


def _lagrange_nodes(degree):
    """Uniform Lagrange nodes: vertices, then edge nodes, then interior."""
    if degree == 2:
        nodes = [(0, 0), (1, 0), (0, 1), (0.5, 0.5), (0, 0.5), (0.5, 0)]
    elif degree == 3:
        third = 1.0 / 3.0
        nodes = [
            (0, 0), (1, 0), (0, 1),
            # two nodes on each edge, ordered along the edge (local order:
            # edge k is opposite vertex k)
            (2 * third, third), (third, 2 * third),   # edge 0: v1 -> v2
            (0, 2 * third), (0, third),               # edge 1: v2 -> v0
            (third, 0), (2 * third, 0),               # edge 2: v0 -> v1
            (third, third),                           # centroid
        ]
    else:
        raise ValueError("only degrees 2 and 3 are supported")
    return np.array(nodes, dtype=float)


class ShapeSet:
    """Lagrange basis of a given degree on the reference triangle."""

    def __init__(self, degree):
        self.degree = degree
        self.exponents = _monomial_exponents(degree)
        self.nodes = _lagrange_nodes(degree)
        self.ndof = len(self.nodes)
        V = _eval_monomials(self.exponents, self.nodes)[0]
        # column j of coeffs holds the monomial coefficients of shape j
        self.coeffs = np.linalg.solve(V, np.eye(self.ndof))

    def tabulate(self, points):
        """Values and derivatives at reference points.

        Returns a dict with keys ``v, gx, gy, hxx, hxy, hyy``; every entry
        has shape (npoints, ndof).
        """
        tables = _eval_monomials(self.exponents, np.asarray(points, float))
        keys = ("v", "gx", "gy", "hxx", "hxy", "hyy")
        return {k: tab @ self.coeffs for k, tab in zip(keys, tables)}


def _eval_monomials(exponents, points):
    """Monomial values and derivatives up to second order at points."""
    x = points[:, 0]
    y = points[:, 1]
    n = len(exponents)
    m = len(points)
    out = [np.zeros((m, n)) for _ in range(6)]

    def powr(t, k):
        return t ** k if k >= 0 else np.zeros_like(t)

    for col, (i, j) in enumerate(exponents):
        xi, yj = powr(x, i), powr(y, j)
        out[0][:, col] = xi * yj
        out[1][:, col] = i * powr(x, i - 1) * yj
        out[2][:, col] = j * xi * powr(y, j - 1)
        out[3][:, col] = i * (i - 1) * powr(x, i - 2) * yj
        out[4][:, col] = i * j * powr(x, i - 1) * powr(y, j - 1)
        out[5][:, col] = j * (j - 1) * xi * powr(y, j - 2)
    return out


@lru_cache(maxsize=None)
def p3_shapes():
    return ShapeSet(3)


@lru_cache(maxsize=None)
def p2_shapes():
    return ShapeSet(2)


@dataclass(frozen=True)
class QuadratureRule:
    """Points (reference coordinates) and weights; weights sum to 1/2."""

    degree: int
    points: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Symmetric positive rule exact for polynomials of total degree
    ``degree``."""
    if degree not in QUAD_DEGREES:
        raise ValueError(f"unsupported quadrature degree {degree}")
    n = (degree + 3) // 2  # collapsed direction sees degree+1
    t, w = leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    # collapsed map (u, v) -> (u, v(1-u)), jacobian (1-u)
    u = np.repeat(t, n)
    v = np.tile(t, n)
    wq = np.repeat(w, n) * np.tile(w, n) * (1.0 - u)
    x = u
    y = v * (1.0 - u)
    lam = np.column_stack([1.0 - x - y, x, y])
    pts = []
    wts = []
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1),
                 (2, 1, 0)):
        lp = lam[:, perm]
        pts.append(np.column_stack([lp[:, 1], lp[:, 2]]))
        wts.append(wq / 6.0)
    return QuadratureRule(degree, np.vstack(pts), np.concatenate(wts))


def edge_gauss(npoints):
    """Gauss rule on [0, 1]; exact for degree 2*npoints - 1."""
    t, w = leggauss(npoints)
    return 0.5 * (t + 1.0), 0.5 * w


def barycentric_moment(a, b, c):
    """Integral of l1^a l2^b l3^c over the reference triangle (area 1/2)."""
    return (
        math.factorial(a) * math.factorial(b) * math.factorial(c)
        / math.factorial(a + b + c + 2)
    )


def divsigma_eval(hess1, hess2, lam, mu):
    """Divergence of the stress tensor from component Hessians.

    For u = (u1, u2) with Hessian triplets ``hess{1,2} = (hxx, hxy, hyy)``:

        div sigma(u) = mu * lap(u) + (lam + mu) * grad(div u)

    which componentwise is

        (1): (lam + 2 mu) u1_xx + mu u1_yy + (lam + mu) u2_xy
        (2): (lam + mu) u1_xy + mu u2_xx + (lam + 2 mu) u2_yy

    Arguments broadcast; returns a pair of arrays.
    """
    h1xx, h1xy, h1yy = hess1
    h2xx, h2xy, h2yy = hess2
    d1 = (lam + 2 * mu) * h1xx + mu * h1yy + (lam + mu) * h2xy
    d2 = (lam + mu) * h1xy + mu * h2xx + (lam + 2 * mu) * h2yy
    return d1, d2
