"""Constrained cubic space and Morley element.

The null-space construction is cross-checked against a dense SVD of the
explicit constraint matrix on small meshes (dimension and span equality),
and conforming functions are verified against independent sympy edge
integrals of the trace jumps.
"""

import numpy as np
import pytest
import scipy.linalg
import sympy as sp

from bielastic.mesh import TriMesh, generate_domain
from bielastic.polybasis import edge_gauss, p3_shapes
from bielastic.spaces import (
    BrokenSpace,
    b3_space,
    build_b3_constraints,
    build_morley,
    build_nullspace,
    reduce_entities,
    vector_transform,
)


def single_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    return TriMesh(verts, tris, domain="unit-triangle", level=0, h=1.0)


def dense_nullspace(matrix, tol=1e-9):
    dense = matrix.toarray()
    u, s, vt = np.linalg.svd(dense)
    smax = s.max() if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return vt[rank:].T


class TestConstraintRows:
    def test_single_triangle_counts(self):
        cs = build_b3_constraints(single_triangle())
        assert cs.matrix.shape == (12, 10)
        kinds, counts = np.unique(cs.kinds, return_counts=True)
        table = dict(zip(kinds.tolist(), counts.tolist()))
        assert table == {
            "vertex-bdry": 3,
            "bdry-mean": 3,
            "bdry-n0": 3,
            "bdry-n1": 3,
        }

    def test_square_level0_counts(self):
        mesh = generate_domain("unit-square", 0)
        cs = build_b3_constraints(mesh)
        kinds, counts = np.unique(cs.kinds, return_counts=True)
        table = dict(zip(kinds.tolist(), counts.tolist()))
        assert table["vertex-int"] == 5
        assert table["vertex-bdry"] == 18
        assert table["jump-mean"] == 8
        assert table["jump-n0"] == 8
        assert table["jump-n1"] == 8
        assert table["bdry-mean"] == 8
        assert cs.nrows == 71
        assert cs.matrix.shape[1] == 80

    def test_row_support_is_local(self):
        mesh = generate_domain("l-shape", 1)
        cs = build_b3_constraints(mesh)
        per_row = np.diff(cs.matrix.tocsr().indptr)
        assert per_row.max() <= 20


class TestNullspaceOracle:
    """Dimension and span agreement with a dense SVD null space."""

    CASES = [
        ("unit-square", 0),
        ("unit-square", 1),
        ("right-triangle", 0),
        ("right-triangle", 1),
        ("equilateral-triangle", 0),
        ("l-shape", 0),
    ]

    @pytest.mark.parametrize("domain,level", CASES)
    def test_matches_dense_svd(self, domain, level):
        mesh = generate_domain(domain, level)
        cs = build_b3_constraints(mesh)
        basis = build_nullspace(cs)
        ref = dense_nullspace(cs.matrix)
        assert basis.ndof == ref.shape[1]
        if basis.ndof == 0:
            return
        mine = basis.transform.toarray()
        stacked = np.hstack([ref, mine])
        rank = np.linalg.matrix_rank(stacked, tol=1e-8)
        assert rank == basis.ndof
        # constructed columns are independent
        assert np.linalg.matrix_rank(mine, tol=1e-8) == basis.ndof

    def test_single_triangle_dim_zero(self):
        basis = b3_space(single_triangle())
        assert basis.ndof == 0
        assert basis.transform.shape == (10, 0)

    def test_constraint_residual_small(self):
        mesh = generate_domain("unit-square", 2)
        cs = build_b3_constraints(mesh)
        basis = build_nullspace(cs)
        resid = cs.matrix @ basis.transform
        scale = np.abs(basis.transform.data).max()
        rmax = np.abs(resid.data).max() if resid.nnz else 0.0
        assert rmax <= 1e-10 * scale
        assert basis.report["constraint_residual"] <= 1e-9

    def test_report_fields(self):
        basis = b3_space(generate_domain("unit-square", 1))
        rep = basis.report
        for key in ("rank", "nfree", "nrows", "nvars", "seconds"):
            assert key in rep
        assert rep["nfree"] == basis.ndof

    @pytest.mark.parametrize("domain,level", [
        ("unit-square", 0), ("unit-square", 1),
        ("right-triangle", 1), ("l-shape", 0),
    ])
    def test_free_space_matches_dense_svd(self, domain, level):
        mesh = generate_domain(domain, level)
        cs = build_b3_constraints(mesh, homogeneous=False)
        basis = build_nullspace(cs)
        ref = dense_nullspace(cs.matrix)
        assert basis.ndof == ref.shape[1]
        stacked = np.hstack([ref, basis.transform.toarray()])
        assert np.linalg.matrix_rank(stacked, tol=1e-8) == basis.ndof

    def test_dimension_formulas(self):
        """Scalar dims on these meshes: constrained 4*Vi + T - 1 (the
        compatibility system has exactly two redundant rows), free
        4*V + T - 3 (full rank; the generic count 4*V + T - 1 overcounts
        by the two relations that only appear with boundary conditions)."""
        for domain, level in [("unit-square", 2), ("right-triangle", 2),
                              ("l-shape", 1), ("equilateral-triangle", 2)]:
            mesh = generate_domain(domain, level)
            vi = int(np.sum(~mesh.boundary_vertex))
            constrained = b3_space(mesh)
            assert constrained.ndof == 4 * vi + mesh.nt - 1
            free = b3_space(mesh, homogeneous=False)
            assert free.ndof == 4 * mesh.nv + mesh.nt - 3


class TestEntityReduction:
    """The sparse full-rank reduction agrees with the explicit basis."""

    def test_dim_and_kernel_match(self):
        mesh = generate_domain("unit-square", 1)
        basis = b3_space(mesh)
        red = reduce_entities(mesh)
        assert red.dim == basis.ndof
        # psi has full row rank and its kernel lifts onto the same space
        psi = red.psi.toarray()
        assert np.linalg.matrix_rank(psi, tol=1e-8) == psi.shape[0]
        _, _, vt = np.linalg.svd(psi)
        kern = vt[psi.shape[0]:].T
        lifted = red.lift @ kern
        stacked = np.hstack([basis.transform.toarray(), lifted])
        assert np.linalg.matrix_rank(stacked, tol=1e-8) == basis.ndof

    def test_lift_rows_are_local(self):
        red = reduce_entities(generate_domain("l-shape", 1))
        per_row = np.diff(red.lift.indptr)
        assert per_row.max() <= 12
        per_psi_row = np.diff(red.psi.indptr)
        assert per_psi_row.max() <= 12

    def test_free_dim(self):
        mesh = generate_domain("right-triangle", 2)
        red = reduce_entities(mesh, homogeneous=False)
        assert red.dim == 4 * mesh.nv + mesh.nt - 3

    def test_vector_blocks(self):
        mesh = generate_domain("unit-square", 0)
        red = reduce_entities(mesh)
        lift_v, psi_v = red.vector()
        assert lift_v.shape == (2 * red.lift.shape[0], 2 * red.nvars)
        assert psi_v.shape == (2 * red.psi.shape[0], 2 * red.nvars)


class TestConformingFunctions:
    """Random members of the space satisfy the defining continuity
    conditions, checked by independent integration."""

    def conforming_field(self, mesh, seed):
        basis = b3_space(mesh)
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(basis.ndof)
        return basis, (basis.transform @ u).reshape(mesh.nt, 10)

    def test_vertex_values_agree(self):
        mesh = generate_domain("unit-square", 1)
        basis, coeffs = self.conforming_field(mesh, 7)
        # Lagrange coefficient 0..2 is the vertex value
        values = {}
        for t in range(mesh.nt):
            for i in range(3):
                v = mesh.triangles[t, i]
                values.setdefault(v, []).append(coeffs[t, i])
        for v, vals in values.items():
            vals = np.array(vals)
            if mesh.boundary_vertex[v]:
                assert np.abs(vals).max() < 1e-10
            else:
                assert np.abs(vals - vals[0]).max() < 1e-10

    def test_edge_jumps_vanish_quadrature(self):
        """Five-point Gauss (finer than construction) on every edge."""
        mesh = generate_domain("l-shape", 1)
        basis, coeffs = self.conforming_field(mesh, 11)
        shapes = p3_shapes()
        space = BrokenSpace(mesh, 3)
        s, w = edge_gauss(5)
        normals = mesh.edge_normals()
        lengths = mesh.edge_lengths()
        verts = mesh.vertices
        for e in range(mesh.ne):
            a, b = mesh.edges[e]
            pts = verts[a][None, :] + s[:, None] * (verts[b] - verts[a])
            sides = []
            for t in mesh.edge_tris[e]:
                if t < 0:
                    continue
                ref = (pts - space.p0[t]) @ space.Binv[t].T
                tab = shapes.tabulate(ref)
                val = tab["v"] @ coeffs[t]
                gref = np.stack([tab["gx"] @ coeffs[t],
                                 tab["gy"] @ coeffs[t]], axis=1)
                gphys = gref @ space.Binv[t]
                dn = gphys @ normals[e]
                sides.append((val, dn))
            if len(sides) == 2:
                dval = sides[0][0] - sides[1][0]
                ddn = sides[0][1] - sides[1][1]
            else:
                dval, ddn = sides[0]
            le = lengths[e]
            mean_jump = le * np.dot(w, dval)
            mom0 = le * np.dot(w, ddn)
            mom1 = le * np.dot(w, (s - 0.5) * ddn)
            assert abs(mean_jump) < 1e-10
            assert abs(mom0) < 1e-10
            assert abs(mom1) < 1e-10

    def test_edge_jumps_vanish_sympy(self):
        """Exact symbolic edge integrals on the coarse square mesh."""
        mesh = generate_domain("unit-square", 0)
        basis, coeffs = self.conforming_field(mesh, 3)
        x1, x2, s = sp.symbols("x1 x2 s")
        shapes = p3_shapes()
        # per-triangle polynomial in physical coordinates
        tri_polys = []
        space = BrokenSpace(mesh, 3)
        for t in range(mesh.nt):
            Binv = sp.Matrix(space.Binv[t])
            p0 = sp.Matrix(space.p0[t])
            ref = Binv * (sp.Matrix([x1, x2]) - p0)
            mono = sp.Matrix(
                [ref[0] ** a * ref[1] ** b
                 for a, b in shapes.exponents]
            )
            poly = (sp.Matrix(shapes.coeffs.T) * mono).T * sp.Matrix(
                coeffs[t]
            )
            tri_polys.append(sp.expand(poly[0]))
        for e in range(mesh.ne):
            a, b = mesh.edges[e]
            va, vb = mesh.vertices[a], mesh.vertices[b]
            xs = va[0] + s * (vb[0] - va[0])
            ys = va[1] + s * (vb[1] - va[1])
            n = mesh.edge_normals()[e]
            terms = []
            for t in mesh.edge_tris[e]:
                if t < 0:
                    continue
                p = tri_polys[t]
                dn = n[0] * sp.diff(p, x1) + n[1] * sp.diff(p, x2)
                terms.append((
                    p.subs({x1: xs, x2: ys}),
                    dn.subs({x1: xs, x2: ys}),
                ))
            if len(terms) == 2:
                jv = terms[0][0] - terms[1][0]
                jd = terms[0][1] - terms[1][1]
            else:
                jv, jd = terms[0]
            for integrand in (jv, jd, (s - sp.Rational(1, 2)) * jd):
                val = float(sp.integrate(integrand, (s, 0, 1)))
                assert abs(val) < 1e-10


class TestBrokenSpace:
    def test_geometry_inverse(self):
        mesh = generate_domain("equilateral-triangle", 1)
        space = BrokenSpace(mesh, 3)
        prod = np.einsum("tij,tjk->tik", space.Binv, space.B)
        eye = np.broadcast_to(np.eye(2), prod.shape)
        assert np.abs(prod - eye).max() < 1e-13
        assert np.abs(space.detB - 2 * mesh.signed_areas()).max() < 1e-15

    def test_physical_derivatives_sympy(self):
        """Push-forward of gradients and Hessians on a skewed triangle."""
        verts = np.array([[0.2, 0.1], [1.3, 0.4], [0.5, 1.7]])
        tris = np.array([[0, 1, 2]])
        mesh = TriMesh(verts, tris, domain="unit-triangle", level=0, h=1.0)
        space = BrokenSpace(mesh, 3)
        rng = np.random.default_rng(5)
        c = rng.standard_normal(10)
        x1, x2 = sp.symbols("x1 x2")
        Binv = sp.Matrix(space.Binv[0])
        p0 = sp.Matrix(space.p0[0])
        ref = Binv * (sp.Matrix([x1, x2]) - p0)
        shapes = space.shapes
        mono = sp.Matrix(
            [ref[0] ** a * ref[1] ** b for a, b in shapes.exponents]
        )
        poly = ((sp.Matrix(shapes.coeffs.T) * mono).T * sp.Matrix(c))[0]
        pts_ref = np.array([[0.25, 0.25], [0.1, 0.6], [0.3, 0.3]])
        tab = space.tabulate(pts_ref)
        pts_phys = space.physical_points(pts_ref)[0]
        for q, (px, py) in enumerate(pts_phys):
            subs = {x1: px, x2: py}
            assert float(poly.subs(subs)) == pytest.approx(
                float(tab["v"][0, q] @ c), abs=1e-10
            )
            assert float(sp.diff(poly, x1).subs(subs)) == pytest.approx(
                float(tab["gx"][0, q] @ c), abs=1e-9
            )
            assert float(sp.diff(poly, x2).subs(subs)) == pytest.approx(
                float(tab["gy"][0, q] @ c), abs=1e-9
            )
            assert float(sp.diff(poly, x1, 2).subs(subs)) == pytest.approx(
                float(tab["hxx"][0, q] @ c), abs=1e-8
            )
            assert float(sp.diff(poly, x1, x2).subs(subs)) == pytest.approx(
                float(tab["hxy"][0, q] @ c), abs=1e-8
            )
            assert float(sp.diff(poly, x2, 2).subs(subs)) == pytest.approx(
                float(tab["hyy"][0, q] @ c), abs=1e-8
            )


class TestMorley:
    def test_dimension_square_level0(self):
        mesh = generate_domain("unit-square", 0)
        morley = build_morley(mesh)
        assert morley.ndof == 9  # one interior vertex, eight interior edges

    def test_dimension_formula(self):
        for domain, level in [("unit-square", 2), ("l-shape", 1),
                              ("right-triangle", 2)]:
            mesh = generate_domain(domain, level)
            morley = build_morley(mesh)
            vi = int(np.sum(~mesh.boundary_vertex))
            ei = int(np.sum(~mesh.boundary_edge))
            assert morley.ndof == vi + ei

    def test_shared_functionals_agree(self):
        mesh = generate_domain("unit-square", 1)
        morley = build_morley(mesh)
        rng = np.random.default_rng(2)
        u = rng.standard_normal(morley.ndof)
        coeffs = (morley.transform @ u).reshape(mesh.nt, 6)
        space = BrokenSpace(mesh, 2)
        mids = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])
        tab = space.tabulate(mids)
        normals = mesh.edge_normals()
        # vertex values agree (Lagrange coefficients at vertices)
        for v in range(mesh.nv):
            vals = [
                coeffs[t, i]
                for t in range(mesh.nt)
                for i in range(3)
                if mesh.triangles[t, i] == v
            ]
            vals = np.array(vals)
            if mesh.boundary_vertex[v]:
                assert np.abs(vals).max() < 1e-11
            else:
                assert np.abs(vals - vals[0]).max() < 1e-11
        # midpoint normal derivative agrees across every interior edge
        for e in range(mesh.ne):
            sides = []
            for t in mesh.edge_tris[e]:
                if t < 0:
                    continue
                k = int(np.where(mesh.tri_edges[t] == e)[0][0])
                g = np.array([
                    tab["gx"][t, k] @ coeffs[t],
                    tab["gy"][t, k] @ coeffs[t],
                ])
                sides.append(float(g @ normals[e]))
            if len(sides) == 2:
                assert abs(sides[0] - sides[1]) < 1e-11
            else:
                assert abs(sides[0]) < 1e-11

    def test_reproduces_quadratic_locally(self):
        """Setting the six functionals of q on one triangle recovers q."""
        verts = np.array([[0.0, 0.0], [1.1, 0.2], [0.3, 0.9]])
        tris = np.array([[0, 1, 2]])
        mesh = TriMesh(verts, tris, domain="unit-triangle", level=0, h=1.0)
        space = BrokenSpace(mesh, 2)

        def q(x, y):
            return 1.0 + 2.0 * x - y + 0.5 * x * x + x * y - 0.25 * y * y

        def gq(x, y):
            return np.array([2.0 + x + y, -1.0 + x - 0.5 * y])

        mids = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])
        tabm = space.tabulate(mids)
        normals = mesh.edge_normals()
        # functional values of q
        fvals = np.empty(6)
        for i in range(3):
            fvals[i] = q(*verts[i])
        for k in range(3):
            e = mesh.tri_edges[0, k]
            a, b = mesh.edges[e]
            mid = 0.5 * (verts[a] + verts[b])
            fvals[3 + k] = gq(*mid) @ normals[e]
        dual = np.zeros((6, 6))
        dual[:3, :3] = np.eye(3)
        for k in range(3):
            e = mesh.tri_edges[0, k]
            g = np.stack([tabm["gx"][0, k], tabm["gy"][0, k]], axis=1)
            dual[3 + k] = g @ normals[e]
        coeffs = np.linalg.solve(dual, fvals)
        pts = np.array([[0.2, 0.3], [0.5, 0.1], [0.1, 0.7], [1 / 3, 1 / 3]])
        tab = space.tabulate(pts)
        phys = space.physical_points(pts)[0]
        vals = tab["v"][0] @ coeffs
        expect = np.array([q(px, py) for px, py in phys])
        assert np.abs(vals - expect).max() < 1e-12


class TestVectorTransform:
    def test_block_structure(self):
        mesh = generate_domain("unit-square", 0)
        basis = b3_space(mesh)
        NV = vector_transform(basis.transform)
        n_broken = basis.transform.shape[0]
        assert NV.shape == (2 * n_broken, 2 * basis.ndof)
        diff = (
            NV[:n_broken, : basis.ndof] - basis.transform
        )
        assert np.abs(diff.toarray()).max() == 0.0
        assert NV[:n_broken, basis.ndof:].nnz == 0
