"""Finite element spaces over broken per-triangle Lagrange bases.

Three layers live here:

* ``BrokenSpace``: discontinuous piecewise P2/P3 with per-triangle Lagrange
  coefficients and affine push-forward of values/gradients/Hessians.

* The constrained cubic space (element id ``b3``): piecewise cubics that are
  continuous at vertices, have edge-mean continuity of the value, and
  edge-moment continuity of the normal derivative against linears; boundary
  analogues vanish.  It is realized as the null space N of the constraint
  system over broken-P3 coefficients.  The construction reduces the broken
  constraints exactly to shared entity variables (vertex values plus three
  per-edge trace functionals) and runs a rank-revealing sparse row echelon
  with column pivoting on the residual per-triangle compatibility rows; the
  constraint set is rank-deficient globally, so row counting is never used.

* ``MorleySpace``: the quadratic element with vertex values and edge mean
  normal derivatives, built from per-triangle dual-basis inversion.

Every space exposes ``transform``: a sparse matrix mapping conforming
coefficients to broken coefficients (one scalar component).
"""

import heapq
import time

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .polybasis import edge_gauss, p2_shapes, p3_shapes

DROPTOL = 1e-9

# slot layout of the twelve entity functionals of a cubic on one triangle
SLOT_NAMES = (
    "v0", "v1", "v2",
    "m0", "n00", "n01",
    "m1", "n10", "n11",
    "m2", "n20", "n21",
)


class BrokenSpace:
    """Discontinuous piecewise polynomials, per-triangle Lagrange basis."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        self.shapes = p3_shapes() if degree == 3 else p2_shapes()
        self.nloc = self.shapes.ndof
        p = mesh.vertices[mesh.triangles]
        self.p0 = p[:, 0, :]
        self.B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        self.detB = (
            self.B[:, 0, 0] * self.B[:, 1, 1]
            - self.B[:, 0, 1] * self.B[:, 1, 0]
        )
        self.Binv = (
            np.stack(
                [
                    np.stack([self.B[:, 1, 1], -self.B[:, 0, 1]], axis=1),
                    np.stack([-self.B[:, 1, 0], self.B[:, 0, 0]], axis=1),
                ],
                axis=1,
            )
            / self.detB[:, None, None]
        )
        self._ref_cache = {}

    @property
    def ndof(self):
        """Scalar broken dimension."""
        return self.mesh.nt * self.nloc

    def _ref_tables(self, points):
        key = points.tobytes()
        if key not in self._ref_cache:
            self._ref_cache[key] = self.shapes.tabulate(points)
        return self._ref_cache[key]

    def physical_points(self, ref_points, sel=slice(None)):
        return self.p0[sel, None, :] + np.einsum(
            "tab,qb->tqa", self.B[sel], ref_points
        )

    def tabulate(self, ref_points, sel=slice(None)):
        """Physical values/derivatives on a triangle range.

        Returns dict with keys v, gx, gy, hxx, hxy, hyy of shape
        (ntriangles, npoints, nloc).
        """
        ref = self._ref_tables(ref_points)
        J = self.Binv[sel]
        j00 = J[:, 0, 0, None, None]
        j01 = J[:, 0, 1, None, None]
        j10 = J[:, 1, 0, None, None]
        j11 = J[:, 1, 1, None, None]
        gx, gy = ref["gx"], ref["gy"]
        hxx, hxy, hyy = ref["hxx"], ref["hxy"], ref["hyy"]
        nt = J.shape[0]
        out = {
            "v": np.broadcast_to(ref["v"], (nt,) + ref["v"].shape),
            "gx": j00 * gx + j10 * gy,
            "gy": j01 * gx + j11 * gy,
            "hxx": j00**2 * hxx + 2 * j00 * j10 * hxy + j10**2 * hyy,
            "hxy": j00 * j01 * hxx + (j00 * j11 + j10 * j01) * hxy
            + j10 * j11 * hyy,
            "hyy": j01**2 * hxx + 2 * j01 * j11 * hxy + j11**2 * hyy,
        }
        return out


class ConstraintSystem:
    """Sparse linear constraints whose null space is the conforming space.

    With ``homogeneous=True`` the boundary rows (vertex values, edge value
    means, edge normal moments) are included, so the null space carries the
    zero boundary conditions.  With ``homogeneous=False`` only the interior
    continuity rows are kept; the null space is then the full nonconforming
    space without boundary conditions, whose dimension is the quantity
    reported as the degree-of-freedom count of the method.
    """

    def __init__(self, mesh, matrix, kinds, homogeneous=True):
        self.mesh = mesh
        self.matrix = matrix
        self.kinds = kinds
        self.homogeneous = homogeneous

    @property
    def nrows(self):
        return self.matrix.shape[0]


def _edge_functional_tables(mesh, ngauss=3):
    """Per-triangle edge-functional rows of the local P3 basis.

    For triangle t and local edge k (opposite local vertex k) returns the
    rows of the three trace functionals, taken in the global orientation of
    the edge (lower to higher vertex index):

      mean value   (1/|e|) int_e v ds
      n-moment 0   int_e p0 dv/dn ds,   p0 = |e|**-1/2
      n-moment 1   int_e p1 dv/dn ds,   p1 = sqrt(12/|e|) * (s/|e| - 1/2)

    Shapes: (nt, 3, 10) each.
    """
    shapes = p3_shapes()
    s, w = edge_gauss(ngauss)
    refv = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    # reference Gauss points for each (local edge, direction) pair
    ref_pts = np.empty((3, 2, ngauss, 2))
    for k in range(3):
        a, b = refv[(k + 1) % 3], refv[(k + 2) % 3]
        ref_pts[k, 0] = a[None, :] + s[:, None] * (b - a)[None, :]
        ref_pts[k, 1] = b[None, :] + s[:, None] * (a - b)[None, :]
    flat = ref_pts.reshape(-1, 2)
    tab = shapes.tabulate(flat)
    val = tab["v"].reshape(3, 2, ngauss, 10)
    gx = tab["gx"].reshape(3, 2, ngauss, 10)
    gy = tab["gy"].reshape(3, 2, ngauss, 10)

    nt = mesh.nt
    tri = mesh.triangles
    lengths = mesh.edge_lengths()
    normals = mesh.edge_normals()
    mean = np.empty((nt, 3, 10))
    mom0 = np.empty((nt, 3, 10))
    mom1 = np.empty((nt, 3, 10))
    Binv = BrokenSpace(mesh, 3).Binv  # light: geometry only
    shat = s - 0.5
    for k in range(3):
        e = mesh.tri_edges[:, k]
        # direction 0 if the global edge start is local vertex k+1
        fwd = (mesh.edges[e, 0] == tri[:, (k + 1) % 3]).astype(int)
        v = val[k, :, :, :][1 - fwd]           # (nt, ngauss, 10)
        gxk = gx[k, :, :, :][1 - fwd]
        gyk = gy[k, :, :, :][1 - fwd]
        gpx = Binv[:, 0, 0, None, None] * gxk + Binv[:, 1, 0, None, None] * gyk
        gpy = Binv[:, 0, 1, None, None] * gxk + Binv[:, 1, 1, None, None] * gyk
        dn = gpx * normals[e, 0, None, None] + gpy * normals[e, 1, None, None]
        le = lengths[e][:, None]
        mean[:, k, :] = np.einsum("q,tql->tl", w, v)
        mom0[:, k, :] = np.sqrt(le) * np.einsum("q,tql->tl", w, dn)
        mom1[:, k, :] = (
            np.sqrt(12.0 * le) * np.einsum("q,q,tql->tl", w, shat, dn)
        )
    return mean, mom0, mom1


def _phi_matrices(mesh):
    """Entity-functional matrices Phi (nt, 12, 10) in SLOT_NAMES order."""
    mean, mom0, mom1 = _edge_functional_tables(mesh)
    nt = mesh.nt
    phi = np.zeros((nt, 12, 10))
    phi[:, 0, 0] = 1.0  # vertex values are Lagrange coefficients
    phi[:, 1, 1] = 1.0
    phi[:, 2, 2] = 1.0
    for k in range(3):
        phi[:, 3 + 3 * k + 0, :] = mean[:, k, :]
        phi[:, 3 + 3 * k + 1, :] = mom0[:, k, :]
        phi[:, 3 + 3 * k + 2, :] = mom1[:, k, :]
    return phi


def build_b3_constraints(mesh, homogeneous=True):
    """Explicit constraint rows over broken-P3 coefficients."""
    mean, mom0, mom1 = _edge_functional_tables(mesh)
    tri = mesh.triangles
    nloc = 10
    rows = []
    cols = []
    vals = []
    kinds = []

    def add_row(kind, entries):
        r = len(kinds)
        kinds.append(kind)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)

    # vertex rows
    vert_tris = [[] for _ in range(mesh.nv)]
    for t in range(mesh.nt):
        for i in range(3):
            vert_tris[tri[t, i]].append((t, i))
    for v in range(mesh.nv):
        inc = vert_tris[v]
        if homogeneous and mesh.boundary_vertex[v]:
            for t, i in inc:
                add_row("vertex-bdry", [(t * nloc + i, 1.0)])
        else:
            t0, i0 = inc[0]
            for t, i in inc[1:]:
                add_row(
                    "vertex-int",
                    [(t * nloc + i, 1.0), (t0 * nloc + i0, -1.0)],
                )

    # edge rows
    def local_edge(t, e):
        return int(np.where(mesh.tri_edges[t] == e)[0][0])

    tables = {"mean": mean, "n0": mom0, "n1": mom1}
    for e in range(mesh.ne):
        tplus, tminus = mesh.edge_tris[e]
        kplus = local_edge(tplus, e)
        if tminus < 0:
            if not homogeneous:
                continue
            for name, kind in (
                ("mean", "bdry-mean"), ("n0", "bdry-n0"), ("n1", "bdry-n1")
            ):
                row = tables[name][tplus, kplus]
                add_row(
                    kind,
                    [(tplus * nloc + j, row[j]) for j in range(nloc)],
                )
        else:
            kminus = local_edge(tminus, e)
            for name, kind in (
                ("mean", "jump-mean"), ("n0", "jump-n0"), ("n1", "jump-n1")
            ):
                rp = tables[name][tplus, kplus]
                rm = tables[name][tminus, kminus]
                add_row(
                    kind,
                    [(tplus * nloc + j, rp[j]) for j in range(nloc)]
                    + [(tminus * nloc + j, -rm[j]) for j in range(nloc)],
                )

    matrix = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(kinds), mesh.nt * nloc)
    )
    return ConstraintSystem(mesh, matrix, np.array(kinds), homogeneous)


def _entity_variables(mesh, homogeneous=True):
    """Number the entity variables: vertex values first, then the
    (mean, n-moment0, n-moment1) triple of every edge.  In the homogeneous
    case boundary entities are fixed to zero and carry no variable."""
    vert_var = np.full(mesh.nv, -1, np.int64)
    edge_var = np.full(mesh.ne, -1, np.int64)
    if homogeneous:
        keep_v = np.flatnonzero(~mesh.boundary_vertex)
        keep_e = np.flatnonzero(~mesh.boundary_edge)
    else:
        keep_v = np.arange(mesh.nv)
        keep_e = np.arange(mesh.ne)
    vert_var[keep_v] = np.arange(len(keep_v))
    edge_var[keep_e] = len(keep_v) + 3 * np.arange(len(keep_e))
    nvars = len(keep_v) + 3 * len(keep_e)
    return vert_var, edge_var, nvars


def _slot_vars(mesh, vert_var, edge_var):
    """Entity variable id for every (triangle, slot); -1 on the boundary."""
    sv = np.full((mesh.nt, 12), -1, np.int64)
    for i in range(3):
        sv[:, i] = vert_var[mesh.triangles[:, i]]
    for k in range(3):
        base = edge_var[mesh.tri_edges[:, k]]
        ok = base >= 0
        for j in range(3):
            sv[ok, 3 + 3 * k + j] = base[ok] + j
    return sv


def _echelon_nullspace(row_list, ncols, droptol=DROPTOL, build_basis=True):
    """Left-looking sparse row echelon with per-row column pivoting.

    Rows are normalized to unit max entry; a reduced row whose largest
    remaining entry is at most ``droptol`` is dropped as redundant.  Returns
    the sparse null-space basis (ncols x nfree) plus a report; with
    ``build_basis=False`` the basis is skipped (rank discovery only) and the
    report carries the indices of the input rows that produced pivots.
    """
    d = np.zeros(ncols)
    pivot_creation = np.full(ncols, -1, np.int64)
    piv_cols = []        # pivot column of stored row t
    tail_cols = []       # stored row = e_pivot + tail
    tail_vals = []
    pivot_rows = []      # input row index that created each pivot
    dropped = 0
    for irow, (cols, vals) in enumerate(row_list):
        scale = np.abs(vals).max(initial=0.0)
        if scale == 0.0:
            dropped += 1
            continue
        d[cols] = vals / scale
        touched = [cols]
        seen = set()
        heap = []
        for c in cols[pivot_creation[cols] >= 0]:
            ci = int(c)
            seen.add(ci)
            heap.append((int(pivot_creation[ci]), ci))
        heapq.heapify(heap)
        while heap:
            t, c = heapq.heappop(heap)
            coef = d[c]
            d[c] = 0.0
            if coef == 0.0:
                continue
            tc = tail_cols[t]
            d[tc] -= coef * tail_vals[t]
            touched.append(tc)
            for cc in tc[pivot_creation[tc] >= 0]:
                ci = int(cc)
                if ci not in seen:
                    seen.add(ci)
                    heapq.heappush(heap, (int(pivot_creation[ci]), ci))
        tl = np.unique(np.concatenate(touched))
        vv = d[tl]
        d[tl] = 0.0
        nz = vv != 0.0
        tl, vv = tl[nz], vv[nz]
        if tl.size == 0 or np.abs(vv).max() <= droptol:
            dropped += 1
            continue
        ipiv = int(np.argmax(np.abs(vv)))
        pcol = int(tl[ipiv])
        pval = vv[ipiv]
        keep = np.arange(tl.size) != ipiv
        pivot_creation[pcol] = len(piv_cols)
        piv_cols.append(pcol)
        pivot_rows.append(irow)
        tail_cols.append(tl[keep])
        tail_vals.append(vv[keep] / pval)

    rank = len(piv_cols)
    piv_arr = np.array(piv_cols, dtype=np.int64)
    free_mask = np.ones(ncols, dtype=bool)
    if rank:
        free_mask[piv_arr] = False
    free_cols = np.flatnonzero(free_mask)
    free_rank = np.full(ncols, -1, np.int64)
    free_rank[free_cols] = np.arange(free_cols.size)

    if not build_basis:
        tail_nnz = sum(tc.size for tc in tail_cols)
        report = {
            "rank": rank,
            "rows_dropped": dropped,
            "nfree": int(free_cols.size),
            "pivot_rows": np.array(pivot_rows, dtype=np.int64),
            "free_cols": free_cols,
            "tail_nnz": int(tail_nnz),
        }
        return None, report

    # back-substitution: solve the unit upper-triangular system for the
    # pivot-variable block of every null vector
    upp_r, upp_c, upp_v = [], [], []
    upf_r, upf_c, upf_v = [], [], []
    for t in range(rank):
        upp_r.append(t)
        upp_c.append(t)
        upp_v.append(1.0)
        tc, tv = tail_cols[t], tail_vals[t]
        is_piv = pivot_creation[tc] >= 0
        upp_r.extend([t] * int(is_piv.sum()))
        upp_c.extend(pivot_creation[tc[is_piv]].tolist())
        upp_v.extend(tv[is_piv].tolist())
        nf = ~is_piv
        upf_r.extend([t] * int(nf.sum()))
        upf_c.extend(free_rank[tc[nf]].tolist())
        upf_v.extend(tv[nf].tolist())
    nf = free_cols.size
    if rank:
        U_pp = sparse.csc_matrix(
            (upp_v, (upp_r, upp_c)), shape=(rank, rank)
        )
        U_pf = sparse.csc_matrix((upf_v, (upf_r, upf_c)), shape=(rank, nf))
        X = spla.spsolve(U_pp, -U_pf)
        if not sparse.issparse(X):
            X = sparse.csc_matrix(np.atleast_2d(X))
        X = X.tocoo()
        m_rows = np.concatenate([free_cols, piv_arr[X.row]])
        m_cols = np.concatenate([np.arange(nf), X.col])
        m_vals = np.concatenate([np.ones(nf), X.data])
    else:
        m_rows = free_cols
        m_cols = np.arange(nf)
        m_vals = np.ones(nf)
    M = sparse.csc_matrix((m_vals, (m_rows, m_cols)), shape=(ncols, nf))
    report = {"rank": rank, "rows_dropped": dropped, "nfree": int(nf)}
    return M, report


class ConformingBasis:
    """Null-space realization of the constrained cubic space (one scalar
    component).  ``transform`` maps conforming to broken-P3 coefficients."""

    def __init__(self, mesh, transform, report):
        self.mesh = mesh
        self.degree = 3
        self.transform = transform
        self.report = report

    @property
    def ndof(self):
        return self.transform.shape[1]


def _reduction_parts(mesh, homogeneous=True):
    """Exact reduction of the broken constraints to entity variables.

    Returns (nvars, row_list, L) where ``row_list`` holds the per-triangle
    compatibility rows over entity variables (two per triangle, swept in
    geometric strips) and ``L`` is the local reconstruction of broken
    coefficients from entity values (exact on compatible data).
    """
    phi = _phi_matrices(mesh)
    sv = np.linalg.svd(phi, compute_uv=True)
    U, S = sv[0], sv[1]
    if np.any(S[:, 9] <= 1e-8 * S[:, 0]):
        raise RuntimeError("degenerate triangle: trace functionals lost rank")
    psi = U[:, :, 10:].transpose(0, 2, 1).copy()  # (nt, 2, 12)
    # canonicalize the two compatibility rows per triangle (deterministic)
    for r, other in ((0, 1), (1, 0)):
        j = np.argmax(np.abs(psi[:, r, :]), axis=1)
        lead = psi[np.arange(mesh.nt), r, j]
        psi[:, r, :] /= lead[:, None]
        fac = psi[np.arange(mesh.nt), other, j]
        psi[:, other, :] -= fac[:, None] * psi[:, r, :]
    recon = np.linalg.pinv(phi)  # (nt, 10, 12)

    vert_var, edge_var, nvars = _entity_variables(mesh, homogeneous)
    slot_vars = _slot_vars(mesh, vert_var, edge_var)

    cx = mesh.vertices[mesh.triangles, 0].mean(axis=1)
    cy = mesh.vertices[mesh.triangles, 1].mean(axis=1)
    order = np.lexsort((cx, cy))
    row_list = []
    for t in order:
        mask = slot_vars[t] >= 0
        cols_t = slot_vars[t][mask]
        for r in range(2):
            vals = psi[t, r, mask]
            nz = vals != 0.0
            if nz.any():
                row_list.append((cols_t[nz], vals[nz]))

    l_rows, l_cols, l_vals = [], [], []
    for t in range(mesh.nt):
        mask = slot_vars[t] >= 0
        cols_t = slot_vars[t][mask]
        block = recon[t][:, mask]  # (10, nslots)
        rr, cc = np.nonzero(block)
        l_rows.extend((t * 10 + rr).tolist())
        l_cols.extend(cols_t[cc].tolist())
        l_vals.extend(block[rr, cc].tolist())
    L = sparse.csr_matrix(
        (l_vals, (l_rows, l_cols)), shape=(mesh.nt * 10, nvars)
    )
    return nvars, row_list, L


def build_nullspace(constraints, validate=True):
    """Construct the conforming basis N with C @ N = 0.

    The broken constraints are reduced exactly to shared entity variables
    (the twelve trace functionals per triangle); the two per-triangle
    compatibility rows are then eliminated by a rank-revealing row echelon.
    The explicit basis fills in on fine meshes; use ``reduce_entities`` for
    solves beyond a few thousand conforming unknowns.
    """
    mesh = constraints.mesh
    t0 = time.perf_counter()
    nvars, row_list, L = _reduction_parts(mesh, constraints.homogeneous)
    M, report = _echelon_nullspace(row_list, nvars)
    report["nrows"] = len(row_list)
    report["nvars"] = nvars
    N = (L @ M).tocsr()
    N.eliminate_zeros()
    report["seconds"] = time.perf_counter() - t0
    if validate:
        resid = constraints.matrix @ N
        report["constraint_residual"] = (
            float(np.abs(resid.data).max()) if resid.nnz else 0.0
        )
        if report["constraint_residual"] > 1e-8:
            raise RuntimeError(
                "null space violates constraints: residual "
                f"{report['constraint_residual']:.2e}"
            )
    return ConformingBasis(mesh, N, report)


def b3_space(mesh, validate=True, homogeneous=True):
    """Convenience: constraints plus null space in one call."""
    return build_nullspace(
        build_b3_constraints(mesh, homogeneous), validate=validate
    )


class EntityReduction:
    """Scalable representation of the constrained cubic space.

    The space is parameterized by entity variables g (vertex values and
    three trace functionals per edge) subject to the full-row-rank
    compatibility system ``psi @ g = 0``; broken-P3 coefficients are
    recovered locally as ``lift @ g``.  Solvers work on entity variables
    with the compatibility rows enforced through saddle-point systems,
    which stays sparse where the explicit null-space basis fills in.

    ``dim`` is the scalar dimension of the space (number of independent
    entity variables).
    """

    def __init__(self, mesh, homogeneous, nvars, psi, lift, report):
        self.mesh = mesh
        self.homogeneous = homogeneous
        self.nvars = nvars
        self.psi = psi
        self.lift = lift
        self.report = report

    @property
    def dim(self):
        return self.nvars - self.psi.shape[0]

    _vec_cache = None

    def vector(self):
        """Two-component (lift, psi) pair, component-major layout."""
        if self._vec_cache is None:
            self._vec_cache = (
                sparse.block_diag((self.lift, self.lift), format="csr"),
                sparse.block_diag((self.psi, self.psi), format="csr"),
            )
        return self._vec_cache


def reduce_entities(mesh, homogeneous=True):
    """Build the entity-variable reduction with a full-rank row subset.

    The rank-revealing echelon runs once to identify which compatibility
    rows are independent; the returned system keeps those original sparse
    rows (support 12 each), so downstream saddle-point matrices stay local.
    """
    t0 = time.perf_counter()
    nvars, row_list, L = _reduction_parts(mesh, homogeneous)
    _, report = _echelon_nullspace(row_list, nvars, build_basis=False)
    sel = report.pop("pivot_rows")
    report.pop("free_cols")
    rows, cols, vals = [], [], []
    for i, irow in enumerate(sel.tolist()):
        c, v = row_list[irow]
        rows.extend([i] * len(c))
        cols.extend(c.tolist())
        vals.extend(v.tolist())
    psi = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(sel), nvars)
    )
    report["nrows"] = len(row_list)
    report["nvars"] = nvars
    report["seconds"] = time.perf_counter() - t0
    return EntityReduction(mesh, homogeneous, nvars, psi, L, report)


class MorleySpace:
    """Quadratic element: vertex values and edge mean normal derivatives
    (global edge orientation); boundary degrees of freedom removed."""

    def __init__(self, mesh, transform):
        self.mesh = mesh
        self.degree = 2
        self.transform = transform

    @property
    def ndof(self):
        return self.transform.shape[1]


def build_morley(mesh):
    shapes = p2_shapes()
    space = BrokenSpace(mesh, 2)
    # mean normal derivative of a quadratic equals its midpoint value
    mids = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])
    tab = shapes.tabulate(mids)
    normals = mesh.edge_normals()
    nt = mesh.nt
    dual = np.zeros((nt, 6, 6))
    dual[:, 0, 0] = dual[:, 1, 1] = dual[:, 2, 2] = 1.0
    Binv = space.Binv
    for k in range(3):
        e = mesh.tri_edges[:, k]
        gx, gy = tab["gx"][k], tab["gy"][k]
        gpx = Binv[:, 0, 0, None] * gx + Binv[:, 1, 0, None] * gy
        gpy = Binv[:, 0, 1, None] * gx + Binv[:, 1, 1, None] * gy
        dual[:, 3 + k, :] = (
            gpx * normals[e, 0, None] + gpy * normals[e, 1, None]
        )
    blocks = np.linalg.inv(dual)  # coefficients from functional values

    vert_dof = np.full(mesh.nv, -1, np.int64)
    iv = np.flatnonzero(~mesh.boundary_vertex)
    vert_dof[iv] = np.arange(iv.size)
    edge_dof = np.full(mesh.ne, -1, np.int64)
    ie = np.flatnonzero(~mesh.boundary_edge)
    edge_dof[ie] = iv.size + np.arange(ie.size)
    ndof = iv.size + ie.size

    slot_dofs = np.empty((nt, 6), np.int64)
    for i in range(3):
        slot_dofs[:, i] = vert_dof[mesh.triangles[:, i]]
    for k in range(3):
        slot_dofs[:, 3 + k] = edge_dof[mesh.tri_edges[:, k]]

    rows, cols, vals = [], [], []
    for t in range(nt):
        mask = slot_dofs[t] >= 0
        block = blocks[t][:, mask]
        rr, cc = np.nonzero(block)
        rows.extend((t * 6 + rr).tolist())
        cols.extend(slot_dofs[t][mask][cc].tolist())
        vals.extend(block[rr, cc].tolist())
    N = sparse.csr_matrix((vals, (rows, cols)), shape=(nt * 6, ndof))
    return MorleySpace(mesh, N)


def vector_transform(transform):
    """Two-component transform (component-major block layout)."""
    return sparse.block_diag((transform, transform), format="csr")
