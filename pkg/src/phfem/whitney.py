"""Whitney-form Galerkin matrices for the mixed discretization.

Flows are expanded in the "solution" bases psi (face forms for the p law,
edge forms for the q law in 2D; edge forms for both laws in 1D); efforts and
test functions use the "trial" bases phi (node forms for e^p, edge forms for
e^q in 2D; node forms for both efforts in 1D).

All element integrals are evaluated in closed form from barycentric calculus
on a single triangle (area A, CCW vertex order 0,1,2):

    int_T  lam_0^a lam_1^b lam_2^c dA = a! b! c! / (a+b+c+2)! * 2A
    dlam_u ^ dlam_v = sigma_uv / (2A) dx^dy,  sigma cyclic(+1)/anticyclic(-1)

which makes the assembly exact up to roundoff (no quadrature).  Matrix
conventions (curly-bracket sign factors depend on the form degrees):

    M_p[i,k] =  <phi^p_i ^ psi^p_k>
    M_q[j,l] =  <phi^q_j ^ psi^q_l>
    K_p[i,l] = -(-1)^(r+q) <d phi^p_i ^ phi^q_l>
    K_q[j,i] = -(-1)^p     <d phi^q_j ^ phi^p_i>
    L_p[i,j] =  (-1)^(r+q) <phi^p_i | tr phi^q_j>_boundary
    L_q[j,i] =  (-1)^p     <phi^q_j | tr phi^p_i>_boundary

With these signs the exterior-derivative factorizations

    K_p + L_p = -(-1)^r M_p d_p        K_q + L_q = -M_q d_q

hold exactly, as does the summation-by-parts identity
(K_p + L_p) + (K_q + L_q)^T = L_p.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, UnsupportedSpecError
from .mesh import (
    BoundaryPartition,
    IncidencePair,
    SimplexMesh,
    boundary_edges,
    q_input_edges,
)


class FormDegreeSpec(NamedTuple):
    """Degrees of the two conserved forms: p + q = n + 1, r = p*q + 1."""

    p: int
    q: int
    n: int
    r: int


def form_degree_spec(p: int, q: int, n: int) -> FormDegreeSpec:
    if p + q != n + 1:
        raise InvalidArgumentError(f"degrees must satisfy p+q=n+1, got p={p} q={q} n={n}")
    return FormDegreeSpec(p, q, n, p * q + 1)


#: canonical specs for the two supported settings
WAVE_1D = form_degree_spec(1, 1, 1)
WAVE_2D = form_degree_spec(2, 1, 2)


class GalerkinMatrices(NamedTuple):
    """Assembled bilinear forms (scipy sparse, CSR).

    M_p -- phi^p x psi^p mass pairing (nodes x faces in 2D, nodes x edges 1D)
    M_q -- phi^q x psi^q mass pairing (edges x edges in 2D; skew)
    K_p, K_q -- exterior-derivative pairings (signs as in module docstring)
    L_q_segments -- one boundary pairing per q-type segment
    L_p_hat_segments -- one boundary pairing per p-type segment
    L_p, L_q -- boundary pairings over the full boundary, L_p == L_q^T
    """

    M_p: sp.csr_matrix
    M_q: sp.csr_matrix
    K_p: sp.csr_matrix
    K_q: sp.csr_matrix
    L_q_segments: tuple
    L_p_hat_segments: tuple
    L_p: sp.csr_matrix
    L_q: sp.csr_matrix


def _sigma(u: int, v: int) -> int:
    """Sign of dlam_u ^ dlam_v relative to dx^dy/(2A), CCW local order."""
    if u == v:
        return 0
    return +1 if (v - u) % 3 == 1 else -1


def _face_vertices(mesh: SimplexMesh) -> np.ndarray:
    """(n_faces, 3) global node indices in CCW local order 0,1,2."""
    N, M = mesh.grid_shape
    n_lower = N * M

    def node(i, j):
        return j * (N + 1) + i

    out = np.empty((2 * N * M, 3), dtype=np.int64)
    for j in range(M):
        for i in range(N):
            out[j * N + i] = (node(i, j), node(i + 1, j), node(i + 1, j + 1))
            out[n_lower + j * N + i] = (node(i, j), node(i + 1, j + 1), node(i, j + 1))
    return out


def _local_edge_vertices(face_nodes: np.ndarray, tail: int, head: int) -> tuple:
    """Local vertex ids (0,1,2) of a global edge inside one face."""
    loc = {g: l for l, g in enumerate(face_nodes)}
    return loc[int(tail)], loc[int(head)]


def _boundary_orientation_sign(mesh: SimplexMesh, e: int) -> int:
    """+1 if edge e's orientation agrees with the CCW-induced boundary
    orientation of the rectangle, else -1."""
    N, M = mesh.grid_shape
    n_hor = N * (M + 1)
    if e < n_hor:              # horizontal: bottom row runs against CCW
        j = e // N
        return -1 if j == 0 else +1
    if e < n_hor + (N + 1) * M:  # vertical: left column runs against CCW
        i = (e - n_hor) % (N + 1)
        return -1 if i == 0 else +1
    raise InvalidArgumentError(f"edge {e} is not a boundary edge")


def assemble(
    mesh: SimplexMesh, partition: BoundaryPartition, spec: FormDegreeSpec
) -> GalerkinMatrices:
    """Assemble all Galerkin pairings for the given mesh and causality split."""
    if spec.n != mesh.dim:
        raise UnsupportedSpecError(
            f"spec is {spec.n}-dimensional but the mesh is {mesh.dim}-dimensional"
        )
    if (spec.p, spec.q) not in ((1, 1), (2, 1)):
        raise UnsupportedSpecError(f"unsupported form degrees (p,q)=({spec.p},{spec.q})")
    if mesh.dim == 1:
        return _assemble_1d(mesh, partition, spec)
    return _assemble_2d(mesh, partition, spec)


def _assemble_2d(mesh, partition, spec):
    N, M = mesh.grid_shape
    n_nodes = mesh.node_coords.shape[0]
    n_edges = mesh.edges.shape[0]
    n_faces = mesh.faces.shape[0]

    sgn_kp = -((-1) ** (spec.r + spec.q))   # -1 for (p,q,r) = (2,1,3)
    sgn_kq = -((-1) ** spec.p)              # -1
    sgn_lp = (-1) ** (spec.r + spec.q)      # +1
    sgn_lq = (-1) ** spec.p                 # +1

    fverts = _face_vertices(mesh)

    mp_r, mp_c, mp_v = [], [], []
    mq_r, mq_c, mq_v = [], [], []
    kp_r, kp_c, kp_v = [], [], []
    kq_r, kq_c, kq_v = [], [], []

    for f in range(n_faces):
        nodes = fverts[f]
        edges = mesh.faces[f]
        # local (tail, head) vertex ids of the three edges of this face
        locs = [_local_edge_vertices(nodes, *mesh.edges[e]) for e in edges]

        # M_p: int lam_i * (1/A) dA = 1/3 for each vertex of the face
        for i in nodes:
            mp_r.append(i)
            mp_c.append(f)
            mp_v.append(1.0 / 3.0)

        # M_q: four-term barycentric expansion of w^ej ^ w^el
        for ej, (a, b) in zip(edges, locs):
            for el, (c, d) in zip(edges, locs):
                val = (
                    (2 if a == c else 1) * _sigma(b, d)
                    - (2 if a == d else 1) * _sigma(b, c)
                    - (2 if b == c else 1) * _sigma(a, d)
                    + (2 if b == d else 1) * _sigma(a, c)
                ) / 24.0
                if val != 0.0:
                    mq_r.append(ej)
                    mq_c.append(el)
                    mq_v.append(val)

        # K_p: int dlam_i ^ w^el = (sigma(i,d) - sigma(i,c)) / 6
        for i_loc, i_glob in enumerate(nodes):
            for el, (c, d) in zip(edges, locs):
                val = (_sigma(i_loc, d) - _sigma(i_loc, c)) / 6.0
                if val != 0.0:
                    kp_r.append(i_glob)
                    kp_c.append(el)
                    kp_v.append(sgn_kp * val)

        # K_q: int lam_i * d w^ej = sigma(a,b) / 3
        for ej, (a, b) in zip(edges, locs):
            s = _sigma(a, b)
            for i_glob in nodes:
                kq_r.append(ej)
                kq_c.append(i_glob)
                kq_v.append(sgn_kq * s / 3.0)

    M_p = sp.csr_matrix((mp_v, (mp_r, mp_c)), shape=(n_nodes, n_faces))
    M_q = sp.csr_matrix((mq_v, (mq_r, mq_c)), shape=(n_edges, n_edges))
    K_p = sp.csr_matrix((kp_v, (kp_r, kp_c)), shape=(n_nodes, n_edges))
    K_q = sp.csr_matrix((kq_v, (kq_r, kq_c)), shape=(n_edges, n_nodes))

    # boundary pairings: the tangential trace of an edge form vanishes on
    # every boundary edge except its own, where it integrates to 1/2 against
    # either endpoint hat (signed by the induced CCW orientation)
    def edge_pairing(edge_list):
        rows, cols, vals = [], [], []
        for e in edge_list:
            s = _boundary_orientation_sign(mesh, int(e))
            for nd in mesh.edges[e]:
                rows.append(int(nd))
                cols.append(int(e))
                vals.append(s / 2.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_edges))

    all_bedges = boundary_edges(mesh)
    pairing_full = edge_pairing(all_bedges)

    q_edges = set(q_input_edges(partition).tolist())
    hat_edges = [e for e in all_bedges.tolist() if e not in q_edges]

    L_q_segments = tuple(sgn_lq * edge_pairing(seg).T.tocsr() for seg in partition.q_segments)
    L_p_hat_segments = (
        (sgn_lp * edge_pairing(hat_edges),) if hat_edges else tuple()
    )
    L_p = (sgn_lp * pairing_full).tocsr()
    L_q = (sgn_lq * pairing_full.T).tocsr()
    return GalerkinMatrices(M_p, M_q, K_p, K_q, L_q_segments, L_p_hat_segments, L_p, L_q)


def _assemble_1d(mesh, partition, spec):
    N = mesh.grid_shape[0]
    h = mesh.h
    n_nodes, n_edges = N + 1, N

    sgn_k = -((-1) ** (spec.r + spec.q))    # +1 for (p,q,r) = (1,1,2)
    sgn_l = (-1) ** (spec.r + spec.q)       # -1

    # mass pairing: int hat_i * (1/h on edge k) dx = 1/2 per endpoint
    rows = np.repeat(np.arange(n_edges), 2)
    cols = mesh.edges.ravel()
    M = sp.csr_matrix(
        (np.full(2 * n_edges, 0.5), (cols, rows)), shape=(n_nodes, n_edges)
    )

    # derivative pairing: int hat_j * dhat_i over each edge is -1/2 for the
    # tail test function and +1/2 for the head one, against both hats
    kr, kc, kv = [], [], []
    for t, hd in mesh.edges:
        for i, si in ((t, -0.5), (hd, +0.5)):
            for j in (t, hd):
                kr.append(int(i))
                kc.append(int(j))
                kv.append(sgn_k * si)
    K = sp.csr_matrix((kv, (kr, kc)), shape=(n_nodes, n_nodes))

    # boundary pairing: signed point evaluation (+ at x=L, - at x=0)
    def point_pairing(node_list):
        rows, cols, vals = [], [], []
        for nd in node_list:
            s = +1.0 if nd == N else -1.0
            rows.append(int(nd))
            cols.append(int(nd))
            vals.append(s)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))

    L_full = sgn_l * point_pairing([0, N])
    L_q_segments = tuple(
        (sgn_l * point_pairing(seg)).T.tocsr() for seg in partition.q_segments
    )
    L_p_hat_segments = tuple(
        sgn_l * point_pairing(seg) for seg in partition.p_segments
    )
    # in 1D both efforts are nodal, so the q-law pairings coincide with the
    # p-law ones entry for entry
    return GalerkinMatrices(
        M, M.copy(), K, K.copy(), L_q_segments, L_p_hat_segments,
        L_full.tocsr(), L_full.T.tocsr(),
    )


# ---------------------------------------------------------------------------
# pointwise evaluation (used by tests and field reconstruction)


def eval_whitney(mesh: SimplexMesh, kind: str, index: int, points: np.ndarray):
    """Evaluate one Whitney basis form at physical points.

    kind  -- "node" (0-form, scalar), "edge" (1-form; (..,2) vector in 2D,
             scalar density in 1D), "face" (2-form density, 2D only)
    Points outside the form's support evaluate to zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.dim == 1:
        return _eval_whitney_1d(mesh, kind, index, pts)
    return _eval_whitney_2d(mesh, kind, index, pts)


def _eval_whitney_1d(mesh, kind, index, pts):
    x = pts[:, 0]
    h = mesh.h
    N = mesh.grid_shape[0]
    if kind == "node":
        xi = mesh.node_coords[index, 0]
        return np.clip(1.0 - np.abs(x - xi) / h, 0.0, None)
    if kind == "edge":
        t, hd = mesh.edges[index]
        x0, x1 = mesh.node_coords[t, 0], mesh.node_coords[hd, 0]
        inside = (x >= min(x0, x1)) & (x <= max(x0, x1))
        return np.where(inside, 1.0 / h, 0.0)
    raise InvalidArgumentError(f"unknown 1D form kind {kind!r}")


def _eval_whitney_2d(mesh, kind, index, pts):
    N, M = mesh.grid_shape
    h = mesh.h
    fverts = _face_vertices(mesh)

    # containing cell and triangle of each point
    i = np.clip(np.floor(pts[:, 0] / h).astype(int), 0, N - 1)
    j = np.clip(np.floor(pts[:, 1] / h).astype(int), 0, M - 1)
    xi = pts[:, 0] / h - i
    eta = pts[:, 1] / h - j
    lower = eta <= xi
    face = np.where(lower, j * N + i, N * M + j * N + i)
    in_dom = (pts[:, 0] >= 0) & (pts[:, 0] <= N * h) & (pts[:, 1] >= 0) & (pts[:, 1] <= M * h)

    if kind == "face":
        return np.where(in_dom & (face == index), 2.0 / (h * h), 0.0)

    scalar = kind == "node"
    out = np.zeros(pts.shape[0]) if scalar else np.zeros((pts.shape[0], 2))
    for k in range(pts.shape[0]):
        if not in_dom[k]:
            continue
        f = int(face[k])
        nodes = fverts[f]
        coords = mesh.node_coords[nodes]
        # barycentric coefficients lam_l(x,y) = a x + b y + c per local vertex
        Amat = np.column_stack([coords, np.ones(3)])
        coef = np.linalg.solve(Amat, np.eye(3))  # columns: per-vertex (a,b,c)
        lam = coef.T @ np.array([pts[k, 0], pts[k, 1], 1.0])
        grads = coef[:2].T  # (3, 2) gradients of the three barycentrics
        if scalar:
            loc = np.nonzero(nodes == index)[0]
            if loc.size:
                out[k] = lam[loc[0]]
        else:
            edges = mesh.faces[f]
            loc = np.nonzero(edges == index)[0]
            if loc.size:
                t, hd = _local_edge_vertices(nodes, *mesh.edges[index])
                out[k] = lam[t] * grads[hd] - lam[hd] * grads[t]
    return out


# ---------------------------------------------------------------------------
# structure verification


class StructureReport(NamedTuple):
    """Numerical residuals and rank checks of the assembled matrices.

    residuals -- max-abs defects of the factorization identities
    ranks     -- {name: (computed, expected)} or None when not applicable
    passed    -- all residuals below tol and all applicable ranks match
    """

    residuals: dict
    ranks: dict | None
    passed: bool


def verify_structure(
    g: GalerkinMatrices,
    inc: IncidencePair,
    spec: FormDegreeSpec,
    tol: float = 1e-12,
    check_ranks: bool | None = None,
) -> StructureReport:
    """Check the factorization identities and (optionally) the rank table.

    Never raises on failure -- returns the report with passed=False so
    callers can decide (the CLI turns failures into exit code 1).
    """

    def maxabs(mat) -> float:
        mat = sp.csr_matrix(mat)
        return float(np.abs(mat.data).max()) if mat.nnz else 0.0

    d_p = inc.d_p.astype(float)
    d_q = inc.d_q.astype(float)
    sgn = -((-1) ** spec.r)
    residuals = {
        "kp_factorization": maxabs(g.K_p + g.L_p - sgn * (g.M_p @ d_p)),
        "kq_factorization": maxabs(g.K_q + g.L_q + g.M_q @ d_q),
        "lp_lq_transpose": maxabs(g.L_p - g.L_q.T),
        "summation_by_parts": maxabs((g.K_p + g.L_p) + (g.K_q + g.L_q).T - g.L_p),
    }
    if spec.n == 2:  # the composite d_p d_q exists only with two derivatives
        residuals["dp_dq"] = maxabs(inc.d_p @ inc.d_q)

    n_nodes = g.M_p.shape[0]
    ranks = None
    if check_ranks is None:
        check_ranks = spec.n == 2 and n_nodes <= 3000
    if check_ranks and spec.n == 2:
        n_faces = g.M_p.shape[1]
        # recover the grid dimensions from the entity counts
        s = n_nodes - n_faces // 2 - 1          # N + M
        prod = n_faces // 2                     # N * M
        disc = s * s - 4 * prod
        root = int(round(np.sqrt(disc))) if disc >= 0 else -1
        applicable = disc >= 0 and root * root == disc and (s - root) // 2 > 2
        if applicable:
            ranks = {
                "M_p": (
                    int(np.linalg.matrix_rank(g.M_p.toarray())),
                    n_nodes - 2,
                ),
                "M_q": (
                    int(np.linalg.matrix_rank(g.M_q.toarray())),
                    2 * (n_nodes - 2),
                ),
                "L_p": (
                    int(np.linalg.matrix_rank(g.L_p.toarray())),
                    2 * s - 1,
                ),
                "K_p+L_p": (
                    int(np.linalg.matrix_rank((g.K_p + g.L_p).toarray())),
                    n_nodes - 2,
                ),
                "K_q+L_q": (
                    int(np.linalg.matrix_rank((g.K_q + g.L_q).toarray())),
                    n_nodes - 1,
                ),
                "d_p": (
                    int(np.linalg.matrix_rank(inc.d_p.toarray().astype(float))),
                    n_faces,
                ),
                "d_q": (
                    int(np.linalg.matrix_rank(inc.d_q.toarray().astype(float))),
                    n_nodes - 1,
                ),
            }

    ok = all(v <= tol for v in residuals.values())
    if ranks is not None:
        ok = ok and all(c == e for c, e in ranks.values())
    return StructureReport(residuals, ranks, ok)
