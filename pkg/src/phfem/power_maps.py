"""Power-preserving reduction maps: boundary traces, effort selectors,
weighted flow maps, and boundary output matrices.

The continuous power balance survives discretization exactly when the maps
satisfy the matrix condition

    (-1)^r d_p^T P_fp^T P_ep + P_eq^T P_fq d_q + T_q^T S_p + S_q_hat^T T_p_hat = 0.

On 2D grids the flow maps are built constructively from per-triangle weight
stencils: each triangle distributes convex weights (alpha, beta, gamma) to
its vertices (class I for lower triangles, class II for upper ones), P_fp
collects them per node, and P_fq decomposes into a transverse part (gamma/2
and alpha/beta couplings across each triangle), a parallel part (entries on
the edge's own column), and a rotational part (delta/epsilon multiples of
cell boundary cycles, which lie in the row space of d_p and therefore never
affect the reduced dynamics).

Vertex weight placement per cell (i, j), in mesh numbering:

    lower triangle:  alpha_I -> (i, j)    gamma_I -> (i+1, j)    beta_I -> (i+1, j+1)
    upper triangle:  beta_II -> (i, j)    alpha_II -> (i+1, j+1) gamma_II -> (i, j+1)

i.e. along each triangle's CCW boundary the vertex where the diagonal
traversal ends gets alpha, where it starts gets beta, and the right-angle
vertex gets gamma.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    InternalConsistencyError,
    InvalidArgumentError,
    StructureViolationError,
)
from .mesh import (
    BoundaryPartition,
    IncidencePair,
    SimplexMesh,
    incidence,
    p_input_nodes,
    q_input_edges,
)

RESIDUAL_TOL = 1e-12


class TriangleWeights(NamedTuple):
    """Convex vertex weights per triangle class (I = lower, II = upper)."""

    alpha_I: float
    beta_I: float
    gamma_I: float
    alpha_II: float
    beta_II: float
    gamma_II: float

    @property
    def delta_I(self) -> float:
        return 0.125 + (self.alpha_I - self.beta_I) / 4.0

    @property
    def delta_II(self) -> float:
        return 0.125 + (self.alpha_II - self.beta_II) / 4.0

    @property
    def eps_I(self) -> float:
        return 0.125 - (self.alpha_I - self.beta_I) / 4.0

    @property
    def eps_II(self) -> float:
        return 0.125 - (self.alpha_II - self.beta_II) / 4.0

    @property
    def opposite_rotation_signs(self) -> bool:
        """True when the two classes rotate against each other (the
        sign pattern sgn(delta_I) = -sgn(delta_II), sgn(eps_I) = -sgn(eps_II)
        exhibited by the well-behaved parameter sets)."""
        return self.delta_I * self.delta_II < 0 and self.eps_I * self.eps_II < 0


def triangle_weights(
    alpha_I: float, beta_I: float, alpha_II: float, beta_II: float
) -> TriangleWeights:
    """Build weights with the gamma components derived from convexity."""
    gamma_I = 1.0 - alpha_I - beta_I
    gamma_II = 1.0 - alpha_II - beta_II
    for name, v in (
        ("alpha_I", alpha_I), ("beta_I", beta_I), ("gamma_I", gamma_I),
        ("alpha_II", alpha_II), ("beta_II", beta_II), ("gamma_II", gamma_II),
    ):
        if not (-1e-12 <= v <= 1 + 1e-12):
            raise InvalidArgumentError(
                f"weights must be convex: {name} = {v} is outside [0, 1]"
            )
    return TriangleWeights(alpha_I, beta_I, gamma_I, alpha_II, beta_II, gamma_II)


#: named parameter presets (alpha_I, beta_I, alpha_II, beta_II)
PRESETS = {
    "set1": (1 / 3, 1 / 3, 1 / 3, 1 / 3),
    "set2": (1 / 2, 1 / 4, 1 / 4, 1 / 2),
    "set3": (2 / 3, 1 / 12, 1 / 12, 2 / 3),
    "set4": (15 / 16, 1 / 32, 1 / 32, 15 / 16),
}


def weights_from_config(obj) -> TriangleWeights:
    """Accept {"preset": "set3"}, a preset name, or explicit
    {alpha_I, beta_I, alpha_II, beta_II} (gamma components derived)."""
    if isinstance(obj, str):
        obj = {"preset": obj}
    if "preset" in obj:
        name = obj["preset"]
        if name not in PRESETS:
            raise InvalidArgumentError(
                f"unknown weight preset {name!r}; have {sorted(PRESETS)}"
            )
        return triangle_weights(*PRESETS[name])
    try:
        return triangle_weights(
            obj["alpha_I"], obj["beta_I"], obj["alpha_II"], obj["beta_II"]
        )
    except KeyError as e:
        raise InvalidArgumentError(f"weight config missing key {e}") from e


class PfqParts(NamedTuple):
    """Decomposition of the q flow map plus its defining residuals.

    residual_map  -- max-abs defect of the flow-map equation on effort-node
                     columns (must vanish; checked against RESIDUAL_TOL)
    residual_full -- same defect over all node columns (diagnostic; nonzero
                     entries can only sit in p-causal input columns)
    """

    perp: sp.csr_matrix
    parallel: sp.csr_matrix
    rot: sp.csr_matrix
    residual_map: float
    residual_full: float


class MapSet(NamedTuple):
    """Complete set of reduction maps for one mesh + causality + weights.

    Matrix shapes (M_* = unreduced counts, N~ = reduced counts, M_b/M_b_hat
    = numbers of q/p-type inputs):

      T_q (M_b x M_q), T_p_hat (M_b_hat x M_p) -- input trace selectors
      P_eq (N~_q x M_q), P_ep (N~_p x M_p)     -- effort selectors
      P_fp (N~_p x N_p), P_fq (N~_q x N_q)     -- flow maps
      S_p (M_b x M_p), S_q_hat (M_b_hat x M_q) -- boundary outputs
      P_fq = perp + parallel + rot             -- stencil decomposition

    q_inputs/p_inputs and q_efforts/p_efforts record which mesh entities the
    rows refer to (edges/nodes in 2D; nodes for inputs and efforts in 1D).
    """

    T_q: sp.csr_matrix
    T_p_hat: sp.csr_matrix
    P_eq: sp.csr_matrix
    P_ep: sp.csr_matrix
    P_fp: sp.csr_matrix
    P_fq: sp.csr_matrix
    S_p: sp.csr_matrix
    S_q_hat: sp.csr_matrix
    parts: PfqParts
    q_inputs: np.ndarray
    p_inputs: np.ndarray
    q_efforts: np.ndarray
    p_efforts: np.ndarray
    r: int


def _selector(rows: np.ndarray, n_cols: int, sign: float = 1.0) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    data = np.full(len(rows), sign)
    return sp.csr_matrix(
        (data, (np.arange(len(rows)), rows)), shape=(len(rows), n_cols)
    )


def build_selectors(mesh: SimplexMesh, partition: BoundaryPartition):
    """Input trace matrices and complementary effort selectors.

    Returns (T_q, T_p_hat, P_eq, P_ep).  The stacked matrices [P_eq; T_q]
    and [P_ep; T_p_hat] are (signed) permutations.  In 1D the p-type trace
    carries the sign -1 (the boundary effort enters through the outward
    trace at the right end).
    """
    n_nodes = mesh.node_coords.shape[0]
    if mesh.dim == 1:
        q_in = q_input_edges(partition)       # node indices in 1D
        p_in = p_input_nodes(partition)
        q_eff = np.setdiff1d(np.arange(n_nodes), q_in)
        p_eff = np.setdiff1d(np.arange(n_nodes), p_in)
        T_q = _selector(q_in, n_nodes)
        T_p_hat = _selector(p_in, n_nodes, sign=-1.0)
        P_eq = _selector(q_eff, n_nodes)
        P_ep = _selector(p_eff, n_nodes)
        return T_q, T_p_hat, P_eq, P_ep

    n_edges = mesh.edges.shape[0]
    q_in = q_input_edges(partition)
    p_in = p_input_nodes(partition)
    q_eff = np.setdiff1d(np.arange(n_edges), q_in)
    p_eff = np.setdiff1d(np.arange(n_nodes), p_in)
    T_q = _selector(q_in, n_edges)
    T_p_hat = _selector(p_in, n_nodes)
    P_eq = _selector(q_eff, n_edges)
    P_ep = _selector(p_eff, n_nodes)
    return T_q, T_p_hat, P_eq, P_ep


# ---------------------------------------------------------------------------
# 2D flow maps


def _cell_edges(mesh: SimplexMesh, i: int, j: int) -> dict:
    N, M = mesh.grid_shape
    n_hor = N * (M + 1)
    n_ver = (N + 1) * M
    return {
        "bot": j * N + i,
        "top": (j + 1) * N + i,
        "left": n_hor + j * (N + 1) + i,
        "right": n_hor + j * (N + 1) + i + 1,
        "diag": n_hor + n_ver + j * N + i,
    }


def _build_Pfp_full(mesh: SimplexMesh, w: TriangleWeights) -> sp.csr_matrix:
    """All-node flow map (nodes x faces): per-face vertex weights."""
    N, M = mesh.grid_shape
    n_nodes = mesh.node_coords.shape[0]
    n_faces = mesh.faces.shape[0]

    def node(i, j):
        return j * (N + 1) + i

    rows, cols, vals = [], [], []
    for j in range(M):
        for i in range(N):
            lower = j * N + i
            upper = N * M + j * N + i
            for nd, wt in (
                (node(i, j), w.alpha_I),
                (node(i + 1, j), w.gamma_I),
                (node(i + 1, j + 1), w.beta_I),
            ):
                rows.append(nd), cols.append(lower), vals.append(wt)
            for nd, wt in (
                (node(i, j), w.beta_II),
                (node(i + 1, j + 1), w.alpha_II),
                (node(i, j + 1), w.gamma_II),
            ):
                rows.append(nd), cols.append(upper), vals.append(wt)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_faces))


def build_Pfp(
    mesh: SimplexMesh, partition: BoundaryPartition, w: TriangleWeights
) -> sp.csr_matrix:
    """Reduced p flow map: rows of the weighted vertex map for all nodes
    that are NOT p-causal inputs (ascending node order)."""
    full = _build_Pfp_full(mesh, w)
    p_in = p_input_nodes(partition)
    keep = np.setdiff1d(np.arange(full.shape[0]), p_in)
    return full[keep]


def solve_Pfq_and_outputs(
    mesh: SimplexMesh,
    partition: BoundaryPartition,
    w: TriangleWeights,
    inc: IncidencePair,
    P_fp: sp.csr_matrix,
    P_eq: sp.csr_matrix,
    P_ep: sp.csr_matrix,
    T_q: sp.csr_matrix,
    T_p_hat: sp.csr_matrix,
):
    """Constructive q flow map and boundary output matrices (2D).

    Returns (P_fq, S_p, S_q_hat, parts).  P_fq solves the flow-map equation
    P_fq d_q = P_eq G (G = d_p^T applied to the all-node weighted vertex
    map) on all effort-node columns; the freedom in the row space of d_p is
    fixed by the canonical perp/parallel/rot stencils.
    """
    r = 3  # 2D wave setting (p, q) = (2, 1)
    N, M = mesh.grid_shape
    n_edges = mesh.edges.shape[0]

    full_Pfp = _build_Pfp_full(mesh, w)
    # the passed reduced P_fp must be exactly the effort-node rows
    if P_fp.shape != (P_ep.shape[0], full_Pfp.shape[1]):
        raise InternalConsistencyError(
            f"P_fp has shape {P_fp.shape}, expected "
            f"{(P_ep.shape[0], full_Pfp.shape[1])}"
        )
    pfp_defect = P_ep @ full_Pfp - P_fp
    if pfp_defect.nnz and np.abs(pfp_defect.data).max() > 0:
        raise InternalConsistencyError(
            "reduced P_fp does not match the weighted vertex map of this "
            "mesh/partition/weights combination"
        )

    d_p = inc.d_p.astype(float)
    d_q = inc.d_q.astype(float)
    G = -((-1.0) ** r) * (d_p.T @ full_Pfp.T)  # edges x nodes
    S_p = (T_q @ G).tocsr()

    q_eff = np.setdiff1d(np.arange(n_edges), q_input_edges(partition))
    row_of = {int(e): k for k, e in enumerate(q_eff)}

    perp = sp.lil_matrix((len(q_eff), n_edges))
    par = sp.lil_matrix((len(q_eff), n_edges))
    rot = sp.lil_matrix((len(q_eff), n_edges))

    def add(mat, edge, col, val):
        k = row_of.get(int(edge))
        if k is not None and val != 0.0:
            mat[k, int(col)] += val

    for j in range(M):
        for i in range(N):
            e = _cell_edges(mesh, i, j)
            # lower triangle (class I): transverse + parallel couplings
            add(perp, e["bot"], e["right"], -w.beta_I)
            add(par, e["bot"], e["bot"], 0.5 - w.alpha_I)
            add(perp, e["right"], e["bot"], w.alpha_I)
            add(par, e["right"], e["right"], w.beta_I - 0.5)
            add(perp, e["diag"], e["bot"], -w.gamma_I / 2)
            add(perp, e["diag"], e["right"], -w.gamma_I / 2)
            add(par, e["diag"], e["diag"], (w.alpha_I - w.beta_I) / 2)
            # upper triangle (class II)
            add(perp, e["top"], e["left"], -w.beta_II)
            add(par, e["top"], e["top"], 0.5 - w.alpha_II)
            add(perp, e["left"], e["top"], w.alpha_II)
            add(par, e["left"], e["left"], w.beta_II - 0.5)
            add(perp, e["diag"], e["top"], -w.gamma_II / 2)
            add(perp, e["diag"], e["left"], -w.gamma_II / 2)
            add(par, e["diag"], e["diag"], (w.alpha_II - w.beta_II) / 2)
            # rotational cycle of the cell: -bot + right + top - left
            cycle = ((e["bot"], -1.0), (e["right"], +1.0), (e["top"], +1.0), (e["left"], -1.0))
            for row_edge, coef in (
                (e["right"], w.delta_I),
                (e["left"], -w.delta_II),
                (e["bot"], w.eps_I),
                (e["top"], -w.eps_II),
            ):
                for col, s in cycle:
                    add(rot, row_edge, col, coef * s)

    perp = perp.tocsr()
    par = par.tocsr()
    rot = rot.tocsr()
    P_fq = (perp + par + rot).tocsr()

    defect = P_fq @ d_q - P_eq @ G
    residual_full = float(np.abs(defect.toarray()).max()) if defect.nnz else 0.0
    masked = defect @ P_ep.T
    residual_map = float(np.abs(masked.toarray()).max()) if masked.nnz else 0.0
    if residual_map > RESIDUAL_TOL:
        raise InternalConsistencyError(
            f"flow-map equation violated on effort columns: {residual_map:.3e}"
        )

    S_q_hat = (-T_p_hat @ (d_q.T @ P_fq.T @ P_eq + S_p.T @ T_q)).tocsr()
    parts = PfqParts(perp, par, rot, residual_map, residual_full)
    return P_fq, S_p, S_q_hat, parts


def power_residual(maps: MapSet, inc: IncidencePair) -> float:
    """Max-abs entry of the power-preservation matrix condition."""
    d_p = inc.d_p.astype(float)
    d_q = inc.d_q.astype(float)
    lhs = (
        ((-1.0) ** maps.r) * (d_p.T @ maps.P_fp.T @ maps.P_ep)
        + maps.P_eq.T @ maps.P_fq @ d_q
        + maps.T_q.T @ maps.S_p
        + maps.S_q_hat.T @ maps.T_p_hat
    )
    lhs = sp.csr_matrix(lhs)
    return float(np.abs(lhs.data).max()) if lhs.nnz else 0.0


def build_2d_maps(
    mesh: SimplexMesh,
    partition: BoundaryPartition,
    w: TriangleWeights,
    inc: IncidencePair | None = None,
) -> MapSet:
    """Assemble the complete 2D map set and verify power preservation."""
    if mesh.dim != 2:
        raise InvalidArgumentError("build_2d_maps requires a 2D mesh")
    if inc is None:
        inc = incidence(mesh)
    T_q, T_p_hat, P_eq, P_ep = build_selectors(mesh, partition)
    P_fp = build_Pfp(mesh, partition, w)
    P_fq, S_p, S_q_hat, parts = solve_Pfq_and_outputs(
        mesh, partition, w, inc, P_fp, P_eq, P_ep, T_q, T_p_hat
    )
    n_edges = mesh.edges.shape[0]
    n_nodes = mesh.node_coords.shape[0]
    maps = MapSet(
        T_q=T_q.tocsr(),
        T_p_hat=T_p_hat.tocsr(),
        P_eq=P_eq.tocsr(),
        P_ep=P_ep.tocsr(),
        P_fp=P_fp.tocsr(),
        P_fq=P_fq,
        S_p=S_p,
        S_q_hat=S_q_hat,
        parts=parts,
        q_inputs=q_input_edges(partition),
        p_inputs=p_input_nodes(partition),
        q_efforts=np.setdiff1d(np.arange(n_edges), q_input_edges(partition)),
        p_efforts=np.setdiff1d(np.arange(n_nodes), p_input_nodes(partition)),
        r=3,
    )
    resid = power_residual(maps, inc)
    if resid > RESIDUAL_TOL:
        raise StructureViolationError(
            f"power-preservation residual {resid:.3e} exceeds {RESIDUAL_TOL}"
        )
    return maps


# ---------------------------------------------------------------------------
# 1D maps


def build_1d_maps(N: int, alpha: float) -> MapSet:
    """Upwinded 1D map set on an N-edge chain.

    alpha = 0 collocates the p effort at each edge's left node and the q
    effort at its right node (staggered placement); alpha = 1/2 is the
    centered symmetric choice.  alpha >= 1 is rejected: the associated
    Hodge weight 1/(1-alpha) degenerates.
    """
    if N < 2:
        raise InvalidArgumentError(f"need N >= 2 edges, got {N}")
    if alpha >= 1:
        raise InvalidArgumentError(
            f"alpha must be < 1 (Hodge weight 1/(1-alpha) singular), got {alpha}"
        )
    n_nodes = N + 1

    T_q = _selector([0], n_nodes)
    T_p_hat = _selector([N], n_nodes, sign=-1.0)
    P_eq = _selector(np.arange(1, n_nodes), n_nodes)
    P_ep = _selector(np.arange(N), n_nodes)

    # upper-bidiagonal q flow map; p flow map is its transpose
    diag = sp.diags([np.full(N, 1.0 - alpha), np.full(N - 1, alpha)], [0, 1])
    P_fq = sp.csr_matrix(diag)
    P_fp = P_fq.T.tocsr()

    S_p = sp.csr_matrix(
        (np.array([1.0 - alpha, alpha]), (np.zeros(2, dtype=int), np.array([0, 1]))),
        shape=(1, n_nodes),
    )
    S_q_hat = sp.csr_matrix(
        (
            np.array([alpha, 1.0 - alpha]),
            (np.zeros(2, dtype=int), np.array([N - 1, N])),
        ),
        shape=(1, n_nodes),
    )

    zero = sp.csr_matrix((N, N))
    parts = PfqParts(P_fq, zero, zero.copy(), 0.0, 0.0)
    maps = MapSet(
        T_q=T_q,
        T_p_hat=T_p_hat,
        P_eq=P_eq,
        P_ep=P_ep,
        P_fp=P_fp,
        P_fq=P_fq,
        S_p=S_p,
        S_q_hat=S_q_hat,
        parts=parts,
        q_inputs=np.array([0]),
        p_inputs=np.array([N]),
        q_efforts=np.arange(N),
        p_efforts=np.arange(N),
        r=2,
    )
    from .mesh import build_interval_mesh

    resid = power_residual(maps, incidence(build_interval_mesh(N, 1.0)))
    if resid > RESIDUAL_TOL:
        raise InternalConsistencyError(
            f"1D power-preservation residual {resid:.3e} exceeds {RESIDUAL_TOL}"
        )
    return maps


def count_identity(maps: MapSet) -> tuple:
    """(N~_p + N~_q + M_b + M_b_hat, M_p + M_q): both counts must agree."""
    lhs = (
        maps.P_ep.shape[0]
        + maps.P_eq.shape[0]
        + maps.T_q.shape[0]
        + maps.T_p_hat.shape[0]
    )
    rhs = maps.P_ep.shape[1] + maps.P_eq.shape[1]
    return lhs, rhs
