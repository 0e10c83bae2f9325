"""Structured simplicial meshes and their incidence matrices.

Two mesh families are supported:

* 1D: a uniform subdivision of an interval (0, L) into N edges.  Edge i
  runs from node i to node i+1 (+x orientation).
* 2D: a uniform N x M grid of square cells of side h, each cell split into
  two right triangles by the cell diagonal.

2D numbering (all indices zero-based, row-major with i the x-index):

* nodes:       node(i, j) = j*(N+1) + i,   i = 0..N, j = 0..M
* horizontal edges: hor(i, j) = j*N + i,   i = 0..N-1, j = 0..M
  oriented tail node(i+1, j) -> head node(i, j)   (points in -x)
* vertical edges:   ver(i, j) = N*(M+1) + j*(N+1) + i
  oriented tail node(i, j) -> head node(i, j+1)   (points in +y)
* diagonal edges:   dia(i, j) = N*(M+1) + (N+1)*M + j*N + i
  oriented tail node(i+1, j+1) -> head node(i, j)
* faces: all lower triangles first (lower(i, j) = j*N + i, vertices
  (i,j), (i+1,j), (i+1,j+1)), then all upper triangles
  (upper(i, j) = N*M + j*N + i, vertices (i,j), (i+1,j+1), (i,j+1)).
  Both triangle families are oriented counterclockwise.

The incidence matrices are integer valued: d_q maps node values to oriented
edge differences (-1 at the tail, +1 at the head); d_p maps edge values to
oriented face boundary sums (sign +1 where the CCW face traversal agrees
with the edge orientation).  They satisfy d_p @ d_q == 0 exactly.
"""

from __future__ import annotations

import hashlib
import json
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError

NUMBERING_VERSION = "grouped-lower-upper/v1"


class SimplexMesh(NamedTuple):
    """Immutable mesh container.

    dim         -- 1 or 2
    node_coords -- (n_nodes, dim) float array
    edges       -- (n_edges, 2) int array of (tail, head) node indices
    faces       -- (n_faces, 3) int array of edge indices per face (2D),
                   ordered along the CCW boundary traversal; None in 1D
    face_signs  -- (n_faces, 3) int array of +-1 traversal signs; None in 1D
    h           -- uniform mesh size (cell side in 2D, edge length in 1D)
    grid_shape  -- (N, M) cells in 2D, (N,) edges in 1D
    """

    dim: int
    node_coords: np.ndarray
    edges: np.ndarray
    faces: np.ndarray | None
    face_signs: np.ndarray | None
    h: float
    grid_shape: tuple


class IncidencePair(NamedTuple):
    """Incidence matrices of the two discrete conservation laws.

    d_p -- faces x edges in 2D, edges x nodes in 1D (integer sparse)
    d_q -- edges x nodes (integer sparse)
    """

    d_p: sp.csr_matrix
    d_q: sp.csr_matrix


class BoundaryPartition(NamedTuple):
    """Disjoint causality segments on the mesh boundary.

    q_segments -- tuple of tuples of boundary edge indices (2D) or boundary
                  node indices (1D); efforts there are imposed as inputs e^b
    p_segments -- tuple of tuples of boundary node indices; efforts there
                  are imposed as inputs ehat^b
    """

    q_segments: tuple
    p_segments: tuple


# ---------------------------------------------------------------------------
# construction


def build_interval_mesh(N: int, L: float) -> SimplexMesh:
    """Uniform 1D mesh of (0, L) with N edges and N+1 nodes."""
    if N < 1:
        raise InvalidArgumentError(f"need at least one edge, got N={N}")
    if not (L > 0):
        raise InvalidArgumentError(f"domain length must be positive, got L={L}")
    h = L / N
    coords = np.linspace(0.0, L, N + 1).reshape(-1, 1)
    edges = np.column_stack([np.arange(N), np.arange(1, N + 1)])
    return SimplexMesh(1, coords, edges.astype(np.int64), None, None, h, (N,))


def build_rect_mesh(N: int, M: int, h: float) -> SimplexMesh:
    """Uniform N x M grid of square cells of side h, each split into two
    triangles by the cell diagonal (top-right to bottom-left)."""
    if N < 1 or M < 1:
        raise InvalidArgumentError(f"grid must have at least one cell, got {N}x{M}")
    if not (h > 0):
        raise InvalidArgumentError(f"cell size must be positive, got h={h}")

    def node(i, j):
        return j * (N + 1) + i

    n_hor = N * (M + 1)
    n_ver = (N + 1) * M

    def hor(i, j):
        return j * N + i

    def ver(i, j):
        return n_hor + j * (N + 1) + i

    def dia(i, j):
        return n_hor + n_ver + j * N + i

    ii, jj = np.meshgrid(np.arange(N + 1), np.arange(M + 1), indexing="xy")
    coords = np.column_stack([ii.ravel() * h, jj.ravel() * h]).astype(float)

    n_edges = n_hor + n_ver + N * M
    edges = np.empty((n_edges, 2), dtype=np.int64)
    for j in range(M + 1):
        for i in range(N):
            edges[hor(i, j)] = (node(i + 1, j), node(i, j))
    for j in range(M):
        for i in range(N + 1):
            edges[ver(i, j)] = (node(i, j), node(i, j + 1))
    for j in range(M):
        for i in range(N):
            edges[dia(i, j)] = (node(i + 1, j + 1), node(i, j))

    # lower triangles first, then upper; CCW boundary traversal of each
    n_faces = 2 * N * M
    faces = np.empty((n_faces, 3), dtype=np.int64)
    signs = np.empty((n_faces, 3), dtype=np.int64)
    for j in range(M):
        for i in range(N):
            # lower: (i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j)
            faces[j * N + i] = (hor(i, j), ver(i + 1, j), dia(i, j))
            signs[j * N + i] = (-1, +1, +1)
            # upper: (i,j) -> (i+1,j+1) -> (i,j+1) -> (i,j)
            faces[N * M + j * N + i] = (dia(i, j), hor(i, j + 1), ver(i, j))
            signs[N * M + j * N + i] = (-1, +1, -1)

    return SimplexMesh(2, coords, edges, faces, signs, float(h), (N, M))


# ---------------------------------------------------------------------------
# index helpers


def grid_counts(mesh: SimplexMesh) -> dict:
    """Entity counts; in 2D also the per-class edge counts."""
    if mesh.dim == 1:
        N = mesh.grid_shape[0]
        return {"nodes": N + 1, "edges": N}
    N, M = mesh.grid_shape
    return {
        "nodes": (N + 1) * (M + 1),
        "edges": mesh.edges.shape[0],
        "faces": 2 * N * M,
        "hor_edges": N * (M + 1),
        "ver_edges": (N + 1) * M,
        "dia_edges": N * M,
    }


def edge_kind(mesh: SimplexMesh, e: int) -> str:
    """'h' / 'v' / 'd' for a 2D edge index."""
    N, M = mesh.grid_shape
    n_hor = N * (M + 1)
    n_ver = (N + 1) * M
    if e < n_hor:
        return "h"
    if e < n_hor + n_ver:
        return "v"
    return "d"


def boundary_nodes(mesh: SimplexMesh) -> np.ndarray:
    if mesh.dim == 1:
        N = mesh.grid_shape[0]
        return np.array([0, N], dtype=np.int64)
    N, M = mesh.grid_shape
    out = []
    for j in range(M + 1):
        for i in range(N + 1):
            if i in (0, N) or j in (0, M):
                out.append(j * (N + 1) + i)
    return np.array(sorted(out), dtype=np.int64)


def boundary_edges(mesh: SimplexMesh) -> np.ndarray:
    """2D boundary edge indices (bottom/top horizontals, left/right verticals)."""
    if mesh.dim == 1:
        raise InvalidArgumentError("boundary edges are a 2D notion")
    N, M = mesh.grid_shape
    n_hor = N * (M + 1)
    out = []
    for i in range(N):
        out.append(i)                    # bottom row, j = 0
        out.append(M * N + i)            # top row, j = M
    for j in range(M):
        out.append(n_hor + j * (N + 1))          # left column, i = 0
        out.append(n_hor + j * (N + 1) + N)      # right column, i = N
    return np.array(sorted(out), dtype=np.int64)


def boundary_side_nodes(mesh: SimplexMesh, side: str) -> np.ndarray:
    """Node indices on one side of the 2D rectangle (corners included)."""
    N, M = mesh.grid_shape
    if side == "bottom":
        return np.arange(N + 1, dtype=np.int64)
    if side == "top":
        return M * (N + 1) + np.arange(N + 1, dtype=np.int64)
    if side == "left":
        return (N + 1) * np.arange(M + 1, dtype=np.int64)
    if side == "right":
        return (N + 1) * np.arange(M + 1, dtype=np.int64) + N
    raise InvalidArgumentError(f"unknown side {side!r}")


def boundary_side_edges(mesh: SimplexMesh, side: str) -> np.ndarray:
    """Edge indices along one side of the 2D rectangle."""
    N, M = mesh.grid_shape
    n_hor = N * (M + 1)
    if side == "bottom":
        return np.arange(N, dtype=np.int64)
    if side == "top":
        return M * N + np.arange(N, dtype=np.int64)
    if side == "left":
        return n_hor + (N + 1) * np.arange(M, dtype=np.int64)
    if side == "right":
        return n_hor + (N + 1) * np.arange(M, dtype=np.int64) + N
    raise InvalidArgumentError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# incidence


def incidence(mesh: SimplexMesh) -> IncidencePair:
    """Integer incidence matrices (exact; d_p @ d_q == 0)."""
    n_edges = mesh.edges.shape[0]
    n_nodes = mesh.node_coords.shape[0]

    rows = np.repeat(np.arange(n_edges), 2)
    cols = mesh.edges.ravel()
    vals = np.tile(np.array([-1, 1], dtype=np.int64), n_edges)
    d_q = sp.csr_matrix((vals, (rows, cols)), shape=(n_edges, n_nodes))

    if mesh.dim == 1:
        # both conservation laws differentiate node values along edges
        d_p = d_q.copy()
    else:
        n_faces = mesh.faces.shape[0]
        rows = np.repeat(np.arange(n_faces), 3)
        cols = mesh.faces.ravel()
        vals = mesh.face_signs.ravel().astype(np.int64)
        d_p = sp.csr_matrix((vals, (rows, cols)), shape=(n_faces, n_edges))

    return IncidencePair(d_p, d_q)


# ---------------------------------------------------------------------------
# boundary causality partitions


_SIDES = ("bottom", "right", "top", "left")


def partition_boundary(mesh: SimplexMesh, causality: dict | None) -> BoundaryPartition:
    """Split the boundary into q-type segments (edge efforts imposed) and
    p-type segments (node efforts imposed).

    2D keys (all optional):
      "p_nodes"    -- list of boundary node indices
      "p_sides"    -- list of side names; their nodes become p-causal
      "q_edges"    -- "all" (default "rest"), or an explicit list of
                      boundary edge indices
      "q_segments" -- explicit list of edge-index lists (overrides q_edges)

    A boundary edge may remain a q-type input while one of its endpoints is
    p-causal; only edges with BOTH endpoints p-causal drop out of the q-side
    (requesting such an edge explicitly is an overlap error).

    1D accepts only the two-ended assignment {left node: q, right node: p},
    which is also the default for causality=None.
    """
    causality = dict(causality or {})

    if mesh.dim == 1:
        N = mesh.grid_shape[0]
        q_nodes = causality.pop("q_nodes", [0])
        p_nodes = causality.pop("p_nodes", [N])
        if causality:
            raise InvalidArgumentError(f"unknown 1D causality keys {sorted(causality)}")
        if list(q_nodes) != [0] or list(p_nodes) != [N]:
            raise InvalidArgumentError(
                "1D supports exactly the two-ended causality: q at node 0, "
                f"p at node {N}"
            )
        return BoundaryPartition(((0,),), ((N,),))

    bnodes = set(boundary_nodes(mesh).tolist())
    bedges = set(boundary_edges(mesh).tolist())

    p_nodes = set(int(n) for n in causality.pop("p_nodes", []))
    for side in causality.pop("p_sides", []):
        p_nodes.update(boundary_side_nodes(mesh, side).tolist())
    bad = p_nodes - bnodes
    if bad:
        raise InvalidArgumentError(f"p-causal nodes not on the boundary: {sorted(bad)}")

    q_segments_spec = causality.pop("q_segments", None)
    q_edges_spec = causality.pop("q_edges", "rest")
    causality.pop("q_sides", None)  # sides sugar: q side == not a p side
    if causality:
        raise InvalidArgumentError(f"unknown causality keys {sorted(causality)}")

    def covered(e: int) -> bool:
        t, hd = mesh.edges[e]
        return t in p_nodes and hd in p_nodes

    if q_segments_spec is not None:
        segments = [tuple(sorted(int(e) for e in seg)) for seg in q_segments_spec]
    elif q_edges_spec == "rest":
        segments = [tuple(sorted(e for e in bedges if not covered(e)))]
    elif q_edges_spec == "all":
        segments = [tuple(sorted(bedges))]
    else:
        segments = [tuple(sorted(int(e) for e in q_edges_spec))]

    seen: set[int] = set()
    for seg in segments:
        for e in seg:
            if e not in bedges:
                raise InvalidArgumentError(f"q-causal edge {e} is not a boundary edge")
            if e in seen:
                raise InvalidArgumentError(f"q-causal edge {e} listed twice")
            if covered(e):
                raise InvalidArgumentError(
                    f"edge {e} has both endpoints p-causal; it cannot also "
                    "carry a q-type input"
                )
            seen.add(e)

    segments = [seg for seg in segments if seg]
    p_segments = [tuple(sorted(p_nodes))] if p_nodes else []
    return BoundaryPartition(tuple(segments), tuple(p_segments))


def q_input_edges(part: BoundaryPartition) -> np.ndarray:
    """All q-causal input entities, segment by segment."""
    flat = [e for seg in part.q_segments for e in seg]
    return np.array(flat, dtype=np.int64)


def p_input_nodes(part: BoundaryPartition) -> np.ndarray:
    flat = [n for seg in part.p_segments for n in seg]
    return np.array(flat, dtype=np.int64)


# ---------------------------------------------------------------------------
# export helpers


def mesh_summary(mesh: SimplexMesh) -> dict:
    """JSON-ready description (counts, size, numbering version)."""
    return {
        "dim": mesh.dim,
        "grid_shape": list(mesh.grid_shape),
        "h": mesh.h,
        "counts": grid_counts(mesh),
        "numbering": NUMBERING_VERSION,
    }


def mesh_hash(mesh: SimplexMesh) -> str:
    """Deterministic content hash of the mesh (numbering-sensitive)."""
    hsh = hashlib.sha256()
    hsh.update(json.dumps(mesh_summary(mesh), sort_keys=True).encode())
    hsh.update(np.ascontiguousarray(mesh.node_coords).tobytes())
    hsh.update(np.ascontiguousarray(mesh.edges).tobytes())
    if mesh.faces is not None:
        hsh.update(np.ascontiguousarray(mesh.faces).tobytes())
        hsh.update(np.ascontiguousarray(mesh.face_signs).tobytes())
    return hsh.hexdigest()
