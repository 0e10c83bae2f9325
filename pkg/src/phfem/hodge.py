"""Diagonal discrete Hodge matrices: the constitutive/metric side.

The reduced states pair with efforts through diagonal, positive definite
matrices Q_p, Q_q: e~_p = Q_p p~ and e~_q = Q_q q~, defining the discrete
Hamiltonian H_d = (1/2)(p~^T Q_p p~ + q~^T Q_q q~).

Consistency fixes the entries from the geometry of the reduction maps:

* Q_p averages 2-form densities over the weighted balance areas that make
  up each reduced p state: [Q_p]_ii = 2 / (h^2 * rowsum_i(P_fp)).
* Q_q turns the transverse (perpendicular-edge) part of each reduced q
  state into a flux across the effort edge: 1 / abs-rowsum of the perp
  block for horizontal/vertical edges, 2 / abs-rowsum for diagonals (each
  perpendicular pair sees only half of the crossing flux there).

In 1D the same reasoning gives (1/h) diagonals with a single 1/(1-alpha)
entry at the inflow end of each family; alpha = 1 makes that entry blow up.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, SingularHodgeError
from .mesh import SimplexMesh, edge_kind

WEIGHT_FLOOR = 1e-14


class HodgePair(NamedTuple):
    """Diagonal Hodge matrices (sparse) for the reduced state [p~; q~]."""

    Q_p: sp.csr_matrix
    Q_q: sp.csr_matrix

    def as_block(self) -> sp.csr_matrix:
        return sp.block_diag([self.Q_p, self.Q_q], format="csr")

    @property
    def diagonal(self) -> np.ndarray:
        return np.concatenate([self.Q_p.diagonal(), self.Q_q.diagonal()])


def hodge_2d(
    mesh: SimplexMesh,
    P_fp: sp.csr_matrix,
    P_fq_perp: sp.csr_matrix,
    h: float,
    q_efforts: np.ndarray | None = None,
) -> HodgePair:
    """Consistent diagonal Hodge pair for a uniform square grid.

    q_efforts lists the mesh edge index behind each P_fq row (needed to
    distinguish diagonal from horizontal/vertical edges); None means the
    rows enumerate all edges in mesh order.
    """
    if mesh.dim != 2:
        raise InvalidArgumentError("hodge_2d requires a 2D mesh")
    if h <= 0:
        raise InvalidArgumentError(f"mesh size h must be positive, got {h}")

    p_weights = np.asarray(P_fp.sum(axis=1)).ravel()
    if np.any(p_weights <= WEIGHT_FLOOR):
        bad = int(np.argmin(p_weights))
        raise SingularHodgeError(
            f"P_fp row {bad} has nonpositive weight sum {p_weights[bad]:.3e}; "
            "the triangle weights leave this node without balance area"
        )
    Q_p = sp.diags(2.0 / (h * h * p_weights), format="csr")

    if q_efforts is None:
        q_efforts = np.arange(P_fq_perp.shape[0])
    q_efforts = np.asarray(q_efforts)
    if len(q_efforts) != P_fq_perp.shape[0]:
        raise InvalidArgumentError(
            f"q_efforts has {len(q_efforts)} entries for {P_fq_perp.shape[0]} rows"
        )
    abs_sums = np.asarray(abs(P_fq_perp).sum(axis=1)).ravel()
    if np.any(abs_sums <= WEIGHT_FLOOR):
        bad = int(np.argmin(abs_sums))
        raise SingularHodgeError(
            f"transverse part of P_fq row {bad} (edge {q_efforts[bad]}) has "
            f"absolute sum {abs_sums[bad]:.3e}; no flux information crosses "
            "this effort edge"
        )
    factor = np.array(
        [2.0 if edge_kind(mesh, int(e)) == "d" else 1.0 for e in q_efforts]
    )
    Q_q = sp.diags(factor / abs_sums, format="csr")
    return HodgePair(Q_p, Q_q)


def hodge_1d(N: int, alpha: float, h: float) -> HodgePair:
    """Upwinded 1D Hodge pair: 1/(1-alpha) at the q-inflow end of Q_p and
    the p-inflow end of Q_q, 1 elsewhere, all scaled by 1/h."""
    if N < 1:
        raise InvalidArgumentError(f"need N >= 1, got {N}")
    if h <= 0:
        raise InvalidArgumentError(f"mesh size h must be positive, got {h}")
    if alpha >= 1:
        raise SingularHodgeError(
            f"alpha = {alpha}: the boundary Hodge entry 1/(1-alpha) degenerates"
        )
    dp = np.ones(N)
    dp[0] = 1.0 / (1.0 - alpha)
    dq = np.ones(N)
    dq[-1] = 1.0 / (1.0 - alpha)
    return HodgePair(sp.diags(dp / h, format="csr"), sp.diags(dq / h, format="csr"))


def hodge_golo_1d(N: int, h: float) -> HodgePair:
    """Identity-per-length Hodge pair used with effort-averaged 1D models."""
    if N < 1:
        raise InvalidArgumentError(f"need N >= 1, got {N}")
    if h <= 0:
        raise InvalidArgumentError(f"mesh size h must be positive, got {h}")
    eye = sp.identity(N, format="csr") / h
    return HodgePair(eye, eye.copy())
