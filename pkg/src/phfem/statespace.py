"""Finite-dimensional Dirac structure representations and PH state space.

Stacking the reduced flow/effort relations gives an image representation
(E, F) of the discrete Dirac structure with E F^T + F E^T = 0 and F of
full rank.  Resolving the (signed) permutations between interior efforts
and boundary inputs turns it into an explicit input-output form

    d/dt [p~; q~] = J Q x + B u,      y = B^T Q x + D u,

with J skew-symmetric, Q the diagonal Hodge block, u = [e_b_hat; e_b]
(p-type inputs first), y the conjugated boundary flows, and D skew (zero
whenever the effort/input split is a plain permutation).  The discrete
Hamiltonian H_d = (1/2) x^T Q x then satisfies dH_d/dt = y^T u exactly
along trajectories.
"""

from __future__ import annotations

import json
import pathlib
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    InvalidArgumentError,
    MissingArtifactError,
    StructureViolationError,
)
from .hodge import HodgePair
from .mesh import IncidencePair
from .power_maps import MapSet

SKEW_TOL = 1e-12


class ImageRep(NamedTuple):
    """Image representation of the discrete Dirac structure.

    Row blocks of E: reduced flows (p then q), then boundary outputs
    (p-type then q-type); column blocks: all node efforts, all edge
    efforts.  F holds the matching effort selections.
    """

    E: sp.csr_matrix
    F: sp.csr_matrix

    def residual(self) -> float:
        S = self.E @ self.F.T + self.F @ self.E.T
        S = sp.csr_matrix(S)
        return float(np.abs(S.data).max()) if S.nnz else 0.0


def image_rep(maps: MapSet, inc: IncidencePair) -> ImageRep:
    d_p = inc.d_p.astype(float)
    d_q = inc.d_q.astype(float)
    sgn = (-1.0) ** maps.r
    n_p, n_q = maps.P_fp.shape[0], maps.P_fq.shape[0]
    m_hat, m_b = maps.T_p_hat.shape[0], maps.T_q.shape[0]
    M_p, M_q = maps.P_ep.shape[1], maps.P_eq.shape[1]

    E = sp.bmat(
        [
            [None, sgn * (maps.P_fp @ d_p)],
            [maps.P_fq @ d_q, None],
            [sp.csr_matrix((m_hat, M_p)), maps.S_q_hat],
            [maps.S_p, sp.csr_matrix((m_b, M_q))],
        ],
        format="csr",
    )
    F = sp.bmat(
        [
            [maps.P_ep, None],
            [None, maps.P_eq],
            [maps.T_p_hat, sp.csr_matrix((m_hat, M_q))],
            [sp.csr_matrix((m_b, M_p)), maps.T_q],
        ],
        format="csr",
    )
    assert E.shape == F.shape == (n_p + n_q + m_hat + m_b, M_p + M_q)
    return ImageRep(E, F)


class IORep(NamedTuple):
    """Explicit blocks of the resolved Dirac structure."""

    J_p: np.ndarray
    B_p: np.ndarray
    C_q: np.ndarray
    D_q: np.ndarray
    J_q: np.ndarray
    B_q: np.ndarray
    C_p: np.ndarray
    D_p: np.ndarray


def _resolve(stack: sp.csr_matrix, Pi: sp.csr_matrix) -> np.ndarray:
    """Right-multiply by Pi^{-1}; fast path when Pi is (sign-)orthogonal."""
    gram = (Pi @ Pi.T - sp.identity(Pi.shape[0])).tocsr()
    gram.eliminate_zeros()
    if gram.nnz == 0 or np.abs(gram.data).max() <= 1e-14:
        return (stack @ Pi.T).toarray()
    lu = spla.splu(sp.csc_matrix(Pi.T))
    return lu.solve(stack.toarray().T).T


def io_rep(maps: MapSet, inc: IncidencePair) -> IORep:
    d_p = inc.d_p.astype(float)
    d_q = inc.d_q.astype(float)
    sgn = (-1.0) ** maps.r
    n_p, n_q = maps.P_fp.shape[0], maps.P_fq.shape[0]

    Pi_q = sp.vstack([maps.P_eq, maps.T_q]).tocsr()
    Pi_p = sp.vstack([maps.P_ep, maps.T_p_hat]).tocsr()
    if Pi_q.shape[0] != Pi_q.shape[1] or Pi_p.shape[0] != Pi_p.shape[1]:
        raise InvalidArgumentError(
            "effort selectors and input traces do not tile the effort spaces"
        )

    X_q = _resolve(sp.vstack([sgn * (maps.P_fp @ d_p), maps.S_q_hat]).tocsr(), Pi_q)
    X_p = _resolve(sp.vstack([maps.P_fq @ d_q, maps.S_p]).tocsr(), Pi_p)

    return IORep(
        J_p=-X_q[:n_p, :n_q],
        B_p=-X_q[:n_p, n_q:],
        C_q=X_q[n_p:, :n_q],
        D_q=X_q[n_p:, n_q:],
        J_q=-X_p[:n_q, :n_p],
        B_q=-X_p[:n_q, n_p:],
        C_p=X_p[n_q:, :n_p],
        D_p=X_p[n_q:, n_p:],
    )


class PHModel(NamedTuple):
    """Explicit port-Hamiltonian state-space model.

    State x = [p~; q~] (n_p + n_q entries), input u = [e_b_hat; e_b]
    (m_hat p-type entries first, then m q-type), output y = [f_b_hat; f_b].
    """

    J: sp.csr_matrix
    Q: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    n_p: int
    n_q: int
    m_hat: int
    m: int
    meta: dict

    @property
    def n(self) -> int:
        return self.n_p + self.n_q

    @property
    def n_u(self) -> int:
        return self.m_hat + self.m

    def A(self) -> sp.csr_matrix:
        return (self.J @ self.Q).tocsr()

    def hamiltonian(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.Q @ x))

    def output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.C @ (self.Q @ x) + self.D @ u


def assemble_model(
    maps: MapSet,
    inc: IncidencePair,
    hodge: HodgePair,
    meta: dict | None = None,
) -> PHModel:
    """Combine structure (maps) and metric (Hodge pair) into a PH model."""
    rep = io_rep(maps, inc)
    n_p, n_q = rep.J_p.shape[0], rep.J_q.shape[0]
    m_hat, m = rep.B_q.shape[1], rep.B_p.shape[1]

    J = sp.bmat(
        [
            [None, sp.csr_matrix(rep.J_p)],
            [sp.csr_matrix(rep.J_q), None],
        ],
        format="csr",
    )
    B = sp.bmat(
        [
            [sp.csr_matrix((n_p, m_hat)), sp.csr_matrix(rep.B_p)],
            [sp.csr_matrix(rep.B_q), sp.csr_matrix((n_q, m))],
        ],
        format="csr",
    )
    C = sp.bmat(
        [
            [sp.csr_matrix((m_hat, n_p)), sp.csr_matrix(rep.C_q)],
            [sp.csr_matrix(rep.C_p), sp.csr_matrix((m, n_q))],
        ],
        format="csr",
    )
    D = sp.bmat(
        [
            [sp.csr_matrix((m_hat, m_hat)), sp.csr_matrix(rep.D_q)],
            [sp.csr_matrix(rep.D_p), sp.csr_matrix((m, m))],
        ],
        format="csr",
    )
    if hodge.Q_p.shape[0] != n_p or hodge.Q_q.shape[0] != n_q:
        raise InvalidArgumentError(
            f"Hodge blocks ({hodge.Q_p.shape[0]}, {hodge.Q_q.shape[0]}) do not "
            f"match state dimensions ({n_p}, {n_q})"
        )
    Q = hodge.as_block()

    model = PHModel(J, Q, B, C, D, n_p, n_q, m_hat, m, dict(meta or {}))
    resid = power_balance_residual(model)
    if resid > SKEW_TOL:
        raise StructureViolationError(
            f"state-space model violates power balance: residual {resid:.3e}"
        )
    return model


def power_balance_residual(model: PHModel) -> float:
    """Max-abs violation of skew-symmetry (J, D) and collocation (C = B^T):
    zero means dH_d/dt = y^T u holds exactly along trajectories."""
    vals = []
    for mat in (model.J + model.J.T, model.D + model.D.T, model.C - model.B.T):
        mat = sp.csr_matrix(mat)
        mat.eliminate_zeros()
        vals.append(np.abs(mat.data).max() if mat.nnz else 0.0)
    return float(max(vals))


# ---------------------------------------------------------------------------
# serialization

_MATRICES = ("J", "Q", "B", "C", "D")


def export_model(model: PHModel, outdir) -> pathlib.Path:
    """Write the model matrices (Matrix Market) plus manifest.json."""
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    from scipy.io import mmwrite

    for name in _MATRICES:
        mat = sp.coo_matrix(getattr(model, name))
        mmwrite(str(out / f"{name}.mtx"), mat)
    manifest = {
        "format": "phfem-model/v1",
        "n_p": model.n_p,
        "n_q": model.n_q,
        "m_hat": model.m_hat,
        "m": model.m,
        "meta": model.meta,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_model(indir) -> PHModel:
    indir = pathlib.Path(indir)
    mf = indir / "manifest.json"
    if not mf.is_file():
        raise MissingArtifactError(f"no manifest.json under {indir}")
    manifest = json.loads(mf.read_text())
    from scipy.io import mmread

    mats = {}
    for name in _MATRICES:
        path = indir / f"{name}.mtx"
        if not path.is_file():
            raise MissingArtifactError(f"model matrix file missing: {path}")
        mats[name] = sp.csr_matrix(mmread(str(path)))
    return PHModel(
        J=mats["J"],
        Q=mats["Q"],
        B=mats["B"],
        C=mats["C"],
        D=mats["D"],
        n_p=int(manifest["n_p"]),
        n_q=int(manifest["n_q"]),
        m_hat=int(manifest["m_hat"]),
        m=int(manifest["m"]),
        meta=manifest.get("meta", {}),
    )
