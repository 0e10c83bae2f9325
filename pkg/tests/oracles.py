"""Independent oracles used to validate the package's closed-form routines.

Everything in this file is deliberately built by a different route than the
library: numerical quadrature instead of closed-form integrals, physical
finite-volume indexing instead of algebraic map composition, dense matrix
exponentials instead of implicit stepping, and a least-squares flow-map
solve instead of constructive stencils.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

# ---------------------------------------------------------------------------
# symmetric triangle quadrature, degree 4 (6 points)

_QA = 0.445948490915965
_QB = 0.091576213509771
_QWA = 0.223381589678011
_QWB = 0.109951743655322

#: barycentric points and weights; weights sum to 1 (multiply by the area)
TRI_QP = np.array(
    [
        [1 - 2 * _QA, _QA, _QA],
        [_QA, 1 - 2 * _QA, _QA],
        [_QA, _QA, 1 - 2 * _QA],
        [1 - 2 * _QB, _QB, _QB],
        [_QB, 1 - 2 * _QB, _QB],
        [_QB, _QB, 1 - 2 * _QB],
    ]
)
TRI_QW = np.array([_QWA, _QWA, _QWA, _QWB, _QWB, _QWB])

# 3-point Gauss-Legendre on [0, 1] (degree 5), for boundary traces
SEG_QP = np.array([0.5 - np.sqrt(0.15), 0.5, 0.5 + np.sqrt(0.15)])
SEG_QW = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class TriangleFrame:
    """Barycentric calculus on one physical triangle (CCW vertices)."""

    def __init__(self, verts: np.ndarray):
        verts = np.asarray(verts, dtype=float)
        assert verts.shape == (3, 2)
        self.verts = verts
        # lam_l(x, y) = a x + b y + c : solve the 3x3 interpolation system
        A = np.column_stack([verts, np.ones(3)])
        self.coef = np.linalg.solve(A, np.eye(3))      # column l -> (a, b, c)
        self.grads = self.coef[:2].T                   # (3, 2)
        d = np.linalg.det(A)
        self.area = abs(d) / 2.0
        assert d > 0, "vertices must be CCW"

    def lam(self, xy: np.ndarray) -> np.ndarray:
        """Barycentric coordinates at points (n, 2) -> (n, 3)."""
        xy = np.atleast_2d(xy)
        return np.column_stack([xy, np.ones(len(xy))]) @ self.coef

    def qpoints(self) -> np.ndarray:
        return TRI_QP @ self.verts

    def integrate(self, fn) -> float:
        """Area integral of a scalar function of physical points."""
        vals = np.asarray([fn(p) for p in self.qpoints()], dtype=float)
        return float(self.area * (TRI_QW @ vals))

    # Whitney forms in LOCAL vertex numbering -------------------------------

    def w_node(self, l: int, xy) -> np.ndarray:
        return self.lam(xy)[:, l]

    def w_edge(self, t: int, h: int, xy) -> np.ndarray:
        """(n, 2) vector field lam_t grad lam_h - lam_h grad lam_t."""
        lam = self.lam(xy)
        return np.outer(lam[:, t], self.grads[h]) - np.outer(lam[:, h], self.grads[t])

    def w_face(self) -> float:
        """Constant density of the unit-integral face form."""
        return 1.0 / self.area

    def d_node(self, l: int) -> np.ndarray:
        return self.grads[l]

    def d_edge(self, t: int, h: int) -> float:
        """Constant 2-form density of d(w_edge)."""
        gt, gh = self.grads[t], self.grads[h]
        return 2.0 * (gt[0] * gh[1] - gt[1] * gh[0])


def quad_wedge_node_face(tri: TriangleFrame, l: int) -> float:
    """int w_node(l) ^ w_face over the triangle."""
    return tri.integrate(lambda p: tri.w_node(l, p)[0] * tri.w_face())


def quad_wedge_edge_edge(tri: TriangleFrame, e1: tuple, e2: tuple) -> float:
    """int w_edge(e1) ^ w_edge(e2); e = (tail, head) local vertex ids."""

    def f(p):
        a = tri.w_edge(*e1, p)[0]
        b = tri.w_edge(*e2, p)[0]
        return a[0] * b[1] - a[1] * b[0]

    return tri.integrate(f)


def quad_wedge_dnode_edge(tri: TriangleFrame, l: int, e: tuple) -> float:
    """int d(w_node(l)) ^ w_edge(e)."""
    g = tri.d_node(l)

    def f(p):
        b = tri.w_edge(*e, p)[0]
        return g[0] * b[1] - g[1] * b[0]

    return tri.integrate(f)


def quad_wedge_node_dedge(tri: TriangleFrame, l: int, e: tuple) -> float:
    """int w_node(l) * d(w_edge(e))."""
    dens = tri.d_edge(*e)
    return tri.integrate(lambda p: tri.w_node(l, p)[0] * dens)


def quad_boundary_trace(
    tri: TriangleFrame, node_l: int, e: tuple, seg: np.ndarray
) -> float:
    """int over the segment of (hat of node_l) * (tangential trace of
    w_edge(e)), traversing seg from seg[0] to seg[1]."""
    seg = np.asarray(seg, dtype=float)
    tang = seg[1] - seg[0]
    length = np.linalg.norm(tang)
    acc = 0.0
    for s, w in zip(SEG_QP, SEG_QW):
        p = seg[0] + s * tang
        hat = tri.w_node(node_l, p)[0]
        vec = tri.w_edge(*e, p)[0]
        acc += w * hat * float(vec @ tang)   # (w . t_hat) * length
    return acc


# ---------------------------------------------------------------------------
# independent 1D staggered finite-volume model (alpha = 0 case)


def staggered_fv_1d(N: int, L: float = 1.0):
    """Two-field wave system on staggered control volumes.

    States: P_i = integral of p over cell [x_{i-1}, x_i] (i = 1..N) and
    Q_i = integral of q over the same cells.  Reconstructed efforts are
    collocated at the LEFT node for e^p and at the RIGHT node for e^q.
    Ports: u = [u_p (right end, value -e^p(L)), u_q (left end, e^q(0))],
    y = [e^q(L), e^p(0)].

    Returns dense (A, B, C, D) for dx/dt = Ax + Bu, y = Cx + Du.
    """
    h = L / N
    A = np.zeros((2 * N, 2 * N))
    B = np.zeros((2 * N, 2))
    C = np.zeros((2, 2 * N))
    D = np.zeros((2, 2))

    iP = lambda i: i - 1          # 1-based cell -> state index
    iQ = lambda i: N + i - 1

    for i in range(1, N + 1):
        # dP_i/dt = -(e^q(x_i) - e^q(x_{i-1}))
        A[iP(i), iQ(i)] -= 1.0 / h
        if i > 1:
            A[iP(i), iQ(i - 1)] += 1.0 / h
        else:
            B[iP(1), 1] += 1.0       # e^q(x_0) is the u_q input

        # dQ_i/dt = -(e^p(x_i) - e^p(x_{i-1})) with e^p(x_{i-1}) = P_i / h
        A[iQ(i), iP(i)] += 1.0 / h
        if i < N:
            A[iQ(i), iP(i + 1)] -= 1.0 / h
        else:
            B[iQ(N), 0] += 1.0       # e^p(x_N) = -u_p

    C[0, iQ(N)] = 1.0 / h            # y_p = e^q(L)
    C[1, iP(1)] = 1.0 / h            # y_q = e^p(0)
    return A, B, C, D


# ---------------------------------------------------------------------------
# dense matrix-exponential reference trajectory


def expm_trajectory(A: np.ndarray, B: np.ndarray, u_of_t, dt: float, n_steps: int, x0):
    """Exact propagation of dx/dt = A x + B u with u held constant at its
    midpoint value over each step (the same signal the midpoint integrator
    sees).  Returns the (n_steps+1, n) state history."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    xs = np.empty((n_steps + 1, n))
    xs[0] = np.asarray(x0, dtype=float)
    for k in range(n_steps):
        u = np.atleast_1d(u_of_t((k + 0.5) * dt))
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = A
        aug[:n, n] = B @ u
        phi = sla.expm(aug * dt)
        xs[k + 1] = phi[:n, :n] @ xs[k] + phi[:n, n]
    return xs


# ---------------------------------------------------------------------------
# least-squares flow-map solve (minimum-norm row solutions)


def minnorm_flow_map(d_q: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-Frobenius-norm X solving X @ d_q = rhs (row-wise min-norm).

    Raises if the system is inconsistent beyond 1e-10.
    """
    d_q = np.asarray(d_q, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    X = rhs @ np.linalg.pinv(d_q)
    resid = np.abs(X @ d_q - rhs).max()
    if resid > 1e-10:
        raise AssertionError(f"flow-map equation inconsistent: residual {resid:.3e}")
    return X


def range_projector(d_q: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto range(d_q) (the component of a row vector
    that influences products with d_q)."""
    d_q = np.asarray(d_q, dtype=float)
    return d_q @ np.linalg.pinv(d_q)
