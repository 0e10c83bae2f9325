"""Spectral analysis of the 1D two-conservation-law family.

Provides eigenvalue extraction with a purity check (the models are
conservative by construction, so all eigenvalues must be purely imaginary),
frequency tables over the flow-map parameter alpha and over the effort-map
parameter alpha' of a comparison scheme, and log-log convergence-order
estimation against the closed-form frequencies (2k - 1) * pi / 2.

The comparison scheme (`build_golo_1d_model`) keeps both flow maps at the
identity and instead forms the reduced efforts as convex combinations of the
two adjacent node efforts: the p effort on edge i weights node i with
1 - alpha' and node i + 1 with alpha', the q effort mirrors this.  Its
boundary outputs are solved from the same power-preservation equation as
everywhere else; because the stacked effort maps are merely invertible (not
selectors) the resolved model carries a feedthrough matrix D != 0 whenever
alpha' != 0.  At alpha' = 0 both constructions collapse to the identical
staggered model.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    InternalConsistencyError,
    InvalidArgumentError,
    NumericalFailureError,
    StructureViolationError,
)
from .hodge import hodge_1d, hodge_golo_1d
from .mesh import build_interval_mesh, incidence
from .power_maps import (
    RESIDUAL_TOL,
    MapSet,
    PfqParts,
    _selector,
    build_1d_maps,
    power_residual,
)
from .statespace import PHModel, assemble_model

#: bound on |Re(lambda)| for a model to count as conservative
REAL_PART_TOL = 1e-9

#: mode indices printed in the reference frequency tables
TABLE_KS = (1, 2, 3, 4, 5, 10, 20, 40, 80)
#: grid sizes of the reference frequency tables
TABLE_NS = (20, 40, 80)
#: flow-map parameters of the first reference table, with display labels
TABLE3_ALPHAS = (("-1/12", -1.0 / 12.0), ("0", 0.0), ("1/6", 1.0 / 6.0))
#: effort-map parameters of the comparison table
TABLE4_ALPHA_PRIMES = (("1/12", 1.0 / 12.0), ("0", 0.0), ("-1/6", -1.0 / 6.0))


def exact_frequencies(ks) -> np.ndarray:
    """Closed-form angular frequencies (2k - 1) * pi / 2 of the unit interval
    with effort clamped at one end per field."""
    ks = np.asarray(ks, dtype=float)
    return (2.0 * ks - 1.0) * np.pi / 2.0


def spectrum(model: PHModel) -> np.ndarray:
    """Positive imaginary parts of eig(A), ascending.

    The models are conservative, so eigenvalues must sit on the imaginary
    axis; a real part beyond REAL_PART_TOL means the inputs do not form a
    structure-preserving model and is reported as a structure violation.
    """
    try:
        lam = np.linalg.eigvals(model.A().toarray())
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigenvalue computation failed: {exc}") from exc
    worst = float(np.abs(lam.real).max()) if lam.size else 0.0
    if worst > REAL_PART_TOL:
        raise StructureViolationError(
            f"spectrum strays off the imaginary axis: max |Re| = {worst:.3e}"
        )
    return np.sort(lam.imag[lam.imag > REAL_PART_TOL])


def build_1d_model(N: int, alpha: float, L: float = 1.0) -> PHModel:
    """Interval model with flow-map weight alpha: mesh, maps, Hodge, model."""
    mesh = build_interval_mesh(N, L)
    maps = build_1d_maps(N, alpha)
    pair = hodge_1d(N, alpha, L / N)
    meta = {"method": "mixed", "alpha": alpha, "N": N, "L": L}
    return assemble_model(maps, incidence(mesh), pair, meta=meta)


def _golo_maps(N: int, alpha_prime: float) -> MapSet:
    """Identity flow maps + bidiagonal effort interpolation.

    Power preservation holds exactly: writing the effort rows out, the
    interior rows of d_p^T P_ep and P_eq^T d_q cancel pairwise and the two
    boundary leftovers -e_0 and +e_N are absorbed by S_p = e_0^T and
    S_q_hat = e_N^T through the trace terms.
    """
    a = alpha_prime
    n_nodes = N + 1
    eye = sp.identity(N, format="csr")

    rows = np.repeat(np.arange(N), 2)
    cols = np.column_stack([np.arange(N), np.arange(1, n_nodes)]).ravel()
    P_ep = sp.csr_matrix(
        (np.tile([1.0 - a, a], N), (rows, cols)), shape=(N, n_nodes)
    )
    P_eq = sp.csr_matrix(
        (np.tile([a, 1.0 - a], N), (rows, cols)), shape=(N, n_nodes)
    )

    S_p = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, n_nodes))
    S_q_hat = sp.csr_matrix(([1.0], ([0], [N])), shape=(1, n_nodes))

    zero = sp.csr_matrix((N, N))
    return MapSet(
        T_q=_selector([0], n_nodes),
        T_p_hat=_selector([N], n_nodes, sign=-1.0),
        P_eq=P_eq,
        P_ep=P_ep,
        P_fp=eye,
        P_fq=eye,
        S_p=S_p,
        S_q_hat=S_q_hat,
        parts=PfqParts(eye, zero, zero.copy(), 0.0, 0.0),
        q_inputs=np.array([0]),
        p_inputs=np.array([N]),
        q_efforts=np.arange(N),
        p_efforts=np.arange(N),
        r=2,
    )


def build_golo_1d_model(N: int, alpha_prime: float, L: float = 1.0) -> PHModel:
    """Comparison model with effort-interpolation weight alpha'.

    alpha' is accepted on (-1, 1): values below 0 leave the convex range
    (the interpolation extrapolates) and are flagged as non_convex in the
    model metadata; |alpha'| >= 1 makes the stacked effort map singular or
    meaningless and is rejected.
    """
    if N < 2:
        raise InvalidArgumentError(f"need N >= 2 edges, got {N}")
    if not (-1.0 < alpha_prime < 1.0):
        raise InvalidArgumentError(
            f"alpha_prime must lie in (-1, 1), got {alpha_prime}"
        )
    mesh = build_interval_mesh(N, L)
    inc = incidence(mesh)
    maps = _golo_maps(N, alpha_prime)
    resid = power_residual(maps, inc)
    if resid > RESIDUAL_TOL:
        raise InternalConsistencyError(
            f"comparison maps violate power preservation: residual {resid:.3e}"
        )
    pair = hodge_golo_1d(N, L / N)
    meta = {
        "method": "golo",
        "alpha_prime": alpha_prime,
        "N": N,
        "L": L,
        "non_convex": bool(alpha_prime < 0.0),
    }
    return assemble_model(maps, inc, pair, meta=meta)


class EigTable(NamedTuple):
    """Frequency table: one row per mode index, one column per (method,
    parameter label, N) cell group; NaN where the model resolves fewer modes
    than requested (k > N)."""

    ks: tuple
    exact: np.ndarray
    columns: dict  # {(method, label, N): np.ndarray aligned with ks}


def eig_table(method: str, parameters, Ns, ks=TABLE_KS) -> EigTable:
    """Tabulate the k-th discrete frequencies over a parameter/size sweep.

    parameters is a sequence of (label, value) pairs; method selects the
    model family ("mixed" -> build_1d_model, "golo" -> build_golo_1d_model).
    """
    builders: dict[str, Callable[[int, float], PHModel]] = {
        "mixed": build_1d_model,
        "golo": build_golo_1d_model,
    }
    if method not in builders:
        raise InvalidArgumentError(f"unknown method {method!r}")
    columns = {}
    for label, value in parameters:
        for N in Ns:
            freqs = spectrum(builders[method](int(N), float(value)))
            columns[(method, label, int(N))] = np.array(
                [freqs[k - 1] if k <= freqs.size else np.nan for k in ks]
            )
    return EigTable(ks=tuple(ks), exact=exact_frequencies(ks), columns=columns)


def table3() -> EigTable:
    """Frequencies of the flow-map family at the reference parameters."""
    return eig_table("mixed", TABLE3_ALPHAS, TABLE_NS)


def table4() -> EigTable:
    """Frequencies of the effort-map comparison at the reference parameters."""
    return eig_table("golo", TABLE4_ALPHA_PRIMES, TABLE_NS)


_PARAM_NAMES = {"mixed": "alpha", "golo": "alpha_prime"}


def write_eig_csv(table: EigTable, path) -> "pathlib.Path":
    """CSV layout: k, exact, then one column per (parameter, N) cell group.

    Unresolved cells (NaN) are left empty.
    """
    import csv
    import pathlib

    path = pathlib.Path(path)
    header = ["k", "exact"] + [
        f"{_PARAM_NAMES.get(method, method)}={label} N={N}"
        for (method, label, N) in table.columns
    ]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, k in enumerate(table.ks):
            cells = [str(k), f"{table.exact[row]:.10g}"]
            for values in table.columns.values():
                v = values[row]
                cells.append("" if np.isnan(v) else f"{v:.10g}")
            writer.writerow(cells)
    return path


class ConvergenceStudy(NamedTuple):
    """Relative frequency errors and their log-log slopes over N.

    errors maps (alpha, k) to the per-N relative errors; slopes maps the
    same keys to the least-squares slope of log(error) against log(N)
    (order -s convergence shows up as slope -s).
    """

    alphas: tuple
    Ns: tuple
    ks: tuple
    errors: dict
    slopes: dict


def convergence_study(alphas, Ns, ks) -> ConvergenceStudy:
    """Sweep build_1d_model over alphas x Ns and fit convergence orders."""
    alphas, Ns, ks = tuple(alphas), tuple(int(N) for N in Ns), tuple(ks)
    if not alphas or not Ns or not ks:
        raise InvalidArgumentError("alphas, Ns and ks must be nonempty")
    if max(ks) > min(Ns):
        raise InvalidArgumentError(
            f"mode k = {max(ks)} unresolved on the coarsest grid N = {min(Ns)}"
        )
    exact = exact_frequencies(ks)
    errors: dict = {}
    for alpha in alphas:
        freqs = {N: spectrum(build_1d_model(N, alpha)) for N in Ns}
        for pos, k in enumerate(ks):
            errors[(alpha, k)] = np.array(
                [abs(freqs[N][k - 1] - exact[pos]) / exact[pos] for N in Ns]
            )
    log_N = np.log(np.asarray(Ns, dtype=float))
    slopes = {
        key: float(np.polyfit(log_N, np.log(errs), 1)[0])
        for key, errs in errors.items()
    }
    return ConvergenceStudy(alphas, Ns, ks, errors, slopes)
