"""DC network matrices and PTDF computation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .case_io import CaseFormatError, Network

__all__ = [
    "PtdfMatrix",
    "SingularNetworkError",
    "branch_susceptances",
    "incidence",
    "full_ptdf",
    "ptdf_from_susceptances",
    "dc_flows",
]

# pivots below this fraction of the largest one mark a singular Laplacian
_PIVOT_RTOL = 1e-13


class SingularNetworkError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class PtdfMatrix:
    """Dense PTDF with row/column labels.

    Rows are branches (or interzonal connections), columns the non-slack
    buses (or zones). ``slack`` names the deleted bus or zone.
    """

    values: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[int, ...]
    slack: int

    def __post_init__(self):
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"PTDF shape {self.values.shape} does not match labels "
                f"({len(self.row_labels)}, {len(self.col_labels)})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("PTDF has non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __matmul__(self, other):
        return self.values @ np.asarray(other)


def branch_susceptances(net: Network) -> np.ndarray:
    """``b_k = 1/x_k`` for every in-service branch, in branch order."""
    live = net.in_service()
    zero = np.flatnonzero(live.x == 0)
    if zero.size:
        k = int(zero[0])
        raise CaseFormatError(
            f"branch {k + 1} ({live.from_bus[k]}-{live.to_bus[k]}) has zero reactance"
        )
    return 1.0 / live.x


def incidence(net: Network) -> np.ndarray:
    """Branch-bus incidence of the in-service branches, slack column removed.

    Entry ``+1`` at the from-bus, ``-1`` at the to-bus. Columns follow
    ``net.non_slack``.
    """
    live = net.in_service()
    idx = net.bus_index
    full = np.zeros((live.n_l, net.n_b), dtype=int)
    rows = np.arange(live.n_l)
    full[rows, [idx[int(b)] for b in live.from_bus]] = 1
    full[rows, [idx[int(b)] for b in live.to_bus]] = -1
    return full[:, net.non_slack]


def _check_pivots(diag: np.ndarray, msg: str) -> None:
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) <= _PIVOT_RTOL * scale:
        raise SingularNetworkError(msg)


def _solve_laplacian(lap, rhs: np.ndarray, msg: str) -> np.ndarray:
    """Solve ``lap @ X = rhs`` with one factorization shared by all columns."""
    if sp.issparse(lap):
        try:
            lu = spla.splu(sp.csc_matrix(lap))
        except RuntimeError as exc:  # exactly singular
            raise SingularNetworkError(msg) from exc
        _check_pivots(lu.U.diagonal(), msg)
        return lu.solve(np.asarray(rhs, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(lap, check_finite=True)
    _check_pivots(np.diag(lu), msg)
    return la.lu_solve((lu, piv), rhs)


def full_ptdf(net: Network) -> PtdfMatrix:
    """PTDF of the full network, ``B_br @ inv(B_bus)`` without forming the inverse."""
    b = branch_susceptances(net)
    C = sp.csr_matrix(incidence(net).astype(float))
    B_br = sp.diags(b) @ C
    B_bus = (C.T @ B_br).tocsc()
    # B_bus is symmetric: H^T = inv(B_bus) @ B_br^T
    Ht = _solve_laplacian(
        B_bus, B_br.T.toarray(), "network disconnected after slack adjustment"
    )
    live = net.in_service()
    return PtdfMatrix(
        values=np.ascontiguousarray(Ht.T),
        row_labels=tuple(live.branch_labels()),
        col_labels=tuple(int(v) for v in net.bus_ids[net.non_slack]),
        slack=net.slack_bus,
    )


def ptdf_from_susceptances(
    b: np.ndarray,
    C: np.ndarray,
    row_labels=None,
    col_labels=None,
    slack: int = 0,
) -> PtdfMatrix:
    """``diag(b) C inv(C^T diag(b) C)`` for any susceptance vector ``b``.

    Used both for the original grid and for reduced zonal networks.
    """
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    if b.shape != (C.shape[0],):
        raise ValueError(f"susceptance vector of length {b.size} for {C.shape[0]} branches")
    B_br = b[:, None] * C
    K = C.T @ B_br
    msg = "reduced/original graph disconnected or susceptances degenerate"
    if K.shape[0] > 400:
        Ht = _solve_laplacian(sp.csc_matrix(K), B_br.T, msg)
    else:
        Ht = _solve_laplacian(K, B_br.T, msg)
    rows = row_labels if row_labels is not None else tuple(str(i) for i in range(C.shape[0]))
    cols = col_labels if col_labels is not None else tuple(range(C.shape[1]))
    return PtdfMatrix(values=np.ascontiguousarray(Ht.T), row_labels=tuple(rows),
                      col_labels=tuple(cols), slack=slack)


def dc_flows(net: Network, p_inj: np.ndarray) -> np.ndarray:
    """Branch flows from an angle-based DC power flow.

    ``p_inj`` holds the non-slack injections (MW), ordered like
    ``net.non_slack``; the slack absorbs the balance.
    """
    b = branch_susceptances(net)
    C = incidence(net).astype(float)
    B_bus = C.T @ (b[:, None] * C)
    theta = la.solve(B_bus, np.asarray(p_inj, dtype=float), assume_a="pos")
    return b * (C @ theta)
