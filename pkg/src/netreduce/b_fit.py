"""Interzonal susceptance fitting.

Four ways to turn a reduced PTDF into branch susceptances of a sparse zonal
network:

* ``physical``      -- sum of original susceptances across each zone cut
* ``ls_shi``        -- anchored linear least squares on the realizability
                       equations
* ``eigen_oh``      -- nullspace of a projection built from the unit-eigenvalue
                       eigenvectors of ``H C^T``
* ``opt_frobenius`` -- anchored nonlinear fit of the PTDF in Frobenius norm
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg as la

from .case_io import Network, ZonalAssignment
from .dc_network import PtdfMatrix, SingularNetworkError, ptdf_from_susceptances
from .optimize import lbfgs
from .zonal_reduction import ReductionMaps, connection_blocks

__all__ = [
    "METHODS",
    "Anchor",
    "FitConfig",
    "FitError",
    "SusceptanceSolution",
    "physical_b",
    "anchor",
    "theta_matrix",
    "ls_b_shi",
    "eigen_b_oh",
    "frobenius_objective",
    "frobenius_gradient",
    "opt_b_frobenius",
    "rectify_signs",
    "reduced_ptdf",
    "reduced_network",
]

METHODS = ("physical", "ls_shi", "eigen_oh", "opt_frobenius")


class FitError(ValueError):
    pass


class Anchor(NamedTuple):
    index: int
    value: float


@dataclass(frozen=True)
class FitConfig:
    """Solver settings shared by the fitting methods."""

    M: float = 1.0
    max_iterations: int = 500
    gradient_mode: str = "analytic"
    convergence_tol: float = 1e-8
    fd_step: float = 1e-6
    eigen_tol: float = 1e-6
    nullspace_tol: float = 1e-6
    anchor_weight: float = 1.0
    rescale_oh_to_anchor: bool = False
    lower_bound: float = 1e-9
    memory: int = 10
    rank_tol: float = 1e-10

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("M must be positive")
        for name in ("convergence_tol", "fd_step", "eigen_tol", "nullspace_tol", "anchor_weight", "rank_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.gradient_mode not in ("analytic", "finite_difference"):
            raise ValueError(f"unknown gradient_mode {self.gradient_mode!r}")


@dataclass(frozen=True, eq=False)
class SusceptanceSolution:
    """Fitted interzonal susceptances (p.u.) tagged with their method."""

    b: np.ndarray
    method: str
    anchor_index: int
    anchor_value: float
    objective_value: float
    rectified: tuple[int, ...] = ()
    status: str = "ok"
    warnings: tuple[str, ...] = ()
    iterations: int = 0
    objective_unrectified: float | None = None

    @property
    def anchor_residual(self) -> float:
        return float(self.b[self.anchor_index] - self.anchor_value)


# ---------------------------------------------------------------------------
# physical susceptances and anchor
# ---------------------------------------------------------------------------


def physical_b(b_orig: np.ndarray, maps: ReductionMaps, H_red: PtdfMatrix | None = None) -> SusceptanceSolution:
    """Sum of original branch susceptances crossing each zone pair."""
    b = maps.C_phys @ np.asarray(b_orig, dtype=float)
    m, bm = anchor(b)
    obj = frobenius_objective(b, H_red, maps.C_red) if H_red is not None else float("nan")
    return SusceptanceSolution(b=b, method="physical", anchor_index=m, anchor_value=bm,
                               objective_value=obj)


def anchor(b_phys: np.ndarray) -> Anchor:
    """Strongest physical interconnection; first index wins ties."""
    b_phys = np.asarray(b_phys, dtype=float)
    if b_phys.size == 0:
        raise FitError("no interzonal connections to anchor")
    m = int(np.argmax(b_phys))
    return Anchor(m, float(b_phys[m]))


# ---------------------------------------------------------------------------
# Frobenius objective
# ---------------------------------------------------------------------------


def _values(H) -> np.ndarray:
    return H.values if isinstance(H, PtdfMatrix) else np.asarray(H, dtype=float)


def _induced(b: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Induced PTDF ``G`` and ``U = K^-1 C^T`` for ``K = C^T diag(b) C``."""
    K = C.T @ (b[:, None] * C)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(K)
    d = np.abs(np.diag(lu))
    if d.size and d.min() <= 1e-13 * d.max():
        raise SingularNetworkError("reduced Laplacian is singular for these susceptances")
    U = la.lu_solve((lu, piv), C.T)
    return b[:, None] * U.T, U


def frobenius_objective(b: np.ndarray, H_red, C: np.ndarray) -> float:
    """Squared Frobenius distance between ``H_red`` and the PTDF induced by ``b``."""
    C = np.asarray(C, dtype=float)
    G, _ = _induced(np.asarray(b, dtype=float), C)
    R = G - _values(H_red)
    return float(np.sum(R * R))


def frobenius_gradient(b: np.ndarray, H_red, C: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective and analytic gradient.

    With ``G = diag(b) C K^-1`` and residual ``R = G - H``, perturbing ``b_k``
    gives ``dG = (e_k - G c_k) u_k^T`` where ``u_k = K^-1 c_k``, hence
    ``df/db_k = 2 [(R U)_kk - (G C^T)[:, k] . (R U)[:, k]]``.
    """
    C = np.asarray(C, dtype=float)
    b = np.asarray(b, dtype=float)
    G, U = _induced(b, C)
    R = G - _values(H_red)
    RU = R @ U
    P = G @ C.T
    grad = 2.0 * (np.diag(RU) - np.sum(P * RU, axis=0))
    return float(np.sum(R * R)), grad


def _fd_gradient(b: np.ndarray, H_red, C: np.ndarray, h: float) -> tuple[float, np.ndarray]:
    f0 = frobenius_objective(b, H_red, C)
    g = np.empty_like(b)
    for k in range(b.size):
        step = h * max(1.0, abs(b[k]))
        bp, bm = b.copy(), b.copy()
        bp[k] += step
        bm[k] -= step
        g[k] = (frobenius_objective(bp, H_red, C) - frobenius_objective(bm, H_red, C)) / (2 * step)
    return f0, g


# ---------------------------------------------------------------------------
# least squares (Shi)
# ---------------------------------------------------------------------------


def theta_matrix(H_red, C: np.ndarray) -> np.ndarray:
    """Stack ``(H C^T - I) diag(c_i)`` over the columns ``c_i`` of ``C``.

    Any ``b`` whose induced PTDF equals ``H`` satisfies ``theta @ b = 0``.
    """
    H = _values(H_red)
    C = np.asarray(C, dtype=float)
    A = H @ C.T - np.eye(C.shape[0])
    return np.vstack([A * C[:, i][None, :] for i in range(C.shape[1])])


def ls_b_shi(
    H_red,
    maps: ReductionMaps,
    anc: Anchor,
    cfg: FitConfig | None = None,
    b_ref: np.ndarray | None = None,
) -> SusceptanceSolution:
    """Anchored least-squares fit on ``[a^T; theta] b = [b_m; 0]``.

    Solved by complete orthogonal factorization. A rank-deficient system is
    flagged ``rank_deficient``; its minimum-norm solution is returned, or with
    ``b_ref`` the least-squares solution closest to ``b_ref`` (undetermined
    components such as bridge connections then keep their reference value
    instead of collapsing to zero).
    """
    cfg = cfg or FitConfig()
    theta = theta_matrix(H_red, maps.C_red)
    n = maps.n_lr
    a = np.zeros(n)
    a[anc.index] = 1.0
    A = np.vstack([cfg.anchor_weight * a, theta])
    rhs = np.zeros(A.shape[0])
    rhs[0] = cfg.anchor_weight * anc.value
    b, _, rank, _ = la.lstsq(A, rhs, cond=cfg.rank_tol, lapack_driver="gelsy")
    status, warns = "ok", ()
    if rank < n:
        status = "rank_deficient"
        if b_ref is None:
            warns = (f"stacked system has rank {rank} < {n}; minimum-norm solution returned",)
        else:
            b_ref = np.asarray(b_ref, dtype=float)
            delta, *_ = la.lstsq(A, rhs - A @ b_ref, cond=cfg.rank_tol, lapack_driver="gelsy")
            b = b_ref + delta
            warns = (f"stacked system has rank {rank} < {n}; least-squares solution nearest the reference returned",)
    return SusceptanceSolution(
        b=b, method="ls_shi", anchor_index=anc.index, anchor_value=anc.value,
        objective_value=_safe_objective(b, H_red, maps.C_red), status=status, warnings=warns,
    )


def _safe_objective(b, H_red, C) -> float:
    try:
        return frobenius_objective(b, H_red, C)
    except SingularNetworkError:
        return float("nan")


# ---------------------------------------------------------------------------
# eigendecomposition (Oh)
# ---------------------------------------------------------------------------


def eigen_b_oh(
    H_red,
    maps: ReductionMaps,
    cfg: FitConfig | None = None,
    anc: Anchor | None = None,
    b_ref: np.ndarray | None = None,
) -> SusceptanceSolution:
    """Susceptances from the unit-eigenvalue eigenspace of ``H C^T``.

    For a realizable ``H`` the unit eigenvectors span ``diag(b) C``; with
    ``Q2`` an orthonormal basis of their complement, ``b`` minimizes
    ``||Omega b||`` where ``Omega`` stacks ``Q2^T diag(c_i)``. The solution
    is the smallest right singular vector scaled to norm ``M`` and oriented
    so the anchor entry (or the largest entry) is positive.

    If the zonal graph splits into several biconnected blocks (articulation
    zones or bridges), each block has its own free scale and the global
    singular vector is arbitrary. The direction is then fitted block by
    block, each block scaled to ``b_ref`` in least squares (unit norm without
    ``b_ref``), and the status is ``blockwise``.
    """
    cfg = cfg or FitConfig()
    C = maps.C_red.astype(float)
    P = _values(H_red) @ C.T
    lam, V = np.linalg.eig(P)
    unit = np.abs(lam - 1.0) < cfg.eigen_tol
    if not unit.any():
        raise FitError("no unit eigenvalue in H C^T; cannot build the eigenvector basis")
    # a repeated unit eigenvalue may come back with complex eigenvectors;
    # their real and imaginary parts span the same real eigenspace
    E = np.hstack([V[:, unit].real, V[:, unit].imag])
    Q, sv, _ = np.linalg.svd(E, full_matrices=True)
    rank = int(np.sum(sv > cfg.eigen_tol * max(1.0, sv[0])))
    Q2 = Q[:, rank:]

    warns: list[str] = []
    status = "ok"
    n = maps.n_lr
    blocks = connection_blocks(maps)
    if Q2.shape[1] == 0:
        status = "undetermined"
        warns.append("unit eigenvectors span the whole space; every b gives the same PTDF")
        v = np.ones(n) if b_ref is None else np.asarray(b_ref, dtype=float).copy()
    else:
        omega = np.vstack([Q2.T * C[:, i][None, :] for i in range(C.shape[1])])
        top = np.linalg.norm(omega, 2)
        v = np.zeros(n)
        worst = 0.0
        for blk in blocks:
            if blk.size == 1:
                vb = np.ones(1)
            else:
                _, svb, vtb = np.linalg.svd(omega[:, blk])
                vb = vtb[-1]
                worst = max(worst, svb[-1] if svb.size >= blk.size else 0.0)
            if vb[np.argmax(np.abs(vb))] < 0:
                vb = -vb
            if b_ref is not None and len(blocks) > 1:
                ref_b = np.asarray(b_ref, dtype=float)[blk]
                vb = vb * (vb @ ref_b) / (vb @ vb)
            v[blk] = vb
        if worst > cfg.nullspace_tol * max(top, 1e-300):
            status = "approximate_nullspace"
            warns.append(f"Omega has full column rank (smallest singular value {worst:.3g})")
        if len(blocks) > 1:
            status = "blockwise"
            warns.append(f"zonal graph has {len(blocks)} biconnected blocks; direction fitted per block")

    b = cfg.M * v / np.linalg.norm(v)
    ref = anc.index if anc is not None else int(np.argmax(np.abs(b)))
    if b[ref] < 0:
        b = -b
    m = anc.index if anc is not None else ref
    bm = anc.value if anc is not None else float(b[ref])
    if cfg.rescale_oh_to_anchor and anc is not None:
        b = b * (anc.value / b[anc.index])
    return SusceptanceSolution(
        b=b, method="eigen_oh", anchor_index=m, anchor_value=bm,
        objective_value=_safe_objective(b, H_red, C), status=status, warnings=tuple(warns),
    )


# ---------------------------------------------------------------------------
# nonlinear optimization
# ---------------------------------------------------------------------------


def opt_b_frobenius(
    H_red,
    maps: ReductionMaps,
    anc: Anchor,
    b_init: np.ndarray | None = None,
    cfg: FitConfig | None = None,
) -> SusceptanceSolution:
    """Minimize the Frobenius PTDF mismatch with ``b[m]`` pinned to ``b_m``.

    The pinned coordinate is eliminated and the rest is solved by L-BFGS.
    ``b_init`` should be the physical susceptances; without it every entry
    starts at the anchor value.
    """
    cfg = cfg or FitConfig()
    C = maps.C_red.astype(float)
    n = maps.n_lr
    b0 = np.full(n, anc.value) if b_init is None else np.array(b_init, dtype=float)
    b0[anc.index] = anc.value
    free = np.array([k for k in range(n) if k != anc.index], dtype=int)

    def assemble(z):
        b = np.empty(n)
        b[anc.index] = anc.value
        b[free] = z
        return b

    def fun_grad(z):
        b = assemble(z)
        if cfg.gradient_mode == "analytic":
            f, g = frobenius_gradient(b, H_red, C)
        else:
            f, g = _fd_gradient(b, H_red, C, cfg.fd_step)
        return f, g[free]

    if free.size == 0:
        f = frobenius_objective(b0, H_red, C)
        return SusceptanceSolution(b=b0, method="opt_frobenius", anchor_index=anc.index,
                                   anchor_value=anc.value, objective_value=f)

    res = lbfgs(fun_grad, b0[free], lower=cfg.lower_bound, memory=cfg.memory,
                max_iter=cfg.max_iterations, gtol=cfg.convergence_tol, diag_scaling=True)
    b = assemble(res.x)
    status = "ok" if res.converged else "not_converged"
    warns = () if res.converged else (f"{res.message}; gradient norm {res.grad_norm:.3g}",)
    return SusceptanceSolution(
        b=b, method="opt_frobenius", anchor_index=anc.index, anchor_value=anc.value,
        objective_value=res.fun, status=status, warnings=warns, iterations=res.n_iter,
    )


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------


def rectify_signs(sol: SusceptanceSolution, H_red=None, C: np.ndarray | None = None) -> SusceptanceSolution:
    """Flip negative (capacitive) susceptances to positive.

    Per-entry flips change the induced PTDF, so when ``H_red`` and ``C`` are
    given the objective is re-evaluated; the previous value is kept in
    ``objective_unrectified``.
    """
    b = np.asarray(sol.b, dtype=float)
    zero = np.flatnonzero(b == 0)
    if zero.size:
        raise FitError(f"degenerate zero susceptance at connection {int(zero[0])}")
    neg = tuple(int(k) for k in np.flatnonzero(b < 0))
    if not neg:
        return sol
    fixed = np.abs(b)
    obj = sol.objective_value
    if H_red is not None and C is not None:
        obj = _safe_objective(fixed, H_red, np.asarray(C, dtype=float))
    return replace(sol, b=fixed, rectified=tuple(sorted(set(sol.rectified) | set(neg))),
                   objective_value=obj, objective_unrectified=sol.objective_value)


def reduced_ptdf(sol_or_b, maps: ReductionMaps) -> PtdfMatrix:
    """PTDF of the zonal network defined by fitted susceptances."""
    b = sol_or_b.b if isinstance(sol_or_b, SusceptanceSolution) else sol_or_b
    return ptdf_from_susceptances(b, maps.C_red, row_labels=maps.connection_labels,
                                  col_labels=maps.zones, slack=maps.slack_zone)


def reduced_network(net: Network, za: ZonalAssignment, maps: ReductionMaps,
                    sol: SusceptanceSolution) -> Network:
    """Zonal equivalent: one bus per zone, one branch per connection.

    Bus ids are zone ids and each zone carries its summed injection. Negative
    susceptances are rectified first and recorded in the header comments.
    """
    if np.any(np.asarray(sol.b) < 0):
        sol = rectify_signs(sol)
    zones = np.array(za.zones, dtype=int)
    p = np.array([sum(net.p_inj[net.bus_index[b]] for b in za.buses_in(int(z))) for z in zones])
    comments = [
        f"Zonal equivalent of {net.name}: {net.n_b} buses in {za.n_z} zones.",
        f"Susceptance method: {sol.method}; anchor connection "
        f"{maps.connection_labels[sol.anchor_index]} = {sol.anchor_value!r} p.u.",
    ]
    for k in sol.rectified:
        comments.append(
            f"Connection {maps.connection_labels[k]}: fitted susceptance was negative "
            f"(capacitive), sign flipped to positive reactance."
        )
    conns = np.array(maps.connections, dtype=int)
    return Network(
        bus_ids=zones,
        p_inj=p.astype(float),
        from_bus=conns[:, 0].copy(),
        to_bus=conns[:, 1].copy(),
        x=1.0 / np.asarray(sol.b, dtype=float),
        status=np.ones(len(conns), dtype=int),
        slack_bus=za.slack_zone,
        base_mva=net.base_mva,
        name=f"{net.name}_reduced",
        comments=tuple(comments),
    )
