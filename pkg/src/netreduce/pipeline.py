"""End-to-end reduction: full PTDF, reduced PTDFs, fitted susceptances."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .b_fit import (
    Anchor,
    FitConfig,
    FitError,
    SusceptanceSolution,
    eigen_b_oh,
    frobenius_objective,
    ls_b_shi,
    opt_b_frobenius,
    physical_b,
    reduced_ptdf,
)
from .case_io import Network, ZonalAssignment
from .dc_network import PtdfMatrix, SingularNetworkError, branch_susceptances, full_ptdf
from .zonal_reduction import (
    ReductionMaps,
    ZeroZonalInjection,
    build_maps,
    reduced_ptdf_dependent,
    reduced_ptdf_independent,
)

__all__ = ["EVAL_METHODS", "FIT_METHODS", "Reduction", "reduce_network"]

# evaluation ids -> fit method that produces the susceptances
FIT_METHODS = {"B_phys": "physical", "B_oh": "eigen_oh", "B_shi": "ls_shi", "B_opt": "opt_frobenius"}
FIT_METHODS_INV = {v: k for k, v in FIT_METHODS.items()}
EVAL_METHODS = ("H_ind", "H_dep", "B_phys", "B_oh", "B_shi", "B_opt")


@dataclass(eq=False)
class Reduction:
    net: Network
    za: ZonalAssignment
    maps: ReductionMaps
    H_f: PtdfMatrix
    H_ind: PtdfMatrix
    H_dep: PtdfMatrix | None
    b_orig: np.ndarray
    anchor: Anchor
    solutions: dict[str, SusceptanceSolution] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    fit_seconds: dict[str, float] = field(default_factory=dict)

    def ptdf(self, method: str) -> PtdfMatrix | None:
        """Reduced PTDF used for evaluation id ``method`` (None if unavailable)."""
        if method == "H_ind":
            return self.H_ind
        if method == "H_dep":
            return self.H_dep
        sol = self.solutions.get(FIT_METHODS[method])
        if sol is None:
            return None
        try:
            return reduced_ptdf(sol, self.maps)
        except SingularNetworkError as exc:
            self.errors.setdefault(method, f"{sol.method} susceptances give no valid zonal network ({exc})")
            return None


def reduce_network(
    net: Network,
    za: ZonalAssignment,
    cfg: FitConfig | None = None,
    methods: Sequence[str] = EVAL_METHODS,
    connections: Sequence[tuple[int, int]] | None = None,
) -> Reduction:
    """Run both reduction stages.

    The injection-dependent PTDF (and the least-squares fit that uses it)
    is taken at the network's base-case injections. Each fit is timed
    separately; stage 1 is not included in those timings.
    """
    cfg = cfg or FitConfig()
    unknown = [m for m in methods if m not in EVAL_METHODS]
    if unknown:
        raise ValueError(f"unknown method(s) {unknown}; valid: {', '.join(EVAL_METHODS)}")
    live = net.in_service()
    maps = build_maps(live, za, connections)
    H_f = full_ptdf(live)
    H_ind = reduced_ptdf_independent(H_f, maps)
    errors: dict[str, str] = {}
    try:
        H_dep = reduced_ptdf_dependent(H_f, maps, live.p_inj[live.non_slack])
    except ZeroZonalInjection as exc:
        H_dep = None
        errors["H_dep"] = str(exc)

    b_orig = branch_susceptances(live)
    t0 = time.perf_counter()
    phys = physical_b(b_orig, maps, H_ind)
    t_phys = time.perf_counter() - t0
    anc = Anchor(phys.anchor_index, phys.anchor_value)
    red = Reduction(net=live, za=za, maps=maps, H_f=H_f, H_ind=H_ind, H_dep=H_dep,
                    b_orig=b_orig, anchor=anc, errors=errors)

    wanted = {FIT_METHODS[m] for m in methods if m in FIT_METHODS}
    wanted.add("physical")  # anchor and optimizer start point
    red.solutions["physical"] = phys
    red.fit_seconds["physical"] = t_phys

    def timed(name, fn):
        t = time.perf_counter()
        try:
            red.solutions[name] = fn()
        except (FitError, SingularNetworkError, np.linalg.LinAlgError) as exc:
            errors[FIT_METHODS_INV[name]] = str(exc)
        red.fit_seconds[name] = time.perf_counter() - t

    if "ls_shi" in wanted:
        if H_dep is None:
            errors["B_shi"] = "least-squares fit needs the injection-dependent PTDF: " + errors["H_dep"]
        else:
            timed("ls_shi", lambda: ls_b_shi(H_dep, maps, anc, cfg, b_ref=phys.b))
    if "eigen_oh" in wanted:
        timed("eigen_oh", lambda: eigen_b_oh(H_ind, maps, cfg, anc, b_ref=phys.b))
    if "opt_frobenius" in wanted:
        timed("opt_frobenius", lambda: opt_b_frobenius(H_ind, maps, anc, phys.b, cfg))
    return red


def objective_table(red: Reduction) -> dict[str, float]:
    """Frobenius mismatch of every fitted solution against the independent PTDF."""
    out = {}
    for name, sol in red.solutions.items():
        try:
            out[name] = frobenius_objective(sol.b, red.H_ind, red.maps.C_red)
        except SingularNetworkError:
            out[name] = float("nan")
    return out
