"""Scenario-based validation of reduced models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .b_fit import FitConfig
from .case_io import Network, ZonalAssignment
from .dc_network import PtdfMatrix
from .pipeline import EVAL_METHODS, Reduction, reduce_network
from .zonal_reduction import ReductionMaps

__all__ = [
    "QUANTILES",
    "DegenerateScenario",
    "ScenarioSpec",
    "ScenarioSet",
    "MethodStats",
    "GridInfo",
    "ErrorReport",
    "sample_injections",
    "nrmse",
    "nrmse_batch",
    "evaluate",
    "bus_reduction_ratio",
]

QUANTILES = (0.05, 0.25, 0.50, 0.75, 0.95)


class DegenerateScenario(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """Normal injection distribution per non-slack bus.

    ``sigma_i = max(relative_sigma * |mu_i|, absolute_sigma_floor)`` with
    ``mu_i`` the base-case injection (``mean="base"``) or zero
    (``mean="zero"``). The zero-mean default gives i.i.d. draws.
    """

    mean: str = "zero"
    relative_sigma: float = 1.0
    absolute_sigma_floor: float = 1.0  # MW

    def __post_init__(self):
        if self.mean not in ("base", "zero"):
            raise ValueError(f"mean must be 'base' or 'zero', got {self.mean!r}")
        if self.relative_sigma < 0 or self.absolute_sigma_floor < 0:
            raise ValueError("sigma parameters must be non-negative")


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    injections: np.ndarray  # (n_b - 1, n) MW, non-slack buses
    seed: int
    spec: ScenarioSpec

    @property
    def n(self) -> int:
        return int(self.injections.shape[1])


def sample_injections(net: Network, n: int, seed: int, spec: ScenarioSpec | None = None) -> ScenarioSet:
    """Draw ``n`` injection scenarios; identical for identical seed and spec."""
    if n < 1:
        raise ValueError("need at least one scenario")
    spec = spec or ScenarioSpec()
    base = net.p_inj[net.non_slack].astype(float)
    mu = base if spec.mean == "base" else np.zeros_like(base)
    sigma = np.maximum(spec.relative_sigma * np.abs(mu), spec.absolute_sigma_floor)
    z = np.random.default_rng(seed).standard_normal((base.size, n))
    return ScenarioSet(injections=mu[:, None] + sigma[:, None] * z, seed=seed, spec=spec)


def _reference_flows(H_f: PtdfMatrix, maps: ReductionMaps, P: np.ndarray) -> np.ndarray:
    return (maps.T_f @ H_f.values) @ P


def nrmse_batch(H_f: PtdfMatrix, maps: ReductionMaps, H_candidate, P: np.ndarray,
                ref: np.ndarray | None = None) -> np.ndarray:
    """NRMSE per scenario column of ``P``; NaN where the reference flows vanish."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if ref is None:
        ref = _reference_flows(H_f, maps, P)
    Hc = H_candidate.values if isinstance(H_candidate, PtdfMatrix) else np.asarray(H_candidate)
    approx = Hc @ (maps.T_bz @ P)
    rmse = np.sqrt(np.mean((ref - approx) ** 2, axis=0))
    denom = np.mean(np.abs(ref), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, rmse / np.where(denom > 0, denom, 1.0), np.nan)


def nrmse(H_f: PtdfMatrix, maps: ReductionMaps, H_candidate, p_inj: np.ndarray) -> float:
    """Interzonal flow RMSE relative to the mean absolute aggregated flow."""
    ref = _reference_flows(H_f, maps, np.asarray(p_inj, dtype=float)[:, None])
    if not np.mean(np.abs(ref)) > 0:
        raise DegenerateScenario("degenerate scenario: aggregated interzonal flows are all zero")
    return float(nrmse_batch(H_f, maps, H_candidate, p_inj, ref)[0])


def bus_reduction_ratio(net: Network, za: ZonalAssignment) -> float:
    return net.n_b / za.n_z


@dataclass(eq=False)
class MethodStats:
    method: str
    values: np.ndarray  # per-scenario NRMSE, NaN for failures
    mean: float
    quantiles: dict[float, float]
    failures: int
    note: str = ""


@dataclass(frozen=True)
class GridInfo:
    name: str
    n_b: int
    n_z: int
    n_l: int
    n_lr: int
    bus_reduction_ratio: float


@dataclass(eq=False)
class ErrorReport:
    grid: GridInfo
    methods: dict[str, MethodStats] = field(default_factory=dict)
    n_scenarios: int = 0
    seed: int = 0
    spec: ScenarioSpec = field(default_factory=ScenarioSpec)

    def means(self) -> dict[str, float]:
        return {k: s.mean for k, s in self.methods.items()}


def _stats(method: str, values: np.ndarray, note: str = "") -> MethodStats:
    ok = values[np.isfinite(values)]
    failures = int(values.size - ok.size)
    if ok.size:
        mean = math.fsum(ok.tolist()) / ok.size
        qs = np.quantile(ok, QUANTILES)
        quantiles = {q: float(v) for q, v in zip(QUANTILES, qs)}
    else:
        mean = float("nan")
        quantiles = {q: float("nan") for q in QUANTILES}
    return MethodStats(method=method, values=values, mean=mean, quantiles=quantiles,
                       failures=failures, note=note)


def evaluate(
    net: Network,
    za: ZonalAssignment,
    methods: Sequence[str],
    scenarios: ScenarioSet,
    cfg: FitConfig | None = None,
    reduction: Reduction | None = None,
) -> ErrorReport:
    """Per-scenario NRMSE of each reduced model.

    Reduced models are built once (the injection-dependent PTDF and the
    least-squares fit at the base-case injections) and held fixed across
    scenarios. A method that cannot be built counts every scenario as a
    failure; a scenario with zero aggregated flow fails for all methods.
    """
    red = reduction or reduce_network(net, za, cfg, methods)
    live = red.net
    info = GridInfo(name=live.name, n_b=live.n_b, n_z=za.n_z, n_l=live.n_l,
                    n_lr=red.maps.n_lr, bus_reduction_ratio=bus_reduction_ratio(live, za))
    report = ErrorReport(grid=info, n_scenarios=scenarios.n, seed=scenarios.seed, spec=scenarios.spec)
    P = scenarios.injections
    ref = _reference_flows(red.H_f, red.maps, P)
    for m in methods:
        if m not in EVAL_METHODS:
            raise ValueError(f"unknown method {m!r}; valid: {', '.join(EVAL_METHODS)}")
        H = red.ptdf(m)
        if H is None:
            report.methods[m] = _stats(m, np.full(P.shape[1], np.nan),
                                       red.errors.get(m, "reduced model unavailable"))
            continue
        report.methods[m] = _stats(m, nrmse_batch(red.H_f, red.maps, H, P, ref))
    return report
