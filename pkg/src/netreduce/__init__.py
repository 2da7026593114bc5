"""Zonal reduction of DC transmission networks via PTDFs."""

from .b_fit import (
    Anchor,
    FitConfig,
    SusceptanceSolution,
    anchor,
    eigen_b_oh,
    ls_b_shi,
    opt_b_frobenius,
    physical_b,
    rectify_signs,
    reduced_network,
    reduced_ptdf,
)
from .case_io import (
    Network,
    ZonalAssignment,
    parse_case,
    parse_zones,
    read_case,
    read_zones,
    write_reduced_case,
)
from .dc_network import PtdfMatrix, branch_susceptances, full_ptdf, incidence, ptdf_from_susceptances
from .pipeline import EVAL_METHODS, Reduction, reduce_network
from .scenario_eval import ScenarioSpec, bus_reduction_ratio, evaluate, nrmse, sample_injections
from .zonal_reduction import (
    ReductionMaps,
    build_maps,
    reduced_ptdf_dependent,
    reduced_ptdf_independent,
)

__version__ = "0.1.0"
