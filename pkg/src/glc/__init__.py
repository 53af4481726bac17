"""Discrete factor-graph inference with generalized loop correction."""

from .factor_graph import Factor, FactorGraph, clamp, product_eval, remove_factors
from .tables import DistTable
from .exact import ExactResult, brute_force_joint, exact_singles, variable_elimination
from .lbp import LBPOptions, LBPResult, bethe_log_z, run_lbp
from .cavity import (CavityRegion, CavityTable, cavity_estimate_clamp,
                     cavity_uniform, make_region)
from .regions import (RegionCollection, build_collection, clusters_factor_domains,
                      clusters_loops, partition_single_variables)
from .engine import (GLCOptions, GLCRunResult, GLCState, build_perimeter_region_graph,
                     consistency_residual, run_glc, single_marginals)
from .gbp import CvmConstruction, GbpMessages, build_cvm, gbp_fixed_point, verify_theorem1

__all__ = [
    "Factor", "FactorGraph", "clamp", "product_eval", "remove_factors",
    "DistTable",
    "ExactResult", "brute_force_joint", "exact_singles", "variable_elimination",
    "LBPOptions", "LBPResult", "bethe_log_z", "run_lbp",
    "CavityRegion", "CavityTable", "cavity_estimate_clamp", "cavity_uniform",
    "make_region",
    "RegionCollection", "build_collection", "clusters_factor_domains",
    "clusters_loops", "partition_single_variables",
    "GLCOptions", "GLCRunResult", "GLCState", "build_perimeter_region_graph",
    "consistency_residual", "run_glc", "single_marginals",
    "CvmConstruction", "GbpMessages", "build_cvm", "gbp_fixed_point",
    "verify_theorem1",
]
