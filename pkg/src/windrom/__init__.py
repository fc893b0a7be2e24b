"""Reduced-order urban wind and contaminant transport workbench."""

__version__ = "0.1.0"

from .mesh import (
    BoundaryTag,
    Mesh,
    TaylorHoodSpace,
    build_taylor_hood,
    load_mesh,
    refine_mesh,
    save_mesh,
    synth_urban_mesh,
    unit_square_mesh,
)
from .ins import (
    AssembledSystem,
    FlowSolution,
    InsProblem,
    NewtonOptions,
    ParameterPoint,
    assemble_ins,
    divergence_norm,
    reynolds_number,
    solve_steady_ins,
)
from .ad import AdProblem, ConcentrationSeries, gaussian_source, partition_ad_boundary, solve_ad
from .pod import ReducedBasis, SnapshotSet, compute_pod, lift, project, retained_energy
from .podg import DeimData, PodgArtifact, ReducedSolution, build_deim, evaluate_podg, train_podg
from .podi import PodiArtifact, evaluate_podi, tps_kernel, train_podi
from .uq import UncertaintySpec, UqResult, highest_variance_node, run_monte_carlo

__all__ = [
    "BoundaryTag", "Mesh", "TaylorHoodSpace", "build_taylor_hood",
    "load_mesh", "refine_mesh", "save_mesh", "synth_urban_mesh", "unit_square_mesh",
    "AssembledSystem", "FlowSolution", "InsProblem", "NewtonOptions",
    "ParameterPoint", "assemble_ins", "divergence_norm", "reynolds_number",
    "solve_steady_ins",
    "AdProblem", "ConcentrationSeries", "gaussian_source", "partition_ad_boundary", "solve_ad",
    "ReducedBasis", "SnapshotSet", "compute_pod", "lift", "project", "retained_energy",
    "DeimData", "PodgArtifact", "ReducedSolution", "build_deim", "evaluate_podg", "train_podg",
    "PodiArtifact", "evaluate_podi", "tps_kernel", "train_podi",
    "UncertaintySpec", "UqResult", "highest_variance_node", "run_monte_carlo",
]
