"""Intrinsic dimension and Renyi entropy of manifold data from geodesic
minimal spanning tree growth rates."""

__version__ = "0.1.0"

from .datasets import PointCloud, SyntheticSpec, generate, load_csv, save_csv
from .errors import (
    ConfigurationError,
    DegenerateInputError,
    DegenerateSlopeError,
    DisconnectedGraphError,
    GmstError,
    IllPosedSlopeError,
    InputError,
    ParseError,
)
from .estimator import (
    EstimateReport,
    GrowthCurve,
    LinearFit,
    ResamplingPlan,
    approx_beta,
    estimate,
    fit_loglinear,
    growth_curve,
    run_pipeline,
    size_grid,
)
from .geodesics import GeodesicEdgeMatrix, all_pairs_geodesics, restrict
from .mst import MstResult, estimate_beta, gmst_length, mst_oracle
from .neighborhood import NeighborhoodGraph, NeighborRule, build_graph, rescale_conformal

__all__ = [
    "ConfigurationError",
    "DegenerateInputError",
    "DegenerateSlopeError",
    "DisconnectedGraphError",
    "EstimateReport",
    "GeodesicEdgeMatrix",
    "GmstError",
    "GrowthCurve",
    "IllPosedSlopeError",
    "InputError",
    "LinearFit",
    "MstResult",
    "NeighborRule",
    "NeighborhoodGraph",
    "ParseError",
    "PointCloud",
    "ResamplingPlan",
    "SyntheticSpec",
    "all_pairs_geodesics",
    "approx_beta",
    "build_graph",
    "estimate",
    "estimate_beta",
    "fit_loglinear",
    "generate",
    "gmst_length",
    "growth_curve",
    "load_csv",
    "mst_oracle",
    "rescale_conformal",
    "restrict",
    "run_pipeline",
    "save_csv",
    "size_grid",
]
