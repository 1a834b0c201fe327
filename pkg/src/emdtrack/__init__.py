"""Contour tracking by matching kernel-weighted feature signatures with a
transportation-simplex distance on tensor-compressed dense gradient
descriptors."""

from .config import ConfigError, SequenceSpec, TrackerConfig, load_config, \
    parse_config_text, save_config, serialize_config
from .ellipse import Ellipse, enlarge, fit_ellipse
from .emd import EmdSolution, SimplexIterationError, TransportProblem, \
    build_problem, emd, initial_bfs, simplex_solve
from .estimators import EmdContourTracker, KdTreeBinner, TensorSiftEncoder
from .force import RegionStats, compute_stats, force_at, force_values, \
    min_enclosing_circle, sigma_from_region
from .levelset import ContourLostError, EvolveParams, LevelSetGrid, cfl_dt, \
    evolve_step, extract_region, grid_from_mask, init_from_ellipse, \
    reinitialize
from .meanshift import MeanShiftModel, build_model, mean_shift
from .netpbm import NetpbmError, read_image, read_mask, read_pgm, read_ppm, \
    write_mask, write_pgm, write_ppm
from .sift import dense_sift, sift_at, tensor_sift_image
from .signature import ClusterSet, Signature, build_signature, \
    cluster_features, ground_distance, kernel_weight
from .synth import SynthParams, generate_sequence, write_sequence
from .tensor import CpBasis, CpModel, basis_from_model, cp_als, load_basis, \
    project_descriptor, save_basis
from .tracker import FrameResult, SequenceResult, TrackerModel, \
    build_reference, load_model, overlap_error, run_sequence, save_model, \
    stopping_criterion, track_frame

__version__ = "0.1.0"

__all__ = [
    "ClusterSet", "ConfigError", "ContourLostError", "CpBasis", "CpModel",
    "Ellipse", "EmdContourTracker", "EmdSolution", "EvolveParams",
    "FrameResult", "KdTreeBinner", "LevelSetGrid", "MeanShiftModel",
    "NetpbmError", "RegionStats", "SequenceResult", "SequenceSpec",
    "Signature", "SimplexIterationError", "SynthParams", "TensorSiftEncoder",
    "TrackerConfig", "TrackerModel", "TransportProblem", "basis_from_model",
    "build_model", "build_problem", "build_reference", "build_signature",
    "cfl_dt", "cluster_features", "compute_stats", "cp_als", "dense_sift",
    "emd", "enlarge", "evolve_step", "extract_region", "fit_ellipse",
    "force_at", "force_values", "generate_sequence", "grid_from_mask",
    "ground_distance", "init_from_ellipse", "initial_bfs", "kernel_weight",
    "load_basis", "load_config", "load_model", "mean_shift",
    "min_enclosing_circle", "overlap_error", "parse_config_text",
    "project_descriptor", "read_image", "read_mask", "read_pgm", "read_ppm",
    "reinitialize", "run_sequence", "save_basis", "save_config",
    "save_model", "serialize_config", "sift_at", "sigma_from_region",
    "simplex_solve", "stopping_criterion", "tensor_sift_image",
    "track_frame", "write_mask", "write_pgm", "write_ppm", "write_sequence",
]
