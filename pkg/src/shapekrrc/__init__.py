"""Kernel ridge-regression classification on Kendall's planar shape space."""
from .classifiers import (
    Krrc,
    NaiveRrc,
    Prediction,
    extrinsic_mean,
    krrc_fit,
    krrc_predict,
    load_model,
    rrc_fit,
    rrc_predict,
    save_model,
)
from .data import LandmarkDataset, generate_synthetic, load_landmark_csv, save_landmark_csv
from .evaluation import ExperimentPlan, compute_metrics, run_experiment
from .kernels import GramMatrix, KernelFamily, KernelSpec, gram, kernel_eval
from .shape import (
    LandmarkConfig,
    Preshape,
    extrinsic_dist_sq,
    full_procrustes_dist,
    partial_procrustes_dist_sq,
    riemannian_dist,
    to_preshape,
    vw_embed,
)

__version__ = "0.1.0"
