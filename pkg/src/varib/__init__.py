"""Variational information-bottleneck solvers and experiment tooling.

Solvers: linear gaussian IB, sparse IB (student-t response marginal), and
kernelized IB in dual space, plus synthetic bar-patch data generation and
evaluation metrics (information bounds, unit reports, orientation
statistics).
"""

__version__ = "0.1.0"

from .core import (
    BottleneckConfig,
    Decoder,
    FitTrace,
    LinearEncoder,
    StudentMarginal,
    fit_sparse_ib,
    objective,
    solve_W,
    solve_nu,
    update_decoder,
    update_marginal,
    update_sigma,
)
from .dataset import (
    PairedDataset,
    dataset_from_pairs,
    make_occlusion_split,
    reassemble_occlusion,
)
from .estimators import KernelIB, LinearIB
from .exceptions import ConfigError, MatrixFormatError, NumericalError, VaribError
from .kernel import (
    DualEncoder,
    KernelConfig,
    dual_responses,
    fit_kernel_ib,
    fit_krr,
    gram_matrix,
    solve_A,
    solve_A_gaussian,
)
from .matrixio import load_matrix, save_matrix, save_pgm
from .metrics import (
    InfoPoint,
    UnitReport,
    compression_bound,
    info_curve,
    null_model_curve,
    orientation_distribution,
    reconstruct,
    relevance_bound,
    unit_reports,
)
from .patches import NoiseSpec, PatchSpec, apply_noise, generate_bar_patches
from .serialize import load_model, save_model

__all__ = [
    "BottleneckConfig",
    "ConfigError",
    "Decoder",
    "DualEncoder",
    "FitTrace",
    "InfoPoint",
    "KernelConfig",
    "KernelIB",
    "LinearEncoder",
    "LinearIB",
    "MatrixFormatError",
    "NoiseSpec",
    "NumericalError",
    "PairedDataset",
    "PatchSpec",
    "StudentMarginal",
    "UnitReport",
    "VaribError",
    "apply_noise",
    "compression_bound",
    "dataset_from_pairs",
    "dual_responses",
    "fit_kernel_ib",
    "fit_krr",
    "fit_sparse_ib",
    "generate_bar_patches",
    "gram_matrix",
    "info_curve",
    "load_matrix",
    "load_model",
    "make_occlusion_split",
    "null_model_curve",
    "objective",
    "orientation_distribution",
    "reassemble_occlusion",
    "reconstruct",
    "relevance_bound",
    "save_matrix",
    "save_model",
    "save_pgm",
    "solve_A",
    "solve_A_gaussian",
    "solve_W",
    "solve_nu",
    "unit_reports",
    "update_decoder",
    "update_marginal",
    "update_sigma",
]
