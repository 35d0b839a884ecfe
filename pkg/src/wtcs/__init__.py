"""Wavelet-domain block compressed sensing toolkit.

Pipeline: partition an image into blocks, decompose each block over a
multilevel orthonormal Haar transform, spend the measurement budget
adaptively across subbands, sample each subband with a seeded
row-orthonormal Gaussian operator, and reconstruct by an iterative solver
that couples elementwise sparsity with parent-child tree-group sparsity.
"""

from .allocation import (
    AllocationConfig,
    MeasurementPlan,
    SubbandStats,
    allocate_measurements,
    measurement_budget,
    subband_stats,
)
from .backend import BACKEND_NAME, available_backends
from .codec import decode, encode, read_image, write_image
from .errors import (
    BadMagicError,
    BadVersionError,
    BitstreamError,
    BudgetMismatchError,
    DimensionError,
    DivergenceError,
    FormatError,
    InfeasiblePlanError,
    OperatorError,
    PgmError,
    PlanError,
    TruncatedPayloadError,
    WtcsError,
)
from .metrics import QualityReport, psnr, quality_report, ssim
from .sampling import (
    MeasurementSet,
    SamplingOperator,
    assemble_blocks,
    initial_reconstruct,
    make_operator,
    operator_digest,
    partition_blocks,
    sample_image,
)
from .solver import (
    ReconResult,
    SolverConfig,
    TreeProblem,
    denoise_correct,
    gradient_step,
    group_shrink,
    objective,
    reconstruct,
    soft_threshold,
    z_update,
)
from .wavelet import (
    SubbandId,
    SubbandPyramid,
    TreeGroups,
    build_tree_groups,
    canonical_subbands,
    dwt_multilevel,
    dwt_single_level,
    flatten,
    idwt_multilevel,
    idwt_single_level,
    subband_side,
    subband_slices,
    unflatten,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationConfig",
    "BACKEND_NAME",
    "BadMagicError",
    "BadVersionError",
    "BitstreamError",
    "BudgetMismatchError",
    "DimensionError",
    "DivergenceError",
    "FormatError",
    "InfeasiblePlanError",
    "MeasurementPlan",
    "MeasurementSet",
    "OperatorError",
    "PgmError",
    "PlanError",
    "QualityReport",
    "ReconResult",
    "SamplingOperator",
    "SolverConfig",
    "SubbandId",
    "SubbandPyramid",
    "SubbandStats",
    "TreeGroups",
    "TreeProblem",
    "TruncatedPayloadError",
    "WtcsError",
    "allocate_measurements",
    "assemble_blocks",
    "available_backends",
    "build_tree_groups",
    "canonical_subbands",
    "decode",
    "denoise_correct",
    "dwt_multilevel",
    "dwt_single_level",
    "encode",
    "flatten",
    "gradient_step",
    "group_shrink",
    "idwt_multilevel",
    "idwt_single_level",
    "initial_reconstruct",
    "make_operator",
    "measurement_budget",
    "objective",
    "operator_digest",
    "partition_blocks",
    "psnr",
    "quality_report",
    "read_image",
    "reconstruct",
    "sample_image",
    "soft_threshold",
    "ssim",
    "subband_side",
    "subband_slices",
    "subband_stats",
    "unflatten",
    "write_image",
    "z_update",
]
