"""Non-normal stability diagnostics for optimizer update operators."""

from .linalg import (
    EigenDecomposition,
    NonConvergenceError,
    eig,
    matrix_power_norms,
    operator_norm_2,
    sigma_min,
)
from .model import Dataset, MlpParams, gradient, hessian, init_params, loss, make_dataset
from .operators import (
    UpdateOperator,
    build_adam_augmented,
    build_adam_frozen,
    build_scalar_toy,
    build_sgdm_augmented,
    hm_commutator,
    normality_commutator,
)
from .pseudospec import (
    GridSpec,
    KreissEstimate,
    PrecursorReport,
    PseudospectrumGrid,
    ep_scaling_probe,
    kreiss_constant,
    precursor,
    precursor_from_values,
    pseudospectral_radius,
    pseudospectrum,
)
from .train import (
    DiagnosticsRecord,
    OptimizerState,
    TrainConfig,
    TrainTrace,
    adam_step,
    detect_spikes,
    lead_time,
    quasistatic_ratio,
    run_training,
    sgdm_step,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DiagnosticsRecord",
    "EigenDecomposition",
    "GridSpec",
    "KreissEstimate",
    "MlpParams",
    "NonConvergenceError",
    "OptimizerState",
    "PrecursorReport",
    "PseudospectrumGrid",
    "TrainConfig",
    "TrainTrace",
    "UpdateOperator",
    "adam_step",
    "build_adam_augmented",
    "build_adam_frozen",
    "build_scalar_toy",
    "build_sgdm_augmented",
    "detect_spikes",
    "eig",
    "ep_scaling_probe",
    "gradient",
    "hessian",
    "hm_commutator",
    "init_params",
    "kreiss_constant",
    "lead_time",
    "loss",
    "make_dataset",
    "matrix_power_norms",
    "normality_commutator",
    "operator_norm_2",
    "precursor",
    "precursor_from_values",
    "pseudospectral_radius",
    "pseudospectrum",
    "quasistatic_ratio",
    "run_training",
    "sgdm_step",
    "sigma_min",
]
