"""Loss-limited quantum phase estimation: QFI engine, optimal probes and interferometer noise model."""
from .fock import (
    PHASE_CONVENTION,
    TOL,
    BlockDiagonalState,
    LossChannel,
    Tolerances,
    TwoModePureState,
    beam_splitter_apply,
    direct_sum,
    fock_state,
    loss_channel_apply,
    make_pure_state,
    noon_state,
    phase_derivative,
    phase_shift_apply,
)
from .qfi import (
    QfiResult,
    cramer_rao,
    lossy_interferometer_qfi,
    mixture_qfi,
    phase_bound_mean_n,
    pure_qfi,
    qfi_bound_fixed_n,
    sld_qfi,
)
from .optimize import (
    CsvOptimum,
    ExtrapolationFit,
    OptimalPrecision,
    OptimizationResult,
    OptimizerOptions,
    RatioGridPoint,
    csv_optimal_squeezing,
    fit_extrapolation,
    optimal_phase_uncertainty,
    optimize_state,
    precision_ratio,
)
from .estimators import ExtrapolationRegressor, OptimalPrecisionModel, make_solver, ratio_grid

__version__ = "0.1.0"
