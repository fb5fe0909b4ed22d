"""Recovery of missing entries in matrix-shaped sensor data.

The core method fills gaps by compressive sensing: the observation
pattern defines a partial-canonical-identity selection operator, the
signal is modeled as sparse under a DCT-family transform, and an
l1-regularized solve reconstructs the full matrix, optionally followed
by a closed-form low-rank denoising stage.  Nuclear-norm (singular value
thresholding) and alternating-least-squares factorization baselines,
plus the masking/benchmark protocol, round out the toolkit.
"""

from .coherence import CoherenceResult, coherence_table, mutual_coherence
from .data import (
    MaskPartition,
    SyntheticSpec,
    add_noise,
    data_loss_percentage,
    dct_coefficient_profile,
    estimate_hurst,
    fractional_gaussian_noise,
    generate_fgn_field,
    nmse,
    parse_sensor_log,
    read_mask_csv,
    read_matrix_csv,
    simulate_missing,
    write_mask_csv,
    write_matrix_csv,
)
from .pipeline import (
    ExperimentConfig,
    RecoveryReport,
    ReportRow,
    db_improvement,
    emit_csv,
    parse_experiment_config,
    parse_report_csv,
    pci_mdr,
    run_sweep,
)
from .solvers import (
    RegularizationWeights,
    SolverConfig,
    SolverDiagnostics,
    SolverError,
    build_cs_operator,
    denoise_low_rank,
    fista_l1,
    mf_complete,
    recover_cs,
    singular_value_soft_threshold,
    soft_threshold,
    svt_complete,
)
from .transforms import (
    PciOperator,
    SparsifyingBasis,
    VectorizationOrder,
    dct_full,
    dct_matrix,
    dct_spatial,
    dct_temporal,
    devectorize,
    fourier_basis,
    fourier_matrix,
    kron_apply,
    kronecker_dct,
    pci_from_mask,
    vectorize,
    wavelet_basis,
    wavelet_matrix,
)

__version__ = "0.1.0"
