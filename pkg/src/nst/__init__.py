"""Sparse recovery by null space tuning (NST) with thresholding and feedback."""
from .errors import (
    CombinatorialBlowup,
    ConditionNotMet,
    DimensionMismatch,
    NotParseval,
    NSTError,
    RankDeficient,
    SingularSubmatrix,
    SparsityTooLarge,
)
from .linalg import (
    MeasurementOperator,
    build_operator,
    load_matrix,
    lsq_submatrix,
    project_nullspace,
    save_matrix,
    spectral_norm,
)
from .probgen import NoiseModel, ProblemSpec, derive_trial_seed, generate
from .solvers import (
    AdaptiveConfig,
    RecoveryResult,
    SolverConfig,
    Termination,
    initial_iterate,
    nst_step,
    solve_adaptive,
    solve_htp,
    solve_iht,
    solve_nst_ht,
    solve_nst_ht_fb,
    solve_nst_ht_subfb,
    solve_nst_stretched_ht,
    solve_omp,
    solve_sp,
)
from .sparsity import gather, hard_threshold, scatter, select_support

__version__ = "0.1.0"
