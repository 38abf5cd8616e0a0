"""Krylov-subspace recycling for sequences of sparse SPD systems.

The library solves A_j x_j = b_j for slowly varying SPD matrices by
augmented conjugate gradients over a recycled subspace, compressed between
systems by goal-oriented POD or harmonic-Ritz deflation, and driven by a
hybrid direct/iterative three-stage algorithm.
"""

from .errors import (
    Breakdown,
    DimensionMismatch,
    EmptyBasis,
    IterationLimit,
    ManifestError,
    NoHistory,
    NotConverged,
    NotPositiveDefinite,
    NotSymmetric,
    RankDeficient,
    RankTruncatedWarning,
    RecyklError,
    RegimeInapplicable,
)
from .linalg import (
    DenseBasis,
    DenseLowerTriangular,
    InstrumentationSink,
    SparseSpdMatrix,
    dense_cholesky,
    generalized_symmetric_evd,
    principal_angle_distance,
    spmv,
    symmetric_evd,
    thin_svd,
    weighted_inner,
)
from .krylov import (
    AugmentedPcgResult,
    LinearOperator,
    MatrixOperator,
    ReducedSpdOperator,
    augmented_pcg,
    direct_reduced_solve,
    pcg,
)
from .pod import PodBasisResult, PodMetric, energy_truncation_dim, pod_evd, pod_svd
from .preconditioners import Preconditioner, build as build_preconditioner
from .problems import (
    LinearSystemSpec,
    SystemSequence,
    gen_diffusion_sequence,
    gen_output_matrix,
    load_sequence_manifest,
    write_sequence,
)
from .threestage import (
    RecycleState,
    SolveReport,
    SolverConfig,
    StageTolerances,
    run_sequence,
    solve_system,
    summarize_reports,
)
from .truncation import (
    TruncationConfig,
    TruncationOutcome,
    compress,
    deflation_compress,
    enforce_a_orthogonality,
    pod_compress,
)
from .weights import (
    WeightHistory,
    WeightScheme,
    idw_weight,
    weights_ideal,
    weights_previous,
    weights_rbf,
)

__version__ = "0.1.0"
