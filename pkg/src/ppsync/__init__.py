"""Entropy-regularized SDP solvers and rounding for partial permutation synchronization."""

from .blocks import (
    BlockPartition,
    CorrespondenceMatrix,
    GroundTruth,
    build_correspondence,
    ground_truth_product,
    q_matvec,
    registry_block_sizes,
    registry_order,
)
from .chebyshev import ChebPlan, SpectralInterval, estimate_interval, expm_multiply, plan_cheb
from .dense import (
    DenseSolution,
    brute_force_assignment,
    closed_form_block,
    dense_fixed_point_strong,
    dense_fixed_point_weak,
    dense_primal,
    dual_objective_strong,
    dual_objective_weak,
    mixing_coefficient,
)
from .metrics import MatchEvaluation, evaluate, pr_auc, pr_curve
from .operators import EffectiveCostStrong, EffectiveCostWeak, MatrixOracle, PrimalOracle
from .recovery import (
    BinaryEncoding,
    MaskedScores,
    RegistrationMap,
    gmm_threshold,
    hungarian,
    induced_matches,
    make_binary_encoding,
    make_encodings,
    masked_recover,
    percentile_threshold,
    recover_full_slow,
    recover_partial_fast,
    recover_partial_slow,
    score_support,
)
from .solvers import DualStrong, DualWeak, SolveReport, block_log_psd, solve_strong, solve_weak
from .spectral import SpectralEmbedding, default_rank, spectral_scores, top_eigvecs
from .synth import SynthConfig, corrupt, gen_ground_truth

__version__ = "0.1.0"
