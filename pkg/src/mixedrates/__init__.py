"""Second-order rates for mixed sources, with exact finite-n oracles."""

from .errors import *  # noqa: F401,F403
from .sources import (
    IidSource,
    MarkovSource,
    Mixture,
    ProbabilityVector,
    SourceStatistics,
    bernoulli,
    component_statistics,
    discretize_general_mixture,
    iid_statistics,
    markov_statistics,
    quadrature_nodes,
    sample,
    sequence_neg_log_prob,
    statistics,
)
from .spectrum import (
    ClassedDistribution,
    SpectrumDistribution,
    exact_classes,
    gaussian_tail_prediction,
    mc_spectrum,
    spectrum_from_classes,
    tail_F_a,
    tail_G_a,
)
from .rates import (
    Bound,
    RateSolution,
    admissible_first_order,
    coding_second_order,
    finite_n_rate,
    intrinsic_second_order,
    q_tail,
    q_tail_inv,
    resolvability_second_order,
    solve,
)
from .oracles import (
    AllocationResult,
    intrinsic_distance,
    max_ir_size,
    min_code_size,
    min_resolvability_size,
    optimal_coding_error,
    optimal_resolvability_distance,
)
from .constructions import (
    appendix_b_inequalities,
    build_lemma1_mapping,
    build_lemma3_code,
    code_to_mapping,
    lemma2_lower_bound,
    mapping_to_code,
)
from .study import convergence_study, emit_csv, normality_study
from .config import load_config, parse_config

__version__ = "0.1.0"
