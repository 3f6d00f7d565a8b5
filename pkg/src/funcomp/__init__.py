"""Functional source coding under maximal distortion.

Builds maximal epsilon-characteristic hypergraphs for finite-alphabet sources
and metric-valued target functions, solves the restricted-support rate and
rate-region problems for six coding settings, and verifies results against
independent brute-force oracles.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetError,
    InstanceError,
    ParseError,
    ValidationError,
    VerificationError,
)
from .geometry import Ball, is_delta_approximation, lipschitz_check, radius_leq, sec
from .hypergraph import (
    HypergraphPair,
    MaximalHypergraph,
    condition1_holds,
    edge_valid,
    edges_overlap,
    maximal_edges,
    maximal_pair,
)
from .markov import (
    MarkovModel,
    birth_death,
    cond_entropy_skip,
    ktile_rate,
    make_model,
    sparsity,
    stationary,
    ub_markov,
)
from .model import (
    Alphabet,
    FunctionTable,
    JointPmf,
    ProblemInstance,
    conditional,
    load_instance,
    load_instance_path,
    marginal,
    serialize,
)
from .oracle import (
    GridSpec,
    brute_maximal_edges,
    general_aux_search,
    grid_min_rate,
    verify_zero_distortion,
)
from .solver import (
    RateRegion,
    RateResult,
    TestChannel,
    rate_lipschitz,
    rate_p2p,
    rate_separation,
    rate_side_info,
    rate_surrogate,
    region_cascade,
    region_distributed,
    region_independent,
    region_mdc,
    region_successive_refinement,
    sum_rate_distributed,
    sweep_curve,
)
