"""Learning factor graphs from samples with closed-form canonical factors."""
from .canonical import (CanonicalFactor, DistributionAccess, LocalAccess, OracleAccess,
                        canonical_factor, mb_canonical_factor, reconstruct, reconstruct_table)
from .model import (Assignment, Factor, FactorGraph, ValidationError, VariableSpec,
                    binary_variables, markov_blanket, scope_closure, sigma_restrict)
from .oracle import (CapExceeded, JointTable, conditional, conditional_entropy, joint_table,
                     kl, marginal, min_conditional_gamma, normalized_symmetric_kl, symmetric_kl)
from .params import (ClipConfig, LearnedModel, bn_clipped_mle, factor_graph_parameter_learn,
                     normalize_if_small, parameter_sample_bound)
from .sampling import Dataset, EmpiricalAccess, ZeroCount, exact_sample, gibbs_sample
from .structure import (best_markov_blanket, blanket_quality_bound, empirical_conditional_entropy,
                        enumerate_candidates, factor_graph_structure_learn, structure_sample_bound)

__all__ = [name for name in dir() if not name.startswith("_")]
