"""Structure of quantum Markov chains and double Markovity.

Dense-matrix tools for entropies and conditional mutual information,
block decompositions of Markov states, certificates for simultaneous
Markov chains, classical oracles, seeded instance generators and a CLI.
"""
from .config import DEFAULT_TOLS, Tolerances
from .errors import *  # noqa: F401,F403
from .tensor import (DensityOperator, Operator, SystemLayout, kron, partial_trace, permute,
                     support_projector, trace_distance)
from .entropy import MarkovChainSpec, assert_markov, cmi, conditional_entropy, parse_chain, von_neumann_entropy
from .algebra import wedderburn
from .structure import (HjpDecomposition, build_state, hjp_decompose, is_minimal, markov_decompose,
                        match_decompositions)
from .double_markov import (CommonLabel, Theorem2Certificate, theorem1_certify, theorem2_certify,
                            theorem2_converse_check, verify_common_label)
from .classical import JointPmf, classical_cmi, embed, lemma1_partition, lemma2_check
from .generate import (GenSpec, gen_double_markov_state, gen_markov_state, gen_negative,
                       gen_thm2_state, random_density)

__version__ = "0.1.0"
