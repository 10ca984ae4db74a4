"""Toolkit for acyclic directed mixed graphs.

Core objects live in :mod:`admgkit.graph`; latent projection, closures
and the dense-connectivity machinery in :mod:`admgkit.projection`;
fixing and the nested factorization check in :mod:`admgkit.fixing`;
tree reductions in :mod:`admgkit.minimality`; the coupling construction
in :mod:`admgkit.coupling`; exact verification in
:mod:`admgkit.oracle`.  Everything public is re-exported here.
"""

from .coupling import (
    ContinuousSpec,
    CouplingSem,
    build_coupling,
    continuous_sample,
    evaluate,
    sample,
)
from .fixing import (
    DiscreteKernel,
    NestedReport,
    check_nested_markov,
    fix_graph,
    intrinsic_sets,
    is_fixable,
    kernel_fix,
    reachable_sets,
    read_distribution_csv,
    uniform_context_kernel,
    write_distribution_csv,
)
from .graph import (
    Admg,
    Cadmg,
    Edge,
    GraphError,
    ParseError,
    ancestors,
    bidirected_connected,
    children,
    descendants,
    district,
    districts,
    induced_subgraph,
    is_dag,
    m_separated,
    markov_blanket,
    parents,
    parse_graph,
    relatives,
    serialize_graph,
    siblings,
    topological_order,
)
from .minimality import (
    MinimalReduction,
    almost_encapsulated,
    comp_graph,
    minimal_set,
    prune,
    tree_reduce,
)
from .oracle import (
    IndependenceReport,
    ParityReport,
    TheoremVerdict,
    exact_joint,
    verify_pair,
    verify_parity_lemma,
    verify_theorem,
)
from .projection import (
    ClosureResult,
    DenseVerdict,
    NestedConstraintError,
    PairSubgraph,
    canonical_dag,
    closure,
    densely_connected,
    is_arid,
    is_maximal,
    latent_project,
    marg_project,
    pair_subgraph,
    reachable_closure,
)

__version__ = "0.1.0"

__all__ = [
    "Admg",
    "Cadmg",
    "ClosureResult",
    "ContinuousSpec",
    "CouplingSem",
    "DenseVerdict",
    "DiscreteKernel",
    "Edge",
    "GraphError",
    "IndependenceReport",
    "MinimalReduction",
    "NestedConstraintError",
    "NestedReport",
    "PairSubgraph",
    "ParityReport",
    "ParseError",
    "TheoremVerdict",
    "almost_encapsulated",
    "ancestors",
    "bidirected_connected",
    "build_coupling",
    "canonical_dag",
    "check_nested_markov",
    "children",
    "closure",
    "comp_graph",
    "continuous_sample",
    "densely_connected",
    "descendants",
    "district",
    "districts",
    "evaluate",
    "exact_joint",
    "fix_graph",
    "induced_subgraph",
    "intrinsic_sets",
    "is_arid",
    "is_dag",
    "is_fixable",
    "is_maximal",
    "kernel_fix",
    "latent_project",
    "m_separated",
    "marg_project",
    "markov_blanket",
    "minimal_set",
    "pair_subgraph",
    "parents",
    "parse_graph",
    "prune",
    "reachable_closure",
    "reachable_sets",
    "read_distribution_csv",
    "relatives",
    "sample",
    "serialize_graph",
    "siblings",
    "topological_order",
    "tree_reduce",
    "uniform_context_kernel",
    "verify_pair",
    "verify_parity_lemma",
    "verify_theorem",
    "write_distribution_csv",
]
