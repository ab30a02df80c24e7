"""Sparse concept decomposition and transplant editing of latent vectors."""

from .dictionary import (
    NULL_CONCEPT,
    Concept,
    ConceptDictionary,
    ConceptVector,
    LatentSpaceTag,
    ReadMethod,
    SpaceKind,
    assemble,
    null_concept,
    rep_read,
)
from .solver import SolverConfig, SparseSolution, elastic_net_solve, kkt_violation, objective, pca_first_component
from .transplant import (
    CoefficientReport,
    Decomposition,
    EditKind,
    EditRequest,
    decompose,
    strength_sweep,
    top_k_report,
    transplant,
    vec_add,
)

__version__ = "0.1.0"

__all__ = [
    "NULL_CONCEPT",
    "CoefficientReport",
    "Concept",
    "ConceptDictionary",
    "ConceptVector",
    "Decomposition",
    "EditKind",
    "EditRequest",
    "LatentSpaceTag",
    "ReadMethod",
    "SolverConfig",
    "SpaceKind",
    "SparseSolution",
    "assemble",
    "decompose",
    "elastic_net_solve",
    "kkt_violation",
    "null_concept",
    "objective",
    "pca_first_component",
    "rep_read",
    "strength_sweep",
    "top_k_report",
    "transplant",
    "vec_add",
]
