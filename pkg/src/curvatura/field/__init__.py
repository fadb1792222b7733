"""Field expressions: parsing and exact order-3 derivatives."""

from .finite_diff import finite_diff_jet3
from .jet import (
    FieldDomainError,
    Jet3,
    eval_jet,
    eval_jet3,
    evaluate,
    hess_index,
    hess_pairs,
    third_index,
    third_triples,
)
from .parser import ExpressionError, FieldExpr, parse, render

__all__ = [
    "ExpressionError",
    "FieldDomainError",
    "FieldExpr",
    "Jet3",
    "eval_jet",
    "eval_jet3",
    "evaluate",
    "finite_diff_jet3",
    "hess_index",
    "hess_pairs",
    "parse",
    "render",
    "third_index",
    "third_triples",
]
