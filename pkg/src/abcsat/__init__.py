"""abcsat: approval-based committee elections, their axioms, and the SAT
pipeline that turns axiom combinations into impossibility proofs."""

__version__ = "0.1.0"

from .core import ElectionParams
from .encoder import EncodeConfig, allowed_committees, encode
from .rules import RuleTable, av, build_table, pav, pav_score
from .solver import SolveResult, Solver, decode_model, solve, verify_model

__all__ = [
    "ElectionParams",
    "EncodeConfig",
    "RuleTable",
    "SolveResult",
    "Solver",
    "allowed_committees",
    "av",
    "build_table",
    "decode_model",
    "encode",
    "pav",
    "pav_score",
    "solve",
    "verify_model",
]
