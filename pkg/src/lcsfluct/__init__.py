"""Simulation laboratory for the LCS of iid strings with sparse long blocks."""

from lcsfluct.errors import (
    FitError,
    InvalidAlphabetError,
    LcsFluctError,
    NoBlockError,
    NoSolutionError,
    ShapeError,
    SizeCapError,
    ValidationError,
)
from lcsfluct.lcs import lcs_bitparallel, lcs_dp, lcs_lpp_oracle, lcs_oracle
from lcsfluct.model import (
    CouplingChain,
    ModelParams,
    ReplacementDraw,
    StringSample,
    build_coupling_chain,
    gen_iid,
    place_blocks,
    replace_random_block,
    sample_pair,
)

__version__ = "0.1.0"

__all__ = [
    "CouplingChain",
    "FitError",
    "InvalidAlphabetError",
    "LcsFluctError",
    "ModelParams",
    "NoBlockError",
    "NoSolutionError",
    "ReplacementDraw",
    "ShapeError",
    "SizeCapError",
    "StringSample",
    "ValidationError",
    "build_coupling_chain",
    "gen_iid",
    "lcs_bitparallel",
    "lcs_dp",
    "lcs_lpp_oracle",
    "lcs_oracle",
    "place_blocks",
    "replace_random_block",
    "sample_pair",
]
