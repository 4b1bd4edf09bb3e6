"""ABL conditional probabilities and beable fields on finite quantum models."""

from ._core import (
    AblfieldError,
    CapacityError,
    ContractError,
    ImpossiblePostSelectionError,
    InvariantError,
    IoError,
    ToyModel,
    ValidationError,
    ZeroProbabilityBranchError,
    abl_basic,
    abl_evolved,
    abl_projective,
    catastrophe,
    oracle_conditioned,
    run,
)

__all__ = [
    "AblfieldError",
    "CapacityError",
    "ContractError",
    "ImpossiblePostSelectionError",
    "InvariantError",
    "IoError",
    "ToyModel",
    "ValidationError",
    "ZeroProbabilityBranchError",
    "abl_basic",
    "abl_evolved",
    "abl_projective",
    "catastrophe",
    "oracle_conditioned",
    "run",
]
