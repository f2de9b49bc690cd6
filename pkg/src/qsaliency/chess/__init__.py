"""Chess domain: board state, legality, piece-removal perturbations, datasets."""

from .board import (
    ChessPosition,
    FenError,
    IllegalMoveError,
    Move,
    emit_fen,
    legal_moves,
    parse_fen,
    square_index,
    square_name,
    validate_position,
)
from .dataset import (
    DatasetError,
    SaliencyDatasetEntry,
    load_dataset,
    majority_vote,
    save_dataset,
)
from .perturb import (
    METHODS,
    SelectedActionNotEvaluated,
    SquarePerturbation,
    compute_board_saliency,
    enumerate_perturbations,
)

__all__ = [
    "ChessPosition",
    "FenError",
    "IllegalMoveError",
    "Move",
    "emit_fen",
    "legal_moves",
    "parse_fen",
    "square_index",
    "square_name",
    "validate_position",
    "DatasetError",
    "SaliencyDatasetEntry",
    "load_dataset",
    "majority_vote",
    "save_dataset",
    "METHODS",
    "SelectedActionNotEvaluated",
    "SquarePerturbation",
    "compute_board_saliency",
    "enumerate_perturbations",
]
