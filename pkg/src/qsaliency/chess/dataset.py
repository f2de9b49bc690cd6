"""Saliency dataset loading: puzzles with expert-labeled important squares.

File format is JSON Lines, one puzzle per line:

    {"fen": "...", "best_move": "e2e4", "salient_squares": ["a4", "c5"],
     "expert_labels": [["a4"], ["a4", "c5"], ["c5"]]}

``expert_labels`` is optional; when present it must hold exactly three
label sets and ``salient_squares`` must equal their majority vote.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

from .board import ChessPosition, FenError, legal_moves, parse_fen, square_index


class DatasetError(ValueError):
    """Schema or content violation, annotated with the offending line."""

    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class SaliencyDatasetEntry:
    """One puzzle: position, its single correct move, and labeled squares."""

    fen: str
    best_move: str
    salient_squares: FrozenSet[str]
    expert_labels: Optional[Tuple[FrozenSet[str], ...]] = None

    def position(self) -> ChessPosition:
        return parse_fen(self.fen)


def majority_vote(label_sets: Sequence[FrozenSet[str]]) -> FrozenSet[str]:
    """Squares appearing in at least two of the three expert label sets."""
    if len(label_sets) != 3:
        raise ValueError(f"expected 3 label sets, got {len(label_sets)}")
    counts: dict = {}
    for labels in label_sets:
        for sq in labels:
            counts[sq] = counts.get(sq, 0) + 1
    return frozenset(sq for sq, n in counts.items() if n >= 2)


def _validate_entry(line_number: int, record: dict) -> SaliencyDatasetEntry:
    for key in ("fen", "best_move", "salient_squares"):
        if key not in record:
            raise DatasetError(line_number, f"missing field {key!r}")
    try:
        pos = parse_fen(record["fen"])
    except FenError as exc:
        raise DatasetError(line_number, f"bad fen: {exc}") from exc
    best_move = record["best_move"]
    if best_move not in legal_moves(pos):
        raise DatasetError(line_number, f"best_move {best_move!r} is not legal")

    squares = record["salient_squares"]
    if not isinstance(squares, list):
        raise DatasetError(line_number, "salient_squares must be an array")
    occupied = {sq for sq in squares}
    for sq in occupied:
        try:
            idx = square_index(sq)
        except ValueError as exc:
            raise DatasetError(line_number, str(exc)) from exc
        if pos.piece_at(idx) is None:
            raise DatasetError(line_number, f"salient square {sq} is empty")
    salient = frozenset(occupied)

    expert_labels = None
    if "expert_labels" in record and record["expert_labels"] is not None:
        raw = record["expert_labels"]
        if not isinstance(raw, list) or len(raw) != 3:
            raise DatasetError(line_number, "expert_labels must hold exactly 3 arrays")
        expert_labels = tuple(frozenset(labels) for labels in raw)
        if majority_vote(expert_labels) != salient:
            raise DatasetError(
                line_number, "salient_squares does not match the expert majority vote"
            )
    return SaliencyDatasetEntry(
        fen=record["fen"],
        best_move=best_move,
        salient_squares=salient,
        expert_labels=expert_labels,
    )


def load_dataset(path: str) -> List[SaliencyDatasetEntry]:
    """Load and validate a JSON Lines saliency dataset."""
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(line_number, f"bad JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetError(line_number, "entry must be a JSON object")
            entries.append(_validate_entry(line_number, record))
    return entries


def save_dataset(path: str, entries: Sequence[SaliencyDatasetEntry]) -> None:
    """Write entries as JSON Lines with deterministic field order."""
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            record = {
                "fen": entry.fen,
                "best_move": entry.best_move,
                "salient_squares": sorted(entry.salient_squares),
            }
            if entry.expert_labels is not None:
                record["expert_labels"] = [sorted(s) for s in entry.expert_labels]
            handle.write(json.dumps(record, sort_keys=True) + "\n")
