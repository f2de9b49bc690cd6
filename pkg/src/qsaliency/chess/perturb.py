"""Board perturbation by piece removal, and per-square saliency maps.

A chess position's features are its 64 squares; the perturbation for an
occupied square deletes the piece standing on it.  Removals that would
break the position (missing king, exposed side-not-to-move king, pawn on a
back rank) are excluded, so every perturbed position is itself a valid
position.  Kings are never removed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Tuple

from ..core import (
    Combiner,
    NoCommonActionsError,
    QProfile,
    ScoreBreakdown,
    Status,
    baseline_greydanus,
    baseline_iyer,
    derive_policy_value,
    restrict_to_common_actions,
    sarfa_score,
)
from .board import ChessPosition, FenError, emit_fen, legal_moves, square_name, validate_position

METHODS = ("sarfa", "iyer", "greydanus_policy", "greydanus_value")


@dataclass(frozen=True)
class SquarePerturbation:
    """One piece removal: the square it emptied and the piece that stood there."""

    square: str
    removed_piece: str


class SelectedActionNotEvaluated(ValueError):
    """The move to explain is absent from the oracle's profile.

    Typically the oracle truncates to its top-N moves; raise the multipv
    setting (or use a different move) to evaluate deeper into the list.
    """


def enumerate_perturbations(
    pos: ChessPosition,
) -> List[Tuple[SquarePerturbation, ChessPosition]]:
    """All valid single-piece removals, in a1..h8 square order.

    A removal is valid when the resulting position still satisfies every
    structural invariant.  Castling rights die with a removed rook and the
    en-passant marker dies with the double-stepped pawn, so the perturbed
    position is always parseable FEN.
    """
    result = []
    for sq in range(64):
        piece = pos.piece_at(sq)
        if piece is None or piece in ("K", "k"):
            continue
        perturbed = pos.remove_piece(sq)
        try:
            validate_position(perturbed)
        except FenError:
            continue
        result.append((SquarePerturbation(square_name(sq), piece), perturbed))
    return result


def _score_one(
    method: str,
    q_orig: QProfile,
    q_pert: QProfile,
    selected: str,
    combiner: Combiner,
    temperature: float,
) -> ScoreBreakdown:
    if method == "sarfa":
        return sarfa_score(q_orig, q_pert, selected, combiner)

    r_orig, r_pert, removed = restrict_to_common_actions(q_orig, q_pert, selected)
    if method == "iyer":
        if removed:
            return ScoreBreakdown.skipped("", Status.ACTION_REMOVED)
        raw = baseline_iyer(r_orig, r_pert, selected)
        return ScoreBreakdown(feature_id="", score=raw, status=Status.SCORED)
    if method in ("greydanus_policy", "greydanus_value"):
        which = method.split("_", 1)[1]
        pv_orig = derive_policy_value(r_orig, temperature)
        pv_pert = derive_policy_value(r_pert, temperature)
        raw = baseline_greydanus(pv_orig, pv_pert, which)
        return ScoreBreakdown(feature_id="", score=raw, status=Status.SCORED)
    raise ValueError(f"unknown method {method!r}")


def compute_board_saliency(
    pos: ChessPosition,
    selected_move: str,
    evaluate: Callable[[str], QProfile],
    method: str = "sarfa",
    combiner: Combiner = Combiner.HARMONIC,
    temperature: float = 1.0,
) -> Dict[str, ScoreBreakdown]:
    """Per-square saliency of ``pos`` for ``selected_move``.

    ``evaluate`` maps a FEN string to a QProfile (typically a bound oracle
    session method).  The move to explain may be any legal move, not only
    the agent's first choice, but it must appear in the oracle's profile
    for the unperturbed position.

    Returns a map from square name to breakdown covering every occupied
    non-king square; squares whose removal is invalid, or whose oracle
    call failed, carry a skipped status and score 0.  A failed evaluation
    of the *unperturbed* position propagates as an exception.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if selected_move not in legal_moves(pos):
        raise ValueError(f"move {selected_move!r} not legal in {emit_fen(pos)}")
    q_orig = evaluate(emit_fen(pos))
    if selected_move not in q_orig:
        raise SelectedActionNotEvaluated(
            f"oracle did not report a value for {selected_move!r}; "
            f"it returned {len(q_orig)} action(s)"
        )

    perturbed_by_square = {p.square: perturbed for p, perturbed in enumerate_perturbations(pos)}
    scores: Dict[str, ScoreBreakdown] = {}
    for sq in range(64):
        piece = pos.piece_at(sq)
        if piece is None or piece in ("K", "k"):
            continue
        name = square_name(sq)
        perturbed = perturbed_by_square.get(name)
        if perturbed is None:
            scores[name] = ScoreBreakdown.skipped(name, Status.SKIPPED_INVALID_PERTURBATION)
            continue
        try:
            q_pert = evaluate(emit_fen(perturbed))
        except Exception:
            # Per-square oracle failure (terminal position, engine hiccup).
            scores[name] = ScoreBreakdown.skipped(name, Status.SKIPPED_INVALID_PERTURBATION)
            continue
        try:
            breakdown = _score_one(method, q_orig, q_pert, selected_move, combiner, temperature)
        except NoCommonActionsError:
            breakdown = ScoreBreakdown.skipped(name, Status.SKIPPED_NO_OVERLAP)
        scores[name] = replace(breakdown, feature_id=name)
    return scores
