import pytest

from qsaliency.chess.board import (
    ChessPosition,
    emit_fen,
    legal_moves,
    parse_fen,
    square_index,
    validate_position,
)
from qsaliency.chess.perturb import (
    SelectedActionNotEvaluated,
    compute_board_saliency,
    enumerate_perturbations,
)
from qsaliency.core import QProfile, Status

START = ChessPosition.initial()


def constant_oracle(fen):
    # State-independent: the same profile whatever position it is shown,
    # covering every action of the unperturbed start position.
    moves = legal_moves(START)
    return QProfile(fen, tuple((m, 1.0) for m in moves))


def test_start_position_has_30_perturbations():
    # 32 pieces minus the two kings; no removal breaks the start position.
    # Cross-checked by exhaustively re-validating each removal.
    perturbations = enumerate_perturbations(START)
    assert len(perturbations) == 30
    expected = 0
    for sq in range(64):
        piece = START.piece_at(sq)
        if piece is None or piece in ("K", "k"):
            continue
        try:
            validate_position(START.remove_piece(sq))
            expected += 1
        except Exception:
            pass
    assert expected == 30


def test_lone_kings_no_perturbations():
    pos = parse_fen("8/8/8/8/4k3/8/8/K7 w - - 0 1")
    assert enumerate_perturbations(pos) == []


def test_every_perturbed_position_valid_and_parseable():
    for perturbation, pos in enumerate_perturbations(START):
        validate_position(pos)
        assert emit_fen(parse_fen(emit_fen(pos))) == emit_fen(pos)
        assert pos.piece_at(square_index(perturbation.square)) is None


def test_pinned_to_waiting_king_square_excluded():
    # The black knight on e6 shields the *black* king (side not to move)
    # from the white rook on e8: removing it would leave black in check
    # with white to move, so e6 must not be perturbable.
    fen = "4R3/8/4n3/8/4k3/8/8/1K6 w - - 0 1"
    pos = parse_fen(fen)
    squares = {p.square for p, _ in enumerate_perturbations(pos)}
    assert "e6" not in squares
    assert "e8" in squares  # the rook itself is removable


def test_removed_castling_rook_clears_right():
    pos = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1")
    by_square = dict((p.square, new) for p, new in enumerate_perturbations(pos))
    assert "K" not in by_square["h1"].castling
    assert "Q" in by_square["h1"].castling
    assert "q" not in by_square["a8"].castling


def test_removed_double_stepper_clears_ep():
    pos = parse_fen("rnbqkbnr/pppp1ppp/8/8/4p3/5P2/PPPPP1PP/RNBQKBNR w KQkq - 0 3")
    # Build a position with a live ep square instead:
    pos = parse_fen("rnbqkbnr/ppp1pppp/8/3p4/4P3/8/PPPP1PPP/RNBQKBNR w KQkq d6 0 2")
    by_square = dict((p.square, new) for p, new in enumerate_perturbations(pos))
    assert by_square["d5"].ep_square is None
    assert by_square["a7"].ep_square == pos.ep_square


def test_perturbation_count_bound():
    for fen in [
        emit_fen(START),
        "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
    ]:
        pos = parse_fen(fen)
        occupied = len(pos.occupied_squares())
        assert len(enumerate_perturbations(pos)) <= occupied - 2


def test_constant_oracle_scores_zero_everywhere():
    scores = compute_board_saliency(START, "e2e4", constant_oracle, method="sarfa")
    assert scores  # non-empty
    for name, breakdown in scores.items():
        assert breakdown.score == 0.0, name
    # kings never appear
    assert "e1" not in scores
    assert "e8" not in scores


def test_scores_lie_in_unit_interval_with_fake_material_oracle():
    def material_oracle(fen):
        pos = parse_fen(fen)
        values = {"p": 1, "n": 3, "b": 3, "r": 5, "q": 9, "k": 0}
        entries = []
        for move_uci in legal_moves(pos):
            from qsaliency.chess.board import Move

            after = pos.apply_move(Move.from_uci(move_uci))
            score = 0
            for sq in range(64):
                piece = after.piece_at(sq)
                if piece is None:
                    continue
                v = values[piece.lower()]
                score += v if (piece.isupper()) == (pos.side_to_move == "w") else -v
            entries.append((move_uci, float(score)))
        return QProfile(fen, tuple(entries))

    fen = "r1bqkbnr/pppp1ppp/2n5/4p3/2B1P3/5N2/PPPP1PPP/RNBQK2R w KQkq - 4 4"
    scores = compute_board_saliency(parse_fen(fen), "f3e5", material_oracle)
    assert scores
    for breakdown in scores.values():
        assert 0.0 <= breakdown.score <= 1.0


def test_illegal_selected_move_rejected():
    with pytest.raises(ValueError, match="not legal"):
        compute_board_saliency(START, "e2e5", constant_oracle)


def test_selected_move_missing_from_profile():
    def truncated_oracle(fen):
        moves = legal_moves(parse_fen(fen))
        return QProfile(fen, ((moves[0], 1.0),))

    pos = START
    move = legal_moves(pos)[5]
    with pytest.raises(SelectedActionNotEvaluated):
        compute_board_saliency(pos, move, truncated_oracle)


def test_oracle_failure_on_perturbed_positions_marks_skipped():
    calls = {"n": 0}

    def flaky_oracle(fen):
        calls["n"] += 1
        if calls["n"] > 1:
            raise RuntimeError("engine fell over")
        return constant_oracle(fen)

    scores = compute_board_saliency(START, "e2e4", flaky_oracle)
    assert all(b.status is Status.SKIPPED_INVALID_PERTURBATION for b in scores.values())
    assert all(b.score == 0.0 for b in scores.values())


def test_unperturbed_oracle_failure_propagates():
    def broken_oracle(fen):
        raise RuntimeError("no engine")

    with pytest.raises(RuntimeError, match="no engine"):
        compute_board_saliency(START, "e2e4", broken_oracle)
