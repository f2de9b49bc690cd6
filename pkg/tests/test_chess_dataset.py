import json

import pytest

from qsaliency.chess.dataset import (
    DatasetError,
    SaliencyDatasetEntry,
    load_dataset,
    majority_vote,
    save_dataset,
)

START_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"


def fs(*squares):
    return frozenset(squares)


def test_majority_vote_two_of_three():
    assert majority_vote([fs("a4"), fs("a4", "c6"), fs("a4")]) == fs("a4")


def test_majority_vote_empty():
    assert majority_vote([fs(), fs(), fs()]) == fs()


def test_majority_vote_counts_squares_independently():
    assert majority_vote([fs("a4", "b6"), fs("b6"), fs("a4")]) == fs("a4", "b6")


def test_majority_vote_needs_three_sets():
    with pytest.raises(ValueError, match="3 label sets"):
        majority_vote([fs("a4"), fs("a4")])


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def test_load_valid_dataset(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(
        path,
        [
            {"fen": START_FEN, "best_move": "e2e4", "salient_squares": ["e2", "d2"]},
            {
                "fen": START_FEN,
                "best_move": "g1f3",
                "salient_squares": ["g1"],
                "expert_labels": [["g1"], ["g1", "e2"], ["g1"]],
            },
        ],
    )
    entries = load_dataset(str(path))
    assert len(entries) == 2
    assert entries[0].salient_squares == fs("e2", "d2")
    assert entries[1].expert_labels is not None


def test_load_reports_line_numbers(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(
        path,
        [
            {"fen": START_FEN, "best_move": "e2e4", "salient_squares": []},
            {"fen": START_FEN, "best_move": "e2e5", "salient_squares": []},
        ],
    )
    with pytest.raises(DatasetError, match="line 2") as exc_info:
        load_dataset(str(path))
    assert exc_info.value.line_number == 2


def test_load_rejects_illegal_best_move(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(path, [{"fen": START_FEN, "best_move": "e2e5", "salient_squares": []}])
    with pytest.raises(DatasetError, match="not legal"):
        load_dataset(str(path))


def test_load_rejects_empty_salient_square(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(path, [{"fen": START_FEN, "best_move": "e2e4", "salient_squares": ["e4"]}])
    with pytest.raises(DatasetError, match="empty"):
        load_dataset(str(path))


def test_load_rejects_vote_mismatch(tmp_path):
    path = tmp_path / "d.jsonl"
    write_lines(
        path,
        [
            {
                "fen": START_FEN,
                "best_move": "e2e4",
                "salient_squares": ["d2"],
                "expert_labels": [["e2"], ["e2"], ["d2"]],
            }
        ],
    )
    with pytest.raises(DatasetError, match="majority vote"):
        load_dataset(str(path))


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"fen": oops\n', encoding="utf-8")
    with pytest.raises(DatasetError, match="line 1"):
        load_dataset(str(path))


def test_save_load_roundtrip(tmp_path):
    entries = [
        SaliencyDatasetEntry(
            fen=START_FEN,
            best_move="e2e4",
            salient_squares=fs("e2"),
            expert_labels=(fs("e2"), fs("e2", "d2"), fs("e2")),
        )
    ]
    path = tmp_path / "d.jsonl"
    save_dataset(str(path), entries)
    loaded = load_dataset(str(path))
    assert loaded == entries
