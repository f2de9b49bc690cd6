"""Quantitative evaluation: dataset scoring, ROC/AUC, ablations, robustness.

Every occupied non-king square of every puzzle becomes one labeled point:
positive if human experts marked it salient, negative otherwise.  Raw
per-square scores from a method run are min-max normalized to [0, 1]
(globally across the run by default, preserving ranks for methods such as
the raw Q-difference baseline that can go negative), then swept over
thresholds into a ROC curve whose trapezoidal area is the headline number.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .chess.board import emit_fen, legal_moves, square_name
from .chess.dataset import SaliencyDatasetEntry
from .chess.perturb import compute_board_saliency, enumerate_perturbations
from .core import Combiner
from .gateway import CachingOracle, OracleConfig, OracleSession, SessionPool, open_session


class EvaluationError(RuntimeError):
    """Evaluation could not produce a defined result."""


@dataclass(frozen=True)
class RocReport:
    """ROC points (fpr, tpr) from sweeping all distinct score thresholds."""

    points: Tuple[Tuple[float, float], ...]
    auc: float
    n_pos: int
    n_neg: int


@dataclass
class MethodRun:
    """All per-square scores one method produced over a dataset."""

    method: str
    combiner: str
    raw_scores: List[Dict[str, float]]  # one map per puzzle, square -> raw score
    statuses: List[Dict[str, str]]
    puzzle_indices: List[int]  # dataset indices actually scored
    n_skipped: int = 0
    normalization: str = "global"

    def normalized_scores(self) -> List[Dict[str, float]]:
        """Min-max rescale to [0, 1]; global across the run or per puzzle."""
        if self.normalization == "global":
            values = [v for scores in self.raw_scores for v in scores.values()]
            lo, hi = (min(values), max(values)) if values else (0.0, 0.0)
            return [_rescale(scores, lo, hi) for scores in self.raw_scores]
        if self.normalization == "per_puzzle":
            out = []
            for scores in self.raw_scores:
                values = list(scores.values())
                lo, hi = (min(values), max(values)) if values else (0.0, 0.0)
                out.append(_rescale(scores, lo, hi))
            return out
        raise ValueError(f"unknown normalization {self.normalization!r}")


def _rescale(scores: Dict[str, float], lo: float, hi: float) -> Dict[str, float]:
    if hi <= lo:
        return {sq: 0.0 for sq in scores}
    return {sq: (v - lo) / (hi - lo) for sq, v in scores.items()}


def auc_from_points(points: Sequence[Tuple[float, float]]) -> float:
    """Trapezoidal area under (fpr, tpr) points sorted by fpr."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_curve(scored: Sequence[Tuple[float, bool]]) -> RocReport:
    """ROC from (score, is_positive) pairs.

    Thresholds sweep the distinct score values from high to low; items with
    equal scores enter at a single step, which makes the area equal to the
    rank statistic (ties counted half).  Raises EvaluationError when either
    class is empty.
    """
    n_pos = sum(1 for _, label in scored if label)
    n_neg = len(scored) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError(
            f"AUC undefined: {n_pos} positive and {n_neg} negative squares"
        )
    by_score: Dict[float, List[int]] = {}
    for score, label in scored:
        counts = by_score.setdefault(score, [0, 0])
        counts[0 if label else 1] += 1
    points = [(0.0, 0.0)]
    tp = fp = 0
    for score in sorted(by_score, reverse=True):
        pos, neg = by_score[score]
        tp += pos
        fp += neg
        points.append((fp / n_neg, tp / n_pos))
    return RocReport(points=tuple(points), auc=auc_from_points(points), n_pos=n_pos, n_neg=n_neg)


def _labeled_squares(entry: SaliencyDatasetEntry) -> List[Tuple[str, bool]]:
    """(square, is_salient) for every occupied non-king square."""
    pos = entry.position()
    out = []
    for sq in range(64):
        piece = pos.piece_at(sq)
        if piece is None or piece in ("K", "k"):
            continue
        name = square_name(sq)
        out.append((name, name in entry.salient_squares))
    return out


def roc(run: MethodRun, entries: Sequence[SaliencyDatasetEntry]) -> RocReport:
    """ROC over every labeled square of the puzzles the run scored.

    Squares the run skipped (or never scored) count as score 0.
    """
    normalized = run.normalized_scores()
    scored: List[Tuple[float, bool]] = []
    for scores, idx in zip(normalized, run.puzzle_indices):
        for square, label in _labeled_squares(entries[idx]):
            scored.append((scores.get(square, 0.0), label))
    return roc_curve(scored)


def _session_factory(oracle) -> Callable[[], OracleSession]:
    if callable(oracle):
        return oracle
    return lambda: open_session(oracle)


def score_dataset(
    entries: Sequence[SaliencyDatasetEntry],
    oracle,
    method: str = "sarfa",
    combiner: Combiner = Combiner.HARMONIC,
    workers: int = 1,
    temperature: float = 1.0,
    normalization: str = "global",
    resume_path: Optional[str] = None,
    on_progress: Optional[Callable[[int, int], None]] = None,
) -> MethodRun:
    """Run one method over every puzzle, collecting raw per-square scores.

    ``oracle`` is an OracleConfig, or a zero-argument callable returning a
    fresh session (one per worker).  Per-puzzle oracle failures are logged
    into ``n_skipped`` and excluded; a failure to even open a session
    propagates.  With ``resume_path`` the per-puzzle results are appended
    to a JSON Lines file as they complete and already-present puzzles are
    not recomputed.
    """
    combiner = Combiner(combiner)
    done: Dict[int, Tuple[Dict[str, float], Dict[str, str]]] = {}
    if resume_path is not None:
        done = _load_resume(resume_path)
    lock = threading.Lock()

    def run_puzzle(session: OracleSession, idx: int):
        if idx in done:
            return done[idx]
        entry = entries[idx]
        try:
            breakdowns = compute_board_saliency(
                entry.position(),
                entry.best_move,
                session.evaluate,
                method=method,
                combiner=combiner,
                temperature=temperature,
            )
        except Exception as exc:
            return exc
        scores = {sq: b.score for sq, b in breakdowns.items()}
        statuses = {sq: b.status.value for sq, b in breakdowns.items()}
        if resume_path is not None:
            record = json.dumps(
                {"puzzle": idx, "scores": scores, "statuses": statuses}, sort_keys=True
            )
            with lock:
                with open(resume_path, "a", encoding="utf-8") as handle:
                    handle.write(record + "\n")
        if on_progress is not None:
            with lock:
                on_progress(idx, len(entries))
        return scores, statuses

    with SessionPool(_session_factory(oracle), workers) as pool:
        outcomes = pool.map(run_puzzle, list(range(len(entries))))

    run = MethodRun(
        method=method,
        combiner=combiner.value,
        raw_scores=[],
        statuses=[],
        puzzle_indices=[],
        normalization=normalization,
    )
    for idx, outcome in enumerate(outcomes):
        if isinstance(outcome, Exception):
            run.n_skipped += 1
            continue
        scores, statuses = outcome
        run.raw_scores.append(scores)
        run.statuses.append(statuses)
        run.puzzle_indices.append(idx)
    return run


def _load_resume(path: str) -> Dict[int, Tuple[Dict[str, float], Dict[str, str]]]:
    done: Dict[int, Tuple[Dict[str, float], Dict[str, str]]] = {}
    try:
        handle = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        return done
    with handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            done[int(record["puzzle"])] = (record["scores"], record.get("statuses", {}))
    return done


ABLATION_VARIANTS: Tuple[Tuple[str, Combiner], ...] = (
    ("sarfa", Combiner.HARMONIC),
    ("sarfa", Combiner.DP_ONLY),
    ("sarfa", Combiner.K_ONLY),
    ("sarfa", Combiner.ARITHMETIC_MEAN),
    ("sarfa", Combiner.GEOMETRIC_MEAN),
    ("sarfa", Combiner.MINIMUM),
    ("iyer", Combiner.HARMONIC),
    ("greydanus_policy", Combiner.HARMONIC),
    ("greydanus_value", Combiner.HARMONIC),
)


@dataclass(frozen=True)
class AblationRow:
    method: str
    combiner: str
    auc: float
    n_puzzles: int
    n_skipped: int


def ablation(
    entries: Sequence[SaliencyDatasetEntry],
    oracle,
    workers: int = 1,
    temperature: float = 1.0,
    normalization: str = "global",
) -> List[AblationRow]:
    """AUC per score variant, sorted best first.

    The variants all consume identical Q profiles, so the oracle is
    wrapped in a shared cache: the engine is consulted once per position,
    not once per variant.
    """
    oracle = CachingOracle(oracle)
    rows = []
    for method, combiner in ABLATION_VARIANTS:
        run = score_dataset(
            entries,
            oracle,
            method=method,
            combiner=combiner,
            workers=workers,
            temperature=temperature,
            normalization=normalization,
        )
        report = roc(run, entries)
        rows.append(
            AblationRow(
                method=method,
                combiner=combiner.value if method == "sarfa" else "",
                auc=report.auc,
                n_puzzles=len(run.puzzle_indices),
                n_skipped=run.n_skipped,
            )
        )
    rows.sort(key=lambda row: (-row.auc, row.method, row.combiner))
    return rows


ROBUSTNESS_MODES = ("human_nonsalient", "sarfa_nonsalient")


def perturb_dataset(
    entries: Sequence[SaliencyDatasetEntry],
    seed: int,
    mode: str = "human_nonsalient",
    oracle=None,
    workers: int = 1,
    nonsalient_threshold: float = 0.0,
) -> Tuple[List[SaliencyDatasetEntry], int]:
    """One random non-salient piece removed from each puzzle.

    ``human_nonsalient`` draws from squares outside the expert labels;
    ``sarfa_nonsalient`` draws from squares the scorer itself put at or
    below ``nonsalient_threshold`` (falling back to its lowest-scored
    square).  Candidates are limited to removals that keep the position
    valid and the puzzle's move legal; puzzles with no candidate are
    dropped, and the skip count is returned alongside.
    """
    if mode not in ROBUSTNESS_MODES:
        raise ValueError(f"unknown robustness mode {mode!r}")
    rng = random.Random(seed)

    sarfa_scores: Optional[MethodRun] = None
    scored_by_index: Dict[int, Dict[str, float]] = {}
    if mode == "sarfa_nonsalient":
        if oracle is None:
            raise ValueError("sarfa_nonsalient mode needs an oracle to pre-score the dataset")
        sarfa_scores = score_dataset(entries, oracle, method="sarfa", workers=workers)
        scored_by_index = dict(zip(sarfa_scores.puzzle_indices, sarfa_scores.raw_scores))

    perturbed: List[SaliencyDatasetEntry] = []
    skipped = 0
    for idx, entry in enumerate(entries):
        pos = entry.position()
        removable = {}
        for perturbation, new_pos in enumerate_perturbations(pos):
            if entry.best_move in legal_moves(new_pos):
                removable[perturbation.square] = new_pos
        if mode == "human_nonsalient":
            candidates = sorted(sq for sq in removable if sq not in entry.salient_squares)
        else:
            scores = scored_by_index.get(idx)
            if scores is None:
                skipped += 1
                continue
            low = sorted(
                sq for sq in removable if scores.get(sq, 0.0) <= nonsalient_threshold
            )
            if not low and removable:
                floor = min(scores.get(sq, 0.0) for sq in removable)
                low = sorted(sq for sq in removable if scores.get(sq, 0.0) <= floor)
            candidates = low
        if not candidates:
            skipped += 1
            continue
        chosen = rng.choice(candidates)
        new_pos = removable[chosen]
        perturbed.append(
            SaliencyDatasetEntry(
                fen=emit_fen(new_pos),
                best_move=entry.best_move,
                salient_squares=frozenset(sq for sq in entry.salient_squares if sq != chosen),
                expert_labels=None,
            )
        )
    return perturbed, skipped


def robustness(
    entries: Sequence[SaliencyDatasetEntry],
    oracle,
    seed: int,
    mode: str = "human_nonsalient",
    workers: int = 1,
    normalization: str = "global",
) -> Tuple[float, float, int]:
    """(auc_before, auc_after, n_puzzles_skipped) for one removal mode.

    The before-run, the scorer's own non-salient labeling, and the
    after-run share one evaluation cache, so each distinct position costs
    one oracle call.
    """
    oracle = CachingOracle(oracle)
    run_before = score_dataset(
        entries, oracle, method="sarfa", workers=workers, normalization=normalization
    )
    auc_before = roc(run_before, entries).auc
    perturbed, skipped = perturb_dataset(
        entries, seed=seed, mode=mode, oracle=oracle, workers=workers
    )
    if not perturbed:
        raise EvaluationError("no puzzle survived the robustness perturbation")
    run_after = score_dataset(
        perturbed, oracle, method="sarfa", workers=workers, normalization=normalization
    )
    auc_after = roc(run_after, perturbed).auc
    return auc_before, auc_after, skipped
