"""Command-line surface: explain positions and frames, run evaluations.

Exit codes: 0 success, 2 invalid input, 3 engine/agent failure, 4 I/O
failure.  Every output file embeds the resolved run configuration and a
schema version; with a deterministic oracle and fixed seed, repeated runs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Any, Dict, List, Optional

from . import render
from .chess.board import FenError, IllegalMoveError, legal_moves, parse_fen
from .chess.dataset import (
    DatasetError,
    SaliencyDatasetEntry,
    load_dataset,
    majority_vote,
    save_dataset,
)
from .chess.perturb import METHODS, SelectedActionNotEvaluated, compute_board_saliency
from .config import SCHEMA_VERSION, RunConfig, resolve_config
from .core import Combiner
from .evaluation import (
    ROBUSTNESS_MODES,
    EvaluationError,
    ablation,
    robustness,
    roc,
    score_dataset,
)
from .gateway import OracleError, open_session
from .image import (
    BlurSpec,
    compute_frame_saliency,
    read_pgm,
    upsample_bilinear,
    write_pgm,
)

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_ENGINE_FAILURE = 3
EXIT_IO_FAILURE = 4


class InputError(Exception):
    """User-supplied input was invalid (exit 2)."""


def _report(config: RunConfig, body: Dict[str, Any]) -> str:
    document = {"schema": SCHEMA_VERSION, "config": config.as_dict()}
    document.update(body)
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def _provenance(config: RunConfig) -> str:
    """One-line provenance stamp embedded in non-JSON outputs."""
    return json.dumps(
        {"schema": SCHEMA_VERSION, "config": config.as_dict()}, sort_keys=True
    )


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _breakdown_record(breakdown) -> Dict[str, Any]:
    return {
        "score": breakdown.score,
        "status": breakdown.status.value,
        "delta_p": breakdown.delta_p,
        "kl": breakdown.kl,
        "k_sim": breakdown.k_sim,
    }


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--engine", help="UCI engine command (overrides $QSALIENCY_ENGINE)")
    parser.add_argument("--depth", type=int, help="fixed search depth (default 12)")
    parser.add_argument("--movetime-ms", dest="movetime_ms", type=int, help="search time per position")
    parser.add_argument("--multipv", type=int, help="how many moves the engine scores (default 10)")
    parser.add_argument("--timeout", type=float, help="protocol timeout in seconds")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (flag names as keys)")
    parser.add_argument("--method", choices=METHODS, help="scoring method (default sarfa)")
    parser.add_argument(
        "--combiner",
        choices=[c.value for c in Combiner],
        help="specificity/relevance combiner (default harmonic)",
    )
    parser.add_argument("--temperature", type=float, help="softmax temperature for baselines")
    parser.add_argument("--workers", type=int, help="parallel oracle sessions")
    parser.add_argument(
        "--normalization",
        choices=["global", "per_puzzle"],
        help="score rescaling scope for ROC (default global)",
    )


def _flags_dict(args: argparse.Namespace) -> Dict[str, Any]:
    keys = RunConfig.__dataclass_fields__.keys()
    return {k: v for k, v in vars(args).items() if k in keys and v is not None}


def _resolve(args: argparse.Namespace) -> RunConfig:
    return resolve_config(_flags_dict(args), config_path=getattr(args, "config", None))


def cmd_explain_chess(args: argparse.Namespace) -> int:
    config = _resolve(args)
    try:
        pos = parse_fen(args.fen)
    except FenError as exc:
        raise InputError(f"bad FEN: {exc}") from exc
    if args.move and args.move not in legal_moves(pos):
        raise InputError(f"move {args.move!r} is not legal in this position")

    with open_session(config.engine_oracle()) as session:
        q_orig = session.evaluate(args.fen)
        move = args.move or max(q_orig.entries, key=lambda e: e[1])[0]
        try:
            breakdowns = compute_board_saliency(
                pos,
                move,
                session.evaluate,
                method=config.method,
                combiner=Combiner(config.combiner),
                temperature=config.temperature,
            )
        except SelectedActionNotEvaluated as exc:
            raise InputError(str(exc)) from exc

    scores = {sq: b.score for sq, b in breakdowns.items()}
    if config.method != "sarfa" and scores:
        lo, hi = min(scores.values()), max(scores.values())
        scores = {sq: (0.0 if hi <= lo else (v - lo) / (hi - lo)) for sq, v in scores.items()}
    for out in args.out or []:
        if out.endswith(".svg"):
            render.save_chess_svg(out, render.chess_svg(pos, scores), comment=_provenance(config))
        elif out.endswith(".json"):
            body = {
                "fen": args.fen,
                "move": move,
                "method": config.method,
                "scores": {sq: _breakdown_record(b) for sq, b in sorted(breakdowns.items())},
            }
            _write_text(out, _report(config, body))
        else:
            raise InputError(f"unknown output format for {out!r} (use .svg or .json)")
    return EXIT_OK


def cmd_explain_frame(args: argparse.Namespace) -> int:
    config = _resolve(args)
    try:
        frame = read_pgm(args.pgm)
    except FileNotFoundError as exc:
        raise InputError(f"no such frame file: {args.pgm}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    spec = BlurSpec(sigma_blur=config.sigma_blur, sigma_mask=config.sigma_mask, stride=config.stride)

    with open_session(config.agent_oracle()) as session:
        try:
            grid = compute_frame_saliency(
                frame,
                args.action,
                session.evaluate_blob,
                spec=spec,
                combiner=Combiner(config.combiner),
            )
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    peak = float(grid.max())
    display = grid / peak if peak > 0 else grid
    for out in args.out or []:
        if out.endswith(".json"):
            body = {
                "frame": args.pgm,
                "action": args.action,
                "grid": [[float(v) for v in row] for row in grid],
                "grid_shape": list(grid.shape),
            }
            _write_text(out, _report(config, body))
        elif out.endswith(".pgm"):
            full = upsample_bilinear(display, frame.width, frame.height, spec.stride)
            write_pgm(out, render.overlay_to_gray(frame, full), comment=_provenance(config))
        elif out.endswith(".png"):
            full = upsample_bilinear(display, frame.width, frame.height, spec.stride)
            render.write_png(out, render.overlay_frame(frame, full), comment=_provenance(config))
        else:
            raise InputError(f"unknown output format for {out!r} (use .json, .pgm, or .png)")
    return EXIT_OK


def _load_entries(path: str) -> List[SaliencyDatasetEntry]:
    try:
        return load_dataset(path)
    except FileNotFoundError as exc:
        raise InputError(f"no such dataset: {path}") from exc
    except DatasetError as exc:
        raise InputError(str(exc)) from exc


def cmd_eval_auc(args: argparse.Namespace) -> int:
    config = _resolve(args)
    entries = _load_entries(args.dataset)
    run = score_dataset(
        entries,
        config.engine_oracle(),
        method=config.method,
        combiner=Combiner(config.combiner),
        workers=config.workers,
        temperature=config.temperature,
        normalization=config.normalization,
        resume_path=args.resume,
    )
    report = roc(run, entries)
    body = {
        "rows": [
            {
                "method": config.method,
                "combiner": config.combiner if config.method == "sarfa" else "",
                "auc": report.auc,
                "n_puzzles": len(run.puzzle_indices),
                "n_skipped": run.n_skipped,
            }
        ],
        "n_pos": report.n_pos,
        "n_neg": report.n_neg,
    }
    _write_outputs(args, config, body)
    if args.roc_csv:
        with open(args.roc_csv, "w", newline="", encoding="utf-8") as handle:
            handle.write("# " + _provenance(config) + "\n")
            writer = csv.writer(handle)
            writer.writerow(["fpr", "tpr"])
            for fpr, tpr in report.points:
                writer.writerow([repr(fpr), repr(tpr)])
    return EXIT_OK


def cmd_eval_ablation(args: argparse.Namespace) -> int:
    config = _resolve(args)
    entries = _load_entries(args.dataset)
    rows = ablation(
        entries,
        config.engine_oracle(),
        workers=config.workers,
        temperature=config.temperature,
        normalization=config.normalization,
    )
    body = {
        "rows": [
            {
                "method": row.method,
                "combiner": row.combiner,
                "auc": row.auc,
                "n_puzzles": row.n_puzzles,
                "n_skipped": row.n_skipped,
            }
            for row in rows
        ]
    }
    _write_outputs(args, config, body)
    return EXIT_OK


def cmd_eval_robustness(args: argparse.Namespace) -> int:
    config = _resolve(args)
    entries = _load_entries(args.dataset)
    modes = ROBUSTNESS_MODES if args.mode == "both" else (args.mode,)
    rows = []
    for mode in modes:
        auc_before, auc_after, skipped = robustness(
            entries,
            config.engine_oracle(),
            seed=config.seed,
            mode=mode,
            workers=config.workers,
            normalization=config.normalization,
        )
        rows.append(
            {
                "mode": mode,
                "auc_before": auc_before,
                "auc_after": auc_after,
                "n_puzzles_skipped": skipped,
            }
        )
    _write_outputs(args, config, {"rows": rows})
    return EXIT_OK


def cmd_dataset_build(args: argparse.Namespace) -> int:
    entries = []
    try:
        with open(args.raw_labels, "r", encoding="utf-8") as handle:
            raw_lines = handle.readlines()
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {args.raw_labels}") from exc
    for line_number, line in enumerate(raw_lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {line_number}: bad JSON: {exc}") from exc
        labels = record.get("expert_labels")
        if not isinstance(labels, list) or len(labels) != 3:
            raise InputError(f"line {line_number}: expected exactly 3 expert label sets")
        votes = majority_vote(tuple(frozenset(s) for s in labels))
        try:
            pos = parse_fen(record["fen"])
        except (KeyError, FenError) as exc:
            raise InputError(f"line {line_number}: bad fen: {exc}") from exc
        if record.get("best_move") not in legal_moves(pos):
            raise InputError(f"line {line_number}: best_move is not legal")
        entries.append(
            SaliencyDatasetEntry(
                fen=record["fen"],
                best_move=record["best_move"],
                salient_squares=votes,
                expert_labels=tuple(frozenset(s) for s in labels),
            )
        )
    save_dataset(args.out, entries)
    return EXIT_OK


def _write_outputs(args: argparse.Namespace, config: RunConfig, body: Dict[str, Any]) -> None:
    for out in args.out or []:
        if out.endswith(".json"):
            _write_text(out, _report(config, body))
        elif out.endswith(".csv"):
            with open(out, "w", newline="", encoding="utf-8") as handle:
                handle.write("# " + _provenance(config) + "\n")
                writer = csv.writer(handle)
                rows = body["rows"]
                writer.writerow(list(rows[0].keys()))
                for row in rows:
                    writer.writerow([row[k] for k in rows[0].keys()])
        else:
            raise InputError(f"unknown output format for {out!r} (use .json or .csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsaliency",
        description="Perturbation-based saliency maps for Q-value agents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain-chess", help="per-square saliency map for a chess move")
    p.add_argument("--fen", required=True)
    p.add_argument("--move", help="move to explain (UCI, e.g. e2e4); default: engine's best")
    p.add_argument("--out", action="append", help="output file (.svg or .json); repeatable")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=cmd_explain_chess)

    p = sub.add_parser("explain-frame", help="pixel-grid saliency map for a frame agent")
    p.add_argument("--pgm", required=True, help="input frame (binary PGM)")
    p.add_argument("--agent-cmd", dest="agent_cmd", required=True, help="agent command line")
    p.add_argument("--action", required=True, help="action id to explain")
    p.add_argument("--out", action="append", help="output file (.json, .pgm, .png); repeatable")
    p.add_argument("--sigma-blur", dest="sigma_blur", type=float)
    p.add_argument("--sigma-mask", dest="sigma_mask", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--timeout", type=float)
    _add_common_flags(p)
    p.set_defaults(handler=cmd_explain_frame)

    p = sub.add_parser("eval-auc", help="score a dataset and report ROC/AUC")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", action="append", help="report file (.json or .csv); repeatable")
    p.add_argument("--roc-csv", dest="roc_csv", help="write ROC points as CSV")
    p.add_argument("--resume", help="JSON Lines work file for resumable runs")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=cmd_eval_auc)

    p = sub.add_parser("eval-ablation", help="AUC for every method/combiner variant")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", action="append", help="report file (.json or .csv); repeatable")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=cmd_eval_ablation)

    p = sub.add_parser("eval-robustness", help="AUC before/after non-salient removals")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, required=True, help="RNG seed (reproducibility required)")
    p.add_argument("--mode", choices=list(ROBUSTNESS_MODES) + ["both"], default="both")
    p.add_argument("--out", action="append", help="report file (.json or .csv); repeatable")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=cmd_eval_robustness)

    p = sub.add_parser("dataset-build", help="majority-vote a raw 3-expert label file")
    p.add_argument("--raw-labels", dest="raw_labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_dataset_build)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except (FenError, IllegalMoveError, DatasetError, EvaluationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except OracleError as exc:
        print(f"engine failure: {exc}", file=sys.stderr)
        return EXIT_ENGINE_FAILURE
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO_FAILURE


if __name__ == "__main__":
    sys.exit(main())
