"""Uniform Q-value-oracle access to agents.

Three oracle kinds hide behind one ``evaluate(state) -> QProfile`` surface:

* ``uci``       -- a chess engine spoken to over the UCI text protocol in a
                   child process, with MultiPV used to collect per-move
                   scores that are mapped onto a bounded Q scale;
* ``external``  -- any agent speaking a one-line-per-message protocol:
                   request ``EVAL <base64(state)>``, reply
                   ``QVALUES <action>:<float> ...`` or ``ERR <message>``;
* ``gridworld`` -- the built-in exactly-solved gridworld agent.

Sessions are single-threaded (one in-flight evaluate at a time); the
``SessionPool`` spawns one session per worker for parallel saliency runs.
"""

from __future__ import annotations

import base64
import os
import queue
import select
import shlex
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from .core import QProfile
from .gridworld import GridWorld, QTable, parse_state_token, q_profile, solve_gridworld

ENGINE_PATH_ENV = "QSALIENCY_ENGINE"

DEFAULT_MULTIPV = 10
DEFAULT_DEPTH = 12
DEFAULT_Q_SCALE = 1.0
DEFAULT_Q_CAP = 20.0
DEFAULT_MATE_BASE = 15.0
DEFAULT_TIMEOUT = 10.0


class OracleError(RuntimeError):
    """Base class for oracle session failures."""


class SpawnError(OracleError):
    """The agent process could not be started."""


class ProtocolError(OracleError):
    """The agent sent something the protocol does not allow."""


class EngineTimeout(OracleError):
    """The agent did not answer within the configured timeout."""


class TerminalStateError(OracleError):
    """The state has no legal actions; there is nothing to evaluate."""


@dataclass(frozen=True)
class EngineScore:
    """One UCI score line: the move plus either centipawns or mate distance."""

    move: str
    kind: str  # "cp" | "mate"
    value: int

    def __post_init__(self) -> None:
        if self.kind not in ("cp", "mate"):
            raise ValueError(f"bad score kind {self.kind!r}")
        if self.kind == "mate" and self.value == 0:
            raise ValueError("mate distance cannot be 0")


@dataclass(frozen=True)
class OracleConfig:
    """How to reach an agent and map its answers onto the Q scale.

    ``search_limit`` is (``mode``, ``amount``) where mode is ``depth`` or
    ``movetime_ms``.  The centipawn mapping is cp/100*q_scale clamped to
    +-mate_base; mate scores occupy (mate_base, q_cap], reciprocally closer
    to mate_base the deeper the mate, so any mate outranks any centipawn
    score, shallower mates outrank deeper ones, and every mapped q stays
    within [-q_cap, q_cap].
    """

    kind: str = "uci"  # "uci" | "external" | "gridworld"
    command: Tuple[str, ...] = ()
    search_limit: Tuple[str, int] = ("depth", DEFAULT_DEPTH)
    multipv: int = DEFAULT_MULTIPV
    q_scale: float = DEFAULT_Q_SCALE
    q_cap: float = DEFAULT_Q_CAP
    mate_base: float = DEFAULT_MATE_BASE
    timeout: float = DEFAULT_TIMEOUT
    threads: int = 1
    gridworld: Optional[GridWorld] = None
    gridworld_tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.kind not in ("uci", "external", "gridworld"):
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        mode, amount = self.search_limit
        if mode not in ("depth", "movetime_ms") or amount < 1:
            raise ValueError(f"bad search limit {self.search_limit!r}")
        if self.multipv < 1:
            raise ValueError("multipv must be >= 1")
        if self.q_scale <= 0 or self.q_cap <= 0 or self.mate_base <= 0:
            raise ValueError("q_scale, q_cap, and mate_base must be positive")
        if self.mate_base >= self.q_cap:
            raise ValueError("mate_base must be below q_cap to leave room for mate scores")
        if self.kind == "gridworld" and self.gridworld is None:
            raise ValueError("gridworld oracle needs a world")

    @classmethod
    def for_engine(cls, command: str, **kwargs) -> "OracleConfig":
        return cls(kind="uci", command=tuple(shlex.split(command)), **kwargs)

    @classmethod
    def for_agent(cls, command: str, **kwargs) -> "OracleConfig":
        return cls(kind="external", command=tuple(shlex.split(command)), **kwargs)

    @classmethod
    def for_gridworld(cls, world: GridWorld, **kwargs) -> "OracleConfig":
        return cls(kind="gridworld", gridworld=world, **kwargs)


def engine_command_from_env(flag_value: Optional[str] = None) -> Optional[str]:
    """Engine command resolution: explicit flag wins over the environment."""
    if flag_value:
        return flag_value
    return os.environ.get(ENGINE_PATH_ENV) or None


def score_to_q(score: EngineScore, config: OracleConfig) -> float:
    """Map an engine score onto the bounded Q scale; strictly monotone."""
    if score.kind == "cp":
        raw = score.value / 100.0 * config.q_scale
        return max(-config.mate_base, min(config.mate_base, raw))
    span = config.q_cap - config.mate_base
    magnitude = config.mate_base + span / abs(score.value)
    return magnitude if score.value > 0 else -magnitude


class _LineProcess:
    """A child process spoken to line-by-line with read timeouts."""

    def __init__(self, command: Sequence[str], timeout: float) -> None:
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnError(f"could not start {command!r}: {exc}") from exc
        self._buffer = ""

    def send(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise OracleError(f"agent process exited with code {self.proc.returncode}")
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"agent pipe broken: {exc}") from exc

    def read_line(self, timeout: Optional[float] = None) -> str:
        """Next full line (without newline); raises EngineTimeout."""
        limit = self.timeout if timeout is None else timeout
        fd = self.proc.stdout.fileno()
        while "\n" not in self._buffer:
            ready, _, _ = select.select([fd], [], [], limit)
            if not ready:
                raise EngineTimeout(f"no reply within {limit}s")
            chunk = os.read(fd, 65536).decode("utf-8", errors="replace")
            if not chunk:
                raise OracleError("agent closed its output stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split("\n", 1)
        return line.rstrip("\r")

    def close(self, goodbye: Optional[str] = None) -> None:
        if self.proc.poll() is None:
            try:
                if goodbye:
                    self.send(goodbye)
                self.proc.stdin.close()  # EOF tells line-loop agents to exit
                self.proc.wait(timeout=2.0)
            except Exception:
                self.proc.kill()
                self.proc.wait()
        try:
            self.proc.stdout.close()
        except Exception:
            pass


class OracleSession:
    """Common surface: evaluate states, then close."""

    def evaluate(self, state: str) -> QProfile:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self) -> "OracleSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class UciSession(OracleSession):
    """UCI engine client: handshake once, then evaluate FEN positions.

    Each evaluation issues ``position fen ...`` and ``go``, then keeps the
    last exact ``info ... multipv i ... score ... pv <move>`` line per
    MultiPV rank until ``bestmove`` arrives.  Moves beyond the configured
    MultiPV count are absent from the profile (documented truncation).
    """

    def __init__(self, config: OracleConfig) -> None:
        if not config.command:
            raise SpawnError("no engine command configured")
        self.config = config
        self.proc = _LineProcess(config.command, config.timeout)
        self._handshake()

    def _handshake(self) -> None:
        self.proc.send("uci")
        while True:
            line = self.proc.read_line()
            if line.strip() == "uciok":
                break
        self.proc.send(f"setoption name Threads value {self.config.threads}")
        self.proc.send(f"setoption name MultiPV value {self.config.multipv}")
        self.proc.send("isready")
        while True:
            if self.proc.read_line().strip() == "readyok":
                break

    def evaluate(self, state: str) -> QProfile:
        mode, amount = self.config.search_limit
        self.proc.send(f"position fen {state}")
        if mode == "depth":
            self.proc.send(f"go depth {amount}")
            # A fixed-depth search has no wall-clock bound; be generous.
            read_timeout = max(self.config.timeout, 600.0)
        else:
            self.proc.send(f"go movetime {amount}")
            read_timeout = self.config.timeout + amount / 1000.0

        by_rank: Dict[int, EngineScore] = {}
        while True:
            line = self.proc.read_line(read_timeout)
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "bestmove":
                if len(tokens) < 2 or tokens[1] in ("(none)", "0000"):
                    raise TerminalStateError(f"no legal moves in position {state!r}")
                break
            if tokens[0] == "info":
                parsed = _parse_info_line(tokens)
                if parsed is not None:
                    rank, score = parsed
                    by_rank[rank] = score
        if not by_rank:
            raise ProtocolError("engine sent bestmove without any scored info line")

        entries = []
        seen = set()
        for rank in sorted(by_rank):
            score = by_rank[rank]
            if score.move in seen:
                raise ProtocolError(f"duplicate move {score.move!r} across multipv ranks")
            seen.add(score.move)
            entries.append((score.move, score_to_q(score, self.config)))
        return QProfile(state, tuple(entries))

    def close(self) -> None:
        self.proc.close(goodbye="quit")


def _parse_info_line(tokens: List[str]) -> Optional[Tuple[int, EngineScore]]:
    """Extract (multipv rank, EngineScore) from an info line, if it has one.

    Lines without a score or pv (currmove chatter) and lines carrying only
    aspiration bounds (upperbound/lowerbound) return None.
    """
    if "upperbound" in tokens or "lowerbound" in tokens:
        return None
    rank = 1
    kind = None
    value = None
    move = None
    idx = 1
    while idx < len(tokens):
        tok = tokens[idx]
        if tok == "multipv" and idx + 1 < len(tokens):
            try:
                rank = int(tokens[idx + 1])
            except ValueError as exc:
                raise ProtocolError(f"bad multipv rank in {' '.join(tokens)!r}") from exc
            idx += 2
        elif tok == "score" and idx + 2 < len(tokens):
            kind = tokens[idx + 1]
            try:
                value = int(tokens[idx + 2])
            except ValueError as exc:
                raise ProtocolError(f"bad score in {' '.join(tokens)!r}") from exc
            idx += 3
        elif tok == "pv" and idx + 1 < len(tokens):
            move = tokens[idx + 1]
            break
        else:
            idx += 1
    if kind is None or move is None:
        return None
    if kind not in ("cp", "mate"):
        raise ProtocolError(f"unknown score kind {kind!r}")
    if kind == "mate" and value == 0:
        # "mate 0": game already over here; the bestmove line settles it.
        return None
    return rank, EngineScore(move=move, kind=kind, value=value)


class ExternalSession(OracleSession):
    """Generic line-protocol agent: EVAL in, QVALUES out."""

    def __init__(self, config: OracleConfig) -> None:
        if not config.command:
            raise SpawnError("no agent command configured")
        self.config = config
        self.proc = _LineProcess(config.command, config.timeout)

    def evaluate(self, state: str) -> QProfile:
        return self.evaluate_blob(state.encode("utf-8"))

    def evaluate_blob(self, state_blob: bytes) -> QProfile:
        payload = base64.b64encode(state_blob).decode("ascii")
        self.proc.send(f"EVAL {payload}")
        reply = self.proc.read_line()
        return parse_qvalues_reply(reply, state_id=payload[:32])

    def close(self) -> None:
        self.proc.close()


def parse_qvalues_reply(reply: str, state_id: str = "") -> QProfile:
    """Parse ``QVALUES <action>:<float> ...``; raise ProtocolError otherwise."""
    tokens = reply.split()
    if not tokens:
        raise ProtocolError("empty reply")
    if tokens[0] == "ERR":
        raise OracleError(f"agent error: {' '.join(tokens[1:])}")
    if tokens[0] != "QVALUES":
        raise ProtocolError(f"unexpected reply {reply!r}")
    if len(tokens) == 1:
        raise ProtocolError("QVALUES reply with no actions")
    entries = []
    seen = set()
    for tok in tokens[1:]:
        action, sep, raw = tok.rpartition(":")
        if not sep or not action:
            raise ProtocolError(f"malformed action token {tok!r}")
        if action in seen:
            raise ProtocolError(f"duplicate action {action!r} in reply")
        seen.add(action)
        try:
            q = float(raw)
        except ValueError as exc:
            raise ProtocolError(f"bad q value in {tok!r}") from exc
        entries.append((action, q))
    return QProfile(state_id, tuple(entries))


def format_qvalues_reply(entries: Iterable[Tuple[str, float]]) -> str:
    """Inverse of :func:`parse_qvalues_reply`, for agent implementations."""
    return "QVALUES " + " ".join(f"{action}:{q!r}" for action, q in entries)


class GridworldSession(OracleSession):
    """Exact-Q oracle over a solved gridworld; state tokens are ``x,y``."""

    def __init__(self, config: OracleConfig) -> None:
        if config.gridworld is None:
            raise ValueError("gridworld oracle needs a world")
        self.world = config.gridworld
        self.table: QTable = solve_gridworld(config.gridworld, config.gridworld_tolerance)

    def evaluate(self, state: str) -> QProfile:
        x, y = parse_state_token(state)
        return q_profile(self.world, self.table, x, y)


class FunctionSession(OracleSession):
    """Wrap any ``state -> QProfile`` callable as a session (tests, demos)."""

    def __init__(self, fn: Callable[[str], QProfile]) -> None:
        self.fn = fn

    def evaluate(self, state: str) -> QProfile:
        return self.fn(state)


class CachingOracle:
    """A session factory whose sessions share one evaluation cache.

    Evaluating the same state twice costs one oracle call: the ablation
    sweep scores nine method variants from identical Q profiles, and the
    robustness runs revisit every unperturbed position, so sharing a
    cache across those phases collapses most of the engine work.  The
    wrapped session only spawns its inner session on the first cache
    miss.  Only successful evaluations are cached; errors propagate and
    are retried on the next request.
    """

    def __init__(self, oracle) -> None:
        if callable(oracle):
            self._factory = oracle
        else:
            self._factory = lambda: open_session(oracle)
        self._cache: Dict[str, QProfile] = {}
        self._lock = threading.Lock()

    def __call__(self) -> "OracleSession":
        return _CachingSession(self._factory, self._cache, self._lock)

    def __len__(self) -> int:
        return len(self._cache)


class _CachingSession(OracleSession):
    def __init__(self, factory, cache, lock) -> None:
        self._factory = factory
        self._cache = cache
        self._lock = lock
        self._inner: Optional[OracleSession] = None

    def evaluate(self, state: str) -> QProfile:
        with self._lock:
            cached = self._cache.get(state)
        if cached is not None:
            return cached
        if self._inner is None:
            self._inner = self._factory()
        profile = self._inner.evaluate(state)
        with self._lock:
            self._cache[state] = profile
        return profile

    def close(self) -> None:
        if self._inner is not None:
            self._inner.close()


def open_session(config: OracleConfig) -> OracleSession:
    """Start a session of the configured kind, handshake complete."""
    if config.kind == "uci":
        return UciSession(config)
    if config.kind == "external":
        return ExternalSession(config)
    return GridworldSession(config)


T = TypeVar("T")
R = TypeVar("R")


class SessionPool:
    """One oracle session per worker, with exclusive leases.

    ``session_factory`` is called once per worker.  ``map`` preserves input
    order in its results regardless of scheduling, so runs with a
    deterministic oracle stay deterministic at any worker count.
    """

    def __init__(self, session_factory: Callable[[], OracleSession], workers: int = 1) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._sessions: "queue.Queue[OracleSession]" = queue.Queue()
        self._all: List[OracleSession] = []
        for _ in range(workers):
            session = session_factory()
            self._all.append(session)
            self._sessions.put(session)

    def map(self, fn: Callable[[OracleSession, T], R], items: Sequence[T]) -> List[R]:
        results: List[Optional[R]] = [None] * len(items)
        errors: List[Tuple[int, BaseException]] = []
        if self.workers == 1:
            session = self._sessions.get()
            try:
                for idx, item in enumerate(items):
                    results[idx] = fn(session, item)
            finally:
                self._sessions.put(session)
            return results  # type: ignore[return-value]

        work: "queue.Queue[Tuple[int, T]]" = queue.Queue()
        for idx, item in enumerate(items):
            work.put((idx, item))
        lock = threading.Lock()

        def worker() -> None:
            session = self._sessions.get()
            try:
                while True:
                    try:
                        idx, item = work.get_nowait()
                    except queue.Empty:
                        return
                    try:
                        result = fn(session, item)
                    except BaseException as exc:  # noqa: BLE001 - reported to caller
                        with lock:
                            errors.append((idx, exc))
                        return
                    results[idx] = result
            finally:
                self._sessions.put(session)

        threads = [threading.Thread(target=worker) for _ in range(self.workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            errors.sort(key=lambda pair: pair[0])
            raise errors[0][1]
        return results  # type: ignore[return-value]

    def close(self) -> None:
        for session in self._all:
            try:
                session.close()
            except Exception:
                pass

    def __enter__(self) -> "SessionPool":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
