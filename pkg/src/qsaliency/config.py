"""Run configuration merged from flags, environment, config file, defaults.

Precedence: flag > environment > config file > built-in default.  The
resolved configuration is serialized into every result file so a report
always records exactly how it was produced.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from typing import Any, Dict, Mapping, Optional

from .gateway import (
    DEFAULT_DEPTH,
    DEFAULT_MATE_BASE,
    DEFAULT_MULTIPV,
    DEFAULT_Q_CAP,
    DEFAULT_Q_SCALE,
    DEFAULT_TIMEOUT,
    ENGINE_PATH_ENV,
    OracleConfig,
)

SCHEMA_VERSION = 1


def default_workers() -> int:
    return min(os.cpu_count() or 1, 8)


_DEFAULT_WORKERS = default_workers()


@dataclass
class RunConfig:
    engine: str = ""
    agent_cmd: str = ""
    depth: int = DEFAULT_DEPTH
    movetime_ms: int = 0  # 0 means "use depth"
    multipv: int = DEFAULT_MULTIPV
    q_scale: float = DEFAULT_Q_SCALE
    q_cap: float = DEFAULT_Q_CAP
    mate_base: float = DEFAULT_MATE_BASE
    timeout: float = DEFAULT_TIMEOUT
    temperature: float = 1.0
    method: str = "sarfa"
    combiner: str = "harmonic"
    seed: Optional[int] = None
    workers: int = _DEFAULT_WORKERS
    normalization: str = "global"
    sigma_blur: float = 3.0
    sigma_mask: float = 5.0
    stride: int = 5

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def engine_oracle(self) -> OracleConfig:
        if not self.engine:
            from .gateway import SpawnError

            raise SpawnError(
                f"no engine configured: pass --engine or set ${ENGINE_PATH_ENV}"
            )
        limit = ("movetime_ms", self.movetime_ms) if self.movetime_ms else ("depth", self.depth)
        return OracleConfig.for_engine(
            self.engine,
            search_limit=limit,
            multipv=self.multipv,
            q_scale=self.q_scale,
            q_cap=self.q_cap,
            mate_base=self.mate_base,
            timeout=self.timeout,
        )

    def agent_oracle(self) -> OracleConfig:
        if not self.agent_cmd:
            raise ValueError("no agent configured: pass --agent-cmd")
        return OracleConfig.for_agent(self.agent_cmd, timeout=self.timeout)


_ENV_KEYS = {"engine": ENGINE_PATH_ENV}

_FIELD_TYPES = {name: field.type for name, field in RunConfig.__dataclass_fields__.items()}


def _coerce(key: str, value: Any) -> Any:
    kind = _FIELD_TYPES[key]
    if value is None:
        return None
    if kind in ("int", "Optional[int]"):
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def resolve_config(
    flags: Mapping[str, Any],
    env: Optional[Mapping[str, str]] = None,
    config_path: Optional[str] = None,
) -> RunConfig:
    """Merge sources in precedence order into a RunConfig.

    ``flags`` holds only the values the user actually passed (drop Nones
    before calling).  The config file is one flat JSON object keyed by
    flag name.
    """
    env = os.environ if env is None else env
    merged: Dict[str, Any] = {}

    if config_path:
        with open(config_path, "r", encoding="utf-8") as handle:
            file_values = json.load(handle)
        if not isinstance(file_values, dict):
            raise ValueError(f"{config_path}: config file must hold one JSON object")
        for key, value in file_values.items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"{config_path}: unknown config key {key!r}")
            merged[key] = _coerce(key, value)

    for key, env_name in _ENV_KEYS.items():
        if env.get(env_name):
            merged[key] = _coerce(key, env[env_name])

    for key, value in flags.items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        if value is not None:
            merged[key] = _coerce(key, value)

    return RunConfig(**merged)
