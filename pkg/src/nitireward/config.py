"""Service and CLI configuration.

Sources in increasing precedence: TOML file, NITIREWARD_* environment
variables, command-line flags. Upstream URLs are optional — leaving one
unset selects the matching deterministic mock (hash embedder, rule judge,
byte-heuristic token counter).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # py3.10
    import tomli as tomllib

from .answers import RewardMode
from .embedding import HeadWeights
from .structured import BlockOrder

ENV_PREFIX = "NITIREWARD_"

_ORDERS = {
    "reasoning-answer-citation": BlockOrder.REASONING_ANSWER_CITATION,
    "reasoning-citation-answer": BlockOrder.REASONING_CITATION_ANSWER,
}


class ConfigError(ValueError):
    pass


@dataclass
class ServiceConfig:
    mode: str = "semantic"
    dense_weight: float = 0.4
    sparse_weight: float = 0.2
    late_weight: float = 0.4
    budget: int = 8192
    top_k: int = 10
    group_size: int = 10
    clip_epsilon: float = 0.2
    kl_beta: float = 0.0
    std_floor: float = 1e-8
    order: str = "reasoning-answer-citation"
    embedder_url: str | None = None
    judge_url: str | None = None
    tokenizer_url: str | None = None
    listen: str = "127.0.0.1:8080"
    max_in_flight: int = 8
    coverage_template_path: str | None = None
    contradiction_template_path: str | None = None

    def reward_mode(self) -> RewardMode:
        try:
            return RewardMode.parse(self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def head_weights(self) -> HeadWeights:
        w = HeadWeights(self.dense_weight, self.sparse_weight, self.late_weight)
        try:
            w.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return w

    def block_order(self) -> BlockOrder:
        try:
            return _ORDERS[self.order]
        except KeyError:
            raise ConfigError(
                f"unknown block order {self.order!r}; expected one of {sorted(_ORDERS)}"
            ) from None

    def listen_host_port(self) -> tuple[str, int]:
        host, _, port = self.listen.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"listen address must be host:port, got {self.listen!r}")
        return host, int(port)

    def validate(self) -> "ServiceConfig":
        self.reward_mode()
        self.head_weights()
        self.block_order()
        self.listen_host_port()
        if self.budget < 1 or self.top_k < 1:
            raise ConfigError("budget and top_k must be positive")
        if self.group_size < 2:
            raise ConfigError("group_size must be at least 2")
        if self.clip_epsilon <= 0:
            raise ConfigError("clip_epsilon must be positive")
        if self.kl_beta < 0 or self.std_floor <= 0:
            raise ConfigError("kl_beta must be >= 0 and std_floor > 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be at least 1")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(ServiceConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind in ("int",):
        return int(raw)
    if kind in ("float",):
        return float(raw)
    return raw


def load_config(
    path: str | Path | None = None,
    env: dict[str, str] | None = None,
    overrides: dict | None = None,
) -> ServiceConfig:
    """Build a config from file < env < explicit overrides."""
    values: dict = {}

    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML in {path}: {exc}") from exc
        for key, value in data.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            values[key] = value

    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            try:
                values[name] = _coerce(name, env[env_key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {env_key}: {exc}") from exc

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config override {key!r}")
        values[key] = value

    try:
        cfg = ServiceConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()
