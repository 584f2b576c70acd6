"""Server configuration: config file, environment, CLI flags.

Precedence, highest first: CLI flags, then VISOR_* environment variables,
then the key=value config file, then defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ValidationError

ENV_PORT = "VISOR_PORT"
ENV_DATA_DIR = "VISOR_DATA_DIR"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 55555
    data_dir: str = "visor-data"
    max_message_mib: int = 256
    workers: int = 4
    # Indexes created at startup, "Class.Property" entries; there is no wire
    # verb for index creation.
    indexes: tuple = field(default_factory=tuple)

    @property
    def max_message_bytes(self) -> int:
        return self.max_message_mib * 1024 * 1024


_INT_KEYS = {"port", "max_message_mib", "workers"}


def parse_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(
    config_file=None, env=None, **overrides
) -> ServerConfig:
    """Build a ServerConfig; `overrides` are pre-parsed CLI values (None
    means not given)."""
    env = os.environ if env is None else env
    values: dict = {}

    if config_file:
        values.update(parse_config_file(config_file))
    if ENV_PORT in env:
        values["port"] = env[ENV_PORT]
    if ENV_DATA_DIR in env:
        values["data_dir"] = env[ENV_DATA_DIR]
    for key, value in overrides.items():
        if value is not None:
            values[key] = value

    cfg = ServerConfig()
    for key, value in values.items():
        if key == "indexes":
            if isinstance(value, str):
                value = tuple(v for v in (p.strip() for p in value.split(",")) if v)
            cfg.indexes = tuple(value)
            continue
        if not hasattr(cfg, key):
            raise ValidationError(f"unknown config key {key!r}")
        if key in _INT_KEYS:
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise ValidationError(f"config key {key!r} must be an integer")
        setattr(cfg, key, value)

    if not 0 <= cfg.port <= 65535:
        raise ValidationError(f"port {cfg.port} out of range")
    if cfg.workers < 1:
        raise ValidationError("workers must be >= 1")
    if cfg.max_message_mib < 1:
        raise ValidationError("max_message_mib must be >= 1")
    for entry in cfg.indexes:
        if "." not in entry:
            raise ValidationError(f"index spec {entry!r} is not Class.Property")
    return cfg
