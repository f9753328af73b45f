"""Pipeline configuration from a flat ``key = value`` file.

Example::

    schema_version = 1
    manifest = dumps.txt
    identity_mode = content
    workers = 4
    string_abs_threshold = 2
    role.exception = P2303

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .constraints import ConstraintType, RoleConfig
from .model import IdentityMode
from .updates import Thresholds

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    manifest: Path | None = None
    identity_mode: IdentityMode = IdentityMode.CONTENT
    thresholds: Thresholds = field(default_factory=Thresholds)
    roles: RoleConfig = field(default_factory=RoleConfig)
    workers: int = 1
    scratch: Path | None = None
    chunk_size: int = 200_000
    histogram_cap: int = 50
    types: tuple[ConstraintType, ...] = tuple(ConstraintType)
    instances: Path | None = None

    def check(self) -> "PipelineConfig":
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be at least 1")
        for name in ("manifest", "instances"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name}: {p} does not exist")
        return self

    def override(self, **changes) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def parse_types(text: str) -> tuple[ConstraintType, ...]:
    try:
        return tuple(ConstraintType(t.strip().lower()) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_SCALARS = {
    "workers": int, "chunk_size": int, "histogram_cap": int,
}
_THRESHOLDS = {
    "string_abs_threshold": ("string_abs", int),
    "string_rel_threshold": ("string_rel", float),
    "quantity_rel_threshold": ("quantity_rel", float),
}


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[kgq]\n" + path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values = dict(parser["kgq"])
    version = values.pop("schema_version", None)
    if version is None:
        raise ConfigError(f"{path}: missing schema_version")
    if version.strip() != str(SCHEMA_VERSION):
        raise ConfigError(f"{path}: unsupported schema_version {version}")

    base = path.parent
    cfg = PipelineConfig()
    roles: dict[str, str] = {}
    thresholds: dict = {}
    for key, raw in values.items():
        value = raw.strip()
        try:
            if key.startswith("role."):
                roles[key[len("role."):]] = value
            elif key in _THRESHOLDS:
                name, conv = _THRESHOLDS[key]
                thresholds[name] = conv(value)
            elif key in _SCALARS:
                setattr(cfg, key, _SCALARS[key](value))
            elif key in ("manifest", "scratch", "instances"):
                setattr(cfg, key, base / value)
            elif key == "identity_mode":
                cfg.identity_mode = IdentityMode(value)
            elif key == "types":
                cfg.types = parse_types(value)
            else:
                raise ConfigError(f"{path}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}: bad value for {key}: {value!r}") from None
    try:
        cfg.roles = RoleConfig.from_mapping(roles)
    except KeyError as exc:
        raise ConfigError(f"{path}: {exc.args[0]}") from None
    cfg.thresholds = Thresholds(**thresholds)
    return cfg.check()
