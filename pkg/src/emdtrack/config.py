"""Tracker settings and the ``key = value`` config-file dialect.

Files hold one setting per line; blank lines and ``#`` comments are
ignored.  Unknown keys, duplicates, bad types, and out-of-range values
all raise :class:`ConfigError` naming the offending line and key, so a
typo fails fast instead of silently tracking with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

KERNEL_CHOICES = ("normal", "epanechnikov", "uniform")


class ConfigError(ValueError):
    """Bad key, value, or syntax in a config file."""


@dataclass
class TrackerConfig:
    rank: int = 3
    bins: int = 8
    kernel: str = "normal"
    alpha: float = 2e-4
    max_pde_iters: int = 2000
    emd_window: int = 20
    area_change_limit: float = 0.10
    reinit_every: int = 50
    enlarge_factor: float = 1.2
    band_halfwidth: int = 6
    failure_error: float = 0.8
    failure_frames: int = 5
    emd_every: int = 1
    refine_first_frame: bool = False
    ms_bins: int = 16
    ms_max_iters: int = 10
    als_max_sweeps: int = 100
    als_tol: float = 1e-6
    beta: float | None = None
    clip_descriptors: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.rank >= 1, "rank must be at least 1"),
            (self.bins >= 1, "bins must be at least 1"),
            (self.kernel in KERNEL_CHOICES,
             f"kernel must be one of {', '.join(KERNEL_CHOICES)}"),
            (self.alpha >= 0, "alpha must be nonnegative"),
            (self.max_pde_iters >= 1, "max_pde_iters must be at least 1"),
            (self.emd_window >= 2, "emd_window must be at least 2"),
            (0 < self.area_change_limit < 1,
             "area_change_limit must lie in (0, 1)"),
            (self.reinit_every >= 1, "reinit_every must be at least 1"),
            (self.enlarge_factor > 0, "enlarge_factor must be positive"),
            (self.band_halfwidth >= 2, "band_halfwidth must be at least 2"),
            (0 < self.failure_error < 1,
             "failure_error must lie in (0, 1)"),
            (self.failure_frames >= 1, "failure_frames must be at least 1"),
            (self.emd_every >= 1, "emd_every must be at least 1"),
            (self.ms_bins >= 2, "ms_bins must be at least 2"),
            (self.ms_max_iters >= 1, "ms_max_iters must be at least 1"),
            (self.als_max_sweeps >= 1, "als_max_sweeps must be at least 1"),
            (self.als_tol > 0, "als_tol must be positive"),
            (self.beta is None or self.beta > 0,
             "beta must be positive when given"),
            (self.seed >= 0, "seed must be nonnegative"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


@dataclass
class SequenceSpec:
    """Where a run reads its frames and writes its results."""

    frames: str
    frame_start: int
    frame_end: int
    ref_image: str
    ref_mask: str
    output_dir: str
    truth: str | None = None

    def __post_init__(self):
        if self.frame_end < self.frame_start:
            raise ConfigError("frame_end must not precede frame_start")

    def frame_path(self, index: int) -> str:
        return self.frames % index

    def truth_path(self, index: int) -> str | None:
        return None if self.truth is None else self.truth % index


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_value(name: str, kind, raw: str):
    if kind is bool:
        return _parse_bool(raw)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if name == "beta":
        return None if raw.lower() == "none" else float(raw)
    return raw


_FIELD_TYPES = {
    f.name: (bool if f.type == "bool" else
             int if f.type == "int" else
             float if f.type == "float" else
             None)
    for f in fields(TrackerConfig)
}


def parse_config_text(text: str, source: str = "<config>") -> TrackerConfig:
    """Build a :class:`TrackerConfig` from ``key = value`` lines."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown setting {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate setting {key!r}")
        if not raw:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            values[key] = _parse_value(key, _FIELD_TYPES[key], raw)
        except ValueError as exc:
            raise ConfigError(
                f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return TrackerConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> TrackerConfig:
    text = Path(path).read_text()
    return parse_config_text(text, source=str(path))


def serialize_config(cfg: TrackerConfig) -> str:
    """Text form that :func:`parse_config_text` maps back to ``cfg``."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            rendered = "none"
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def save_config(path, cfg: TrackerConfig) -> None:
    Path(path).write_text(serialize_config(cfg))


def config_with(cfg: TrackerConfig, **overrides) -> TrackerConfig:
    """Copy with selected fields replaced (validation re-runs)."""
    return dataclasses.replace(cfg, **overrides)
