"""Pipeline configuration.

A single flat key/value file (TOML or JSON) feeds :class:`PipelineConfig`.
Command-line flags override file values, which override the defaults below.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


PATH_KEYS = ("input", "features", "detections", "scores", "histograms", "flows", "weights_file", "out")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    speedup: float = 10.0
    spf: int = 2
    weight_low: float = 0.1
    weight_high: float = 1.0
    tau: float = 1e-3

    # semantics
    min_segment_length: int = 50
    profile_window: int = 51
    speedup_min: float = 2.0
    speedup_cap_factor: float = 10.0

    # descriptor / motion
    flow_block: int = 8
    flow_radius: int = 7
    cdc_window: int = 31
    normalize_blocks: bool = False

    # appearance cost
    color_bins: int = 32

    # instability metric
    instability_window: int = 4

    # inputs / outputs
    input: Optional[str] = None
    features: Optional[str] = None
    detections: Optional[str] = None
    scores: Optional[str] = None
    histograms: Optional[str] = None
    flows: Optional[str] = None
    weights_file: Optional[str] = None
    out: Optional[str] = None
    export_frames: bool = False
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.speedup > 1:
            raise ConfigError("speed-up must exceed 1")
        if int(self.spf) != self.spf or self.spf < 1:
            raise ConfigError("spf must be an integer >= 1")
        if not 0 < self.weight_low <= self.weight_high:
            raise ConfigError("weights must satisfy 0 < low <= high")
        if not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.min_segment_length < 1:
            raise ConfigError("min_segment_length must be >= 1")
        for name in ("profile_window", "cdc_window"):
            w = getattr(self, name)
            if w < 1 or w % 2 == 0:
                raise ConfigError(f"{name} must be a positive odd integer")
        if self.flow_block < 4:
            raise ConfigError("flow_block must be >= 4 px")
        if self.color_bins < 1:
            raise ConfigError("color_bins must be >= 1")
        if self.instability_window < 2:
            raise ConfigError("instability_window must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with the non-None entries of ``overrides`` applied."""
        given = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(given) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **given)


def load_config(path: str | Path | None = None, **overrides: Any) -> PipelineConfig:
    """Read a TOML/JSON config file (optional) and apply overrides on top."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw = path.read_bytes()
        if path.suffix.lower() == ".json":
            values = json.loads(raw.decode("utf-8"))
        else:
            values = tomllib.loads(raw.decode("utf-8"))
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a flat key/value table")
        # allow "weights = [lo, hi]" as in the CLI flag
        if "weights" in values:
            lo, hi = values.pop("weights")
            values.setdefault("weight_low", lo)
            values.setdefault("weight_high", hi)
        # relative paths in a config file are relative to that file
        for key in PATH_KEYS:
            if isinstance(values.get(key), str) and not Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base = PipelineConfig(**values)
    return base.updated(**overrides)
