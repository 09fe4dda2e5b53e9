"""Run configuration: one flat JSON file overriding every default.

Unknown keys are rejected up front; command-line flags win over the
file, the file wins over the built-in defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

__all__ = ["RunConfig", "load_config", "ConfigError"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # dataset
    scenes: int = 40
    width: int = 64
    height: int = 64
    seed: int = 0
    flow_cap: float = 6.0
    ladder_len: int = 11
    t_min: float = 1.0 / 32.0
    t_max: float = 4.0
    # sensor
    full_well: float = 1000.0
    read_sigma: float = 0.01
    gamma: float = 1.0 / 2.2
    m_max: int = 255
    # metric normalization
    psnr_lo: float = 10.0
    psnr_hi: float = 50.0
    # predictor
    channels: int = 32
    squeeze_ratio: int = 8
    fusion_repeats: int = 3
    crop: int = 64
    # training
    lr: float = 1e-3
    epochs: int = 20
    batch: int = 8

    def validate(self) -> None:
        checks = [
            (self.scenes >= 1, "scenes must be >= 1"),
            (self.width >= 16 and self.height >= 16, "width/height must be >= 16"),
            (self.flow_cap > 0, "flow_cap must be positive"),
            (self.ladder_len >= 1, "ladder_len must be >= 1"),
            (0 < self.t_min < self.t_max, "require 0 < t_min < t_max"),
            (self.full_well > 0, "full_well must be positive"),
            (self.read_sigma >= 0, "read_sigma must be >= 0"),
            (0 < self.gamma <= 1, "gamma must be in (0, 1]"),
            (self.m_max >= 1, "m_max must be >= 1"),
            (self.psnr_hi > self.psnr_lo, "require psnr_hi > psnr_lo"),
            (self.channels >= 1 and self.channels % self.squeeze_ratio == 0,
             "channels must be a positive multiple of squeeze_ratio"),
            (self.fusion_repeats >= 1, "fusion_repeats must be >= 1"),
            (self.crop >= 64 and self.crop % 16 == 0, "crop must be a multiple of 16, >= 64"),
            (self.lr > 0, "lr must be positive"),
            (self.epochs >= 1, "epochs must be >= 1"),
            (self.batch >= 1, "batch must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = replace(cfg, **payload)
    cfg.validate()
    return cfg
