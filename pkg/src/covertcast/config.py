"""Experiment configuration: JSON schema, validation, defaults and provenance hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .channels import BroadcastChannel, ChannelError, channel_from_spec
from .covert import Schedule

MODES = ("reliability", "covertness_exact", "covertness_mc", "detection", "scaling")

# Default operating point BSC(pB=0.05, pW=0.11) is a desk-scale choice, not a
# value taken from the underlying analysis.
DEFAULT_CHANNEL = {"bsc": {"pB": 0.05, "pW": 0.11}}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    channel: dict = field(default_factory=lambda: dict(DEFAULT_CHANNEL))
    schedule: Schedule = field(default_factory=Schedule)
    n_grid: tuple = (500, 1000, 2000, 4000)
    M1_override: Optional[int] = None
    M2_override: Optional[int] = None
    # scheduled sizes exp(log M) are astronomically large at these n; cap them
    M1_cap: int = 64
    M2_cap: int = 4
    trials: int = 2000
    seed: int = 0
    modes: tuple = ("reliability",)
    kl_samples: int = 20000
    thresholds: tuple = (0.0,)
    t_rates: tuple = (0.0, 1.0)
    negative_control_exponent: float = 0.25
    scaling_mc_max_n: int = 24

    def __post_init__(self):
        try:
            object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
            object.__setattr__(self, "modes", tuple(str(m) for m in self.modes))
            object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
            object.__setattr__(self, "t_rates", tuple(float(t) for t in self.t_rates))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed list field: {exc}") from exc
        if not self.n_grid:
            raise ConfigError("n_grid must be nonempty")
        if any(n < 1 for n in self.n_grid) or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError(f"n_grid must be positive and strictly increasing, got {list(self.n_grid)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown modes {bad}; choose from {list(MODES)}")
        for name in ("M1_override", "M2_override"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.M1_cap < 1 or self.M2_cap < 1:
            raise ConfigError("size caps must be >= 1")
        if self.kl_samples < 2:
            raise ConfigError("kl_samples must be >= 2")
        if any(not 0.0 <= t <= 1.0 for t in self.t_rates):
            raise ConfigError("t_rates must lie in [0, 1]")
        self.broadcast_channel()

    def broadcast_channel(self) -> BroadcastChannel:
        try:
            return channel_from_spec(self.channel)
        except ChannelError as exc:
            raise ConfigError(f"invalid channel: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = dict(d)
    if "schedule" in kw:
        sched = kw["schedule"]
        if not isinstance(sched, dict):
            raise ConfigError("schedule must be an object")
        try:
            kw["schedule"] = Schedule(**sched)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid schedule: {exc}") from exc
    try:
        return ExperimentConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)
