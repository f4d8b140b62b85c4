"""Run configuration: defaults, ``key = value`` files, and command-line overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from typing import Mapping


class ConfigError(ValueError):
    pass


LR_SCHEDULES = ("constant", "cosine")


@dataclass
class RunConfig:
    patch_size: int = 64
    batch_size: int = 4
    lr_g: float = 1e-4
    lr_d: float = 3e-4
    lr_schedule: str = "constant"
    beta1: float = 0.5
    beta2: float = 0.9
    lambda1: float = 0.5
    lambda2: float = 0.5
    glda_max_patch: int = 50
    glda_min_patch: int = 8
    glda_max_patches: int = 8
    glda_prob: float = 0.5
    glda: bool = True
    saca: bool = True
    msfa: bool = True
    hf_prior: bool = True
    lf_prior: bool = True
    simple_disc: bool = False
    non_saturating: bool = False
    d_steps: int = 1
    seed: int = 0
    steps: int = 1000
    width_factor: int = 4
    eval_every: int = 50
    checkpoint_every: int = 100
    beta_min: float = 0.4
    beta_max: float = 1.6
    airlight_min: float = 0.7
    airlight_max: float = 1.0
    depth_max: float = 1.5

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("lr_g", "lr_d"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ConfigError(f"lr_schedule: expected one of {', '.join(LR_SCHEDULES)}")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name}: must lie in (0, 1)")
        for name in ("lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be nonnegative")
        if self.patch_size <= 0 or self.patch_size % 16:
            raise ConfigError("patch_size: must be a positive multiple of 16")
        for name in ("batch_size", "width_factor", "d_steps", "glda_min_patch", "eval_every", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if 32 % self.width_factor:
            raise ConfigError("width_factor: must divide 32")
        if self.glda_max_patch < self.glda_min_patch:
            raise ConfigError("glda_max_patch: must be >= glda_min_patch")
        if self.glda_max_patches < 0 or self.steps < 0:
            raise ConfigError("glda_max_patches/steps: must be nonnegative")
        if not 0 <= self.glda_prob <= 1:
            raise ConfigError("glda_prob: must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if not 0 <= self.beta_min <= self.beta_max:
            raise ConfigError("beta_min/beta_max: need 0 <= beta_min <= beta_max")
        if not 0 <= self.airlight_min <= self.airlight_max <= 1:
            raise ConfigError("airlight_min/airlight_max: need 0 <= min <= max <= 1")
        if self.depth_max <= 0:
            raise ConfigError("depth_max: must be positive")

    @property
    def adversarial(self) -> bool:
        return self.lf_prior or self.hf_prior or self.simple_disc

    def toggles(self) -> dict[str, bool]:
        return {k: getattr(self, k) for k in ("glda", "saca", "msfa", "hf_prior", "lf_prior", "simple_disc")}

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


_ROW_STEPS = [
    ("Baseline", {}),
    ("GLDA", {"glda": True}),
    ("SACA", {"saca": True}),
    ("MSFA", {"msfa": True}),
    ("Simple Discriminator", {"simple_disc": True}),
    ("HF prior", {"hf_prior": True, "simple_disc": False}),
    ("LF and HF prior", {"lf_prior": True}),
]


def _cumulative_rows() -> dict[str, dict[str, bool]]:
    toggles = dict.fromkeys(("glda", "saca", "msfa", "simple_disc", "hf_prior", "lf_prior"), False)
    rows = {}
    for name, change in _ROW_STEPS:
        toggles = {**toggles, **change}
        rows[name] = toggles
    return rows


# Ablation ladder: each row keeps the previous row's components and adds one.
ABLATION_ROWS = _cumulative_rows()


def ablation_config(row: str, base: RunConfig | None = None) -> RunConfig:
    if row not in ABLATION_ROWS:
        raise ConfigError(f"unknown ablation row {row!r}; choose from {', '.join(ABLATION_ROWS)}")
    return (base or RunConfig()).replace(**ABLATION_ROWS[row])


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_value(key: str, text: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown key: {key}")
    kind = _FIELD_TYPES[key]
    text = text.strip()
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected boolean")
    if kind == "str":
        return text
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected integer") from None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected number") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = parse_value(key, value)
    return values


def parse_overrides(items) -> dict:
    """Turn ``["key=value", ...]`` (or a mapping of strings) into typed values."""
    if isinstance(items, Mapping):
        items = [f"{k}={v}" for k, v in items.items()]
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_value(key.strip(), value)
    return out


def load_config(path: str | os.PathLike | None = None, cli_overrides=None) -> RunConfig:
    """Defaults, then file values, then command-line overrides."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update(parse_overrides(cli_overrides))
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"
