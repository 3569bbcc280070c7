"""Run configuration: flat ``key = value`` files, CLI overrides, validation."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


def _ints(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    data: str = ""
    date_column: str = ""
    synthetic: str = ""
    input_len: int = 96
    output_len: int = 96
    batch_size: int = 32
    epochs: int = 10
    patience: int = 3
    max_iters_per_epoch: int = 0
    lr: float = 1e-3
    lam: float = 0.1
    tau: float = 1.0
    smoothing: int = 0  # 0 picks one day of samples from the series frequency
    acf_method: str = "fft"
    kernels: tuple[int, ...] = (25, 49, 97)
    d: int = 64
    depth: int = 3
    conv_kernel: int = 3
    period_hint: float = 0.0
    seed: int = 0
    no_short: bool = False
    no_long: bool = False
    no_autocon: bool = False
    split: tuple[float, ...] = (6.0, 2.0, 2.0)
    eval_dtw: bool = True
    figures: bool = True
    out_dir: str = "runs/default"

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            object.__setattr__(self, f.name, _coerce(f.name, f.type, val))
        self.validate()

    def validate(self) -> None:
        if self.input_len < 1 or self.output_len < 1:
            raise ConfigError("input_len and output_len must be >= 1")
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, epochs and patience must be >= 1")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.lam < 0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.smoothing < 0 or (self.smoothing and self.smoothing % 2 == 0):
            raise ConfigError(f"smoothing must be 0 (auto) or a positive odd integer, got {self.smoothing}")
        if self.acf_method not in ("fft", "direct"):
            raise ConfigError(f"acf_method must be fft or direct, got {self.acf_method!r}")
        if not self.kernels or any(k < 1 or k % 2 == 0 for k in self.kernels):
            raise ConfigError(f"kernels must be odd and >= 1, got {self.kernels}")
        if self.no_short and self.no_long:
            raise ConfigError("no_short and no_long together leave a mean-only model")
        if len(self.split) != 3 or any(r <= 0 for r in self.split):
            raise ConfigError(f"split must be three positive ratios, got {self.split}")
        if self.d < 1 or self.depth < 0 or self.conv_kernel < 1:
            raise ConfigError("d >= 1, depth >= 0, conv_kernel >= 1 required")

    @property
    def effective_lam(self) -> float:
        return 0.0 if self.no_autocon else self.lam

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = ",".join(repr(x) for x in val)
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{f.name} = {val}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, typ: str, val):
    try:
        if typ == "int":
            return int(val)
        if typ == "float":
            return float(val)
        if typ == "bool":
            return _bool(val)
        if typ == "str":
            return str(val)
        if typ == "tuple[int, ...]":
            return _ints(val)
        if typ == "tuple[float, ...]":
            return _floats(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: cannot parse {val!r} ({exc})") from None
    raise ConfigError(f"{name}: unsupported type {typ}")


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def load_config(path=None, **overrides) -> RunConfig:
    """Read a config file (if any) and apply non-None overrides on top."""
    values: dict = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        values.update(parse_config_text(p.read_text()))
    for key, val in overrides.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown key {key!r}")
        if val is not None:
            values[key] = val
    return RunConfig(**values)
