"""Sum-of-sinusoids test series with trend and Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Series
from .errors import ConfigError, ParameterError

_STEP = {"h": np.timedelta64(1, "h"), "15min": np.timedelta64(15, "m"),
         "10min": np.timedelta64(10, "m"), "d": np.timedelta64(1, "D"), "w": np.timedelta64(7, "D")}


@dataclass(frozen=True)
class SynthSpec:
    components: tuple[tuple[float, float], ...] = ((1000.0, 1.0), (24.0, 0.5))
    slope: float = 0.0
    noise: float = 0.1
    length: int = 4000
    seed: int = 0
    freq: str = "h"
    start: str = "2016-07-01T00:00:00"

    def __post_init__(self):
        for period, _ in self.components:
            if period <= 0:
                raise ParameterError(f"sinusoid period must be positive, got {period}")
        if self.length < 1:
            raise ParameterError(f"length must be >= 1, got {self.length}")
        if self.noise < 0:
            raise ParameterError(f"noise sigma must be >= 0, got {self.noise}")
        if self.freq != "none" and self.freq not in _STEP:
            raise ParameterError(f"unknown frequency {self.freq!r}")

    @classmethod
    def parse(cls, text: str) -> "SynthSpec":
        """``"sines=1000:1+24:0.5;noise=0.1;slope=0;length=4000;seed=0;freq=h"``."""
        kw: dict = {}
        for part in text.split(";"):
            part = part.strip()
            if not part:
                continue
            key, sep, val = part.partition("=")
            if not sep:
                raise ConfigError(f"synthetic spec item {part!r} is not key=value")
            key = key.strip()
            val = val.strip()
            if key == "sines":
                comps = []
                for c in val.split("+"):
                    p, _, a = c.partition(":")
                    comps.append((float(p), float(a or 1.0)))
                kw["components"] = tuple(comps)
            elif key in ("slope", "noise"):
                kw[key] = float(val)
            elif key in ("length", "seed"):
                kw[key] = int(val)
            elif key in ("freq", "start"):
                kw[key] = val
            else:
                raise ConfigError(f"unknown synthetic spec key {key!r}")
        return cls(**kw)


def synth(spec: SynthSpec) -> Series:
    t = np.arange(spec.length, dtype=np.float64)
    s = spec.slope * t
    for period, amp in spec.components:
        s = s + amp * np.sin(2.0 * np.pi * t / period)
    rng = np.random.default_rng(spec.seed)
    s = s + rng.normal(0.0, spec.noise, size=spec.length) if spec.noise > 0 else s
    ts = None
    if spec.freq != "none":
        ts = np.datetime64(spec.start, "s") + np.arange(spec.length) * _STEP[spec.freq]
    return Series(s[:, None], ts, spec.freq, "synthetic", ("value",))


def series_csv(series: Series) -> str:
    lines = []
    head = ([] if series.timestamps is None else ["date"]) + list(series.columns)
    lines.append(",".join(head))
    for n in range(series.length):
        row = [repr(float(x)) for x in series.values[n]]
        if series.timestamps is not None:
            row.insert(0, str(series.timestamps[n]).replace("T", " "))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_series_csv(series: Series, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(series_csv(series))
