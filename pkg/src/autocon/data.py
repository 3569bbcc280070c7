"""CSV ingestion, chronological splits, sliding windows and mini-batches.

Window start indices are always global offsets into the full series, so lags
between windows mean the same thing in every split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataError, DomainError, ParameterError

FREQ_MINUTES = {"10min": 10, "15min": 15, "h": 60, "d": 1440, "w": 10080}


@dataclass(frozen=True)
class Series:
    values: np.ndarray  # T x c
    timestamps: np.ndarray | None = None  # datetime64[s], length T
    freq: str = "none"
    name: str = "series"
    columns: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype="datetime64[s]")
            if len(ts) != len(values):
                raise DataError(f"{len(ts)} timestamps for {len(values)} rows")
            if len(ts) > 1 and not np.all(ts[1:] > ts[:-1]):
                raise DataError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"ch{i}" for i in range(values.shape[1])))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowSpec:
    input_len: int
    output_len: int

    def __post_init__(self):
        if self.input_len < 1 or self.output_len < 1:
            raise ParameterError(f"window lengths must be >= 1, got I={self.input_len}, O={self.output_len}")

    @property
    def window_len(self) -> int:
        return self.input_len + self.output_len


@dataclass(frozen=True)
class Segment:
    """One split of a series.

    ``series`` holds the full series; the split owns rows ``[start, stop)`` and
    may read ``context`` rows before ``start`` as input history only.
    """

    series: Series
    start: int
    stop: int
    context: int = 0
    name: str = "train"

    @property
    def length(self) -> int:
        return self.stop - self.start

    @property
    def values(self) -> np.ndarray:
        return self.series.values[self.start:self.stop]

    def window_starts(self, spec: WindowSpec) -> np.ndarray:
        """Global start indices of every window whose target lies inside the split."""
        first = self.start - min(self.context, spec.input_len)
        last = self.stop - spec.window_len
        if last < first:
            return np.zeros(0, dtype=np.int64)
        return np.arange(first, last + 1, dtype=np.int64)


@dataclass
class WindowBatch:
    X: np.ndarray  # N x I x c
    Y: np.ndarray  # N x O x c
    T_idx: np.ndarray  # N x W global indices
    X_mean: np.ndarray  # N x c
    F: np.ndarray  # N x W x f

    @property
    def size(self) -> int:
        return self.X.shape[0]

    @property
    def starts(self) -> np.ndarray:
        return self.T_idx[:, 0]


# ---------------------------------------------------------------- ingestion

def _parse_time(text: str, row: int) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"row {row}: cannot parse timestamp {text!r}") from None


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"row {row}: column {col!r} value {text!r} is not numeric") from None
    if not math.isfinite(x):
        raise DataError(f"row {row}: column {col!r} has missing or non-finite value {text!r}")
    return x


def infer_freq(timestamps: np.ndarray | None) -> str:
    if timestamps is None or len(timestamps) < 2:
        return "none"
    step = np.median(np.diff(timestamps).astype("timedelta64[s]").astype(np.int64)) / 60.0
    for tag, minutes in FREQ_MINUTES.items():
        if step == minutes:
            return tag
    return "none"


def load_csv(path, date_column: str | None = None, value_columns: Sequence[str] | None = None,
             name: str | None = None) -> Series:
    """Read a CSV into a :class:`Series`.

    A header is detected when the first row does not parse as numbers. With a
    header and no explicit ``value_columns`` every column except the date
    column is a channel. Rows are numbered from 1 counting the header.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path} is empty")

    first = rows[0]
    has_header = date_column is not None or not all(_looks_numeric(c) for c in first)
    if has_header:
        header = [c.strip() for c in first]
        body = rows[1:]
        row0 = 2
    else:
        header = [f"ch{i}" for i in range(len(first))]
        body = rows
        row0 = 1

    date_idx = None
    if date_column is not None:
        if date_column not in header:
            raise DataError(f"date column {date_column!r} not in header {header}")
        date_idx = header.index(date_column)
    elif "date" in header:
        date_idx = header.index("date")

    if value_columns:
        missing = [c for c in value_columns if c not in header]
        if missing:
            raise DataError(f"value columns {missing} not in header {header}")
        cols = [header.index(c) for c in value_columns]
    else:
        cols = [i for i in range(len(header)) if i != date_idx]

    values = np.empty((len(body), len(cols)))
    stamps = [] if date_idx is not None else None
    for n, row in enumerate(body):
        rownum = row0 + n
        if len(row) != len(header):
            raise DataError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")
        for j, c in enumerate(cols):
            values[n, j] = _parse_float(row[c], rownum, header[c])
        if stamps is not None:
            stamps.append(_parse_time(row[date_idx], rownum))

    ts = None if stamps is None else np.array(stamps, dtype="datetime64[s]")
    return Series(values, ts, infer_freq(ts), name or path.stem, tuple(header[c] for c in cols))


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------- splitting

def window_count(T: int, I: int, O: int) -> int:
    """Number of length ``I + O`` windows in a series of length ``T``."""
    if T < I + O:
        raise DomainError(f"series length {T} shorter than window {I + O}")
    return T - (I + O) + 1


@dataclass(frozen=True)
class Split:
    train: Segment
    val: Segment
    test: Segment
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __iter__(self):
        return iter((self.train, self.val, self.test))

    def manifest(self) -> str:
        lines = [
            f"T = {self.train.series.length}",
            "ratios = " + ",".join(repr(r) for r in self.ratios),
        ]
        for seg in self:
            lines.append(f"{seg.name}_start = {seg.start}")
            lines.append(f"{seg.name}_stop = {seg.stop}")
            lines.append(f"{seg.name}_context = {seg.context}")
        return "\n".join(lines) + "\n"


def chrono_split(series: Series, spec: WindowSpec, ratios=(6, 2, 2)) -> Split:
    """Chronological train/val/test split; val and test borrow ``I`` rows of history."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be three positive numbers, got {ratios}")
    total = float(np.sum(ratios))
    fr = tuple(float(r) / total for r in ratios)
    T = series.length
    n_train = int(T * fr[0])
    n_test = int(T * fr[2])
    n_val = T - n_train - n_test
    W = spec.window_len
    for label, n in (("train", n_train), ("val", n_val), ("test", n_test)):
        if n < W:
            raise ConfigError(f"{label} segment length {n} is shorter than window length {W}")
    I = spec.input_len
    return Split(
        Segment(series, 0, n_train, 0, "train"),
        Segment(series, n_train, n_train + n_val, I, "val"),
        Segment(series, n_train + n_val, T, I, "test"),
        fr,
    )


def read_manifest(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


# ---------------------------------------------------------------- features and batches

def timestamp_features(series: Series, T_idx: np.ndarray, period_hint: float | None = None) -> np.ndarray:
    """Calendar features scaled to [-0.5, 0.5] for the given global indices.

    Calendar series get month, day of month, weekday and hour (plus minute
    below hourly). Series without a clock get ``sin``/``cos`` of the index at
    ``period_hint``, or no features when no hint is configured.
    """
    T_idx = np.asarray(T_idx)
    if series.timestamps is not None:
        ts = series.timestamps[T_idx]
        months = ts.astype("datetime64[M]")
        month = months.astype(np.int64) % 12
        day = (ts.astype("datetime64[D]") - months.astype("datetime64[D]")).astype(np.int64)
        days = ts.astype("datetime64[D]").astype(np.int64)
        weekday = (days + 3) % 7  # 1970-01-01 was a Thursday
        secs = (ts - ts.astype("datetime64[D]")).astype(np.int64)
        hour = secs // 3600
        feats = [month / 11.0 - 0.5, day / 30.0 - 0.5, weekday / 6.0 - 0.5, hour / 23.0 - 0.5]
        if series.freq in ("10min", "15min"):
            feats.append((secs // 60) % 60 / 59.0 - 0.5)
        return np.stack(feats, axis=-1).astype(np.float64)
    if period_hint:
        phase = 2.0 * np.pi * T_idx / float(period_hint)
        return np.stack([np.sin(phase), np.cos(phase)], axis=-1)
    return np.zeros(T_idx.shape + (0,))


def n_time_features(series: Series, period_hint: float | None = None) -> int:
    return timestamp_features(series, np.zeros(1, dtype=np.int64), period_hint).shape[-1]


def make_batch(series: Series, spec: WindowSpec, starts: np.ndarray, period_hint: float | None = None) -> WindowBatch:
    starts = np.asarray(starts, dtype=np.int64)
    T_idx = starts[:, None] + np.arange(spec.window_len)[None, :]
    windows = series.values[T_idx]
    X = windows[:, :spec.input_len]
    Y = windows[:, spec.input_len:]
    return WindowBatch(X, Y, T_idx, X.mean(axis=1), timestamp_features(series, T_idx, period_hint))


def sample_batch(segment: Segment, spec: WindowSpec, n: int, seed, period_hint: float | None = None) -> WindowBatch:
    """Draw ``n`` windows uniformly, without replacement when the split has enough."""
    starts = segment.window_starts(spec)
    if len(starts) < 1:
        raise DomainError(f"{segment.name} split has no complete windows")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    picks = rng.choice(len(starts), size=n, replace=n > len(starts))
    return make_batch(segment.series, spec, starts[picks], period_hint)


def epoch_batches(segment: Segment, spec: WindowSpec, n: int, rng: np.random.Generator,
                  period_hint: float | None = None) -> Iterator[WindowBatch]:
    """One shuffled pass over every window, chunked into batches of ``n``."""
    starts = segment.window_starts(spec)
    order = starts[rng.permutation(len(starts))]
    for i in range(0, len(order), n):
        yield make_batch(segment.series, spec, order[i:i + n], period_hint)


def iter_windows(segment: Segment, spec: WindowSpec, n: int = 256,
                 period_hint: float | None = None) -> Iterator[WindowBatch]:
    """Stride-1 enumeration of a split in chronological order."""
    starts = segment.window_starts(spec)
    for i in range(0, len(starts), n):
        yield make_batch(segment.series, spec, starts[i:i + n], period_hint)
