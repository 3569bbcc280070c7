"""Global autocorrelation of the training series and the window relation it induces."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

log = logging.getLogger(__name__)

# incremented on every global_acf call; the trainer asserts one call per run
calls: Counter = Counter()

DEFAULT_SMOOTHING = {"10min": 145, "15min": 97, "h": 25}


def default_smoothing(freq: str) -> int:
    """One day of samples plus one, or 1 (no smoothing) at daily and coarser rates."""
    return DEFAULT_SMOOTHING.get(freq, 1)


@dataclass(frozen=True)
class AcfTable:
    values: np.ndarray  # c x (H + 1)
    max_lag: int
    smoothing: int = 1

    @property
    def channels(self) -> int:
        return self.values.shape[0]


def smooth(values: np.ndarray, k: int) -> np.ndarray:
    """Centered moving average with edge replication; length is preserved."""
    x = np.asarray(values, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if k < 1 or k % 2 == 0:
        raise ParameterError(f"smoothing width must be a positive odd integer, got {k}")
    if k > x.shape[0]:
        raise ParameterError(f"smoothing width {k} exceeds series length {x.shape[0]}")
    half = (k - 1) // 2
    xp = np.pad(x, ((half, half), (0, 0)), mode="edge")
    cs = np.concatenate([np.zeros((1, x.shape[1])), np.cumsum(xp, axis=0)])
    out = (cs[k:] - cs[:-k]) / k
    return out[:, 0] if squeeze else out


def _centered(x: np.ndarray, channel: int) -> np.ndarray:
    xc = x - x.mean()
    if not np.any(np.abs(xc) > 1e-12 * max(1.0, np.abs(x).max())):
        raise DomainError(f"channel {channel} has zero variance; autocorrelation undefined")
    return xc


def _adjust(full: np.ndarray, T: int) -> np.ndarray:
    """Normalize lagged products by the variance and correct for the shrinking overlap."""
    h = np.arange(len(full))
    out = full / full[0] * (T / (T - h))
    out[0] = 1.0
    # short overlaps can overshoot; keep r a valid weight
    return np.clip(out, -1.0, 1.0)


def acf_direct(x: np.ndarray, max_lag: int, channel: int = 0) -> np.ndarray:
    """Count-corrected sample ACF by direct lagged products (O(T * H))."""
    xc = _centered(np.asarray(x, dtype=np.float64), channel)
    T = len(xc)
    return _adjust(np.correlate(xc, xc, mode="full")[T - 1:T + max_lag], T)


def acf_fft(x: np.ndarray, max_lag: int, channel: int = 0) -> np.ndarray:
    """Same estimator, lagged products taken from the power spectrum of the zero-padded series."""
    xc = _centered(np.asarray(x, dtype=np.float64), channel)
    T = len(xc)
    n = 1 << int(np.ceil(np.log2(2 * T - 1)))
    spec = np.fft.rfft(xc, n)
    return _adjust(np.fft.irfft(spec * np.conj(spec), n)[:max_lag + 1], T)


def global_acf(train: np.ndarray, max_lag: int, smoothing: int = 1, method: str = "fft") -> AcfTable:
    """Per-channel normalized autocorrelation of ``train`` for lags ``0..max_lag``."""
    calls["global_acf"] += 1
    x = np.asarray(train, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T = x.shape[0]
    if max_lag < 0 or T < max_lag + 2:
        raise DomainError(f"training length {T} too short for max lag {max_lag}")
    if smoothing > 1:
        x = smooth(x, smoothing)
    fn = {"fft": acf_fft, "direct": acf_direct}.get(method)
    if fn is None:
        raise ParameterError(f"unknown ACF method {method!r}")
    values = np.stack([fn(x[:, ch], max_lag, ch) for ch in range(x.shape[1])])
    values[:, 0] = 1.0
    return AcfTable(values, max_lag, smoothing)


def relation(acf: AcfTable, t1: int, t2: int, channel: int = 0) -> float:
    lag = abs(int(t1) - int(t2))
    if lag > acf.max_lag:
        log.warning("lag %d beyond max lag %d; relation clamped to 0", lag, acf.max_lag)
        return 0.0
    return float(abs(acf.values[channel, lag]))


def relation_matrix(acf: AcfTable, starts, channel: int | None = None) -> np.ndarray:
    """``|R(|t_i - t_j|)|`` for every pair of window starts.

    With ``channel=None`` the result stacks all channels: ``c x N x N``.
    """
    starts = np.asarray(starts, dtype=np.int64)
    lags = np.abs(starts[:, None] - starts[None, :])
    over = lags > acf.max_lag
    if over.any():
        log.warning("%d pairs exceed max lag %d; relations clamped to 0", int(over.sum()), acf.max_lag)
    safe = np.where(over, 0, lags)
    table = np.abs(acf.values if channel is None else acf.values[channel:channel + 1])
    out = table[:, safe]
    out[:, over] = 0.0
    return out if channel is None else out[0]
