"""Point errors and DTW-based shape/timing metrics.

Shape DTW is the hard-DTW cost with squared pointwise error. Temporal DTW is
the mean squared offset ``(i - j)**2`` of the optimal warping path from the
main diagonal. Both are zero for a perfect forecast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DimensionError, DomainError


def _check_shapes(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} != target shape {truth.shape}")
    return pred, truth


def mse(pred, truth) -> float:
    pred, truth = _check_shapes(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mae(pred, truth) -> float:
    pred, truth = _check_shapes(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


@numba.njit(cache=True)
def _dtw_table(a, b):
    n, m = a.shape[0], b.shape[0]
    D = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            c = (a[i] - b[j]) ** 2
            if i == 0 and j == 0:
                D[i, j] = c
            elif i == 0:
                D[i, j] = c + D[i, j - 1]
            elif j == 0:
                D[i, j] = c + D[i - 1, j]
            else:
                D[i, j] = c + min(D[i - 1, j - 1], D[i - 1, j], D[i, j - 1])
    return D


@numba.njit(cache=True)
def _backtrack(D):
    n, m = D.shape
    path = np.empty((n + m - 1, 2), dtype=np.int64)
    i, j = n - 1, m - 1
    k = 0
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = D[i - 1, j - 1]
            down = D[i - 1, j]
            right = D[i, j - 1]
            # ties: diagonal, then down (advance a), then right (advance b)
            if diag <= down and diag <= right:
                i -= 1
                j -= 1
            elif down <= right:
                i -= 1
            else:
                j -= 1
        k += 1
        path[k, 0] = i
        path[k, 1] = j
    return path[:k + 1][::-1].copy()


def dtw_align(a, b) -> tuple[float, np.ndarray]:
    """Minimal cumulative squared-error alignment and one optimal monotone path."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise DomainError("DTW needs non-empty sequences")
    D = _dtw_table(a, b)
    return float(D[-1, -1]), _backtrack(D)


def _per_channel(pred, truth, fn) -> float:
    pred, truth = _check_shapes(pred, truth)
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    return float(np.mean([fn(pred[:, ch], truth[:, ch]) for ch in range(pred.shape[1])]))


def _tdi(a, b) -> float:
    _, path = dtw_align(a, b)
    return float(np.mean((path[:, 0] - path[:, 1]) ** 2))


def shape_dtw(pred, truth) -> float:
    """DTW cost per channel (time on axis 0), averaged over channels."""
    return _per_channel(pred, truth, lambda a, b: dtw_align(a, b)[0])


def temporal_dtw(pred, truth) -> float:
    """Mean squared distance of the optimal path from the diagonal, averaged over channels."""
    return _per_channel(pred, truth, _tdi)


@dataclass
class EvalReport:
    per_horizon_mse: np.ndarray  # O
    per_horizon_mae: np.ndarray  # O
    window_mse: np.ndarray  # windows
    window_mae: np.ndarray
    window_shape_dtw: np.ndarray
    window_temporal_dtw: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def n_windows(self) -> int:
        return len(self.window_mse)

    def aggregate(self) -> dict[str, float]:
        return {
            "mse": float(np.mean(self.window_mse)),
            "mae": float(np.mean(self.window_mae)),
            "shape_dtw": float(np.mean(self.window_shape_dtw)) if len(self.window_shape_dtw) else float("nan"),
            "temporal_dtw": float(np.mean(self.window_temporal_dtw)) if len(self.window_temporal_dtw) else float("nan"),
        }

    def horizon_mse(self, lo: int, hi: int) -> float:
        """Mean MSE over 1-based horizons ``lo..hi`` inclusive."""
        return float(np.mean(self.per_horizon_mse[lo - 1:hi]))

    def to_csv(self) -> str:
        lines = ["horizon,mse,mae"]
        for h, (m, a) in enumerate(zip(self.per_horizon_mse, self.per_horizon_mae), start=1):
            lines.append(f"{h},{m!r},{a!r}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        agg = self.aggregate()
        lines = [f"{k} = {v!r}" for k, v in agg.items()]
        lines.append(f"windows = {self.n_windows}")
        lines.append(f"horizons = {len(self.per_horizon_mse)}")
        for k, v in sorted(self.config.items()):
            lines.append(f"config.{k} = {v}")
        return "\n".join(lines) + "\n"


def evaluate_arrays(pred: np.ndarray, truth: np.ndarray, with_dtw: bool = True,
                    config: dict | None = None) -> EvalReport:
    """Score stacked forecasts ``[windows, O, c]``."""
    pred, truth = _check_shapes(pred, truth)
    err = pred - truth
    n = pred.shape[0]
    if with_dtw:
        shape_vals = np.array([shape_dtw(pred[w], truth[w]) for w in range(n)])
        temp_vals = np.array([temporal_dtw(pred[w], truth[w]) for w in range(n)])
    else:
        shape_vals = temp_vals = np.zeros(0)
    return EvalReport(
        per_horizon_mse=np.mean(err ** 2, axis=(0, 2)),
        per_horizon_mae=np.mean(np.abs(err), axis=(0, 2)),
        window_mse=np.mean(err ** 2, axis=(1, 2)),
        window_mae=np.mean(np.abs(err), axis=(1, 2)),
        window_shape_dtw=shape_vals,
        window_temporal_dtw=temp_vals,
        config=dict(config or {}),
    )
