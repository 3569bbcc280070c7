"""Report figures rendered next to the CSV artifacts (Agg canvas, no pyplot state)."""

from __future__ import annotations

import functools
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

RC = {
    "axes.labelsize": 9,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _styled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with matplotlib.rc_context(RC):
            return fn(*args, **kwargs)
    return wrapper


def _figure(figsize=(6.0, 3.2)):
    fig = Figure(figsize=figsize, dpi=110)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.canvas.print_figure(str(path), dpi=fig.get_dpi())
    return path


@_styled
def plot_loss_trace(rows: list[dict], path) -> Path:
    fig, ax = _figure()
    epochs = [r["epoch"] for r in rows]
    ax.plot(epochs, [r["mse"] for r in rows], marker="o", label="train mse")
    ax.plot(epochs, [r["val_mse"] for r in rows], marker="s", label="val mse")
    if any(r["autocon"] for r in rows):
        ax.plot(epochs, [r["autocon"] for r in rows], marker="^", label="contrastive")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    return _save(fig, path)


@_styled
def plot_acf(acf_values: np.ndarray, path, window_len: int | None = None) -> Path:
    """Global ACF per channel; a dashed line marks the window length."""
    fig, ax = _figure()
    lags = np.arange(acf_values.shape[1])
    for ch, row in enumerate(acf_values):
        ax.plot(lags, row, lw=0.8, label=f"channel {ch}")
    ax.axhline(0.0, color="0.6", lw=0.5)
    if window_len:
        ax.axvline(window_len, color="0.3", ls="--", lw=0.8, label="window length")
    ax.set_xlabel("lag")
    ax.set_ylabel("autocorrelation")
    ax.legend(frameon=False)
    return _save(fig, path)


@_styled
def plot_repr_sim(starts: np.ndarray, sims: np.ndarray, smoothed: np.ndarray, anchor: int, path) -> Path:
    fig, ax = _figure()
    ax.plot(starts, sims, lw=0.5, color="0.7", label="cosine similarity")
    ax.plot(starts, smoothed, lw=1.2, label="smoothed")
    ax.axvline(anchor, color="C3", ls=":", lw=0.8, label="anchor")
    ax.set_xlabel("window start")
    ax.set_ylabel("similarity to anchor")
    ax.legend(frameon=False)
    return _save(fig, path)


@_styled
def plot_forecast(history: np.ndarray, truth: np.ndarray, pred: np.ndarray, path) -> Path:
    """One window, first channel: input, target and prediction."""
    fig, ax = _figure()
    I = len(history)
    ax.plot(np.arange(I), history, color="0.3", lw=0.9, label="input")
    t = np.arange(I, I + len(truth))
    ax.plot(t, truth, color="0.3", ls="--", lw=0.9, label="target")
    ax.plot(t, pred, color="C0", lw=1.2, label="forecast")
    ax.set_xlabel("step")
    ax.legend(frameon=False)
    return _save(fig, path)
