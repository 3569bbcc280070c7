"""End-to-end training, evaluation and representation diagnostics.

The global ACF is computed once, before the first iteration. Each iteration
samples windows, runs the model, builds the window-relation matrices from the
batch's start indices and takes one Adam step on ``mse + lam * contrastive``.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autocorr
from . import tensor as tn
from .autocorr import AcfTable, global_acf, relation_matrix
from .config import RunConfig
from .data import (Segment, Series, Split, WindowSpec, chrono_split, epoch_batches, iter_windows,
                   load_csv, make_batch, n_time_features, window_count)
from .errors import ConfigError, DimensionError, DivergenceError, DomainError
from .metrics import EvalReport, evaluate_arrays
from .model import (ModelConfig, ModelParams, forward, load_checkpoint, pooled_repr, save_checkpoint,
                    total_loss)
from .optim import Adam
from .synth import SynthSpec, synth

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("epoch", "mse", "autocon", "total", "val_mse")


@dataclass
class RunArtifacts:
    out_dir: Path
    config: RunConfig
    params: ModelParams
    trace: list[dict]
    report: EvalReport
    acf: AcfTable
    acf_calls: int
    iterations: int
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return self.config.hash


# ---------------------------------------------------------------- helpers

def load_series(config: RunConfig) -> Series:
    if config.data and config.synthetic:
        raise ConfigError("set either data or synthetic, not both")
    if config.data:
        return load_csv(config.data, config.date_column or None)
    if config.synthetic:
        return synth(SynthSpec.parse(config.synthetic))
    raise ConfigError("no data source: set data or synthetic")


def model_config(config: RunConfig, series: Series) -> ModelConfig:
    return ModelConfig(
        input_len=config.input_len,
        output_len=config.output_len,
        n_features=n_time_features(series, config.period_hint or None),
        d=config.d,
        depth=config.depth,
        conv_kernel=config.conv_kernel,
        kernels=config.kernels,
        use_short=not config.no_short,
        use_long=not config.no_long,
    )


def smoothing_width(config: RunConfig, series: Series, train_len: int) -> int:
    k = config.smoothing or autocorr.default_smoothing(series.freq)
    if k > train_len:
        k = train_len if train_len % 2 else train_len - 1
    return max(k, 1)


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def _stamp(config_hash: str | None, text: str) -> str:
    return text if config_hash is None else f"# config_hash={config_hash}\n{text}"


def predict(params: ModelParams, segment: Segment, spec: WindowSpec, period_hint=None,
            chunk: int = 256) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stride-1 forecasts for every window of ``segment``: (starts, pred, truth)."""
    preds, truths, starts = [], [], []
    for batch in iter_windows(segment, spec, chunk, period_hint):
        out = forward(params, batch.X, batch.X_mean, batch.F[:, :spec.input_len])
        preds.append(out.pred.data)
        truths.append(batch.Y)
        starts.append(batch.starts)
    if not preds:
        raise DomainError(f"{segment.name} split has no complete windows")
    return np.concatenate(starts), np.concatenate(preds), np.concatenate(truths)


def evaluate_segment(params: ModelParams, segment: Segment, spec: WindowSpec, period_hint=None,
                     with_dtw: bool = True, config: dict | None = None) -> EvalReport:
    _, pred, truth = predict(params, segment, spec, period_hint)
    return evaluate_arrays(pred, truth, with_dtw, config)


def representations(params: ModelParams, segment: Segment, spec: WindowSpec, period_hint=None,
                    chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Max-pooled encoder output per window: (starts, pooled ``[c, M, d]``)."""
    pooled, starts = [], []
    for batch in iter_windows(segment, spec, chunk, period_hint):
        out = forward(params, batch.X, batch.X_mean, batch.F[:, :spec.input_len], need_repr=True)
        pooled.append(pooled_repr(out.v).data)
        starts.append(batch.starts)
    return np.concatenate(starts), np.concatenate(pooled, axis=1)


def lag_similarity(params: ModelParams, segment: Segment, spec: WindowSpec, period: int,
                   offsets, period_hint=None) -> dict[int, float]:
    """Median pairwise cosine similarity of pooled representations, grouped by lag mod ``period``.

    Offset 0 excludes the zero lag itself.
    """
    starts, pooled = representations(params, segment, spec, period_hint)
    u = pooled / (np.linalg.norm(pooled, axis=-1, keepdims=True) + tn.COSINE_EPS)
    sims = np.einsum("cid,cjd->cij", u, u)
    lag = np.abs(starts[:, None] - starts[None, :])
    out = {}
    for off in offsets:
        sel = (lag % period == off) & (lag > 0)
        if not sel.any():
            raise DomainError(f"no window pairs at lag {off} mod {period}")
        out[int(off)] = float(np.median(sims[:, sel]))
    return out


def centered_smooth(x: np.ndarray, k: int) -> np.ndarray:
    if k <= 1 or len(x) == 0:
        return x.copy()
    k = min(k, len(x) if len(x) % 2 else len(x) - 1)
    return autocorr.smooth(x, k)


def repr_similarity(params: ModelParams, segment: Segment, spec: WindowSpec, anchor: int,
                    period_hint=None, smooth_k: int = 25) -> dict[str, np.ndarray]:
    """Cosine similarity of the anchor window's pooled representation to every window."""
    starts, pooled = representations(params, segment, spec, period_hint)
    hit = np.flatnonzero(starts == anchor)
    if not len(hit):
        raise DomainError(f"anchor start {anchor} outside {segment.name} windows "
                          f"[{starts[0]}, {starts[-1]}]")
    a = pooled[:, hit[0]]  # c x d
    sims = tn.cosine_sim(pooled, a[:, None, :]).data  # c x M
    smoothed = np.stack([centered_smooth(s, smooth_k) for s in sims])
    return {"starts": starts, "sims": sims, "smoothed": smoothed}


def repr_sim_csv(result: dict[str, np.ndarray], config_hash: str | None = None) -> str:
    lines = ["window_start,channel,cosine_sim,smoothed"]
    for ch in range(result["sims"].shape[0]):
        for s, v, m in zip(result["starts"], result["sims"][ch], result["smoothed"][ch]):
            lines.append(f"{int(s)},{ch},{float(v)!r},{float(m)!r}")
    return _stamp(config_hash, "\n".join(lines) + "\n")


def acf_csv(acf: AcfTable, config_hash: str | None = None) -> str:
    lines = ["lag,channel,acf"]
    for ch in range(acf.channels):
        for lag, v in enumerate(acf.values[ch]):
            lines.append(f"{lag},{ch},{float(v)!r}")
    return _stamp(config_hash, "\n".join(lines) + "\n")


def trace_csv(rows: list[dict], config_hash: str | None = None) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for r in rows:
        lines.append(",".join(str(r[c]) if c == "epoch" else repr(float(r[c])) for c in TRACE_COLUMNS))
    return _stamp(config_hash, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- training

def prepare(config: RunConfig, series: Series | None = None) -> tuple[Series, Split, WindowSpec]:
    series = load_series(config) if series is None else series
    spec = WindowSpec(config.input_len, config.output_len)
    window_count(series.length, spec.input_len, spec.output_len)
    split = chrono_split(series, spec, config.split)
    return series, split, spec


def train(config: RunConfig, series: Series | None = None, write: bool = True) -> RunArtifacts:
    """Train with early stopping on validation MSE; returns the best parameters and artifacts."""
    series, split, spec = prepare(config, series)
    hint = config.period_hint or None
    lam = config.effective_lam
    train_seg = split.train

    calls_before = autocorr.calls["global_acf"]
    M = len(train_seg.window_starts(spec))
    acf = global_acf(train_seg.values, M - 1, smoothing_width(config, series, train_seg.length),
                     config.acf_method)

    rng = np.random.default_rng(config.seed)
    params = ModelParams.init(model_config(config, series), rng)
    opt = Adam(config.lr)
    best = params.copy()
    best_val = math.inf
    stale = 0
    trace: list[dict] = []
    iteration = 0

    for epoch in range(1, config.epochs + 1):
        sums = np.zeros(3)
        steps = 0
        for batch in epoch_batches(train_seg, spec, config.batch_size, rng, hint):
            if config.max_iters_per_epoch and steps >= config.max_iters_per_epoch:
                break
            iteration += 1
            leaves = params.leaves()
            out = forward(params, batch.X, batch.X_mean, batch.F[:, :spec.input_len], leaves,
                          need_repr=lam > 0)
            rel = relation_matrix(acf, batch.starts) if lam > 0 else None
            parts = total_loss(out, batch.Y, rel, lam, config.tau)
            value = parts.total.item()
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite loss {value} at iteration {iteration} (epoch {epoch})")
            tn.backward(parts.total)
            grads = {k: v.grad for k, v in leaves.items() if v.grad is not None}
            opt.step(params.arrays, grads)
            sums += (parts.mse, parts.autocon, value)
            steps += 1
        val = evaluate_segment(params, split.val, spec, hint, with_dtw=False).aggregate()["mse"]
        mean = sums / max(steps, 1)
        trace.append({"epoch": epoch, "mse": mean[0], "autocon": mean[1], "total": mean[2], "val_mse": val})
        log.info("epoch %d mse %.5f autocon %.5f val %.5f", epoch, mean[0], mean[1], val)
        if val < best_val:
            best_val = val
            best = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    acf_calls = autocorr.calls["global_acf"] - calls_before
    report = evaluate_segment(best, split.test, spec, hint, config.eval_dtw,
                              {"config_hash": config.hash, "split": "test"})
    art = RunArtifacts(Path(config.out_dir), config, best, trace, report, acf, acf_calls, iteration)
    if write:
        write_artifacts(art, split, spec, rng)
    return art


def write_artifacts(art: RunArtifacts, split: Split, spec: WindowSpec, rng: np.random.Generator) -> None:
    cfg = art.config
    out = art.out_dir
    h = cfg.hash
    hint = cfg.period_hint or None
    files = art.files
    files["checkpoint"] = out / "checkpoint.npz"
    save_checkpoint(files["checkpoint"], art.params, {**cfg.as_dict(), "config_hash": h},
                    rng.bit_generator.state)
    files["config"] = _write_text(out / "config.txt", f"# config_hash={h}\n" + cfg.to_text())
    files["split"] = _write_text(out / "split.txt", f"# config_hash={h}\n" + split.manifest())
    files["loss_trace"] = _write_text(out / "loss_trace.csv", trace_csv(art.trace, h))
    files["eval_csv"] = _write_text(out / "eval_test.csv", _stamp(h, art.report.to_csv()))
    files["eval_summary"] = _write_text(out / "eval_test.txt", f"# config_hash={h}\n" + art.report.summary())
    files["acf"] = _write_text(out / "acf.csv", acf_csv(art.acf, h))
    anchor = int(split.train.window_starts(spec)[0])
    sim = repr_similarity(art.params, split.train, spec, anchor, hint)
    files["repr_sim"] = _write_text(out / "repr_sim.csv", repr_sim_csv(sim, h))
    if cfg.figures:
        from . import plots

        files["loss_trace_png"] = plots.plot_loss_trace(art.trace, out / "loss_trace.png")
        files["acf_png"] = plots.plot_acf(art.acf.values, out / "acf.png", spec.window_len)
        files["repr_sim_png"] = plots.plot_repr_sim(sim["starts"], sim["sims"][0], sim["smoothed"][0],
                                                    anchor, out / "repr_sim.png")
        history, pred, truth = _first_window(art.params, split.test, spec, hint)
        files["forecast_png"] = plots.plot_forecast(history, truth, pred, out / "forecast.png")


def _first_window(params: ModelParams, segment: Segment, spec: WindowSpec, hint):
    start = segment.window_starts(spec)[:1]
    batch = make_batch(segment.series, spec, start, hint)
    out = forward(params, batch.X, batch.X_mean, batch.F[:, :spec.input_len])
    return batch.X[0, :, 0], out.pred.data[0, :, 0], batch.Y[0, :, 0]


# ---------------------------------------------------------------- checkpoint-driven entry points

def _segment_for(config: RunConfig, split_name: str, series: Series | None = None):
    series, split, spec = prepare(config, series)
    segs = {"train": split.train, "val": split.val, "test": split.test}
    if split_name not in segs:
        raise ConfigError(f"unknown split {split_name!r}; use train, val or test")
    return segs[split_name], spec


def _run_config_from(meta: dict, **overrides) -> RunConfig:
    run = {k: v for k, v in meta.get("run", {}).items() if k != "config_hash"}
    run.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**run)


def evaluate(checkpoint, split: str = "test", series: Series | None = None, with_dtw: bool = True,
             **overrides) -> EvalReport:
    params, meta = load_checkpoint(checkpoint)
    cfg = _run_config_from(meta, **overrides)
    segment, spec = _segment_for(cfg, split, series)
    expected = model_config(cfg, segment.series)
    got = params.config
    if (got.input_len, got.output_len, got.n_features) != (expected.input_len, expected.output_len,
                                                          expected.n_features):
        raise DimensionError(f"checkpoint expects I={got.input_len}, O={got.output_len}, "
                             f"features={got.n_features}; data gives I={expected.input_len}, "
                             f"O={expected.output_len}, features={expected.n_features}")
    return evaluate_segment(params, segment, spec, cfg.period_hint or None, with_dtw,
                            {"config_hash": cfg.hash, "split": split})


def repr_sim(checkpoint, anchor: int, split: str = "train", series: Series | None = None,
             smooth_k: int = 25, **overrides) -> dict[str, np.ndarray]:
    params, meta = load_checkpoint(checkpoint)
    cfg = _run_config_from(meta, **overrides)
    segment, spec = _segment_for(cfg, split, series)
    return repr_similarity(params, segment, spec, anchor, cfg.period_hint or None, smooth_k)
