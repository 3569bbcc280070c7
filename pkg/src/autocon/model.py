"""Two-branch decomposition forecaster.

Inputs are mean-removed per window. A linear map over time gives the short-term
forecast; a dilated causal conv encoder (over the series plus timestamp
features) yields the representation ``v``, which an MLP and a multi-scale
moving-average head turn into the long-term forecast. Channels are folded into
a leading batch axis and share all weights.

Internal layout is ``[c, N, time, features]``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as tn
from .errors import ConfigError, DimensionError, ParameterError
from .loss import autocon_loss
from .tensor import Value

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_len: int
    output_len: int
    n_features: int = 0
    d: int = 64
    depth: int = 3
    conv_kernel: int = 3
    kernels: tuple[int, ...] = (25, 49, 97)
    use_short: bool = True
    use_long: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if not self.kernels or any(k < 1 or k % 2 == 0 for k in self.kernels):
            raise ParameterError(f"moving-average kernels must be odd and >= 1, got {self.kernels}")
        if not (self.use_short or self.use_long):
            raise ConfigError("disabling both branches leaves a mean-only model")
        if self.d < 1 or self.depth < 0 or self.conv_kernel < 1:
            raise ParameterError("d >= 1, depth >= 0 and conv_kernel >= 1 required")


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class ModelParams:
    """Named weight arrays plus the structural config that shapes them."""

    def __init__(self, config: ModelConfig, arrays: dict[str, np.ndarray]):
        self.config = config
        self.arrays = arrays

    @classmethod
    def init(cls, config: ModelConfig, seed=0) -> "ModelParams":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        I, O, d, f = config.input_len, config.output_len, config.d, config.n_features
        a: dict[str, np.ndarray] = {}
        a["short.W"] = _uniform(rng, (O, I), I)
        a["enc.in_W"] = _uniform(rng, (1 + f, d), 1 + f)
        a["enc.in_b"] = _uniform(rng, (d,), 1 + f)
        for l in range(config.depth):
            fan = config.conv_kernel * d
            a[f"enc.block{l}.K"] = _uniform(rng, (config.conv_kernel, d, d), fan)
            a[f"enc.block{l}.b"] = _uniform(rng, (d,), fan)
        a["dec.W_time"] = _uniform(rng, (O, I), I)
        a["dec.b_time"] = _uniform(rng, (d,), I)
        a["dec.W_channel"] = _uniform(rng, (d, 1), d)
        a["dec.b_channel"] = _uniform(rng, (1,), d)
        return cls(config, a)

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.config, {k: np.zeros_like(v) for k, v in self.arrays.items()})

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def leaves(self) -> dict[str, Value]:
        return {k: Value(v, requires_grad=True) for k, v in self.arrays.items()}


@dataclass
class ForwardOutput:
    pred: Value  # N x O x c
    v: Value | None  # c x N x I x d
    short: Value  # N x O x c
    long: Value  # N x O x c
    mean: np.ndarray  # N x c


def _fold(x: np.ndarray) -> np.ndarray:
    """``[N, L, c] -> [c, N, L, 1]``."""
    return np.ascontiguousarray(np.transpose(x, (2, 0, 1)))[..., None]


def _unfold(x: Value) -> Value:
    """``[c, N, L, 1] -> [N, L, c]``."""
    c, n, L, _ = x.shape
    return tn.swapaxes(tn.swapaxes(tn.reshape(x, (c, n, L)), 0, 1), 1, 2)


def normalize(X: np.ndarray, X_mean: np.ndarray) -> np.ndarray:
    """Subtract the per-window, per-channel input mean (``X: [N, I, c]``)."""
    return X - X_mean[:, None, :]


def short_branch(p: dict[str, Value], x_norm) -> Value:
    """Linear map along time, shared by all channels: ``[..., I, 1] -> [..., O, 1]``."""
    return tn.matmul(p["short.W"], x_norm)


def encode(p: dict[str, Value], config: ModelConfig, x_norm, feats) -> Value:
    """Causal conv encoder over ``[x_norm ‖ feats]`` (``[..., I, 1 + f]``) -> ``[..., I, d]``."""
    x_norm = tn.as_value(x_norm)
    if config.n_features:
        feats = np.broadcast_to(feats, x_norm.shape[:-1] + (config.n_features,))
        inp = tn.concat([x_norm, feats], axis=-1)
    else:
        inp = x_norm
    h = tn.matmul(inp, p["enc.in_W"]) + p["enc.in_b"]
    for l in range(config.depth):
        z = tn.conv1d_causal(h, p[f"enc.block{l}.K"], dilation=2 ** l) + p[f"enc.block{l}.b"]
        h = h + tn.gelu(z)
    return h


def moving_average(x, k: int) -> Value:
    """Length-preserving moving average along time with edge replication."""
    return tn.avgpool1d(tn.replicate_pad(x, (k - 1) // 2, k // 2), k)


def multiscale_ma(x, kernels) -> Value:
    out = None
    for k in kernels:
        smoothed = moving_average(x, k)
        out = smoothed if out is None else out + smoothed
    return out * (1.0 / len(kernels))


def decode_long(p: dict[str, Value], config: ModelConfig, v) -> Value:
    """Two-layer MLP (time then channel, GELU between) followed by multi-scale MA."""
    h = tn.gelu(tn.matmul(p["dec.W_time"], v) + p["dec.b_time"])
    y = tn.matmul(h, p["dec.W_channel"]) + p["dec.b_channel"]
    return multiscale_ma(y, config.kernels)


def forward(params: ModelParams, X: np.ndarray, X_mean: np.ndarray, F_in: np.ndarray,
            leaves: dict[str, Value] | None = None, need_repr: bool = False) -> ForwardOutput:
    """Predict ``[N, O, c]`` from inputs ``X: [N, I, c]`` and input-segment features ``F_in: [N, I, f]``."""
    cfg = params.config
    if X.shape[1] != cfg.input_len:
        raise DimensionError(f"input length {X.shape[1]} != configured {cfg.input_len}")
    if F_in.shape[-1] != cfg.n_features:
        raise DimensionError(f"{F_in.shape[-1]} timestamp features, model expects {cfg.n_features}")
    p = params.leaves() if leaves is None else leaves
    N, _, c = X.shape
    O = cfg.output_len
    x_norm = _fold(normalize(X, X_mean))  # c, N, I, 1
    zeros = Value(np.zeros((c, N, O, 1)))

    short = short_branch(p, x_norm) if cfg.use_short else zeros
    v = None
    if cfg.use_long or need_repr:
        v = encode(p, cfg, x_norm, F_in[None])
    long = decode_long(p, cfg, v) if cfg.use_long else zeros

    mean = _fold(X_mean[:, None, :])  # c, N, 1, 1
    pred = short + long + mean
    return ForwardOutput(_unfold(pred), v, _unfold(short), _unfold(long), X_mean)


def pooled_repr(v: Value) -> Value:
    """Max over time: ``[c, N, I, d] -> [c, N, d]``."""
    return tn.max_pool_time(v)


@dataclass
class LossParts:
    total: Value
    mse: float
    autocon: float


def total_loss(out: ForwardOutput, Y: np.ndarray, relations: np.ndarray | None,
               lam: float = 0.1, tau: float = 1.0) -> LossParts:
    """MSE on denormalized predictions plus ``lam`` times the contrastive loss on pooled ``v``."""
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    diff = out.pred - Y
    mse = tn.mean(diff * diff)
    total = mse
    con_value = 0.0
    if lam > 0 and relations is not None and out.v is not None:
        con = autocon_loss(pooled_repr(out.v), relations, tau)
        con_value = con.item()
        total = mse + con * lam
    return LossParts(total, mse.item(), con_value)


# ---------------------------------------------------------------- checkpoints

def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, params: ModelParams, run_config: dict | None = None,
                    rng_state: dict | None = None) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "model": asdict(params.config),
        "run": run_config or {},
        "rng": rng_state or {},
        "names": list(params.arrays),
    }
    payload = {f"param/{k}": v for k, v in params.arrays.items()}
    payload["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    _atomic_write(Path(path), lambda fh: np.savez(fh, **payload))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(Path(path)) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: np.array(z[f"param/{k}"]) for k in meta["names"]}
    cfg = dict(meta["model"])
    cfg["kernels"] = tuple(cfg["kernels"])
    return ModelParams(ModelConfig(**cfg), arrays), meta
