"""Finite-difference audit of every differentiable op and the full training loss."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor as tn
from .loss import autocon_from_similarity, autocon_loss
from .model import ModelConfig, ModelParams, forward, total_loss
from .tensor import Value

TOLERANCE = 1e-4
STEP = 1e-5


def _p(rng, *shape, scale=1.0) -> Value:
    return tn.parameter(rng.normal(scale=scale, size=shape))


def _weights(rng, shape) -> np.ndarray:
    # fixed random projection turns any output into a scalar with a generic gradient
    return rng.normal(size=shape)


def _project(out: Value, w: np.ndarray) -> Value:
    return tn.sum(out * w)


def _relations(rng, n: int, lead=()) -> np.ndarray:
    r = rng.uniform(size=lead + (n, n))
    r = (r + np.swapaxes(r, -1, -2)) / 2
    idx = np.arange(n)
    r[..., idx, idx] = 1.0
    return r


def _case_matmul(rng):
    a, b = _p(rng, 3, 4), _p(rng, 4, 2)
    w = _weights(rng, (3, 2))
    return (lambda: _project(tn.matmul(a, b), w)), [a, b]


def _case_batched_matmul(rng):
    a, b = _p(rng, 2, 3, 4), _p(rng, 4, 5)
    w = _weights(rng, (2, 3, 5))
    return (lambda: _project(a @ b, w)), [a, b]


def _case_elementwise(rng):
    a = _p(rng, 3, 4)
    b = tn.parameter(rng.uniform(0.5, 2.0, size=(1, 4)))
    w = _weights(rng, (3, 4))
    return (lambda: _project(tn.log(tn.exp(a * 0.3) + b) / b - tn.sqrt(b) + (a - b) ** 2, w)), [a, b]


def _case_gelu(rng):
    x = _p(rng, 4, 5, scale=2.0)
    w = _weights(rng, (4, 5))
    return (lambda: _project(tn.gelu(x), w)), [x]


def _case_gelu_linear(rng):
    W = _p(rng, 4, 4)
    x = rng.normal(size=(4, 1))
    return (lambda: tn.sum(tn.gelu(W @ x))), [W]


def _case_reductions(rng):
    x = _p(rng, 2, 3, 4)
    w = _weights(rng, (2, 4))
    return (lambda: _project(tn.mean(x, axis=1), w) + tn.sum(tn.swapaxes(tn.reshape(x, (6, 4)), 0, 1))), [x]


def _case_concat(rng):
    a, b = _p(rng, 3, 2), _p(rng, 3, 3)
    w = _weights(rng, (3, 5))
    return (lambda: _project(tn.concat([a, b], axis=-1), w)), [a, b]


def _case_conv(rng):
    x, k = _p(rng, 2, 9, 3), _p(rng, 3, 3, 4)
    w = _weights(rng, (2, 9, 4))
    return (lambda: _project(tn.conv1d_causal(x, k, dilation=2), w)), [x, k]


def _case_pad_pool(rng):
    x = _p(rng, 2, 7, 3)
    w = _weights(rng, (2, 7, 3))
    return (lambda: _project(tn.avgpool1d(tn.replicate_pad(x, 2, 1), 4), w)), [x]


def _case_max_pool(rng):
    # spread values so no ties fall within one finite-difference step
    base = rng.permutation(24).reshape(2, 4, 3).astype(np.float64)
    v = tn.parameter(base + rng.uniform(-0.2, 0.2, size=base.shape))
    w = _weights(rng, (2, 3))
    return (lambda: _project(tn.max_pool_time(v), w)), [v]


def _case_cosine(rng):
    a, b = _p(rng, 5, 4), _p(rng, 5, 4)
    w = _weights(rng, (5,))
    return (lambda: _project(tn.cosine_sim(a, b), w)), [a, b]


def _case_autocon(rng):
    pooled = _p(rng, 2, 6, 4)
    r = _relations(rng, 6, (2,))
    return (lambda: autocon_loss(pooled, r, tau=0.5)), [pooled]


def _case_autocon_sim(rng):
    s = tn.parameter(rng.uniform(-1, 1, size=(5, 5)))
    r = _relations(rng, 5)
    return (lambda: autocon_from_similarity(s, r, tau=1.0)), [s]


def _case_full_loss(rng):
    cfg = ModelConfig(input_len=8, output_len=6, n_features=2, d=4, depth=2, kernels=(1, 3, 5))
    params = ModelParams.init(cfg, rng)
    leaves = params.leaves()
    N, c = 4, 2
    X = rng.normal(size=(N, 8, c))
    Y = rng.normal(size=(N, 6, c))
    F = rng.uniform(-0.5, 0.5, size=(N, 8, 2))
    rel = _relations(rng, N, (c,))

    def f():
        out = forward(params, X, X.mean(axis=1), F, leaves)
        return total_loss(out, Y, rel, lam=0.5, tau=0.7).total

    return f, list(leaves.values())


def _case_constant(rng):
    x = _p(rng, 3)
    return (lambda: tn.sum(x * 0.0) + 2.0), [x]


CASES: dict[str, Callable] = {
    "matmul": _case_matmul,
    "matmul_batched": _case_batched_matmul,
    "elementwise": _case_elementwise,
    "gelu": _case_gelu,
    "gelu_linear": _case_gelu_linear,
    "reductions": _case_reductions,
    "concat": _case_concat,
    "conv1d_causal": _case_conv,
    "replicate_pad+avgpool1d": _case_pad_pool,
    "max_pool_time": _case_max_pool,
    "cosine_sim": _case_cosine,
    "autocon_loss": _case_autocon,
    "autocon_from_similarity": _case_autocon_sim,
    "total_loss": _case_full_loss,
    "constant": _case_constant,
}


def run(seeds=range(10), cases: dict[str, Callable] | None = None, step: float = STEP) -> dict[str, float]:
    """Worst relative error per registered case over ``seeds``."""
    cases = CASES if cases is None else cases
    report = {}
    for name, build in cases.items():
        worst = 0.0
        for seed in seeds:
            f, inputs = build(np.random.default_rng(seed))
            worst = max(worst, tn.check_gradients(f, inputs, step))
        report[name] = worst
    return report


def report_csv(report: dict[str, float], tol: float = TOLERANCE) -> str:
    lines = ["op,max_rel_err,pass"]
    for name, err in report.items():
        lines.append(f"{name},{err!r},{int(err < tol)}")
    return "\n".join(lines) + "\n"
