"""Autocorrelation-weighted contrastive loss over a batch of window representations.

For each ordered pair ``(i, j)`` the pair is treated as positive against every
``k != i`` whose relation to ``i`` is no stronger than ``r[i, j]``; the log
ratio is weighted by ``r[i, j]``.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from . import tensor as tn
from .errors import DimensionError, ParameterError
from .tensor import Value

log = logging.getLogger(__name__)


def _check(n: int, tau: float) -> bool:
    if tau <= 0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    if n < 2:
        log.warning("contrastive loss needs at least 2 windows, got %d; returning 0", n)
        return False
    return True


def selection_mask(relations: np.ndarray) -> np.ndarray:
    """``mask[..., i, j, k]`` is 1 when ``k != i`` and ``r[i, k] <= r[i, j]``."""
    r = np.asarray(relations, dtype=np.float64)
    n = r.shape[-1]
    mask = r[..., :, None, :] <= r[..., :, :, None]
    eye = np.eye(n, dtype=bool)
    mask &= ~eye[:, None, :]
    return mask.astype(np.float64)


def autocon_from_similarity(sim, relations: np.ndarray, tau: float = 1.0) -> Value:
    """Loss from a precomputed ``[..., N, N]`` similarity matrix; leading axes are averaged."""
    sim = tn.as_value(sim)
    r = np.asarray(relations, dtype=np.float64)
    if sim.shape != r.shape or sim.shape[-1] != sim.shape[-2]:
        raise DimensionError(f"similarity {sim.shape} and relations {r.shape} must be matching square matrices")
    n = sim.shape[-1]
    if not _check(n, tau):
        return Value(0.0)
    logits = sim * (1.0 / tau)
    e = tn.exp(logits)
    # denom[..., i, j] = sum_k mask[..., i, j, k] * e[..., i, k]
    e_col = tn.reshape(e, e.shape[:-1] + (n, 1))
    denom = tn.reshape(tn.matmul(selection_mask(r), e_col), e.shape)
    weight = r * (1.0 - np.eye(n))
    # with two windows each denominator is its own numerator; skip the rounding residue
    if n == 2 or not np.any(weight):
        return Value(0.0)
    # denom > 0 off the diagonal since k = j is always selected; pad the diagonal
    denom = denom + np.eye(n)
    terms = (logits - tn.log(denom)) * weight
    batches = int(np.prod(sim.shape[:-2], dtype=np.int64))
    return tn.sum(terms) * (-1.0 / (batches * n * (n - 1)))


def autocon_loss(pooled, relations: np.ndarray, tau: float = 1.0) -> Value:
    """Contrastive loss on max-pooled representations ``[..., N, d]``.

    ``relations`` is ``[..., N, N]`` (one matrix per channel under channel
    independence); per-channel losses are averaged.
    """
    pooled = tn.as_value(pooled)
    if pooled.shape[:-1] != np.shape(relations)[:-1]:
        raise DimensionError(f"pooled {pooled.shape} does not match relations {np.shape(relations)}")
    if not _check(pooled.shape[-2], tau):
        return Value(0.0)
    return autocon_from_similarity(tn.pairwise_cosine(pooled), relations, tau)


def autocon_loss_oracle(sim: np.ndarray, relations: np.ndarray, tau: float = 1.0) -> float:
    """Literal triple loop over ``i, j, k`` on a single ``N x N`` similarity matrix."""
    sim = np.asarray(sim, dtype=np.float64)
    r = np.asarray(relations, dtype=np.float64)
    n = sim.shape[0]
    if not _check(n, tau):
        return 0.0
    total = 0.0
    for i in range(n):
        inner = 0.0
        for j in range(n):
            if j == i:
                continue
            num = math.exp(sim[i, j] / tau)
            den = 0.0
            for k in range(n):
                if k != i and r[i, k] <= r[i, j]:
                    den += math.exp(sim[i, k] / tau)
            inner += r[i, j] * math.log(num / den)
        total += inner / (n - 1)
    return -total / n


def cosine_matrix(pooled: np.ndarray, eps: float = tn.COSINE_EPS) -> np.ndarray:
    """Plain numpy pairwise cosine similarity, for oracles and diagnostics."""
    p = np.asarray(pooled, dtype=np.float64)
    norms = np.linalg.norm(p, axis=-1, keepdims=True) + eps
    u = p / norms
    return u @ np.swapaxes(u, -1, -2)
