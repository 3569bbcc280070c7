"""Randomized properties over the core numerical pieces."""

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from autocon import tensor as tn
from autocon.autocorr import AcfTable, acf_direct, acf_fft, relation_matrix, smooth
from autocon.data import Segment, Series, WindowSpec, window_count
from autocon.loss import autocon_from_similarity, autocon_loss_oracle
from autocon.metrics import dtw_align

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, (4, 5), elements=finite), arrays(np.float64, (4, 5), elements=finite))
def test_cosine_bounded(a, b):
    s = tn.cosine_sim(a, b).data
    assert np.all(np.abs(s) <= 1.0 + 1e-12)


@given(st.integers(1, 40), st.integers(0, 15).map(lambda x: 2 * x + 1), st.integers(1, 3))
def test_pad_pool_preserves_length(L, k, c):
    x = tn.Value(np.random.default_rng(L).normal(size=(2, L, c)))
    y = tn.avgpool1d(tn.replicate_pad(x, (k - 1) // 2, k // 2), k)
    assert y.shape == x.shape


@given(st.integers(1, 200), st.integers(1, 60), st.integers(1, 60))
def test_window_count_matches_enumeration(T, I, O):
    spec = WindowSpec(I, O)
    seg = Segment(Series(np.zeros(T)), 0, T)
    enumerated = sum(1 for s in range(T) if s + I + O <= T)
    assert len(seg.window_starts(spec)) == enumerated
    if enumerated:
        assert window_count(T, I, O) == enumerated


@given(st.lists(st.integers(0, 30), min_size=1, max_size=12))
def test_relation_matrix_symmetric_unit_diagonal(starts):
    acf = AcfTable(np.random.default_rng(len(starts)).uniform(-1, 1, (1, 31)), 30)
    acf.values[0, 0] = 1.0
    R = relation_matrix(acf, starts, channel=0)
    np.testing.assert_array_equal(R, R.T)
    np.testing.assert_array_equal(np.diag(R), 1.0)
    assert R.min() >= 0


int_seq = st.lists(st.integers(-3, 3), min_size=1, max_size=8).map(lambda v: np.array(v, dtype=float))


def _monotone_paths(n, m):
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                for rest in walk(a, b):
                    yield [(i, j)] + rest
    yield from walk(0, 0)


@settings(max_examples=60, deadline=None)
@given(int_seq, int_seq)
def test_dtw_equals_exhaustive_and_symmetric(a, b):
    cost, path = dtw_align(a, b)
    best = min(sum((a[i] - b[j]) ** 2 for i, j in p) for p in _monotone_paths(len(a), len(b)))
    assert cost == best
    assert sum((a[i] - b[j]) ** 2 for i, j in path) == cost
    assert dtw_align(b, a)[0] == cost
    steps = np.diff(path, axis=0)
    assert np.all((steps >= 0) & (steps <= 1)) and np.all(steps.sum(axis=1) >= 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 10), st.integers(0, 10_000))
def test_autocon_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    s = rng.uniform(-1, 1, (n, n))
    s = (s + s.T) / 2
    r = rng.uniform(size=(n, n))
    r = (r + r.T) / 2
    perm = rng.permutation(n)
    a = autocon_from_similarity(s, r, 0.4).item()
    b = autocon_from_similarity(s[np.ix_(perm, perm)], r[np.ix_(perm, perm)], 0.4).item()
    assert abs(a - b) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 4096), st.integers(0, 1000))
def test_acf_fft_matches_direct(T, seed):
    x = np.random.default_rng(seed).normal(size=T).cumsum()
    H = T - 2
    assert np.max(np.abs(acf_fft(x, H) - acf_direct(x, H))) < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 200), st.floats(0, 2 * np.pi))
def test_sine_period_recovered(p, phase):
    t = np.arange(20 * p)
    x = np.sin(2 * np.pi * t / p + phase)
    r = np.abs(acf_fft(x, int(1.5 * p)))
    # p/2, p and 3p/2 tie at |R| = 1 up to rounding; take the earliest
    peak = int(np.flatnonzero(r[1:] >= r[1:].max() - 1e-9)[0]) + 1
    assert abs(peak - p) <= 1 or abs(peak - p / 2) <= 1


def test_smoothing_raises_lag_one_acf_of_white_noise():
    # a k-point moving average of white noise has lag-1 correlation near (k - 1) / k
    rng = np.random.default_rng(7)
    for k in (3, 25):
        raw, smoothed = [], []
        for _ in range(20):
            x = rng.normal(size=2000)
            raw.append(abs(acf_fft(x, 1)[1]))
            smoothed.append(abs(acf_fft(smooth(x, k), 1)[1]))
        assert np.median(smoothed) > np.median(raw)
        assert abs(np.median(smoothed) - (k - 1) / k) < 0.05


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 16), st.integers(0, 10_000))
def test_autocon_vectorized_equals_oracle(n, seed):
    rng = np.random.default_rng(seed)
    s = rng.uniform(-1, 1, (n, n))
    r = np.abs(rng.normal(size=(n, n)))
    got = autocon_from_similarity(s, r, 0.7).item()
    assert abs(got - autocon_loss_oracle(s, r, 0.7)) < 1e-10
