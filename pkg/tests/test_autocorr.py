import numpy as np
import pytest

from autocon import autocorr
from autocon.autocorr import (AcfTable, acf_direct, acf_fft, default_smoothing, global_acf, relation,
                              relation_matrix, smooth)
from autocon.errors import DomainError, ParameterError


def _brute_acf(x, h):
    # literal sums: global mean and variance, overlap count correction, clipped to [-1, 1]
    T = len(x)
    m = sum(x) / T
    var = sum((v - m) ** 2 for v in x) / T
    cov = sum((x[t] - m) * (x[t - h] - m) for t in range(h, T)) / (T - h)
    return max(-1.0, min(1.0, cov / var))


def test_acf_matches_brute_force_correlation(rng):
    x = rng.normal(size=60).cumsum()
    expected = [_brute_acf(x, h) for h in range(20)]
    np.testing.assert_allclose(acf_direct(x, 19), expected, atol=1e-12)
    np.testing.assert_allclose(acf_fft(x, 19), expected, atol=1e-10)


def test_acf_sine_examples():
    x = np.sin(2 * np.pi * np.arange(64) / 8)
    r = acf_fft(x, 8)
    assert r[8] == pytest.approx(1.0, abs=0.02)
    assert abs(r[4]) == pytest.approx(1.0, abs=1e-9)
    assert abs(r[2]) < 0.05


def test_acf_bounded_and_flat_overlap_is_zero():
    x = np.concatenate([np.zeros(10), [1.0, -1.0, 2.0], np.zeros(10)])
    r = acf_fft(x, 21)
    assert np.all(np.abs(r) <= 1.0 + 1e-9)
    np.testing.assert_allclose(r, acf_direct(x, 21), atol=1e-9)


def test_zero_variance_names_channel():
    x = np.stack([np.arange(10.0), np.ones(10)], axis=1)
    with pytest.raises(DomainError, match="channel 1"):
        global_acf(x, 3)


def test_global_acf_shape_and_counter():
    before = autocorr.calls["global_acf"]
    x = np.random.default_rng(0).normal(size=(50, 3))
    tab = global_acf(x, 10, smoothing=5, method="direct")
    assert tab.values.shape == (3, 11)
    assert tab.smoothing == 5
    np.testing.assert_array_equal(tab.values[:, 0], 1.0)
    assert autocorr.calls["global_acf"] == before + 1


def test_global_acf_rejects_short_series_and_bad_method():
    with pytest.raises(DomainError):
        global_acf(np.arange(5.0), 4)
    with pytest.raises(ParameterError):
        global_acf(np.arange(50.0), 4, method="wavelet")


def test_smooth_alternating_hand_values():
    y = smooth(np.array([0.0, 2.0] * 5), 3)
    np.testing.assert_allclose(y[1:-1], [2 / 3, 4 / 3] * 4)


def test_smooth_preserves_length_and_constants():
    x = np.full(20, 3.0)
    np.testing.assert_allclose(smooth(x, 7), x)
    y = smooth(np.arange(9.0), 3)
    assert y.shape == (9,)
    np.testing.assert_allclose(y[1:-1], np.arange(1.0, 8.0))
    assert y[0] == pytest.approx(1 / 3)
    with pytest.raises(ParameterError):
        smooth(x, 4)
    with pytest.raises(ParameterError):
        smooth(x, 21)


def test_default_smoothing():
    assert default_smoothing("h") == 25
    assert default_smoothing("15min") == 97
    assert default_smoothing("10min") == 145
    assert default_smoothing("d") == 1


def test_relation_lookup_and_clamp(caplog):
    tab = AcfTable(np.array([[1.0, -0.5, 0.25]]), 2)
    assert relation(tab, 7, 6) == 0.5
    assert relation(tab, 3, 3) == 1.0
    assert relation(tab, 0, 9) == 0.0
    assert "clamped" in caplog.text


def test_relation_matrix_channels():
    tab = AcfTable(np.array([[1.0, 0.5, -0.2], [1.0, -0.1, 0.3]]), 2)
    R = relation_matrix(tab, [0, 1, 2])
    assert R.shape == (2, 3, 3)
    np.testing.assert_allclose(R[0], [[1, .5, .2], [.5, 1, .5], [.2, .5, 1]])
    np.testing.assert_allclose(relation_matrix(tab, [0, 2], channel=1), [[1, .3], [.3, 1]])
