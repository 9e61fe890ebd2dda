import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asdpipe.dsp import (
    MelConfig,
    Spectrogram,
    StftConfig,
    band_limit,
    hann_window,
    logmel_power,
    mel_filterbank,
    stack_frames,
    stft_magnitude,
    time_average,
)
from asdpipe.exceptions import ValidationError


def naive_dft_mag(frame):
    N = frame.size
    n = np.arange(N)
    out = []
    for k in range(N // 2 + 1):
        re = sum(frame[j] * math.cos(2 * math.pi * k * j / N) for j in range(N))
        im = -sum(frame[j] * math.sin(2 * math.pi * k * j / N) for j in range(N))
        out.append(math.hypot(re, im))
    del n
    return np.array(out)


def test_stft_zero():
    s = stft_magnitude(np.zeros(4096), StftConfig(1024))
    assert s.values.shape == (7, 513)
    assert not s.values.any()


def test_stft_bin_centre_sine():
    N, k0 = 1024, 37
    x = np.sin(2 * np.pi * k0 * np.arange(N) / N)
    assert np.argmax(stft_magnitude(x, StftConfig(N)).values[0]) == k0


def test_stft_vs_naive_dft(rng):
    N = 256
    x = rng.standard_normal(N)
    got = stft_magnitude(x, StftConfig(N)).values[0]
    want = naive_dft_mag(x * (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(N) / N)))
    assert np.max(np.abs(got - want)) < 1e-9


def test_hann_is_periodic():
    w = hann_window(8)
    assert w[0] == 0 and abs(w[4] - 1) < 1e-15


def test_frame_count_and_short_input():
    for n in (1024, 1500, 1536, 16000):
        assert stft_magnitude(np.ones(n), StftConfig(1024)).n_frames == (n - 1024) // 512 + 1
    with pytest.raises(ValidationError):
        stft_magnitude(np.ones(1023), StftConfig(1024))


def test_stft_config_validation():
    assert StftConfig(1024).hop == 512
    with pytest.raises(ValidationError):
        StftConfig(1000)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20, deadline=None)
def test_parseval(seed):
    x = np.random.default_rng(seed).standard_normal(512)
    full = np.fft.fft(x * hann_window(512))
    half = stft_magnitude(x, StftConfig(512)).values[0]
    # rebuild the two-sided power from the one-sided magnitudes
    power = half[0] ** 2 + half[-1] ** 2 + 2 * np.sum(half[1:-1] ** 2)
    ref = 512 * np.sum((x * hann_window(512)) ** 2)
    assert abs(power - ref) / ref < 1e-6
    assert abs(np.sum(np.abs(full) ** 2) - ref) / ref < 1e-6


def test_translation_covariance(rng):
    x = rng.standard_normal(8192)
    a = stft_magnitude(x[512:], StftConfig(1024)).values
    b = stft_magnitude(x, StftConfig(1024)).values
    assert np.max(np.abs(a[: b.shape[0] - 1] - b[1:])) < 1e-9


def _spec(values, N=1024, fs=16000):
    return Spectrogram(np.asarray(values, float), np.arange(N // 2 + 1) * fs / N, fs, N, N // 2)


def test_logmel_zero_is_minus_100():
    out = logmel_power(_spec(np.zeros((3, 513))), MelConfig())
    assert out.shape == (3, 128)
    assert np.all(out == 10 * np.log10(1e-10))


def test_logmel_doubling(rng):
    S = rng.uniform(1, 2, (4, 513))
    a = logmel_power(_spec(S), MelConfig())
    b = logmel_power(_spec(2 * S), MelConfig())
    assert np.allclose(b - a, 10 * np.log10(4), atol=1e-9)


def test_logmel_monotone(rng):
    S = rng.uniform(0, 1, (2, 513))
    T = S + rng.uniform(0, 1, S.shape)
    assert np.all(logmel_power(_spec(T), MelConfig()) >= logmel_power(_spec(S), MelConfig()))


def test_filterbank_rows_vs_triangle_oracle():
    cfg = MelConfig(n_mels=64, f_min=0, f_max=8000)
    fb = mel_filterbank(cfg, 1024)
    mel = lambda f: 2595 * math.log10(1 + f / 700)  # noqa: E731
    imel = lambda m: 700 * (10 ** (m / 2595) - 1)  # noqa: E731
    lo_m, hi_m = mel(0), mel(8000)
    edges = [imel(lo_m + i * (hi_m - lo_m) / 65) for i in range(66)]
    for i in range(64):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        total = 0.0
        for k in range(513):
            f = k * 16000 / 1024
            if lo < f <= mid:
                total += (f - lo) / (mid - lo)
            elif mid < f < hi:
                total += (hi - f) / (hi - mid)
        assert abs(fb[i].sum() - total * 2 / (hi - lo)) < 1e-12
        assert fb[i].sum() > 0


def test_mel_config_validation():
    with pytest.raises(ValidationError):
        MelConfig(f_min=5000, f_max=4000)
    with pytest.raises(ValidationError):
        MelConfig(f_max=9000)


def test_stack_frames_basic(rng):
    X = rng.standard_normal((9, 4))
    assert np.array_equal(stack_frames(X, 1), X)
    assert stack_frames(rng.standard_normal((5, 128)), 5).shape == (1, 640)
    Y = stack_frames(X, 3)
    for t in range(Y.shape[0]):
        for b in range(3):
            assert np.array_equal(Y[t, 4 * b: 4 * b + 4], X[t + b])
    with pytest.raises(ValidationError):
        stack_frames(X, 10)


def test_band_limit():
    s = _spec(np.ones((2, 513)))
    assert band_limit(s, 0, 8000).values.shape == s.values.shape
    b = band_limit(s, 200, 8000)
    assert b.values.shape[1] == 513 - 13
    assert b.freqs[0] == 13 * 16000 / 1024
    with pytest.raises(ValidationError):
        band_limit(s, 9000, 10000)


def test_time_average(rng):
    v = rng.standard_normal(7)
    assert np.array_equal(time_average(v[None, :]), v)
    c = rng.standard_normal(7)
    assert np.allclose(time_average(np.stack([v, -v + 2 * c])), c, atol=1e-15)
    M = rng.standard_normal((50, 9))
    oracle = [sum(M[:, j]) / 50 for j in range(9)]
    assert np.max(np.abs(time_average(M) - oracle)) < 1e-12
    mean, std = time_average(M, with_std=True)
    assert np.allclose(std, np.sqrt(((M - mean) ** 2).mean(axis=0)))


def test_bit_determinism(rng):
    x = rng.standard_normal(16000)
    a = logmel_power(stft_magnitude(x), MelConfig())
    b = logmel_power(stft_magnitude(x.copy()), MelConfig())
    assert a.tobytes() == b.tobytes()
