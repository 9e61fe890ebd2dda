"""Spectral feature kernels: STFT magnitude, HTK mel filterbank, log-mel
power, frame stacking, band limiting and time averaging.

Frames start at sample 0 with no centre padding; a trailing partial frame is
dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import ValidationError

LOG_EPS = 1e-10


@dataclass(frozen=True)
class StftConfig:
    dft_size: int = 1024
    hop_size: int | None = None  # defaults to dft_size // 2

    @property
    def hop(self) -> int:
        return self.hop_size if self.hop_size is not None else self.dft_size // 2

    def __post_init__(self):
        n = self.dft_size
        if n < 2 or n & (n - 1):
            raise ValidationError(f"dft_size must be a power of two, got {n}")
        if self.hop < 1:
            raise ValidationError("hop_size must be >= 1")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 128
    f_min: float = 0.0
    f_max: float | None = None  # defaults to sample_rate / 2
    sample_rate: int = 16000

    @property
    def fmax(self) -> float:
        return self.sample_rate / 2 if self.f_max is None else float(self.f_max)

    def __post_init__(self):
        if not 0 <= self.f_min < self.fmax <= self.sample_rate / 2:
            raise ValidationError(
                f"need 0 <= f_min < f_max <= sample_rate/2, got {self.f_min}, {self.fmax}, {self.sample_rate}"
            )
        if self.n_mels < 1:
            raise ValidationError("n_mels must be >= 1")


@dataclass
class Spectrogram:
    """Frames x bins magnitude matrix with the frequency of every bin."""

    values: np.ndarray
    freqs: np.ndarray
    sample_rate: int
    dft_size: int
    hop_size: int
    meta: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@lru_cache(maxsize=16)
def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (the DFT-even variant)."""
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


def n_frames(n_samples: int, dft_size: int, hop: int) -> int:
    if n_samples < dft_size:
        return 0
    return (n_samples - dft_size) // hop + 1


def stft_magnitude(waveform, config: StftConfig = StftConfig(), sample_rate: int = 16000) -> Spectrogram:
    """|DFT(hann * frame_t)[k]| for k = 0..N/2, frames without padding."""
    x = np.asarray(waveform, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("waveform must be one-dimensional")
    N, hop = config.dft_size, config.hop
    T = n_frames(len(x), N, hop)
    if T == 0:
        raise ValidationError(f"waveform of {len(x)} samples is shorter than one {N}-sample frame")
    frames = np.lib.stride_tricks.sliding_window_view(x, N)[::hop][:T]
    mag = np.abs(np.fft.rfft(frames * hann_window(N), axis=1))
    freqs = np.arange(N // 2 + 1) * (sample_rate / N)
    return Spectrogram(mag, freqs, sample_rate, N, hop)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def _mel_matrix(n_mels, f_min, f_max, sample_rate, dft_size):
    freqs = np.arange(dft_size // 2 + 1) * (sample_rate / dft_size)
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    tri = np.maximum(0.0, np.minimum(rising, falling))
    # unit continuous area: height 2 / base
    weights = tri * (2.0 / (hi - lo))
    empty = np.flatnonzero(weights.sum(axis=1) <= 0)
    if empty.size:
        raise ValidationError(
            f"mel filters {empty.tolist()} contain no DFT bin; use fewer mels or a larger DFT"
        )
    weights.setflags(write=False)
    return weights


def mel_filterbank(config: MelConfig, dft_size: int) -> np.ndarray:
    """n_mels x (dft_size/2 + 1) triangular filters on the HTK mel scale."""
    return _mel_matrix(config.n_mels, float(config.f_min), config.fmax, config.sample_rate, dft_size)


def _check_mel(spec: Spectrogram, config: MelConfig) -> np.ndarray:
    if config.sample_rate != spec.sample_rate:
        raise ValidationError("mel config sample rate differs from the spectrogram's")
    fb = mel_filterbank(config, spec.dft_size)
    if fb.shape[1] != spec.values.shape[1]:
        raise ValidationError(
            f"spectrogram has {spec.values.shape[1]} bins, mel filterbank expects {fb.shape[1]}"
        )
    return fb


def mel_amplitude(spec: Spectrogram, config: MelConfig) -> np.ndarray:
    """Mel-weighted magnitudes, frames x n_mels (no log)."""
    fb = _check_mel(spec, config)
    return spec.values @ fb.T


def logmel_power(spec: Spectrogram, config: MelConfig) -> np.ndarray:
    """10*log10(M |S|^2 + 1e-10), frames x n_mels."""
    fb = _check_mel(spec, config)
    return 10.0 * np.log10((spec.values**2) @ fb.T + LOG_EPS)


def stack_frames(features, context: int = 5) -> np.ndarray:
    """Concatenate ``context`` consecutive rows: row t = rows t..t+context-1."""
    x = np.asarray(features)
    if x.ndim != 2:
        raise ValidationError("features must be frames x dims")
    T, d = x.shape
    if context < 1 or T < context:
        raise ValidationError(f"need at least {context} frames, got {T}")
    windows = np.lib.stride_tricks.sliding_window_view(x, context, axis=0)  # (T-c+1, d, c)
    return np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(T - context + 1, context * d)


def band_limit(spec: Spectrogram, f_lo: float, f_hi: float) -> Spectrogram:
    """Keep bins whose centre frequency lies in [f_lo, f_hi]."""
    if not f_lo < f_hi:
        raise ValidationError(f"need f_lo < f_hi, got {f_lo}, {f_hi}")
    keep = (spec.freqs >= f_lo) & (spec.freqs <= f_hi)
    if not keep.any():
        raise ValidationError(f"no bins between {f_lo} and {f_hi} Hz")
    return Spectrogram(
        spec.values[:, keep], spec.freqs[keep], spec.sample_rate, spec.dft_size, spec.hop_size, dict(spec.meta)
    )


def time_average(spec, with_std: bool = False):
    """Per-bin mean over frames; with ``with_std`` also the population std."""
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValidationError("time_average needs a frames x bins matrix with >= 1 frame")
    mean = values.mean(axis=0)
    if with_std:
        return mean, values.std(axis=0)
    return mean
