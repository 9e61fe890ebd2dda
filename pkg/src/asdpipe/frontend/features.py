"""Per-clip input features for the three frontend families."""
from __future__ import annotations

import numpy as np

from .. import dsp
from ..exceptions import ValidationError

SAMPLE_RATE = 16000
BAND = (200.0, 8000.0)


def logmel_windows(x, n_mels=128, dft_size=1024, hop_size=512, context=5, sample_rate=SAMPLE_RATE):
    """Stacked log-mel power windows: (frames - context + 1) x (context * n_mels)."""
    spec = dsp.stft_magnitude(x, dsp.StftConfig(dft_size, hop_size), sample_rate)
    logmel = dsp.logmel_power(spec, dsp.MelConfig(n_mels, sample_rate=sample_rate))
    return dsp.stack_frames(logmel, context)


def mel_amplitude_mean(x, n_mels=128, dft_size=1024, hop_size=512, sample_rate=SAMPLE_RATE):
    """Time-averaged mel amplitude spectrogram (the raw_spec feature)."""
    spec = dsp.stft_magnitude(x, dsp.StftConfig(dft_size, hop_size), sample_rate)
    return dsp.time_average(dsp.mel_amplitude(spec, dsp.MelConfig(n_mels, sample_rate=sample_rate)))


def spectrum_vector(x, dft_size=8192, n_out=1024, band=BAND, sample_rate=SAMPLE_RATE):
    """Band-limited magnitude spectrum of the clip centre, max-pooled to ``n_out`` values."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < dft_size:
        raise ValidationError(f"clip of {len(x)} samples is shorter than the {dft_size}-point spectrum window")
    start = (len(x) - dft_size) // 2
    spec = dsp.stft_magnitude(x[start : start + dft_size], dsp.StftConfig(dft_size, dft_size), sample_rate)
    mag = dsp.band_limit(spec, *band).values[0]
    if len(mag) < n_out:
        raise ValidationError(f"only {len(mag)} spectrum bins for {n_out} pooled outputs")
    return np.array([chunk.max() for chunk in np.array_split(mag, n_out)])


def spectrogram_stats(x, dft_size=1024, band=BAND, sample_rate=SAMPLE_RATE, augment=None):
    """Time mean and std of the band-limited amplitude spectrogram, concatenated.

    ``augment`` optionally transforms the (frames x bins) matrix first.
    """
    spec = dsp.band_limit(dsp.stft_magnitude(x, dsp.StftConfig(dft_size), sample_rate), *band)
    values = spec.values if augment is None else augment(spec.values)
    mean, std = dsp.time_average(values, with_std=True)
    return np.concatenate([mean, std])


def branch_dim(branch: str, band=BAND, sample_rate=SAMPLE_RATE, spectrum_bins=1024) -> int:
    if branch == "spectrum":
        return spectrum_bins
    n = parse_spectrogram_branch(branch)
    freqs = np.arange(n // 2 + 1) * (sample_rate / n)
    return 2 * int(np.count_nonzero((freqs >= band[0]) & (freqs <= band[1])))


def parse_spectrogram_branch(branch: str) -> int:
    prefix = "spectrogram_"
    if not branch.startswith(prefix) or not branch[len(prefix):].isdigit():
        raise ValidationError(f"unknown branch {branch!r}; use 'spectrum' or 'spectrogram_<dft size>'")
    return int(branch[len(prefix):])


def branch_features(x, branch, band=BAND, sample_rate=SAMPLE_RATE, spectrum_dft=8192, spectrum_bins=1024):
    if branch == "spectrum":
        return spectrum_vector(x, spectrum_dft, spectrum_bins, band, sample_rate)
    return spectrogram_stats(x, parse_spectrogram_branch(branch), band, sample_rate)
