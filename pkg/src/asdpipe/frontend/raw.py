from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..utils import check_waveforms
from .features import mel_amplitude_mean


class RawSpecFrontend(TransformerMixin, BaseEstimator):
    """Time-averaged mel amplitude spectrogram; nothing to train."""

    def __init__(self, n_mels=128, dft_size=1024, hop_size=512, sample_rate=16000):
        self.n_mels = n_mels
        self.dft_size = dft_size
        self.hop_size = hop_size
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return np.stack([
            mel_amplitude_mean(x, self.n_mels, self.dft_size, self.hop_size, self.sample_rate)
            for x in check_waveforms(X)
        ])

    def __sklearn_is_fitted__(self):
        return True
