from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError
from ..nnet import Adam, DenseNet, load_checkpoint, mse_loss, save_checkpoint
from ..utils import check_random_state, check_waveforms
from .features import logmel_windows


class AutoEncoderFrontend(TransformerMixin, BaseEstimator):
    """Dense autoencoder on stacked log-mel power windows.

    Trained on the normal clips of one machine type. The anomaly score of a
    clip is the mean per-window reconstruction MSE; ``transform`` returns it
    as a one-column pseudo-embedding.

    The default layout is 640-128-128-128-128-8-128-128-128-128-640 (ten
    affine maps, ReLU between them, linear output).
    """

    def __init__(self, n_mels=128, dft_size=1024, hop_size=512, context=5, hidden_units=128,
                 n_hidden=4, bottleneck=8, epochs=50, batch_size=256, learning_rate=1e-3,
                 dtype="float32", random_state=0, sample_rate=16000):
        self.n_mels = n_mels
        self.dft_size = dft_size
        self.hop_size = hop_size
        self.context = context
        self.hidden_units = hidden_units
        self.n_hidden = n_hidden
        self.bottleneck = bottleneck
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dtype = dtype
        self.random_state = random_state
        self.sample_rate = sample_rate

    @property
    def input_dim(self) -> int:
        return self.n_mels * self.context

    def layer_dims(self) -> list[int]:
        enc = [self.hidden_units] * self.n_hidden
        return [self.input_dim, *enc, self.bottleneck, *enc, self.input_dim]

    def windows(self, x) -> np.ndarray:
        try:
            return logmel_windows(x, self.n_mels, self.dft_size, self.hop_size, self.context, self.sample_rate)
        except ValidationError as exc:
            raise ValidationError(f"clip too short for one {self.context}-frame window: {exc}") from None

    def fit(self, X, y=None):
        clips = check_waveforms(X)
        data = np.concatenate([self.windows(x) for x in clips]).astype(self.dtype)
        return self.fit_windows(data)

    def fit_windows(self, data):
        """Train on precomputed stacked windows (rows x input_dim)."""
        data = np.asarray(data, dtype=self.dtype)
        if data.ndim != 2 or len(data) == 0:
            raise ValidationError("no training windows could be extracted")
        rng = check_random_state(self.random_state)
        self.net_ = DenseNet.build(self.layer_dims(), rng, dtype=np.dtype(self.dtype))
        self.net_.seed = self.random_state if isinstance(self.random_state, int) else None
        opt = Adam(self.learning_rate, kind="adam")
        params = self.net_.parameters()
        self.loss_curve_ = []
        n = len(data)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                batch = data[order[start : start + self.batch_size]]
                recon, cache = self.net_.forward(batch)
                loss, grad = mse_loss(recon, batch)
                grads, _ = self.net_.backward(cache, grad)
                opt.step(params, grads)
                total += loss * len(batch)
            self.loss_curve_.append(total / n)
        self.n_steps_ = opt.step_count
        return self

    def window_errors(self, x) -> np.ndarray:
        check_is_fitted(self, "net_")
        w = self.windows(x).astype(self.dtype)
        recon = self.net_(w)
        return np.mean((recon.astype(np.float64) - w.astype(np.float64)) ** 2, axis=1)

    def anomaly_score(self, X) -> np.ndarray:
        """Mean per-window reconstruction MSE of each clip."""
        return np.array([self.window_errors(x).mean() for x in check_waveforms(X)])

    def transform(self, X):
        return self.anomaly_score(X)[:, None]

    def save(self, path) -> str:
        """Write a checkpoint; returns its sha256."""
        check_is_fitted(self, "net_")
        return save_checkpoint(
            path, {"ae": self.net_}, extra={"params": self.get_params(), "kind": "ae"},
            seed=self.random_state, step=self.n_steps_,
        )

    @classmethod
    def load(cls, path) -> "AutoEncoderFrontend":
        ckpt = load_checkpoint(path)
        est = cls(**ckpt.header["extra"]["params"])
        est.net_ = ckpt.nets["ae"]
        est.n_steps_ = ckpt.header["step"]
        return est
