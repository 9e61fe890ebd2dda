from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError
from ..nnet import (
    Adam,
    AngularHead,
    DenseNet,
    angular_loss,
    l2_normalize,
    l2_normalize_backward,
    load_checkpoint,
    mixup,
    save_checkpoint,
    spec_augment,
    subspace_loss,
)
from ..utils import check_random_state, check_waveforms
from .features import BAND, branch_features, parse_spectrogram_branch, spectrogram_stats


class DiscriminativeFrontend(TransformerMixin, BaseEstimator):
    """Multi-branch dense embedding network trained with an angular-margin loss.

    Each branch maps one clip-level input vector (``"spectrum"`` or
    ``"spectrogram_<N>"``) through ``input -> 256 -> 256 -> 128``; the
    concatenation of branch outputs is the embedding. ``fit`` takes waveforms
    and integer meta-information labels for all machine types at once.
    """

    def __init__(self, branches=("spectrum", "spectrogram_1024"), hidden_units=(256, 256),
                 branch_dim=128, loss="scac", center_mode="trainable", subclusters=16, margin=0.2,
                 arcface_scale=30.0, use_subspace_loss=False, mixup_prob=0.5, use_spec_augment=False,
                 epochs=16, batch_size=64, learning_rate=1e-3, weight_decay=0.01, band=BAND,
                 spectrum_dft=8192, spectrum_bins=1024, dtype="float32", random_state=0,
                 sample_rate=16000):
        self.branches = branches
        self.hidden_units = hidden_units
        self.branch_dim = branch_dim
        self.loss = loss
        self.center_mode = center_mode
        self.subclusters = subclusters
        self.margin = margin
        self.arcface_scale = arcface_scale
        self.use_subspace_loss = use_subspace_loss
        self.mixup_prob = mixup_prob
        self.use_spec_augment = use_spec_augment
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.band = band
        self.spectrum_dft = spectrum_dft
        self.spectrum_bins = spectrum_bins
        self.dtype = dtype
        self.random_state = random_state
        self.sample_rate = sample_rate

    @property
    def embedding_dim(self) -> int:
        return self.branch_dim * len(self.branches)

    def branch_inputs(self, X) -> list[np.ndarray]:
        clips = check_waveforms(X)
        return [
            np.stack([
                branch_features(x, b, tuple(self.band), self.sample_rate, self.spectrum_dft, self.spectrum_bins)
                for x in clips
            ])
            for b in self.branches
        ]

    def _new_head(self, n_classes, dim, rng, center_mode):
        return AngularHead.create(
            n_classes, dim, rng, loss_kind=self.loss,
            subclusters=self.subclusters if self.loss == "scac" else 1,
            center_mode=center_mode, margin=self.margin,
            scale=self.arcface_scale if self.loss == "arcface" else None,
        )

    def fit(self, X, y):
        clips = check_waveforms(X)
        y = np.asarray(y, dtype=np.int64)
        if len(y) != len(clips):
            raise ValidationError("one label per clip required")
        if len(np.unique(y)) < 2:
            raise ValidationError("discriminative training needs at least two distinct meta labels")
        if self.use_subspace_loss and len(self.branches) < 2:
            raise ValidationError("subspace loss needs at least two branches")
        rng = check_random_state(self.random_state)
        dtype = np.dtype(self.dtype)
        inputs = self.branch_inputs(clips)
        self.input_mean_ = [f.mean(axis=0) for f in inputs]
        self.input_scale_ = [np.maximum(f.std(axis=0), 1e-8) for f in inputs]
        feats = [((f - m) / s).astype(dtype) for f, m, s in zip(inputs, self.input_mean_, self.input_scale_)]

        n_classes = int(y.max()) + 1
        self.n_classes_ = n_classes
        self.nets_ = [
            DenseNet.build([f.shape[1], *self.hidden_units, self.branch_dim], rng, dtype=dtype) for f in feats
        ]
        self.head_ = self._new_head(n_classes, self.embedding_dim, rng, self.center_mode)
        self.branch_heads_ = []
        if self.use_subspace_loss:
            self.branch_heads_ = [self._new_head(n_classes, self.branch_dim, rng, "trainable") for _ in self.branches]
        heads = [self.head_, *self.branch_heads_]
        params = [p for net in self.nets_ for p in net.parameters()]
        params += [h.centers for h in heads if h.trainable]
        opt = Adam(self.learning_rate, kind="adamw", weight_decay=self.weight_decay)

        n = len(clips)
        self.loss_curve_ = []
        self.scale_history_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                batch = [f[idx] for f in feats]
                if self.use_spec_augment:
                    batch = self._augmented(batch, clips, idx, rng, dtype)
                targets = [(y[idx], 1.0)]
                if len(idx) >= 2 and self.mixup_prob > 0:
                    widths = np.cumsum([b.shape[1] for b in batch])[:-1]
                    mixed, targets = mixup(np.hstack(batch), y[idx], rng, prob=self.mixup_prob)
                    batch = np.split(mixed, widths, axis=1)
                loss = self._train_step(batch, targets, heads, params, opt)
                total += loss * len(idx)
            self.loss_curve_.append(total / n)
            self.scale_history_.append([h.scale for h in heads])
        self.n_steps_ = opt.step_count
        self.train_accuracy_ = float(np.mean(self.predict(clips) == y))
        return self

    def _augmented(self, batch, clips, idx, rng, dtype):
        out = list(batch)
        for bi, b in enumerate(self.branches):
            if b == "spectrum":
                continue
            n_fft = parse_spectrogram_branch(b)
            raw = np.stack([
                spectrogram_stats(clips[i], n_fft, tuple(self.band), self.sample_rate,
                                  augment=lambda v: spec_augment(v, rng))
                for i in idx
            ])
            out[bi] = ((raw - self.input_mean_[bi]) / self.input_scale_[bi]).astype(dtype)
        return out

    def _train_step(self, batch, targets, heads, params, opt):
        outs, caches = zip(*(net.forward(b) for net, b in zip(self.nets_, batch)))
        if self.use_subspace_loss:
            res = subspace_loss(self.branch_heads_, self.head_, [o.astype(np.float64) for o in outs], targets)
            branch_grads = res.grad_branches
            center_grads = res.grad_centers
            scales = res.scales
            loss = res.loss
        else:
            Z = np.hstack(outs).astype(np.float64)
            e, norms = l2_normalize(Z)
            res = angular_loss(self.head_, e, targets)
            gZ = l2_normalize_backward(res.grad_embeddings, e, norms)
            branch_grads = np.split(gZ, np.cumsum([o.shape[1] for o in outs])[:-1], axis=1)
            center_grads = [res.grad_centers]
            scales = [res.scale]
            loss = res.loss
        grads = []
        for net, cache, g in zip(self.nets_, caches, branch_grads):
            layer_grads, _ = net.backward(cache, g.astype(net.dtype))
            grads += layer_grads
        grads += [g for h, g in zip(heads, center_grads) if h.trainable]
        opt.step(params, grads)
        for h, s in zip(heads, scales):
            if h.trainable:
                h.renormalize()
            h.scale = s
        return loss

    def embed_inputs(self, inputs) -> np.ndarray:
        """Embeddings from precomputed (unstandardised) branch inputs."""
        check_is_fitted(self, "nets_")
        outs = []
        for net, f, m, s in zip(self.nets_, inputs, self.input_mean_, self.input_scale_):
            outs.append(net(((f - m) / s).astype(net.dtype)))
        return np.hstack(outs).astype(np.float64)

    def transform(self, X) -> np.ndarray:
        """Concatenated branch outputs, not normalised."""
        return self.embed_inputs(self.branch_inputs(X))

    def predict(self, X) -> np.ndarray:
        e, _ = l2_normalize(self.transform(X))
        return self.head_.predict_classes(e)

    def save(self, path) -> str:
        """Write a checkpoint; returns its sha256."""
        check_is_fitted(self, "nets_")
        nets = {f"branch{i}": net for i, net in enumerate(self.nets_)}
        heads = {"concat": self.head_}
        heads.update({f"branch{i}": h for i, h in enumerate(self.branch_heads_)})
        arrays = {}
        for i, (m, s) in enumerate(zip(self.input_mean_, self.input_scale_)):
            arrays[f"mean{i}"] = m
            arrays[f"scale{i}"] = s
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.get_params().items()}
        extra = {"params": params, "kind": "dis", "n_classes": self.n_classes_,
                 "train_accuracy": self.train_accuracy_}
        return save_checkpoint(path, nets, heads, extra, seed=self.random_state, step=self.n_steps_, arrays=arrays)

    @classmethod
    def load(cls, path) -> "DiscriminativeFrontend":
        ckpt = load_checkpoint(path)
        extra = ckpt.header["extra"]
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in extra["params"].items()}
        est = cls(**params)
        k = len(est.branches)
        est.nets_ = [ckpt.nets[f"branch{i}"] for i in range(k)]
        est.head_ = ckpt.heads["concat"]
        est.branch_heads_ = [ckpt.heads[f"branch{i}"] for i in range(k) if f"branch{i}" in ckpt.heads]
        est.input_mean_ = [ckpt.arrays[f"mean{i}"] for i in range(k)]
        est.input_scale_ = [ckpt.arrays[f"scale{i}"] for i in range(k)]
        est.n_classes_ = extra["n_classes"]
        est.train_accuracy_ = extra["train_accuracy"]
        est.n_steps_ = ckpt.header["step"]
        return est
