from __future__ import annotations

import numpy as np

from ..exceptions import ValidationError


def mixup(x, labels, rng, prob=0.5, lam=None):
    """Mix each sample with a random partner from the same batch.

    With probability ``prob`` draws one ``lam ~ U(0, 1)`` for the batch and a
    random permutation; returns the mixed batch and ``[(labels, lam),
    (partner_labels, 1 - lam)]``. Otherwise returns the batch unchanged with
    ``[(labels, 1.0)]``. Passing ``lam`` forces mixing with that value.
    """
    x = np.asarray(x)
    labels = np.asarray(labels)
    n = len(x)
    if n < 2:
        raise ValidationError("mixup needs a batch of at least two samples")
    if lam is None:
        if rng.random() >= prob:
            return x, [(labels, 1.0)]
        lam = rng.random()
    perm = rng.permutation(n)
    mixed = lam * x + (1.0 - lam) * x[perm]
    return mixed, [(labels, lam), (labels[perm], 1.0 - lam)]


def _band_starts(rng, dim, n_masks, max_width):
    out = []
    for _ in range(n_masks):
        w = int(rng.integers(0, max_width + 1))
        s = int(rng.integers(0, dim - w + 1))
        out.append((s, w))
    return out


def spec_augment(features, rng, max_time_masks=2, max_freq_masks=2, max_width=0.1):
    """Zero random contiguous row bands (time) and column bands (frequency).

    Each of the ``max_*_masks`` bands has an integer width drawn uniformly
    from ``0..floor(max_width * dim)``, so fewer cells may end up masked.
    """
    x = np.array(features, copy=True)
    if x.ndim != 2:
        raise ValidationError("spec_augment expects a 2-D feature matrix")
    T, F = x.shape
    for s, w in _band_starts(rng, T, max_time_masks, int(max_width * T)):
        x[s : s + w, :] = 0
    for s, w in _band_starts(rng, F, max_freq_masks, int(max_width * F)):
        x[:, s : s + w] = 0
    return x

