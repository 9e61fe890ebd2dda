"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import hashlib

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ValidationError


def check_waveforms(X, min_length=1):
    """Return a list of finite 1-D float64 waveforms.

    Accepts a 2-D array (equal-length clips) or any sequence of 1-D arrays.
    """
    if isinstance(X, np.ndarray) and X.ndim == 1 and X.dtype != object:
        raise ValidationError("expected a batch of waveforms, got a single 1-D array; wrap it in a list")
    out = []
    for i, x in enumerate(X):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValidationError(f"waveform {i} is not one-dimensional")
        if len(x) < min_length:
            raise ValidationError(f"waveform {i} has {len(x)} samples, need >= {min_length}")
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"waveform {i} contains non-finite samples")
        out.append(x)
    if not out:
        raise ValidationError("no waveforms given")
    return out


def check_embeddings(X, dim=None, dtype=np.float64):
    X = check_array(X, dtype=dtype, ensure_2d=True)
    if dim is not None and X.shape[1] != dim:
        raise ValidationError(f"expected {dim}-dimensional rows, got {X.shape[1]}")
    return X


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sha256_file(path, chunk=1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return h.hexdigest()
