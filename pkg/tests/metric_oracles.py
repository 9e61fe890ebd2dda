"""Independent reference implementations for the metric kernels."""
import numpy as np


def auc_pairs(neg, pos):
    """Count ordered (pos, neg) pairs, ties one half."""
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(neg) * len(pos))


def pauc_sweep(neg, pos, p=0.1):
    """Evaluate the ROC at every distinct threshold and integrate FPR in [0, p]."""
    neg, pos = np.asarray(neg, float), np.asarray(pos, float)
    thresholds = np.unique(np.concatenate([neg, pos]))[::-1]
    pts = [(0.0, 0.0)]
    for t in thresholds:
        pts.append((float(np.mean(neg >= t)), float(np.mean(pos >= t))))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x0 >= p:
            break
        if x1 > p:
            y1 = y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            x1 = p
        area += (x1 - x0) * (y0 + y1) / 2
    return 0.5 * (1 + (area - p * p / 2) / (p - p * p / 2))


def random_score_set(rng, with_ties):
    n_neg, n_pos = rng.integers(1, 201, size=2)
    if with_ties:
        levels = rng.standard_normal(rng.integers(1, 6))
        neg, pos = rng.choice(levels, n_neg), rng.choice(levels, n_pos) + rng.choice([0.0, 0.3], n_pos)
    else:
        neg, pos = rng.standard_normal(n_neg), rng.standard_normal(n_pos) + 0.5
    return neg, pos
