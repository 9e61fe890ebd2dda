"""Reconstruction and angular-margin classification losses with analytic
gradients.

Angular heads score L2-normalised embeddings against unit class centres.
Supported kinds are ``arcface`` (additive angular margin, fixed scale),
``adacos`` (dynamic scale, no margin) and ``scac`` (adacos over several
sub-cluster centres per class, class probability = summed softmax mass of
its sub-clusters).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ValidationError

LOSS_KINDS = ("arcface", "adacos", "scac")
CENTER_MODES = ("fixed", "trainable")
SCALE_MIN, SCALE_MAX = 1.0, 50.0
NORM_TOL = 1e-6
_COS_CLIP = 1.0 - 1e-7


def mse_loss(recon, target):
    """Mean squared error over all entries and its gradient w.r.t. ``recon``."""
    recon = np.asarray(recon)
    target = np.asarray(target)
    if recon.shape != target.shape:
        raise ValidationError(f"shape mismatch {recon.shape} vs {target.shape}")
    diff = recon - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


def l2_normalize(z, eps=1e-12):
    z = np.asarray(z)
    norms = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), eps)
    return z / norms, norms


def l2_normalize_backward(grad, normalized, norms):
    """Gradient w.r.t. z given the gradient w.r.t. z / ||z||."""
    dot = np.sum(grad * normalized, axis=1, keepdims=True)
    return (grad - normalized * dot) / norms


def adacos_initial_scale(n_centers: int) -> float:
    if n_centers <= 1:
        return SCALE_MIN
    return float(np.clip(np.sqrt(2.0) * np.log(n_centers - 1), SCALE_MIN, SCALE_MAX))


class AngularHead:
    """Class-centre matrix plus the state of one angular-margin loss.

    Row ``j`` of ``centers`` belongs to class ``j // subclusters``.
    """

    def __init__(self, centers, n_classes, subclusters=1, center_mode="fixed", loss_kind="adacos",
                 margin=0.2, scale=None):
        if loss_kind not in LOSS_KINDS:
            raise ValidationError(f"loss_kind must be one of {LOSS_KINDS}")
        if center_mode not in CENTER_MODES:
            raise ValidationError(f"center_mode must be one of {CENTER_MODES}")
        if loss_kind != "scac" and subclusters != 1:
            raise ValidationError(f"{loss_kind} uses one centre per class")
        centers = np.asarray(centers)
        if centers.shape[0] != n_classes * subclusters:
            raise ValidationError(f"expected {n_classes * subclusters} centres, got {centers.shape[0]}")
        self.centers = centers
        self.n_classes = int(n_classes)
        self.subclusters = int(subclusters)
        self.center_mode = center_mode
        self.loss_kind = loss_kind
        self.margin = float(margin)
        if scale is None:
            scale = 30.0 if loss_kind == "arcface" else adacos_initial_scale(self.n_centers)
        self.scale = float(scale)

    @classmethod
    def create(cls, n_classes, dim, rng, loss_kind="adacos", subclusters=None, center_mode="fixed",
               margin=0.2, scale=None, dtype=np.float64):
        if subclusters is None:
            subclusters = 16 if loss_kind == "scac" else 1
        centers = rng.standard_normal((n_classes * subclusters, dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        return cls(centers.astype(dtype), n_classes, subclusters, center_mode, loss_kind, margin, scale)

    @property
    def n_centers(self) -> int:
        return self.n_classes * self.subclusters

    @property
    def trainable(self) -> bool:
        return self.center_mode == "trainable"

    def renormalize(self) -> None:
        self.centers /= np.linalg.norm(self.centers, axis=1, keepdims=True)

    def config(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "subclusters": self.subclusters,
            "center_mode": self.center_mode,
            "loss_kind": self.loss_kind,
            "margin": self.margin,
            "scale": self.scale,
        }

    def predict_classes(self, embeddings):
        cos = np.asarray(embeddings) @ self.centers.T
        per_class = cos.reshape(len(cos), self.n_classes, self.subclusters).max(axis=2)
        return per_class.argmax(axis=1)


@dataclass
class AngularLossResult:
    loss: float
    grad_embeddings: np.ndarray
    grad_centers: np.ndarray | None
    scale: float


def as_target_terms(targets, n):
    """Normalise targets to a list of ``(labels, weights)`` pairs."""
    if isinstance(targets, (list, tuple)) and targets and isinstance(targets[0], tuple):
        terms = [(np.asarray(y, dtype=np.int64), np.broadcast_to(np.asarray(w, dtype=np.float64), (n,)))
                 for y, w in targets]
    else:
        terms = [(np.asarray(targets, dtype=np.int64), np.ones(n))]
    for y, _ in terms:
        if y.shape != (n,):
            raise ValidationError(f"expected {n} labels, got shape {y.shape}")
    return terms


def _logsumexp(z, axis):
    zmax = z.max(axis=axis, keepdims=True)
    return (zmax + np.log(np.exp(z - zmax).sum(axis=axis, keepdims=True))).squeeze(axis)


def _dynamic_scale(head, cos, terms):
    n = cos.shape[0]
    C, K = head.n_classes, head.subclusters
    soft = np.zeros((n, C))
    rows = np.arange(n)
    for y, w in terms:
        np.add.at(soft, (rows, y), w)
    main = soft.argmax(axis=1)
    cos3 = cos.reshape(n, C, K)
    own = np.ones((n, C), dtype=bool)
    own[rows, main] = False
    B = np.sum(np.exp(head.scale * cos3) * own[:, :, None], axis=(1, 2)).mean()
    best_own = np.clip(cos3[rows, main].max(axis=1), -1.0, 1.0)
    theta_med = float(np.median(np.arccos(best_own)))
    if B <= 0:
        return SCALE_MIN
    s = np.log(B) / np.cos(min(np.pi / 4, theta_med))
    return float(np.clip(s, SCALE_MIN, SCALE_MAX))


def angular_loss(head: AngularHead, embeddings, targets, update_scale=True, check_normalized=True):
    """Mean cross-entropy of the head's logits and its gradients.

    ``targets`` is either an int label vector or a list of ``(labels,
    weights)`` pairs (mixup); the loss is the weighted sum of the per-label
    cross-entropies. Logits use the head's current scale; the adapted scale
    for the next batch is returned in the result and the loss is treated as
    constant in the scale.
    """
    E = np.asarray(embeddings, dtype=np.float64)
    n = E.shape[0]
    if E.ndim != 2 or E.shape[1] != head.centers.shape[1]:
        raise ValidationError(f"embeddings must be n x {head.centers.shape[1]}")
    if check_normalized and n and np.max(np.abs(np.linalg.norm(E, axis=1) - 1.0)) > NORM_TOL:
        raise ValidationError("embeddings must be L2-normalised rows")
    terms = as_target_terms(targets, n)
    for y, _ in terms:
        if n and (y.min() < 0 or y.max() >= head.n_classes):
            raise ValidationError(f"labels must lie in [0, {head.n_classes})")

    centers = np.asarray(head.centers, dtype=np.float64)
    cos = E @ centers.T
    s = head.scale
    C, K = head.n_classes, head.subclusters
    rows = np.arange(n)
    loss = 0.0
    g_cos = np.zeros_like(cos)

    if head.loss_kind == "arcface":
        m = head.margin
        cm, sm = np.cos(m), np.sin(m)
        for y, w in terms:
            c_y = np.clip(cos[rows, y], -_COS_CLIP, _COS_CLIP)
            sin_y = np.sqrt(1.0 - c_y * c_y)
            z = s * cos
            z[rows, y] = s * (c_y * cm - sin_y * sm)  # s cos(theta + m)
            lse = _logsumexp(z, axis=1)
            loss += float(np.sum(w * (lse - z[rows, y]))) / n
            dz = np.exp(z - lse[:, None])
            dz[rows, y] -= 1.0
            dz *= (w / n)[:, None]
            dcos = s * dz
            dcos[rows, y] *= cm + sm * c_y / sin_y
            g_cos += dcos
    else:
        z = s * cos
        lse = _logsumexp(z, axis=1)
        p = np.exp(z - lse[:, None])
        z3 = z.reshape(n, C, K)
        for y, w in terms:
            own = z3[rows, y]  # n x K
            lse_own = _logsumexp(own, axis=1)
            loss += float(np.sum(w * (lse - lse_own))) / n
            dz = p.copy().reshape(n, C, K)
            dz[rows, y] -= np.exp(own - lse_own[:, None])
            g_cos += s * dz.reshape(n, C * K) * (w / n)[:, None]

    grad_E = g_cos @ centers
    grad_C = g_cos.T @ E if head.trainable else None
    new_scale = head.scale
    if update_scale and head.loss_kind in ("adacos", "scac") and n:
        new_scale = _dynamic_scale(head, cos, terms)
    return AngularLossResult(loss, grad_E, grad_C, new_scale)


@dataclass
class SubspaceLossResult:
    loss: float
    grad_branches: list
    grad_centers: list  # [concat head, *branch heads]
    scales: list


def subspace_loss(branch_heads, concat_head, branch_embeddings, targets, update_scale=True):
    """Angular loss on the concatenated space plus one per branch.

    ``branch_embeddings`` are the raw (unnormalised) branch outputs; every
    term normalises the features of its own space.
    """
    if len(branch_embeddings) < 2:
        raise ValidationError("subspace loss needs at least two branches")
    if len(branch_heads) != len(branch_embeddings):
        raise ValidationError("one head per branch required")
    for h in branch_heads:
        if not h.trainable:
            raise ValidationError("per-branch heads must use trainable centres")
    widths = [np.asarray(b).shape[1] for b in branch_embeddings]
    Z = np.hstack(branch_embeddings)
    e, norms = l2_normalize(Z)
    res = angular_loss(concat_head, e, targets, update_scale)
    gZ = l2_normalize_backward(res.grad_embeddings, e, norms)
    grads = np.split(gZ, np.cumsum(widths)[:-1], axis=1)
    total = res.loss
    center_grads = [res.grad_centers]
    scales = [res.scale]
    for b, (head, zb) in enumerate(zip(branch_heads, branch_embeddings)):
        eb, nb = l2_normalize(np.asarray(zb, dtype=np.float64))
        rb = angular_loss(head, eb, targets, update_scale)
        grads[b] = grads[b] + l2_normalize_backward(rb.grad_embeddings, eb, nb)
        total += rb.loss
        center_grads.append(rb.grad_centers)
        scales.append(rb.scale)
    return SubspaceLossResult(total, grads, center_grads, scales)
