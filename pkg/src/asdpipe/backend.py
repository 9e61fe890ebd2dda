"""Anomaly scoring from stored embeddings.

The kNN family scores a query by its mean distance to the ``k`` nearest
reference rows. Variants rebalance the reference set between domains before
scoring (k-means on source, SMOTE on target) or divide scores by the local
density around the query's nearest reference.

Cosine distance is computed as ``0.5 * ||q_hat - r_hat||**2``, which equals
``1 - q_hat . r_hat`` for unit vectors and is exactly zero only for
identical normalised rows.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ValidationError
from .utils import check_embeddings, check_random_state

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("copy", "knn", "knn_kmeans", "knn_smote", "knn_rescale")
METRICS = ("cosine", "euclidean")
RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "knn_smote"
    k: int = 1
    metric: str = "cosine"
    kmeans_clusters: int = 16
    smote_ratio: float = 0.2
    smote_neighbors: int = 2
    rescale_neighbors: int = 4
    kmeans_max_iter: int = 50
    kmeans_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValidationError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.metric not in METRICS:
            raise ValidationError(f"metric must be one of {METRICS}")
        if self.k < 1 or self.kmeans_clusters < 1 or self.smote_neighbors < 1 or self.rescale_neighbors < 1:
            raise ValidationError("k, clusters and neighbor counts must be >= 1")
        if not 0 < self.smote_ratio <= 1:
            raise ValidationError("smote_ratio must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class ReferenceSet:
    X: np.ndarray
    domains: np.ndarray
    metric: str
    normalized: bool

    def __post_init__(self):
        if len(self.X) == 0:
            raise ValidationError("reference set is empty")

    def __len__(self):
        return len(self.X)


def normalize_rows(X):
    X = np.asarray(X, dtype=np.float64)
    return X / np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)


def pairwise_distances(Q, R, metric="cosine", chunk_elems=1 << 22):
    """Exact distances by explicit differences.

    ``metric`` is ``cosine`` (rows must already be unit norm), ``euclidean``
    or ``sqeuclidean``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    R = np.asarray(R, dtype=np.float64)
    out = np.empty((len(Q), len(R)))
    step = max(1, chunk_elems // max(1, R.size))
    for s in range(0, len(Q), step):
        diff = Q[s : s + step, None, :] - R[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        if metric == "cosine":
            sq *= 0.5
        elif metric == "euclidean":
            np.sqrt(sq, out=sq)
        out[s : s + step] = sq
    return out


def _prepare(X, metric):
    return normalize_rows(X) if metric == "cosine" else np.asarray(X, dtype=np.float64)


# --- k-means -----------------------------------------------------------------

def _kmeans_pp(X, n_clusters, rng):
    n = len(X)
    centers = [X[int(rng.integers(n))]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, n_clusters):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def kmeans(X, n_clusters, rng, max_iter=50, tol=1e-6, spherical=False):
    """Lloyd's algorithm from a k-means++ start.

    Returns ``(centroids, labels, objectives)`` where ``objectives[t]`` is the
    sum of squared distances after the t-th assignment step. With
    ``spherical`` the centroids are renormalised to unit length after each
    update, which minimises the same objective for unit-norm data. With no
    more points than clusters the points themselves are returned.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) <= n_clusters:
        return X.copy(), np.arange(len(X)), [0.0]
    centers = _kmeans_pp(X, n_clusters, rng)
    if spherical:
        centers = normalize_rows(centers)
    objectives = []
    labels = None
    for _ in range(max_iter):
        d2 = pairwise_distances(X, centers, "sqeuclidean")
        labels = d2.argmin(axis=1)
        objectives.append(float(d2[np.arange(len(X)), labels].sum()))
        if len(objectives) > 1:
            prev = objectives[-2]
            if prev - objectives[-1] <= tol * max(prev, 1e-300):
                break
        for c in range(n_clusters):
            members = X[labels == c]
            if len(members) == 0:
                continue
            mean = members.mean(axis=0)
            if spherical:
                norm = np.linalg.norm(mean)
                if norm == 0:
                    continue
                mean = mean / norm
            centers[c] = mean
    return centers, labels, objectives


# --- SMOTE -------------------------------------------------------------------

@dataclass
class SmoteResult:
    points: np.ndarray
    base: np.ndarray  # index of the real row each point starts from
    neighbor: np.ndarray  # index of the neighbour it moves towards
    u: np.ndarray


def smote(T, n_new, n_neighbors, rng, metric="euclidean") -> SmoteResult:
    """Interpolate ``n_new`` points ``x + u (nn - x)`` between rows of ``T``.

    ``nn`` is drawn uniformly among the ``n_neighbors`` nearest other rows.
    With fewer than ``n_neighbors + 1`` rows the points are plain duplicates.
    """
    T = np.asarray(T, dtype=np.float64)
    n = len(T)
    if n_new <= 0 or n == 0:
        e = np.empty(0, dtype=np.int64)
        return SmoteResult(np.empty((0, T.shape[1] if T.ndim == 2 else 0)), e, e, np.empty(0))
    base = rng.integers(0, n, size=n_new)
    if n < n_neighbors + 1:
        warnings.warn(
            f"SMOTE needs {n_neighbors + 1} target samples, got {n}; duplicating instead", RuntimeWarning,
            stacklevel=2,
        )
        return SmoteResult(T[base].copy(), base, base.copy(), np.zeros(n_new))
    D = pairwise_distances(T, T, metric)
    np.fill_diagonal(D, np.inf)
    nearest = np.argsort(D, axis=1, kind="stable")[:, :n_neighbors]
    pick = rng.integers(0, n_neighbors, size=n_new)
    neighbor = nearest[base, pick]
    u = rng.random(n_new)
    points = T[base] + u[:, None] * (T[neighbor] - T[base])
    return SmoteResult(points, base, neighbor, u)


# --- reference construction and scoring --------------------------------------

def build_reference(X, domains, config: BackendConfig, rng=None, details=None) -> ReferenceSet:
    """Reference rows for kNN scoring after the configured domain balancing.

    ``details`` (a dict) receives intermediate results: k-means objectives
    or the raw SMOTE points before renormalisation.
    """
    rng = check_random_state(rng)
    X = check_embeddings(X)
    domains = np.asarray(domains if domains is not None else ["source"] * len(X))
    if len(X) == 0:
        raise ValidationError("backend needs at least one training embedding")
    cosine = config.metric == "cosine"
    R = _prepare(X, config.metric)
    details = details if details is not None else {}
    if config.kind == "knn_kmeans":
        src = domains == "source"
        if src.any():
            cents, _, obj = kmeans(R[src], config.kmeans_clusters, rng, config.kmeans_max_iter, config.kmeans_tol,
                                   spherical=cosine)
            details["kmeans_objectives"] = obj
            R = np.vstack([cents, R[~src]])
            domains = np.concatenate([np.full(len(cents), "source"), domains[~src]])
    elif config.kind == "knn_smote":
        tgt = domains == "target"
        n_src = int(np.sum(domains == "source"))
        need = math.ceil(config.smote_ratio * n_src - 1e-9) - int(tgt.sum())
        if need > 0 and tgt.any():
            res = smote(R[tgt], need, config.smote_neighbors, rng, config.metric)
            details["smote"] = res
            new = normalize_rows(res.points) if cosine else res.points
            R = np.vstack([R, new])
            domains = np.concatenate([domains, np.full(len(new), "target")])
        elif need > 0:
            logger.info("knn_smote: no target-domain references, SMOTE skipped")
    return ReferenceSet(R, domains, config.metric, cosine)


def knn_scores(ref: ReferenceSet, Q, k=1) -> np.ndarray:
    """Mean distance from each query row to its ``k`` nearest references."""
    if k > len(ref):
        raise ValidationError(f"k={k} exceeds reference size {len(ref)}")
    Q = _prepare(np.atleast_2d(Q), ref.metric)
    D = pairwise_distances(Q, ref.X, ref.metric)
    return np.sort(D, axis=1)[:, :k].mean(axis=1)


def knn_score(ref: ReferenceSet, q, k=1) -> float:
    return float(knn_scores(ref, np.asarray(q)[None, :], k)[0])


def local_density(ref: ReferenceSet, n_neighbors) -> np.ndarray:
    """Mean distance from each reference row to its ``n_neighbors`` nearest other rows."""
    D = pairwise_distances(ref.X, ref.X, ref.metric)
    np.fill_diagonal(D, np.inf)
    return np.sort(D, axis=1)[:, :n_neighbors].mean(axis=1)


def rescale_scores(ref: ReferenceSet, Q, raw, rescale_neighbors=4) -> np.ndarray:
    """Divide raw scores by the local density around each query's nearest reference."""
    raw = np.asarray(raw, dtype=np.float64)
    if len(ref) < 2:
        warnings.warn("reference set of size 1: score rescaling disabled", RuntimeWarning, stacklevel=2)
        return raw.copy()
    if rescale_neighbors >= len(ref):
        warnings.warn(
            f"rescale_neighbors={rescale_neighbors} >= reference size {len(ref)}; using {len(ref) - 1}",
            RuntimeWarning, stacklevel=2,
        )
        rescale_neighbors = len(ref) - 1
    rho = local_density(ref, rescale_neighbors)
    Q = _prepare(np.atleast_2d(Q), ref.metric)
    nearest = pairwise_distances(Q, ref.X, ref.metric).argmin(axis=1)  # first index wins ties
    return raw / np.maximum(rho[nearest], RHO_FLOOR)


def copy_scores(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[1] != 1:
        raise ValidationError(f"copy backend expects one-column pseudo-embeddings, got shape {E.shape}")
    return E[:, 0].copy()


class KNNBackend(BaseEstimator):
    """kNN anomaly scorer with optional domain balancing or density rescaling.

    ``fit(X, domains)`` builds the reference set from training embeddings;
    ``anomaly_score(X)`` returns one score per row (higher = more anomalous).
    ``kind="copy"`` passes one-column autoencoder scores straight through.
    """

    def __init__(self, kind="knn_smote", k=1, metric="cosine", kmeans_clusters=16, smote_ratio=0.2,
                 smote_neighbors=2, rescale_neighbors=4, random_state=0):
        self.kind = kind
        self.k = k
        self.metric = metric
        self.kmeans_clusters = kmeans_clusters
        self.smote_ratio = smote_ratio
        self.smote_neighbors = smote_neighbors
        self.rescale_neighbors = rescale_neighbors
        self.random_state = random_state

    @classmethod
    def from_config(cls, config: BackendConfig, random_state=0):
        return cls(config.kind, config.k, config.metric, config.kmeans_clusters, config.smote_ratio,
                   config.smote_neighbors, config.rescale_neighbors, random_state)

    def config(self) -> BackendConfig:
        return BackendConfig(self.kind, self.k, self.metric, self.kmeans_clusters, self.smote_ratio,
                             self.smote_neighbors, self.rescale_neighbors)

    def fit(self, X, domains=None):
        cfg = self.config()
        if cfg.kind == "copy":
            copy_scores(X)
            self.reference_ = None
            return self
        self.details_ = {}
        self.reference_ = build_reference(X, domains, cfg, check_random_state(self.random_state), self.details_)
        return self

    def anomaly_score(self, X) -> np.ndarray:
        check_is_fitted(self, "reference_")
        if self.kind == "copy":
            return copy_scores(X)
        X = check_embeddings(X, dim=self.reference_.X.shape[1])
        raw = knn_scores(self.reference_, X, self.k)
        if self.kind == "knn_rescale":
            return rescale_scores(self.reference_, X, raw, self.rescale_neighbors)
        return raw

    def decision_function(self, X):
        return self.anomaly_score(X)
