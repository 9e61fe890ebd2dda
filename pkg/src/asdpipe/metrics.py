"""Official DCASE evaluation scores.

AUC is the Mann-Whitney statistic (ties count one half). pAUC integrates
the ROC curve over FPR in [0, p] with linear interpolation at p and applies
the McClish standardisation, so chance level is 0.5 and a perfect ranking 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus.records import YearCondition
from .exceptions import UnevaluableUnitError, ValidationError

METRIC_IDS = ("s_auc", "s_pauc", "t_auc", "t_pauc", "smix_auc", "tmix_auc", "mix_pauc")


def _check_operands(neg, pos):
    neg = np.asarray(neg, dtype=np.float64).ravel()
    pos = np.asarray(pos, dtype=np.float64).ravel()
    if neg.size == 0 or pos.size == 0:
        raise ValidationError("AUC needs at least one negative and one positive score")
    if not (np.all(np.isfinite(neg)) and np.all(np.isfinite(pos))):
        raise ValidationError("scores must be finite")
    return neg, pos


def auc(neg, pos) -> float:
    """Fraction of (pos, neg) pairs with pos > neg, ties counted 0.5."""
    neg, pos = _check_operands(neg, pos)
    s = np.sort(neg)
    below = np.searchsorted(s, pos, side="left")
    ties = np.searchsorted(s, pos, side="right") - below
    return float((below.sum() + 0.5 * ties.sum()) / (neg.size * pos.size))


def roc_curve(neg, pos):
    """ROC vertices (fpr, tpr) from (0, 0), one per distinct score, descending threshold."""
    neg, pos = _check_operands(neg, pos)
    scores = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    order = np.argsort(-scores, kind="stable")
    scores, is_pos = scores[order], is_pos[order]
    ends = np.r_[np.flatnonzero(np.diff(scores)), scores.size - 1]
    tps = np.cumsum(is_pos)[ends]
    fps = (ends + 1) - tps
    fpr = np.r_[0.0, fps / neg.size]
    tpr = np.r_[0.0, tps / pos.size]
    return fpr, tpr


def pauc(neg, pos, p=0.1, standardized=True) -> float:
    """Partial AUC over FPR in [0, p].

    ``standardized`` applies McClish's correction
    ``0.5 * (1 + (A - p**2/2) / (p - p**2/2))``; otherwise returns ``A / p``.
    """
    if not 0 < p <= 1:
        raise ValidationError("p must lie in (0, 1]")
    fpr, tpr = roc_curve(neg, pos)
    stop = int(np.searchsorted(fpr, p, side="right"))
    x = fpr[:stop]
    y = tpr[:stop]
    if stop < fpr.size and x[-1] < p:
        x0, x1 = fpr[stop - 1], fpr[stop]
        y0, y1 = tpr[stop - 1], tpr[stop]
        x = np.r_[x, p]
        y = np.r_[y, y0 + (y1 - y0) * (p - x0) / (x1 - x0)]
    area = float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))
    if not standardized:
        return area / p
    min_area = 0.5 * p * p
    return 0.5 * (1.0 + (area - min_area) / (p - min_area))


# --- score tables and evaluation units ---------------------------------------

@dataclass
class ScoreTable:
    """Per-clip anomaly scores with ground truth (test split only)."""

    clip_id: list
    machine_type: list
    section: list
    domain: list
    label: list
    score: np.ndarray
    subset: list = field(default_factory=list)

    def __post_init__(self):
        self.score = np.asarray(self.score, dtype=np.float64)
        n = len(self.score)
        if not self.subset:
            self.subset = ["dev"] * n
        for name in ("clip_id", "machine_type", "section", "domain", "label", "subset"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        bad = set(self.label) - {"normal", "anomaly"}
        if bad:
            raise ValidationError(f"score tables need normal/anomaly labels, got {sorted(bad)}")
        if not np.all(np.isfinite(self.score)):
            raise ValidationError("scores must be finite")

    @classmethod
    def from_meta(cls, meta, scores) -> "ScoreTable":
        cols = {k: [m[k] for m in meta] for k in ("clip_id", "machine_type", "section", "domain", "label")}
        return cls(**cols, score=scores, subset=[m.get("subset", "dev") for m in meta])

    @classmethod
    def concat(cls, tables) -> "ScoreTable":
        tables = list(tables)
        cols = {k: [v for t in tables for v in getattr(t, k)]
                for k in ("clip_id", "machine_type", "section", "domain", "label", "subset")}
        return cls(**cols, score=np.concatenate([t.score for t in tables]) if tables else np.empty(0))

    def __len__(self):
        return len(self.score)

    def take(self, idx) -> "ScoreTable":
        idx = list(idx)
        pick = lambda col: [col[i] for i in idx]  # noqa: E731
        return ScoreTable(pick(self.clip_id), pick(self.machine_type), pick(self.section), pick(self.domain),
                          pick(self.label), self.score[idx], pick(self.subset))

    def units(self, condition: YearCondition) -> dict:
        """Split rows into evaluation units, keyed by (machine_type,) or (machine_type, section)."""
        groups: dict = {}
        for i in range(len(self)):
            if condition.unit == "per_machine_type":
                key = (self.machine_type[i],)
            else:
                key = (self.machine_type[i], self.section[i])
            groups.setdefault(key, []).append(i)
        return {k: self.take(v) for k, v in groups.items()}

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("clip_id,machine_type,section,domain,label,score\n")
            for i in range(len(self)):
                fh.write(f"{self.clip_id[i]},{self.machine_type[i]},{self.section[i]},{self.domain[i]},"
                         f"{self.label[i]},{self.score[i]:.9g}\n")


def metric_operands(table: ScoreTable, metric: str):
    """(negative scores, positive scores) a metric is computed from."""
    dom = np.asarray(table.domain)
    lab = np.asarray(table.label)
    normal, anomaly = lab == "normal", lab == "anomaly"
    src, tgt = dom == "source", dom == "target"
    if metric in ("s_auc", "s_pauc"):
        neg, pos = normal & src, anomaly & src
    elif metric in ("t_auc", "t_pauc"):
        neg, pos = normal & tgt, anomaly & tgt
    elif metric == "smix_auc":
        neg, pos = normal & src, anomaly
    elif metric == "tmix_auc":
        neg, pos = normal & tgt, anomaly
    elif metric == "mix_pauc":
        neg, pos = normal, anomaly
    else:
        raise ValidationError(f"unknown metric {metric!r}")
    return table.score[neg], table.score[pos]


def domain_metrics(table: ScoreTable, condition: YearCondition, p=0.1, standardized=True, unit=None) -> dict:
    """The year's metric set for one evaluation unit, in metric-set order."""
    out = {}
    for metric in condition.metric_set:
        neg, pos = metric_operands(table, metric)
        if neg.size == 0 or pos.size == 0:
            raise UnevaluableUnitError(
                unit, f"{metric} needs normal and anomalous clips, got {neg.size} normal / {pos.size} anomalous"
            )
        if metric.endswith("pauc"):
            out[metric] = pauc(neg, pos, p, standardized)
        else:
            out[metric] = auc(neg, pos)
    return out


# --- aggregation --------------------------------------------------------------

def amean(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("mean of nothing")
    return float(v.sum() / v.size)


def hmean(values) -> float:
    """Harmonic mean; any zero operand makes the result zero."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("mean of nothing")
    if np.any(v <= 0):
        if np.any(v < 0):
            raise ValidationError("harmonic mean of negative values")
        return 0.0
    return float(v.size / np.sum(1.0 / v))


COMBINERS = {"amean": amean, "hmean": hmean}


def combine_unit(metrics: dict, condition: YearCondition) -> float:
    missing = [m for m in condition.metric_set if m not in metrics]
    if missing:
        raise ValidationError(f"unit lacks metrics {missing}")
    return COMBINERS[condition.unit_combiner]([metrics[m] for m in condition.metric_set])


def year_score(unit_metrics: dict, unit_subsets: dict, condition: YearCondition, two_stage_2020=False):
    """Per-unit combined scores and per-subset aggregates.

    ``unit_metrics`` maps unit key -> {metric: value}; ``unit_subsets`` maps
    unit key -> "dev" / "eval". With ``two_stage_2020`` the 2020 aggregate
    first averages sections within each machine type.
    """
    combined = {key: combine_unit(m, condition) for key, m in unit_metrics.items()}
    subset_combiner = COMBINERS[condition.subset_combiner]
    subsets = {}
    for subset in ("dev", "eval"):
        keys = [k for k in combined if unit_subsets[k] == subset]
        if not keys:
            continue
        if two_stage_2020 and condition.year == 2020:
            by_type: dict = {}
            for k in keys:
                by_type.setdefault(k[0], []).append(combined[k])
            subsets[subset] = subset_combiner([subset_combiner(v) for v in by_type.values()])
        else:
            subsets[subset] = subset_combiner([combined[k] for k in keys])
    return combined, subsets


def trial_stats(values):
    """Arithmetic mean and population standard deviation."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("need at least one trial")
    mean = v.sum() / v.size
    return float(mean), float(np.sqrt(np.sum((v - mean) ** 2) / v.size))
