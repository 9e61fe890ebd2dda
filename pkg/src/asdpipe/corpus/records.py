from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..exceptions import ManifestValidationError, ValidationError

DOMAINS = ("source", "target")
SPLITS = ("train", "test")
LABELS = ("normal", "anomaly", "unknown")
SUBSETS = ("dev", "eval")
YEARS = (2020, 2021, 2022, 2023, 2024)


@dataclass(frozen=True)
class ClipRecord:
    """Metadata for one audio clip.

    ``section`` holds the machine ID for 2020 data and the section name from
    2021 on. ``audio_path`` is absolute once loaded from a manifest.
    """

    clip_id: str
    audio_path: str
    machine_type: str
    section: str
    domain: str
    split: str
    label: str
    attributes: Mapping[str, str] = field(default_factory=dict)
    subset: str = "dev"

    def validate(self) -> None:
        if not self.clip_id:
            raise ManifestValidationError(self.clip_id, "empty clip_id")
        for name, value, allowed in (
            ("domain", self.domain, DOMAINS),
            ("split", self.split, SPLITS),
            ("label", self.label, LABELS),
            ("subset", self.subset, SUBSETS),
        ):
            if value not in allowed:
                raise ManifestValidationError(
                    self.clip_id, f"{name}={value!r} not in {allowed}"
                )
        if self.split == "train" and self.label == "anomaly":
            raise ManifestValidationError(self.clip_id, "train clips must be normal")
        if self.split == "test" and self.label == "unknown":
            raise ManifestValidationError(self.clip_id, "test clips need a ground-truth label")
        for k, v in self.attributes.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ManifestValidationError(self.clip_id, "attribute keys and values must be strings")

    @property
    def is_anomaly(self) -> bool:
        return self.label == "anomaly"

    def to_json_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "audio_path": self.audio_path,
            "machine_type": self.machine_type,
            "section": self.section,
            "domain": self.domain,
            "split": self.split,
            "label": self.label,
            "attributes": dict(self.attributes),
            "subset": self.subset,
        }


MANIFEST_KEYS = frozenset(ClipRecord.__dataclass_fields__)


@dataclass(frozen=True)
class YearCondition:
    """Evaluation rules of one DCASE year (metric set, unit, combiners)."""

    year: int
    unit: str
    metric_set: tuple[str, ...]
    unit_combiner: str
    subset_combiner: str

    @classmethod
    def for_year(cls, year: int) -> "YearCondition":
        year = int(year)
        if year == 2020:
            return cls(2020, "per_section_within_machine_type", ("s_auc", "s_pauc"), "amean", "amean")
        if year == 2021:
            return cls(
                2021,
                "per_section_within_machine_type",
                ("s_auc", "s_pauc", "t_auc", "t_pauc"),
                "hmean",
                "hmean",
            )
        if year == 2022:
            return cls(2022, "per_section_within_machine_type", ("smix_auc", "tmix_auc", "mix_pauc"), "hmean", "hmean")
        if year in (2023, 2024):
            return cls(year, "per_machine_type", ("smix_auc", "tmix_auc", "mix_pauc"), "hmean", "hmean")
        raise ValidationError(f"unsupported year {year}; expected one of {YEARS}")

    @property
    def uses_target_domain(self) -> bool:
        return self.year != 2020

    def unit_key(self, record) -> tuple[str, ...]:
        if self.unit == "per_machine_type":
            return (record.machine_type,)
        return (record.machine_type, record.section)


def validate_records(records, year: int | None = None) -> None:
    """Check per-record and cross-record manifest invariants."""
    seen = set()
    test_labels: dict[tuple[str, str], set] = {}
    for rec in records:
        rec.validate()
        if rec.clip_id in seen:
            raise ManifestValidationError(rec.clip_id, "duplicate clip_id")
        seen.add(rec.clip_id)
        if year == 2020 and rec.domain != "source":
            raise ManifestValidationError(rec.clip_id, "2020 clips must all be source domain")
        if rec.split == "test":
            test_labels.setdefault((rec.machine_type, rec.section), set()).add(rec.label)
    for (mt, sec), labels in test_labels.items():
        if not {"normal", "anomaly"} <= labels:
            raise ValidationError(
                f"test split of ({mt}, {sec}) needs at least one normal and one anomaly clip"
            )
