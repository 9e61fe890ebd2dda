"""JSONL manifest ingestion and the DCASE filename converter."""
from __future__ import annotations

import json
import os
import re
from pathlib import Path

from ..exceptions import ManifestParseError, ManifestValidationError, ValidationError
from .records import MANIFEST_KEYS, ClipRecord, YearCondition, validate_records


def _record_from_obj(obj, root: Path, path, lineno) -> ClipRecord:
    if not isinstance(obj, dict):
        raise ManifestParseError(path, lineno, "expected a JSON object")
    keys = set(obj)
    if keys != MANIFEST_KEYS:
        missing = sorted(MANIFEST_KEYS - keys)
        extra = sorted(keys - MANIFEST_KEYS)
        raise ManifestParseError(path, lineno, f"bad keys (missing={missing}, unexpected={extra})")
    attrs = obj["attributes"]
    if not isinstance(attrs, dict):
        raise ManifestValidationError(obj["clip_id"], "attributes must be an object")
    for field in MANIFEST_KEYS - {"attributes"}:
        if not isinstance(obj[field], str):
            raise ManifestValidationError(obj.get("clip_id"), f"{field} must be a string")
    audio = Path(obj["audio_path"])
    if not audio.is_absolute():
        audio = root / audio
    return ClipRecord(
        clip_id=obj["clip_id"],
        audio_path=os.path.normpath(str(audio)),
        machine_type=obj["machine_type"],
        section=obj["section"],
        domain=obj["domain"],
        split=obj["split"],
        label=obj["label"],
        attributes=dict(attrs),
        subset=obj["subset"],
    )


def load_manifest(path, year) -> tuple[list[ClipRecord], YearCondition]:
    """Read and validate a JSONL manifest.

    Relative ``audio_path`` entries are resolved against the manifest's
    directory. Returns the records in file order together with the
    evaluation rules for ``year``.
    """
    condition = YearCondition.for_year(year)
    path = Path(path)
    root = path.resolve().parent
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            records.append(_record_from_obj(obj, root, path, lineno))
    validate_records(records, year=condition.year)
    return records, condition


def dump_record(rec: ClipRecord, root: Path | None = None) -> str:
    obj = rec.to_json_dict()
    if root is not None:
        obj["audio_path"] = Path(os.path.relpath(rec.audio_path, root)).as_posix()
    obj["attributes"] = dict(sorted(obj["attributes"].items()))
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def save_manifest(records, path) -> Path:
    """Write records as canonical JSONL (sorted keys, paths relative to the file)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.resolve().parent
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dump_record(rec, root) + "\n")
    return path


# section_00_source_train_normal_0001_<k1>_<v1>_<k2>_<v2>.wav
_SECTION_RE = re.compile(
    r"^section_(?P<section>\d+)_(?P<domain>source|target)_(?P<split>train|test)_"
    r"(?P<label>normal|anomaly)_(?P<rest>.+)$"
)
# DCASE 2020 ships "normal_id_00_00000000.wav"; "id_00_normal_..." is accepted too
_ID_RE = re.compile(r"^(?:(?P<label1>normal|anomaly)_)?id_(?P<section>\d+)_(?:(?P<label2>normal|anomaly)_)?(?P<rest>.+)$")


def parse_dcase_filename(name: str, year: int) -> dict:
    """Map a DCASE file name to manifest fields.

    Tokens after the clip index are read as ``key_value`` attribute pairs;
    an odd leftover token is stored under ``"extra"``.
    """
    stem = name[:-4] if name.lower().endswith(".wav") else name
    if int(year) == 2020:
        m = _ID_RE.match(stem)
        if not m or not (m["label1"] or m["label2"]):
            raise ValidationError(f"{name!r} does not match the 2020 pattern id_<II>_<label>_...")
        return {
            "section": m["section"],
            "domain": "source",
            "label": m["label1"] or m["label2"],
            "attributes": {},
        }
    m = _SECTION_RE.match(stem)
    if not m:
        raise ValidationError(
            f"{name!r} does not match section_<SS>_<domain>_<split>_<label>_... (concealed labels are unsupported)"
        )
    tokens = m["rest"].split("_")[1:]
    attrs = {}
    for i in range(0, len(tokens) - 1, 2):
        attrs[tokens[i]] = tokens[i + 1]
    if len(tokens) % 2:
        attrs["extra"] = tokens[-1]
    return {
        "section": m["section"],
        "domain": m["domain"],
        "split": m["split"],
        "label": m["label"],
        "attributes": attrs,
    }


def convert_dcase_tree(root, year, subset="dev") -> list[ClipRecord]:
    """Build records from a ``<root>/<machine_type>/{train,test}/*.wav`` tree."""
    root = Path(root).resolve()
    records = []
    for mt_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for split in ("train", "test"):
            split_dir = mt_dir / split
            if not split_dir.is_dir():
                continue
            for wav in sorted(split_dir.glob("*.wav")):
                fields = parse_dcase_filename(wav.name, year)
                fields.setdefault("split", split)
                if fields["split"] != split:
                    raise ValidationError(f"{wav}: file name says {fields['split']!r} but lives in {split!r}")
                label = fields["label"]
                records.append(
                    ClipRecord(
                        clip_id=f"{mt_dir.name}/{split}/{wav.stem}",
                        audio_path=str(wav),
                        machine_type=mt_dir.name,
                        section=fields["section"],
                        domain=fields["domain"],
                        split=split,
                        label=label,
                        attributes=fields["attributes"],
                        subset=subset,
                    )
                )
    validate_records(records, year=int(year))
    return records
