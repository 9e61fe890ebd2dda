"""Evaluation reports across trials: JSON document, recompute check, CSV table."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .corpus.records import YearCondition
from .exceptions import ValidationError
from .metrics import ScoreTable, combine_unit, domain_metrics, trial_stats, year_score

SUBSETS = ("dev", "eval")


def evaluate_trial(table: ScoreTable, condition: YearCondition, seed, p=0.1, standardized=True,
                   two_stage_2020=False) -> dict:
    """Per-unit metrics, combined unit scores and subset aggregates of one trial."""
    units = table.units(condition)
    unit_metrics, unit_subsets = {}, {}
    for key, unit in sorted(units.items()):
        subs = set(unit.subset)
        if len(subs) != 1:
            raise ValidationError(f"unit {key} mixes subsets {sorted(subs)}")
        unit_metrics[key] = domain_metrics(unit, condition, p, standardized, unit=key)
        unit_subsets[key] = subs.pop()
    combined, subsets = year_score(unit_metrics, unit_subsets, condition, two_stage_2020)
    rows = []
    for key in sorted(unit_metrics):
        rows.append({
            "machine_type": key[0],
            "section": key[1] if len(key) > 1 else None,
            "subset": unit_subsets[key],
            "metrics": unit_metrics[key],
            "combined": combined[key],
        })
    return {"seed": seed, "units": rows, "subsets": {s: subsets.get(s) for s in SUBSETS}}


def build_report(year, recipe, trials, two_stage_2020=False) -> dict:
    cross = {}
    for s in SUBSETS:
        values = [t["subsets"][s] for t in trials if t["subsets"][s] is not None]
        if values:
            mean, std = trial_stats(values)
            cross[s] = {"mean": mean, "std": std}
        else:
            cross[s] = None
    report = {
        "year": int(year),
        "recipe": recipe,
        "aggregation": {"two_stage_2020": bool(two_stage_2020)},
        "trials": list(trials),
        "cross_trial": cross,
    }
    verify_report(report)
    return report


def verify_report(report) -> None:
    """Recompute every aggregate from its leaves; raise on any mismatch."""
    condition = YearCondition.for_year(report["year"])
    two_stage = report.get("aggregation", {}).get("two_stage_2020", False)
    for trial in report["trials"]:
        unit_metrics, unit_subsets = {}, {}
        for u in trial["units"]:
            key = (u["machine_type"],) if u["section"] is None else (u["machine_type"], u["section"])
            if combine_unit(u["metrics"], condition) != u["combined"]:
                raise ValidationError(f"trial {trial['seed']} unit {key}: combined score does not recompute")
            unit_metrics[key] = u["metrics"]
            unit_subsets[key] = u["subset"]
        _, subsets = year_score(unit_metrics, unit_subsets, condition, two_stage)
        for s in SUBSETS:
            if subsets.get(s) != trial["subsets"][s]:
                raise ValidationError(f"trial {trial['seed']} subset {s}: aggregate does not recompute")
    for s in SUBSETS:
        values = [t["subsets"][s] for t in report["trials"] if t["subsets"][s] is not None]
        expected = None
        if values:
            mean, std = trial_stats(values)
            expected = {"mean": mean, "std": std}
        if report["cross_trial"][s] != expected:
            raise ValidationError(f"cross-trial statistics for {s} do not recompute")


def format_mean_std(mean, std) -> str:
    """Percent with two decimals, e.g. ``55.51 (1.86)``."""
    return f"{100.0 * mean:.2f} ({100.0 * std:.2f})"


def report_json(report) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def report_rows(report):
    """Flat table: one row per unit (combined score) and per subset aggregate."""
    rows = []
    units: dict = {}
    for trial in report["trials"]:
        for u in trial["units"]:
            units.setdefault((u["machine_type"], u["section"], u["subset"]), []).append(u["combined"])
    for (mt, sec, subset), values in sorted(units.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1] or "")):
        mean, std = trial_stats(values)
        rows.append(["unit", mt, sec or "", subset, len(values), mean, std, format_mean_std(mean, std)])
    for s in SUBSETS:
        agg = report["cross_trial"][s]
        if agg is not None:
            rows.append(["subset", "", "", s, len(report["trials"]), agg["mean"], agg["std"],
                         format_mean_std(agg["mean"], agg["std"])])
    return rows


def report_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["recipe", "year", "level", "machine_type", "section", "subset", "trials", "mean", "std", "mean (std)"])
    for row in report_rows(report):
        level, mt, sec, subset, n, mean, std, shown = row
        w.writerow([report["recipe"], report["year"], level, mt, sec, subset, n, f"{mean:.9g}", f"{std:.9g}", shown])
    return buf.getvalue()


def save_report(report, directory) -> tuple[Path, Path]:
    verify_report(report)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    jpath, cpath = d / "report.json", d / "report.csv"
    jpath.write_text(report_json(report), encoding="utf-8")
    cpath.write_text(report_csv(report), encoding="utf-8")
    return jpath, cpath


def load_report(path) -> dict:
    report = json.loads(Path(path).read_text(encoding="utf-8"))
    verify_report(report)
    return report
