"""Seeded synthetic machine-sound corpus.

Normal clips are harmonic stacks (amplitude 1/h for harmonic h) plus white
Gaussian noise 20 dB below the harmonic power. Each clip's fundamental is
jittered uniformly by up to ``f0_jitter`` (relative); the target domain moves
it by a per-machine offset. Anomalies either shift the fundamental
by a relative amount or add a burst of broadband noise.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ValidationError
from .manifest import save_manifest
from .records import ClipRecord
from .wavio import wav_bytes

ANOMALY_KINDS = ("fundamental_shift", "noise_burst")
NOISE_DB = -20.0
PEAK_LEVEL = 0.3
BURST_FRACTION = 0.2
SECTION_STEP = 0.04


@dataclass(frozen=True)
class MachineSpec:
    name: str
    fundamental_hz: float
    n_harmonics: int
    target_offset_hz: float = 0.0
    anomaly_kind: str = "fundamental_shift"
    anomaly_magnitude: float = 0.1


@dataclass(frozen=True)
class ClipCounts:
    train_source: int = 50
    train_target: int = 10
    test_normal: int = 8  # per domain
    test_anomaly: int = 7  # per domain


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    machine_types: tuple[MachineSpec, ...]
    clips_per_split: ClipCounts = field(default_factory=ClipCounts)
    clip_duration_s: float = 2.0
    sample_rate_hz: int = 16000
    sections: int = 1
    target_domain: bool = True
    f0_jitter: float = 0.015

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        obj = dict(obj)
        obj["machine_types"] = tuple(MachineSpec(**m) for m in obj["machine_types"])
        if "clips_per_split" in obj:
            obj["clips_per_split"] = ClipCounts(**obj["clips_per_split"])
        return cls(**obj)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["machine_types"] = [asdict(m) for m in self.machine_types]
        return out

    def fundamentals(self, machine: MachineSpec, section: int) -> dict[str, float]:
        base = machine.fundamental_hz * (1.0 + SECTION_STEP * section)
        out = {"source": base}
        if self.target_domain:
            out["target"] = base + machine.target_offset_hz
        return out

    def max_frequency(self) -> float:
        top = 0.0
        for m in self.machine_types:
            for s in range(self.sections):
                for f0 in self.fundamentals(m, s).values():
                    shift = 1.0 + m.anomaly_magnitude if m.anomaly_kind == "fundamental_shift" else 1.0
                    top = max(top, f0 * (1.0 + self.f0_jitter) * m.n_harmonics * max(shift, 1.0))
        return top

    def validate(self) -> None:
        if not self.machine_types:
            raise ValidationError("synthetic spec needs at least one machine type")
        names = [m.name for m in self.machine_types]
        if len(set(names)) != len(names):
            raise ValidationError("machine type names must be unique")
        c = self.clips_per_split
        counts = [c.train_source, c.test_normal, c.test_anomaly]
        if self.target_domain:
            counts.append(c.train_target)
        if min(counts) < 1:
            raise ValidationError(f"clip counts must be >= 1, got {c}")
        if self.sections < 1:
            raise ValidationError("sections must be >= 1")
        if not 0 <= self.f0_jitter < 1:
            raise ValidationError("f0_jitter must lie in [0, 1)")
        if self.clip_duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ValidationError("duration and sample rate must be positive")
        for m in self.machine_types:
            if m.anomaly_kind not in ANOMALY_KINDS:
                raise ValidationError(f"{m.name}: anomaly_kind must be one of {ANOMALY_KINDS}")
            if m.n_harmonics < 1 or m.fundamental_hz <= 0:
                raise ValidationError(f"{m.name}: need a positive fundamental and >= 1 harmonic")
            if min(self.fundamentals(m, 0).values()) <= 0:
                raise ValidationError(f"{m.name}: target offset makes the fundamental non-positive")
        top = self.max_frequency()
        if self.sample_rate_hz <= 2 * top:
            raise ValidationError(
                f"sample rate {self.sample_rate_hz} Hz cannot represent {top:.1f} Hz (Nyquist)"
            )


def _harmonic_stack(f0, n_harmonics, n_samples, fs, phases):
    t = np.arange(n_samples, dtype=np.float64) / fs
    out = np.zeros(n_samples)
    for h in range(1, n_harmonics + 1):
        out += np.sin(2.0 * np.pi * h * f0 * t + phases[h - 1]) / h
    return out


def synthesize_clip(machine: MachineSpec, f0: float, anomalous: bool, n_samples: int, fs: int, rng,
                    f0_jitter: float = 0.0) -> np.ndarray:
    """Render one clip; all randomness comes from ``rng``."""
    H = machine.n_harmonics
    f0 = f0 * (1.0 + f0_jitter * (2.0 * rng.random() - 1.0))
    amp = PEAK_LEVEL / sum(1.0 / h for h in range(1, H + 1))
    power = 0.5 * amp**2 * sum(1.0 / h**2 for h in range(1, H + 1))
    noise_std = np.sqrt(power * 10.0 ** (NOISE_DB / 10.0))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=H)
    if anomalous and machine.anomaly_kind == "fundamental_shift":
        f0 = f0 * (1.0 + machine.anomaly_magnitude)
    x = amp * _harmonic_stack(f0, H, n_samples, fs, phases)
    x += noise_std * rng.standard_normal(n_samples)
    if anomalous and machine.anomaly_kind == "noise_burst":
        width = max(1, int(BURST_FRACTION * n_samples))
        start = int(rng.integers(0, n_samples - width + 1))
        x[start : start + width] += machine.anomaly_magnitude * np.sqrt(power) * rng.standard_normal(width)
    return x


def _plan(spec: SynthSpec):
    c = spec.clips_per_split
    domains = ("source", "target") if spec.target_domain else ("source",)
    for mi, machine in enumerate(spec.machine_types):
        for section in range(spec.sections):
            f0s = spec.fundamentals(machine, section)
            for domain in domains:
                n_train = c.train_source if domain == "source" else c.train_target
                jobs = [("train", "normal", False)] * n_train
                jobs += [("test", "normal", False)] * c.test_normal
                jobs += [("test", "anomaly", True)] * c.test_anomaly
                counters = {}
                for split, label, anomalous in jobs:
                    idx = counters.get((split, label), 0)
                    counters[(split, label)] = idx + 1
                    yield mi, machine, section, domain, f0s[domain], split, label, anomalous, idx


def generate_synthetic(spec: SynthSpec, out_dir) -> list[ClipRecord]:
    """Write the corpus WAVs plus ``manifest.jsonl`` under ``out_dir``.

    Identical (spec, seed) pairs give byte-identical files: each clip draws
    from its own generator seeded by (seed, machine, section, domain, split,
    label, index).
    """
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fs = spec.sample_rate_hz
    n_samples = int(round(spec.clip_duration_s * fs))
    records = []
    for mi, machine, section, domain, f0, split, label, anomalous, idx in _plan(spec):
        key = [
            int(spec.seed) & 0xFFFFFFFFFFFFFFFF,
            mi,
            section,
            0 if domain == "source" else 1,
            0 if split == "train" else 1,
            int(anomalous),
            idx,
        ]
        rng = np.random.default_rng(np.random.SeedSequence(key))
        x = synthesize_clip(machine, f0, anomalous, n_samples, fs, rng, spec.f0_jitter)
        stem = f"section_{section:02d}_{domain}_{split}_{label}_{idx:04d}"
        rel = Path(machine.name) / split / f"{stem}.wav"
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(wav_bytes(x, fs))
        records.append(
            ClipRecord(
                clip_id=f"{machine.name}/{split}/{stem}",
                audio_path=str(path.resolve()),
                machine_type=machine.name,
                section=f"{section:02d}",
                domain=domain,
                split=split,
                label=label,
                attributes={},
                subset="dev",
            )
        )
    save_manifest(records, out / "manifest.jsonl")
    (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), sort_keys=True, indent=1) + "\n")
    return records


def default_synth_spec(n_machine_types=8, seed=0, target_domain=True, **kwargs) -> SynthSpec:
    """Desk-scale corpus: fundamentals spaced ~19% apart, target +4%, anomalies +10%."""
    machines = []
    for i in range(n_machine_types):
        f0 = round(110.0 * 1.19**i, 1)
        machines.append(
            MachineSpec(
                name=f"machine{i:02d}",
                fundamental_hz=f0,
                n_harmonics=max(3, min(8, int(3000 // f0))),
                target_offset_hz=round(0.04 * f0, 1),
                anomaly_kind="fundamental_shift",
                anomaly_magnitude=0.1,
            )
        )
    return SynthSpec(seed=seed, machine_types=tuple(machines), target_domain=target_domain, **kwargs)
