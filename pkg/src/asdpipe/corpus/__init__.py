"""Clip metadata, manifests, WAV I/O and the synthetic corpus."""
from .manifest import convert_dcase_tree, load_manifest, parse_dcase_filename, save_manifest
from .records import ClipRecord, YearCondition, validate_records
from .synth import ClipCounts, MachineSpec, SynthSpec, default_synth_spec, generate_synthetic
from .wavio import read_wav, write_wav

__all__ = [
    "ClipCounts",
    "ClipRecord",
    "MachineSpec",
    "SynthSpec",
    "YearCondition",
    "convert_dcase_tree",
    "default_synth_spec",
    "generate_synthetic",
    "load_manifest",
    "parse_dcase_filename",
    "read_wav",
    "save_manifest",
    "validate_records",
    "write_wav",
]
