from __future__ import annotations

from ..corpus import read_wav
from ..exceptions import ValidationError
from .store import EmbeddingSet

SAMPLE_RATE = 16000


def load_waveforms(records, sample_rate=SAMPLE_RATE):
    """Read every clip; collects all failures before raising."""
    out, failures = [], []
    for rec in records:
        try:
            x, rate = read_wav(rec.audio_path)
        except (OSError, ValidationError) as exc:
            failures.append(f"{rec.clip_id}: {exc}")
            continue
        if rate != sample_rate:
            failures.append(f"{rec.clip_id}: sample rate {rate} Hz, expected {sample_rate} Hz")
            continue
        out.append(x)
    if failures:
        raise ValidationError(f"{len(failures)} clip(s) could not be read:\n  " + "\n  ".join(failures))
    return out


def extract(frontend, records, recipe_id="", seed=None, checkpoint_sha256=None, waveforms=None) -> EmbeddingSet:
    """Run a fitted frontend over clips and package the rows with their metadata.

    Discriminative frontends give unnormalised embeddings, raw frontends the
    time-averaged mel spectrum, and autoencoders a one-column anomaly score.
    """
    if waveforms is None:
        waveforms = load_waveforms(records)
    X = frontend.transform(waveforms)
    return EmbeddingSet.from_records(X, records, recipe_id=recipe_id, seed=seed, checkpoint_sha256=checkpoint_sha256)
