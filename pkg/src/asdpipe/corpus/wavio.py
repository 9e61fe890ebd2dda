from __future__ import annotations

import io
import wave

import numpy as np

from ..exceptions import WavFormatError

PCM_SCALE = 32768.0


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM mono WAV file.

    Returns float64 samples in [-1, 1) (int16 / 32768) and the sample rate.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise WavFormatError(f"{path}: compressed WAV ({wf.getcomptype()}) unsupported")
            if wf.getnchannels() != 1:
                raise WavFormatError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getsampwidth() != 2:
                raise WavFormatError(f"{path}: expected 16-bit samples, got {8 * wf.getsampwidth()}-bit")
            n = wf.getnframes()
            rate = wf.getframerate()
            data = wf.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"{path}: {exc}") from None
    if n == 0:
        raise WavFormatError(f"{path}: empty data chunk")
    if len(data) != 2 * n:
        raise WavFormatError(f"{path}: truncated data chunk ({len(data)} of {2 * n} bytes)")
    samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / PCM_SCALE
    return samples, rate


def to_pcm16(waveform) -> np.ndarray:
    x = np.asarray(waveform, dtype=np.float64)
    return np.clip(np.round(x * PCM_SCALE), -32768, 32767).astype("<i2")


def wav_bytes(waveform, sample_rate: int) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(to_pcm16(waveform).tobytes())
    return buf.getvalue()


def write_wav(path, waveform, sample_rate: int) -> None:
    with open(path, "wb") as fh:
        fh.write(wav_bytes(waveform, sample_rate))
