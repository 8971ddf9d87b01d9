"""Mono PCM buffers and 16-bit WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(eq=False)
class AudioBuffer:
    samples: np.ndarray = field(repr=False)
    sample_rate: int = 48_000
    # carriers present in the signal, when known (set by synthesis)
    carriers: tuple = ()

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        self.carriers = tuple(float(f) for f in self.carriers)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2

    def power(self) -> float:
        return float(np.mean(self.samples ** 2)) if len(self.samples) else 0.0

    def rms(self) -> float:
        return self.power() ** 0.5

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate, self.carriers)

    def write_wav(self, path) -> Path:
        pcm = np.rint(np.clip(self.samples, -1, 1) * 32767).astype("<i2")
        path = Path(path)
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(int(self.sample_rate))
            w.writeframes(pcm.tobytes())
        return path

    @classmethod
    def read_wav(cls, path) -> "AudioBuffer":
        with wave.open(str(path), "rb") as w:
            if w.getsampwidth() != 2:
                raise ValueError(f"{path}: only 16-bit PCM is supported")
            channels = w.getnchannels()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
        pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767
        if channels > 1:
            pcm = pcm.reshape(-1, channels)[:, 0]
        return cls(pcm, rate)
