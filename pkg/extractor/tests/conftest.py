import math
import struct
import wave

import numpy as np
import pytest


def write_wav(path, samples, rate, *, sampwidth=2, channels=1):
    """Write 16-bit PCM WAV through the stdlib writer (independent of the
    scipy reader under test)."""
    samples = np.asarray(samples, dtype=np.float64)
    if channels == 2:
        samples = np.column_stack([samples, samples])
    clipped = np.clip(samples, -1.0, 1.0)
    ints = (clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(sampwidth)
        fh.setframerate(rate)
        fh.writeframes(ints.tobytes())
    return path


def click_track(bpm, seconds=60.0, rate=44100, click_hz=1000.0, click_len=0.01):
    """A train of short sine bursts every beat; ground truth by construction."""
    total = int(seconds * rate)
    signal = np.zeros(total)
    burst_t = np.arange(int(click_len * rate)) / rate
    burst = np.sin(2 * math.pi * click_hz * burst_t) * np.hanning(len(burst_t))
    period = 60.0 / bpm
    beat = 0.0
    while int(beat * rate) + len(burst) < total:
        start = int(beat * rate)
        signal[start : start + len(burst)] += burst
        beat += period
    return signal


@pytest.fixture
def click_wav(tmp_path):
    def _make(bpm, seconds=60.0, rate=44100, name=None, channels=1):
        name = name or f"click_{bpm}.wav"
        return write_wav(
            tmp_path / name, click_track(bpm, seconds, rate), rate, channels=channels
        )

    return _make
