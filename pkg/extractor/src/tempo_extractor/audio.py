"""WAV decoding and resampling for the tempo estimator.

Only PCM/float WAV input is supported in this build; anything the reader
rejects surfaces as AudioDecodeError so the CLI can map it to its
bad-input exit code.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile


class AudioDecodeError(ValueError):
    """The file could not be read or decoded as audio."""


_PEAKS = {
    np.dtype(np.int16): 2**15,
    np.dtype(np.int32): 2**31,
    np.dtype(np.uint8): None,  # offset binary, handled separately
}


def decode_wav(path: str) -> tuple[np.ndarray, int]:
    """Read a WAV file as mono float64 in [-1, 1] plus its sample rate."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise AudioDecodeError(f"no such file: {path}") from exc
    except (OSError, ValueError) as exc:
        raise AudioDecodeError(f"cannot decode {path}: {exc}") from exc
    if data.size == 0:
        raise AudioDecodeError(f"audio stream is empty: {path}")
    # scale by the source dtype before any mixdown loses it
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in _PEAKS and _PEAKS[data.dtype]:
        samples = data.astype(np.float64) / _PEAKS[data.dtype]
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.isfinite(samples).all():
        raise AudioDecodeError(f"audio contains non-finite samples: {path}")
    return samples, int(rate)


def resample(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Polyphase resampling to the analysis rate."""
    if rate == target_rate:
        return samples
    if rate <= 0:
        raise AudioDecodeError(f"invalid sample rate {rate}")
    g = math.gcd(rate, target_rate)
    return sps.resample_poly(samples, target_rate // g, rate // g)
