"""Global tempo estimation from an onset-strength envelope.

The pipeline: resample to the model's analysis rate, take a log-magnitude
STFT, sum the half-wave-rectified spectral flux into an onset envelope,
then score every candidate beat period by combining the envelope's
autocorrelation at the period and its integer multiples (a comb over
harmonics), shaped by a log-normal prior over BPM. The best-scoring lag,
refined by parabolic interpolation, is reported as the global tempo. The
raw winner is reported as-is: no octave correction is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio import decode_wav, resample
from .model import TempoModel


class TempoEstimationError(ValueError):
    """The audio is readable but too degenerate to carry a tempo."""


@dataclass(frozen=True)
class TempoEstimate:
    """A global tempo in beats per minute, inside the model's range."""

    bpm: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.bpm) or not 20.0 <= self.bpm <= 400.0:
            raise TempoEstimationError(f"estimated tempo {self.bpm!r} outside [20, 400]")


def onset_envelope(samples: np.ndarray, rate: int, model: TempoModel) -> np.ndarray:
    """Half-wave-rectified log-spectral flux at the model's envelope rate."""
    samples = resample(samples, rate, model.analysis_rate)
    if len(samples) < 2 * model.frame_size:
        raise TempoEstimationError("audio too short for tempo analysis")
    _, _, spectrum = sps.stft(
        samples,
        fs=model.analysis_rate,
        nperseg=model.frame_size,
        noverlap=model.frame_size - model.hop_size,
        padded=False,
        boundary=None,
    )
    magnitude = np.log1p(1000.0 * np.abs(spectrum))
    flux = np.diff(magnitude, axis=1)
    np.maximum(flux, 0.0, out=flux)
    envelope = flux.sum(axis=0)
    return envelope - envelope.mean()


def estimate_from_envelope(envelope: np.ndarray, model: TempoModel) -> TempoEstimate:
    """Pick the best beat period from the envelope autocorrelation."""
    n = len(envelope)
    lag_min = max(int(np.floor(model.envelope_rate * 60.0 / model.bpm_max)), 1)
    lag_max = int(np.ceil(model.envelope_rate * 60.0 / model.bpm_min))
    if lag_max >= n or not np.any(envelope):
        raise TempoEstimationError("audio too short or too uniform for tempo analysis")

    auto = np.correlate(envelope, envelope, mode="full")[n - 1 :]
    auto /= np.arange(n, 0, -1)  # unbiased estimate
    np.maximum(auto, 0.0, out=auto)

    lags = np.arange(lag_min, lag_max + 1)
    score = np.zeros(len(lags))
    for harmonic, weight in enumerate(model.harmonic_weights, start=1):
        reach = lags * harmonic
        valid = reach < n
        score[valid] += weight * auto[reach[valid]]

    bpm = 60.0 * model.envelope_rate / lags
    octaves = np.log2(bpm / model.prior_center_bpm)
    score *= np.exp(-0.5 * (octaves / model.prior_octave_width) ** 2)
    if not np.any(score > 0.0):
        raise TempoEstimationError("no periodicity found in the onset envelope")

    k = int(np.argmax(score))
    lag = float(lags[k])
    if 0 < k < len(lags) - 1:
        below, peak, above = score[k - 1], score[k], score[k + 1]
        denom = below - 2.0 * peak + above
        if denom != 0.0:
            lag += float(np.clip(0.5 * (below - above) / denom, -0.5, 0.5))

    raw = 60.0 * model.envelope_rate / lag
    # interpolation may nudge the winner just past the model range; clamp
    return TempoEstimate(bpm=float(np.clip(raw, model.bpm_min, model.bpm_max)))


def extract_tempo(path: str, model: TempoModel) -> TempoEstimate:
    """Decode an audio file and estimate its global tempo."""
    samples, rate = decode_wav(path)
    envelope = onset_envelope(samples, rate, model)
    return estimate_from_envelope(envelope, model)
