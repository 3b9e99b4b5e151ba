"""Tempo model parameters and where they live on disk.

The estimator is driven entirely by a parameter file (analysis rates,
tempo range, comb harmonics, octave prior). The packaged defaults can be
overridden by pointing PSB_TEMPO_MODEL_DIR at a directory containing a
``tempo_model.json``; a missing or corrupt file is a hard error so the
caller can distinguish "model unavailable" from "bad audio".
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

MODEL_DIR_ENV = "PSB_TEMPO_MODEL_DIR"
MODEL_FILENAME = "tempo_model.json"


class ModelUnavailableError(RuntimeError):
    """The tempo model parameters could not be located or parsed."""


@dataclass(frozen=True)
class TempoModel:
    """Everything the estimator needs to turn audio into a global BPM."""

    analysis_rate: int
    frame_size: int
    hop_size: int
    bpm_min: float
    bpm_max: float
    harmonic_weights: tuple[float, ...]
    prior_center_bpm: float
    prior_octave_width: float

    def __post_init__(self) -> None:
        if self.analysis_rate <= 0 or self.frame_size <= 0 or self.hop_size <= 0:
            raise ModelUnavailableError("model rates and frame sizes must be positive")
        if not 0 < self.bpm_min < self.bpm_max:
            raise ModelUnavailableError("model BPM range must satisfy 0 < min < max")
        if not self.harmonic_weights:
            raise ModelUnavailableError("model needs at least one harmonic weight")

    @property
    def envelope_rate(self) -> float:
        return self.analysis_rate / self.hop_size


def _parse(raw: str, origin: str) -> TempoModel:
    try:
        doc = json.loads(raw)
        return TempoModel(
            analysis_rate=int(doc["analysis_rate"]),
            frame_size=int(doc["frame_size"]),
            hop_size=int(doc["hop_size"]),
            bpm_min=float(doc["bpm_min"]),
            bpm_max=float(doc["bpm_max"]),
            harmonic_weights=tuple(float(w) for w in doc["harmonic_weights"]),
            prior_center_bpm=float(doc["prior_center_bpm"]),
            prior_octave_width=float(doc["prior_octave_width"]),
        )
    except ModelUnavailableError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ModelUnavailableError(f"cannot parse tempo model at {origin}: {exc}") from exc


def load_model() -> TempoModel:
    """Load model parameters from PSB_TEMPO_MODEL_DIR or the packaged copy.

    Raises ModelUnavailableError when no usable parameter file exists.
    """
    override = os.environ.get(MODEL_DIR_ENV)
    if override:
        path = Path(override) / MODEL_FILENAME
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ModelUnavailableError(f"cannot read tempo model at {path}: {exc}") from exc
        return _parse(raw, str(path))
    try:
        raw = (
            resources.files("tempo_extractor")
            .joinpath("data", MODEL_FILENAME)
            .read_text(encoding="utf-8")
        )
    except (OSError, FileNotFoundError) as exc:
        raise ModelUnavailableError(f"packaged tempo model missing: {exc}") from exc
    return _parse(raw, f"packaged {MODEL_FILENAME}")
