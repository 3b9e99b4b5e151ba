"""Track manifests and per-track scalar features.

Covers loading the JSON manifest format, pulling one named feature out as a
vector, min-max normalization onto [0, 1], the sigmoid feature projection
used for learned orderings, and the contrastive loss that projection is
scored with. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "MANIFEST_VERSION",
    "ManifestError",
    "ManifestParseError",
    "DuplicateTrackIdError",
    "VersionMismatchError",
    "MissingFeatureError",
    "NormalizationError",
    "WeightsFormatError",
    "TrackRecord",
    "FeatureManifest",
    "ZetaProjection",
    "ContrastiveLossInput",
    "load_manifest",
    "dump_manifest",
    "select_feature",
    "normalize",
    "zeta",
    "contrastive_loss",
    "load_zeta_weights",
]

MANIFEST_VERSION = 1


class ManifestError(ValueError):
    """Base class for manifest problems."""


class ManifestParseError(ManifestError):
    """The manifest is not valid JSON or violates the schema."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class DuplicateTrackIdError(ManifestError):
    """Two or more tracks share an id."""

    def __init__(self, track_ids: Sequence[str]):
        self.track_ids = tuple(track_ids)
        super().__init__(f"duplicate track ids: {', '.join(self.track_ids)}")


class VersionMismatchError(ManifestError):
    """The manifest declares an unsupported version."""

    def __init__(self, found: object):
        self.found = found
        super().__init__(f"unsupported manifest version {found!r} (expected {MANIFEST_VERSION})")


class MissingFeatureError(ManifestError):
    """A required feature is absent from one or more tracks."""

    def __init__(self, message: str, feature_names: Sequence[str], track_ids: Sequence[str]):
        self.feature_names = tuple(feature_names)
        self.track_ids = tuple(track_ids)
        super().__init__(message)


class NormalizationError(ValueError):
    """The value vector cannot be normalized (empty or non-finite)."""


class WeightsFormatError(ValueError):
    """A projection-weights file could not be parsed."""


@dataclass(frozen=True)
class TrackRecord:
    """One track: unique id, optional media path, named scalar features."""

    id: str
    media_path: str | None = None
    features: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class FeatureManifest:
    """An ordered collection of tracks; order in the file is significant."""

    version: int
    tracks: tuple[TrackRecord, ...]

    def __len__(self) -> int:
        return len(self.tracks)


@dataclass(frozen=True)
class ZetaProjection:
    """Linear weights plus bias for the sigmoid feature projection."""

    weights: Mapping[str, float]
    bias: float


@dataclass(frozen=True)
class ContrastiveLossInput:
    """Scalars entering the contrastive loss: a prediction, its target
    encoding, and the encodings of the noise samples."""

    prediction: float
    target: float
    noise_encodings: tuple[float, ...]


def _require_finite_number(value: object, context: str) -> float:
    # bool is an int subclass; JSON true/false must not pass as numbers
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ManifestParseError(f"{context} is not a number: {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ManifestParseError(f"{context} is not finite: {value!r}")
    return value


def load_manifest(raw: bytes | str) -> FeatureManifest:
    """Parse a UTF-8 JSON manifest.

    Track order follows the file. Unknown fields are ignored so the format
    can grow without breaking old readers.

    Raises:
        ManifestParseError: malformed JSON/schema, with line and column
            where the JSON parser can supply them.
        VersionMismatchError: version other than 1.
        DuplicateTrackIdError: repeated track ids, all named.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ManifestParseError(f"manifest is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc

    if not isinstance(doc, dict):
        raise ManifestParseError("manifest root must be a JSON object")
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise VersionMismatchError(version)
    rows = doc.get("tracks")
    if not isinstance(rows, list):
        raise ManifestParseError("manifest needs a 'tracks' array")

    tracks: list[TrackRecord] = []
    for k, row in enumerate(rows):
        where = f"track {k}"
        if not isinstance(row, dict):
            raise ManifestParseError(f"{where} must be an object")
        track_id = row.get("id")
        if not isinstance(track_id, str) or not track_id:
            raise ManifestParseError(f"{where} needs a nonempty string 'id'")
        where = f"track {k} (id {track_id!r})"
        path = row.get("path")
        if path is not None and not isinstance(path, str):
            raise ManifestParseError(f"{where}: 'path' must be a string")
        raw_features = row.get("features", {})
        if not isinstance(raw_features, dict):
            raise ManifestParseError(f"{where}: 'features' must be an object")
        features = {
            str(name): _require_finite_number(value, f"{where}: feature {name!r}")
            for name, value in raw_features.items()
        }
        tracks.append(TrackRecord(id=track_id, media_path=path, features=features))

    seen: set[str] = set()
    duplicates: list[str] = []
    for track in tracks:
        if track.id in seen and track.id not in duplicates:
            duplicates.append(track.id)
        seen.add(track.id)
    if duplicates:
        raise DuplicateTrackIdError(duplicates)

    return FeatureManifest(version=MANIFEST_VERSION, tracks=tuple(tracks))


def dump_manifest(
    manifest: FeatureManifest,
    track_extras: Mapping[str, Mapping[str, object]] | None = None,
) -> str:
    """Serialize a manifest deterministically (stable key and track order).

    ``track_extras`` may attach extra per-track fields (keyed by track id);
    readers ignore fields they do not know.
    """
    rows = []
    for track in manifest.tracks:
        row: dict[str, object] = {"id": track.id}
        if track.media_path is not None:
            row["path"] = track.media_path
        row["features"] = {name: track.features[name] for name in sorted(track.features)}
        if track_extras and track.id in track_extras:
            row.update(track_extras[track.id])
        rows.append(row)
    return json.dumps({"version": manifest.version, "tracks": rows}, indent=2) + "\n"


def select_feature(manifest: FeatureManifest, name: str) -> np.ndarray:
    """The named feature of every track, in manifest order.

    Raises MissingFeatureError naming every track that lacks the feature.
    """
    if not name:
        raise ValueError("feature name must be nonempty")
    missing = [t.id for t in manifest.tracks if name not in t.features]
    if missing:
        raise MissingFeatureError(
            f"feature {name!r} missing from tracks: {', '.join(missing)}",
            feature_names=[name],
            track_ids=missing,
        )
    return np.array([t.features[name] for t in manifest.tracks], dtype=np.float64)


def normalize(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Min-max map onto [0, 1].

    The minimum maps to 0 and the maximum to 1, preserving order. A constant
    vector has no spread to scale, so every entry maps to 0.5.

    Raises NormalizationError on empty input or non-finite entries.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise NormalizationError(f"expected a 1-d vector, got shape {arr.shape}")
    if arr.size == 0:
        raise NormalizationError("cannot normalize an empty vector")
    if not np.isfinite(arr).all():
        bad = np.flatnonzero(~np.isfinite(arr))
        raise NormalizationError(f"non-finite values at indices {bad.tolist()}")
    lo = arr.min()
    hi = arr.max()
    if hi > lo:
        return (arr - lo) / (hi - lo)
    return np.full_like(arr, 0.5)


def _sigmoid(u: float) -> float:
    # computed on the side that cannot overflow, then pinned inside the
    # open interval (0, 1) where float rounding would touch the ends
    if u >= 0:
        s = 1.0 / (1.0 + math.exp(-u))
    else:
        e = math.exp(u)
        s = e / (1.0 + e)
    if s <= 0.0:
        return math.nextafter(0.0, 1.0)
    if s >= 1.0:
        return math.nextafter(1.0, 0.0)
    return s


def zeta(projection: ZetaProjection, track: TrackRecord) -> float:
    """Sigmoid of the weighted feature sum plus bias; always in (0, 1).

    Raises MissingFeatureError listing the weight names the track lacks.
    """
    missing = sorted(name for name in projection.weights if name not in track.features)
    if missing:
        raise MissingFeatureError(
            f"track {track.id!r} lacks features required by the projection: "
            f"{', '.join(missing)}",
            feature_names=missing,
            track_ids=[track.id],
        )
    terms = [w * track.features[name] for name, w in projection.weights.items()]
    terms.append(projection.bias)
    return _sigmoid(math.fsum(terms))


def contrastive_loss(loss_input: ContrastiveLossInput) -> float:
    """Squared prediction error minus the mean squared distance to noise.

    Returns ``(prediction - target)**2`` minus the average of
    ``(prediction - noise)**2`` over the noise encodings: low when the
    prediction sits on its target, high when it also sits on noise.

    Raises ValueError on an empty noise list or non-finite inputs.
    """
    noise = loss_input.noise_encodings
    if len(noise) == 0:
        raise ValueError("contrastive loss needs at least one noise encoding")
    values = (loss_input.prediction, loss_input.target, *noise)
    if not all(math.isfinite(v) for v in values):
        raise ValueError("contrastive loss inputs must be finite")
    p = loss_input.prediction
    hit = (p - loss_input.target) ** 2
    spread = math.fsum((p - nu) ** 2 for nu in noise) / len(noise)
    return hit - spread


def load_zeta_weights(raw: bytes | str) -> ZetaProjection:
    """Parse a projection-weights file: ``{"bias": b, "weights": {name: w}}``."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightsFormatError(f"weights file is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise WeightsFormatError(f"weights file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise WeightsFormatError("weights file must be a JSON object")
    bias = doc.get("bias")
    if isinstance(bias, bool) or not isinstance(bias, (int, float)) or not math.isfinite(bias):
        raise WeightsFormatError(f"'bias' must be a finite number, got {bias!r}")
    raw_weights = doc.get("weights")
    if not isinstance(raw_weights, dict):
        raise WeightsFormatError("'weights' must be an object of feature name to number")
    weights: dict[str, float] = {}
    for name, value in raw_weights.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise WeightsFormatError(f"weight {name!r} must be a finite number, got {value!r}")
        weights[str(name)] = float(value)
    return ZetaProjection(weights=weights, bias=float(bias))
