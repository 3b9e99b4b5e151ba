"""Command-line pipeline: ingest manifests, extract tempo via an external
command, project features, fit orderings, and emit playlists/reports.

Exit codes: 0 success, 1 usage, 2 input/validation, 3 extractor failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import shlex
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import feature_model, template_curve
from .feature_model import (
    FeatureManifest,
    ManifestError,
    NormalizationError,
    TrackRecord,
    WeightsFormatError,
)
from .template_curve import CurveFormatError, TemplateCurve

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_INPUT",
    "EXIT_EXTRACTOR",
    "FitReport",
    "ExtractorSpec",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_EXTRACTOR = 3

AUDIO_EXTENSIONS = {".wav", ".mp3", ".flac", ".ogg", ".m4a"}
BPM_RANGE = (20.0, 400.0)
DEFAULT_EXTRACT_TIMEOUT = 300.0


@dataclass(frozen=True)
class FitReport:
    """Everything needed to plot or audit one fit, in position order."""

    feature_name: str
    curve_name: str
    d_min: float
    total_cost: float
    entries: list[dict]

    def to_json(self) -> str:
        doc = {
            "feature_name": self.feature_name,
            "curve_name": self.curve_name,
            "d_min": self.d_min,
            "total_cost": self.total_cost,
            "entries": self.entries,
        }
        return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class ExtractorSpec:
    """How to invoke the external tempo extractor for one audio file."""

    command: str
    args_template: tuple[str, ...]
    timeout: float

    def __post_init__(self) -> None:
        if not self.command:
            raise ValueError("extractor command must be nonempty")
        if not self.timeout > 0:
            raise ValueError("extractor timeout must be positive")

    @classmethod
    def from_command_line(cls, template: str, timeout: float) -> "ExtractorSpec":
        tokens = shlex.split(template)
        if not tokens:
            raise ValueError("extractor command must be nonempty")
        if not any("{path}" in tok for tok in tokens[1:]):
            tokens.append("{path}")
        return cls(command=tokens[0], args_template=tuple(tokens[1:]), timeout=timeout)

    def argv_for(self, path: str) -> list[str]:
        return [self.command] + [tok.replace("{path}", path) for tok in self.args_template]


def _fail(message: str, code: int) -> int:
    print(f"psb: error: {message}", file=sys.stderr)
    return code


def _warn(message: str) -> None:
    print(f"psb: warning: {message}", file=sys.stderr)


def _read_bytes(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {what} {path!r}: {exc}") from exc


def _load_curve_selector(selector: str) -> TemplateCurve:
    if selector == "default":
        return template_curve.default_narrative_curve()
    raw = _read_bytes(selector, "curve file")
    return template_curve.load_curve(raw, name=Path(selector).stem)


def _resolve_media_path(manifest_path: str, media_path: str) -> Path:
    p = Path(media_path)
    if not p.is_absolute():
        p = Path(manifest_path).resolve().parent / p
    return p.resolve()


def _write_m3u(path: str, media_paths: Sequence[Path]) -> None:
    lines = ["#EXTM3U"] + [str(p) for p in media_paths]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_fit(args: argparse.Namespace) -> int:
    from . import fitter  # deferred: pulls in the jit compiler

    try:
        manifest = feature_model.load_manifest(_read_bytes(args.manifest, "manifest"))
        if len(manifest.tracks) == 0:
            return _fail("manifest has no tracks to fit", EXIT_INPUT)
        values = feature_model.select_feature(manifest, args.feature)
        curve = _load_curve_selector(args.curve)
        result = fitter.fit(values, curve, pre_normalized=args.pre_normalized)
    except (FileNotFoundError, ManifestError, CurveFormatError, NormalizationError,
            fitter.FitterError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)

    n = len(manifest.tracks)
    normalized = values if args.pre_normalized else feature_model.normalize(values)
    targets = template_curve.sample_positions(curve, n)
    entries = []
    for j in range(n):
        i = int(result.ordering[j])
        track = manifest.tracks[i]
        entries.append(
            {
                "position": j,
                "t": j / (n - 1) if n > 1 else 0.0,
                "target": float(targets[j]),
                "track_id": track.id,
                "raw_value": float(values[i]),
                "normalized_value": float(normalized[i]),
                "deviation": float(result.deviations[j]),
            }
        )
    report = FitReport(
        feature_name=args.feature,
        curve_name=curve.name,
        d_min=result.d_min,
        total_cost=result.total_cost,
        entries=entries,
    )
    try:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")

        ordered_tracks = [manifest.tracks[int(i)] for i in result.ordering]
        pathless = [t.id for t in ordered_tracks if not t.media_path]
        if pathless:
            _warn(
                "skipping playlist: tracks without media paths: " + ", ".join(pathless)
            )
        else:
            _write_m3u(
                args.playlist,
                [_resolve_media_path(args.manifest, t.media_path) for t in ordered_tracks],
            )
    except OSError as exc:
        return _fail(f"cannot write output: {exc}", EXIT_INPUT)

    print(f"d_min={result.d_min}")
    print(f"total_cost={result.total_cost}")
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    if args.n < 2:
        return _fail(f"--n must be at least 2, got {args.n}", EXIT_USAGE)
    try:
        curve = _load_curve_selector(args.curve)
    except (FileNotFoundError, CurveFormatError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            template_curve.write_curve_csv(curve, args.n, fh)
    except OSError as exc:
        return _fail(f"cannot write output: {exc}", EXIT_INPUT)
    return EXIT_OK


def _scan_audio_files(root: Path) -> list[Path]:
    files = [
        p
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in AUDIO_EXTENSIONS
    ]
    return sorted(files)


def _read_extract_cache(out_path: str) -> dict[str, tuple[int, int, float]]:
    """Previous results from an existing output manifest: absolute path ->
    (size, mtime_ns, tempo). Anything unparseable is simply not reused."""
    cache: dict[str, tuple[int, int, float]] = {}
    try:
        doc = json.loads(Path(out_path).read_text(encoding="utf-8"))
        for row in doc.get("tracks", []):
            stamp = row.get("extract", {})
            tempo = row.get("features", {}).get("tempo")
            if (
                isinstance(row.get("path"), str)
                and isinstance(stamp.get("size"), int)
                and isinstance(stamp.get("mtime_ns"), int)
                and isinstance(tempo, (int, float))
                and not isinstance(tempo, bool)
            ):
                cache[row["path"]] = (stamp["size"], stamp["mtime_ns"], float(tempo))
    except (OSError, json.JSONDecodeError, AttributeError):
        pass
    return cache


def _run_extractor(spec: ExtractorSpec, path: str) -> tuple[float | None, str]:
    """Invoke the extractor for one file. Returns (bpm, "") on success or
    (None, reason) on failure, per the subprocess contract: exit 0 and a
    single decimal in [20, 400] on stdout."""
    argv = spec.argv_for(path)
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=spec.timeout
        )
    except subprocess.TimeoutExpired:
        return None, f"timed out after {spec.timeout}s"
    except OSError as exc:
        return None, f"cannot invoke extractor: {exc}"
    if proc.returncode != 0:
        return None, f"extractor exited {proc.returncode}"
    text = proc.stdout.strip()
    try:
        bpm = float(text)
    except ValueError:
        return None, f"unparseable extractor output {text!r}"
    if not math.isfinite(bpm) or not BPM_RANGE[0] <= bpm <= BPM_RANGE[1]:
        return None, f"tempo {bpm!r} outside plausible range {list(BPM_RANGE)}"
    return bpm, ""


def cmd_extract(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        return _fail(f"not a readable directory: {args.dir!r}", EXIT_INPUT)
    try:
        spec = ExtractorSpec.from_command_line(args.extractor_cmd, args.timeout)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)

    try:
        files = _scan_audio_files(root)
    except OSError as exc:
        return _fail(f"cannot scan {args.dir!r}: {exc}", EXIT_INPUT)
    if not files:
        _warn(f"no audio files found under {args.dir!r}")

    cache = _read_extract_cache(args.out)
    stats = {str(p.resolve()): p.stat() for p in files}
    tempos: dict[str, float] = {}
    pending: list[str] = []
    for p in files:
        abspath = str(p.resolve())
        st = stats[abspath]
        hit = cache.get(abspath)
        if hit is not None and hit[0] == st.st_size and hit[1] == st.st_mtime_ns:
            tempos[abspath] = hit[2]
        else:
            pending.append(abspath)

    failures: list[tuple[str, str]] = []
    if pending:
        jobs = args.jobs or os.cpu_count() or 1
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_extractor, spec, path): path for path in pending
            }
            for future in concurrent.futures.as_completed(futures):
                path = futures[future]
                bpm, reason = future.result()
                if bpm is None:
                    failures.append((path, reason))
                else:
                    tempos[path] = bpm
    if failures:
        failures.sort()
        for path, reason in failures:
            print(f"psb: extraction failed: {path}: {reason}", file=sys.stderr)
        return EXIT_EXTRACTOR

    tracks = []
    extras: dict[str, dict] = {}
    for p in files:
        abspath = str(p.resolve())
        st = stats[abspath]
        track_id = p.relative_to(root).as_posix()
        tracks.append(
            TrackRecord(
                id=track_id, media_path=abspath, features={"tempo": tempos[abspath]}
            )
        )
        extras[track_id] = {"extract": {"size": st.st_size, "mtime_ns": st.st_mtime_ns}}
    manifest = FeatureManifest(version=feature_model.MANIFEST_VERSION, tracks=tuple(tracks))
    try:
        Path(args.out).write_text(
            feature_model.dump_manifest(manifest, track_extras=extras), encoding="utf-8"
        )
    except OSError as exc:
        return _fail(f"cannot write output: {exc}", EXIT_INPUT)
    return EXIT_OK


def cmd_zeta(args: argparse.Namespace) -> int:
    try:
        manifest = feature_model.load_manifest(_read_bytes(args.manifest, "manifest"))
        projection = feature_model.load_zeta_weights(
            _read_bytes(args.weights, "weights file")
        )
        updated = []
        for track in manifest.tracks:
            if "zeta" in track.features:
                _warn(f"track {track.id!r}: overwriting existing 'zeta'")
            value = feature_model.zeta(projection, track)
            features = dict(track.features)
            features["zeta"] = value
            updated.append(
                TrackRecord(id=track.id, media_path=track.media_path, features=features)
            )
    except (FileNotFoundError, ManifestError, WeightsFormatError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    out = FeatureManifest(version=manifest.version, tracks=tuple(updated))
    try:
        Path(args.out).write_text(feature_model.dump_manifest(out), encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot write output: {exc}", EXIT_INPUT)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for input
    validation, so usage problems exit 1 instead."""

    def error(self, message: str):  # noqa: D102 - argparse override
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="psb",
        description="Order a media collection so a per-item feature traces "
        "a narrative-arc template curve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", parents=[], help="fit a manifest to a curve")
    p_fit.add_argument("--manifest", required=True, help="input manifest JSON")
    p_fit.add_argument("--feature", default="tempo", help="feature to fit (default: tempo)")
    p_fit.add_argument(
        "--curve",
        default="default",
        help="'default' or a path to a curve definition JSON",
    )
    p_fit.add_argument(
        "--pre-normalized",
        action="store_true",
        help="treat feature values as already normalized to [0, 1]",
    )
    p_fit.add_argument("--playlist", required=True, help="output M3U path")
    p_fit.add_argument("--report", required=True, help="output fit-report JSON path")
    p_fit.set_defaults(func=cmd_fit)

    p_curve = sub.add_parser("curve", help="export curve samples as CSV")
    p_curve.add_argument("--n", type=int, required=True, help="sample count (>= 2)")
    p_curve.add_argument("--curve", default="default", help="'default' or curve JSON path")
    p_curve.add_argument("--out", required=True, help="output CSV path")
    p_curve.set_defaults(func=cmd_curve)

    p_extract = sub.add_parser("extract", help="run a tempo extractor over a directory")
    p_extract.add_argument("--dir", required=True, help="directory to scan for audio files")
    p_extract.add_argument(
        "--extractor-cmd",
        required=True,
        help="command template; '{path}' is replaced by each audio file path",
    )
    p_extract.add_argument(
        "--timeout",
        type=_positive_float,
        default=DEFAULT_EXTRACT_TIMEOUT,
        help="per-file extractor timeout in seconds",
    )
    p_extract.add_argument(
        "--jobs",
        type=_positive_int,
        default=None,
        help="concurrent extractor invocations (default: number of CPUs)",
    )
    p_extract.add_argument("--out", required=True, help="output manifest path")
    p_extract.set_defaults(func=cmd_extract)

    p_zeta = sub.add_parser("zeta", help="add a projected 'zeta' feature to a manifest")
    p_zeta.add_argument("--manifest", required=True, help="input manifest JSON")
    p_zeta.add_argument("--weights", required=True, help="projection weights JSON")
    p_zeta.add_argument("--out", required=True, help="output manifest path")
    p_zeta.set_defaults(func=cmd_zeta)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)
