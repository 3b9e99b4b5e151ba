"""Adapter CLI speaking the extractor subprocess contract.

``psb-tempo <audio-path>`` prints a single decimal BPM to stdout and exits
0 on success. Failures keep stdout empty: exit 2 for unreadable or
undecodable audio, exit 4 when the tempo model is unavailable.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .audio import AudioDecodeError
from .estimator import TempoEstimationError, extract_tempo
from .model import ModelUnavailableError, load_model

EXIT_OK = 0
EXIT_BAD_AUDIO = 2
EXIT_NO_MODEL = 4


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="psb-tempo",
        description="Print the estimated global tempo (BPM) of one audio file.",
    )
    parser.add_argument("audio_path", help="path to a WAV file")
    args = parser.parse_args(argv)

    try:
        model = load_model()
    except ModelUnavailableError as exc:
        print(f"psb-tempo: {exc}", file=sys.stderr)
        return EXIT_NO_MODEL
    try:
        estimate = extract_tempo(args.audio_path, model)
    except (AudioDecodeError, TempoEstimationError) as exc:
        print(f"psb-tempo: {exc}", file=sys.stderr)
        return EXIT_BAD_AUDIO

    print(f"{estimate.bpm:.1f}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
