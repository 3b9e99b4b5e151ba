import json
import sys
import textwrap

import pytest

from psb.template_curve import default_narrative_curve


@pytest.fixture(scope="session")
def curve():
    return default_narrative_curve()


def manifest_bytes(tracks, version=1):
    """Build manifest JSON from (id, path, features) triples or dicts."""
    rows = []
    for item in tracks:
        if isinstance(item, dict):
            rows.append(item)
        else:
            track_id, path, features = item
            row = {"id": track_id, "features": features}
            if path is not None:
                row["path"] = path
            rows.append(row)
    return json.dumps({"version": version, "tracks": rows}).encode("utf-8")


@pytest.fixture
def stub_extractor(tmp_path):
    """A controllable stand-in for the external tempo extractor.

    The stub appends one line per invocation to a log file, then either
    prints the BPM encoded in the audio file's name (``*_<bpm>.wav``) or
    misbehaves according to the mode baked into the filename.
    """
    script = tmp_path / "stub_extractor.py"
    log = tmp_path / "stub_calls.log"
    script.write_text(
        textwrap.dedent(
            """\
            import pathlib
            import sys

            log, path = sys.argv[1], sys.argv[2]
            with open(log, "a") as fh:
                fh.write(path + "\\n")
            stem = pathlib.Path(path).stem
            if stem.endswith("_fail"):
                sys.exit(7)
            if stem.endswith("_garbage"):
                print("not a number")
                sys.exit(0)
            tag = stem.rsplit("_", 1)[-1]
            print(tag)
            """
        )
    )
    command = f'"{sys.executable}" "{script}" "{log}" {{path}}'

    class Stub:
        def __init__(self):
            self.command = command
            self.log = log

        @property
        def calls(self):
            if not log.exists():
                return []
            return log.read_text().splitlines()

    return Stub()
