"""Acceptance gate: one test per shipped criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is pinned here; nothing is deferred to calibration.
"""

import json
import subprocess
import sys
import textwrap
import time

import numpy as np
import pytest

from psb.feature_model import ContrastiveLossInput, contrastive_loss, normalize
from psb.fitter import (
    brute_force_fit,
    deviation_matrix,
    find_min_threshold,
    fit,
    perfect_matching_exists,
    threshold_ladder,
)
from psb.template_curve import eval_template, sample_positions

ANCHORS = [
    (0.0, 0.5),
    (0.2, 0.75),
    (0.3, 0.5),
    (0.5, 0.0),
    (0.65, 0.5),
    (0.8, 1.0),
    (1.0, 0.75),
]

INTERIOR_BREAKS = [0.2, 0.3, 0.5, 0.65, 0.8]


def _verdict(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {status}: {name}{suffix}")
    assert passed, f"{name}{suffix}"


@pytest.fixture(scope="module")
def warm_fitter(curve):
    # one tiny fit so jit compilation never counts against a runtime bound
    fit([0.2, 0.8], curve, pre_normalized=True)


def test_anchor_exactness(curve):
    start = time.perf_counter()
    worst = max(abs(eval_template(curve, t) - y) for t, y in ANCHORS)
    elapsed = time.perf_counter() - start
    _verdict(
        "anchor exactness (7 anchors, tol 1e-12, < 1 s)",
        worst <= 1e-12 and elapsed < 1.0,
        f"worst |err| {worst:.3g}, {elapsed:.3f} s",
    )


def test_smoothness(curve):
    value_jump = 0.0
    slope_jump = 0.0
    for t in INTERIOR_BREAKS:
        k = curve.segment_index(t)
        value_jump = max(value_jump, abs(curve.segments[k - 1].value(t) - curve.segments[k].value(t)))
        slope_jump = max(
            slope_jump, abs(curve.segments[k - 1].derivative(t) - curve.segments[k].derivative(t))
        )
    samples = curve.values(np.linspace(0.0, 1.0, 100_000))
    in_range = samples.min() >= -1e-12 and samples.max() <= 1.0 + 1e-12
    extremes = eval_template(curve, 0.5) == 0.0 and eval_template(curve, 0.8) == 1.0
    _verdict(
        "smoothness (C0/C1 at breakpoints tol 1e-9, range [0,1] +/- 1e-12 over 1e5 samples)",
        value_jump <= 1e-9 and slope_jump <= 1e-9 and in_range and extremes,
        f"value jump {value_jump:.3g}, slope jump {slope_jump:.3g}, "
        f"range [{samples.min():.3g}, {samples.max():.3g}]",
    )


def test_oracle_equivalence(curve, warm_fitter):
    rng = np.random.default_rng(20260809)
    start = time.perf_counter()
    worst_cost_gap = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 9))
        values = rng.random(n)
        result = fit(values, curve)
        oracle = brute_force_fit(normalize(values), sample_positions(curve, n))
        if result.d_min != oracle.d_min:
            _verdict(
                "oracle equivalence (500 instances, n in 1..8, exact d_min, cost tol 1e-9, < 30 s)",
                False,
                f"d_min mismatch {result.d_min!r} vs {oracle.d_min!r}",
            )
        worst_cost_gap = max(worst_cost_gap, abs(result.total_cost - oracle.total_cost))
    elapsed = time.perf_counter() - start
    _verdict(
        "oracle equivalence (500 instances, n in 1..8, exact d_min, cost tol 1e-9, < 30 s)",
        worst_cost_gap <= 1e-9 and elapsed < 30.0,
        f"worst cost gap {worst_cost_gap:.3g}, {elapsed:.2f} s",
    )


def test_exact_fit_recovery(curve, warm_fitter):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    ok = True
    detail = []
    for n in (2, 5, 9, 50):
        z = sample_positions(curve, n)
        assert len(np.unique(z)) == n, "grid samples must be pairwise distinct"
        perm = rng.permutation(n)
        result = fit(z[perm], curve, pre_normalized=True)
        recovered = np.array_equal(z[perm][result.ordering], z)
        ok = ok and result.d_min == 0.0 and recovered
        detail.append(f"n={n}: d_min={result.d_min}, recovered={recovered}")
    elapsed = time.perf_counter() - start
    _verdict(
        "exact-fit recovery (n in {2,5,9,50}, d_min = 0, sequence recovered, < 5 s)",
        ok and elapsed < 5.0,
        "; ".join(detail) + f"; {elapsed:.2f} s",
    )


def test_monotone_feasibility(warm_fitter, curve):
    rng = np.random.default_rng(31)
    start = time.perf_counter()
    ok = True
    for _ in range(100):
        n = int(rng.integers(1, 13))
        matrix = deviation_matrix(rng.random(n), rng.random(n))
        ladder = threshold_ladder(matrix).thresholds
        flags = [perfect_matching_exists(matrix, float(v)) for v in ladder]
        monotone = all(hi or not lo for lo, hi in zip(flags, flags[1:]))
        first_feasible = float(ladder[flags.index(True)])
        ok = ok and monotone and flags[-1] and find_min_threshold(matrix) == first_feasible
    elapsed = time.perf_counter() - start
    _verdict(
        "monotone feasibility (100 matrices, n <= 12, full ladder, < 30 s)",
        ok and elapsed < 30.0,
        f"{elapsed:.2f} s",
    )


def test_scale_runtime(curve, warm_fitter):
    rng = np.random.default_rng(99)
    values = rng.random(500)
    start = time.perf_counter()
    result = fit(values, curve)
    elapsed = time.perf_counter() - start
    sane = sorted(result.ordering.tolist()) == list(range(500)) and (
        result.deviations.max() == result.d_min
    )
    _verdict(
        "scale/runtime (n = 500 fit < 10 s)",
        sane and elapsed < 10.0,
        f"{elapsed:.2f} s, d_min {result.d_min:.4g}",
    )


def test_contrastive_loss_criterion():
    examples = [
        (ContrastiveLossInput(0.5, 0.5, (0.5,)), 0.0),
        (ContrastiveLossInput(0.5, 0.5, (0.0, 1.0)), -0.25),
        (ContrastiveLossInput(1.0, 0.0, (1.0,)), 1.0),
    ]
    worst = max(abs(contrastive_loss(li) - expected) for li, expected in examples)

    rng = np.random.default_rng(13)
    monotone = True
    for _ in range(1000):
        p = float(rng.uniform(-5, 5))
        t = float(rng.uniform(-5, 5))
        noise = tuple(rng.uniform(-5, 5, size=int(rng.integers(1, 8))).tolist())
        base = contrastive_loss(ContrastiveLossInput(p, t, noise))
        stretch = float(rng.uniform(1.0, 3.0))
        # widen |p - t|: loss must not decrease
        t_far = p + stretch * (t - p) if t != p else p + stretch
        further_target = contrastive_loss(ContrastiveLossInput(p, t_far, noise))
        # widen |p - noise[0]|: loss must not increase
        moved = list(noise)
        moved[0] = p + stretch * (noise[0] - p) if noise[0] != p else p + stretch
        further_noise = contrastive_loss(ContrastiveLossInput(p, t, tuple(moved)))
        monotone = monotone and further_target >= base - 1e-12 and further_noise <= base + 1e-12
    _verdict(
        "contrastive loss (3 examples tol 1e-12, monotone on 1000 random inputs)",
        worst <= 1e-12 and monotone,
        f"worst example |err| {worst:.3g}",
    )


def _psb(*args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "psb", *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=600,
    )


def test_end_to_end_cli(tmp_path):
    audio = tmp_path / "audio"
    audio.mkdir()
    bpms = [64, 91, 118, 145, 172, 199]
    for k, bpm in enumerate(bpms):
        (audio / f"track{k}_{bpm}.wav").write_bytes(b"RIFF0000WAVE")

    stub = tmp_path / "stub.py"
    log = tmp_path / "calls.log"
    stub.write_text(
        textwrap.dedent(
            f"""\
            import pathlib, sys
            with open({str(log)!r}, "a") as fh:
                fh.write(sys.argv[1] + "\\n")
            print(pathlib.Path(sys.argv[1]).stem.rsplit("_", 1)[-1] + ".0")
            """
        )
    )
    extractor_cmd = f'"{sys.executable}" "{stub}" {{path}}'
    manifest = tmp_path / "manifest.json"
    playlist = tmp_path / "set.m3u"
    report_path = tmp_path / "report.json"

    extract = _psb(
        "extract", "--dir", audio, "--extractor-cmd", extractor_cmd, "--out", manifest,
        cwd=tmp_path,
    )
    calls_first = len(log.read_text().splitlines()) if log.exists() else 0

    fit_run = _psb(
        "fit", "--manifest", manifest, "--feature", "tempo",
        "--playlist", playlist, "--report", report_path,
        cwd=tmp_path,
    )

    rerun = _psb(
        "extract", "--dir", audio, "--extractor-cmd", extractor_cmd, "--out", manifest,
        cwd=tmp_path,
    )
    calls_second = len(log.read_text().splitlines()) if log.exists() else 0

    checks = {
        "extract exit 0": extract.returncode == 0,
        "fit exit 0": fit_run.returncode == 0,
        "re-extract exit 0": rerun.returncode == 0,
        "extractor ran once per file": calls_first == len(bpms),
        "cache: zero invocations on second run": calls_second == calls_first,
    }

    if playlist.exists():
        lines = playlist.read_text().splitlines()
        checks["m3u header"] = lines[0] == "#EXTM3U"
        checks["m3u line count"] = len(lines) == len(bpms) + 1
        checks["m3u absolute paths"] = all(line.startswith("/") for line in lines[1:])
    else:
        checks["m3u written"] = False

    if report_path.exists():
        report = json.loads(report_path.read_text())
        entries = report["entries"]
        deviations = [e["deviation"] for e in entries]
        checks["entries sorted by position"] = [e["position"] for e in entries] == list(
            range(len(bpms))
        )
        checks["ordering is a permutation"] = (
            sorted(e["track_id"] for e in entries)
            == sorted(f"track{k}_{bpm}.wav" for k, bpm in enumerate(bpms))
        )
        checks["max deviation equals d_min (tol 1e-12)"] = (
            abs(max(deviations) - report["d_min"]) <= 1e-12
        )
        checks["total cost equals sum (tol 1e-9)"] = (
            abs(sum(deviations) - report["total_cost"]) <= 1e-9
        )
        checks["playlist order equals report order"] = [
            line.rsplit("/", 1)[-1] for line in playlist.read_text().splitlines()[1:]
        ] == [e["track_id"] for e in entries]
        checks["stdout reports d_min"] = f"d_min={report['d_min']}" in fit_run.stdout
    else:
        checks["report written"] = False

    failed = [name for name, good in checks.items() if not good]
    _verdict(
        "end-to-end CLI (stub extract -> fit -> playlist, cache on rerun)",
        not failed,
        "all checks passed" if not failed else "failed: " + "; ".join(failed),
    )
