"""Narrative-arc template curves.

A template curve is a piecewise second-order polynomial on [0, 1] whose
value stands for the narrative mood at a relative position in a playlist.
The shipped default rises gently out of a neutral opening, collapses to a
crisis at the midpoint, climbs to a climax near the end, and settles on a
conclusion above the opening.

Coefficients and breakpoints are stored as exact rationals so that the
curve's defining points are reproduced to float rounding; evaluation runs
on cached float64 tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

import numpy as np

__all__ = [
    "CurveDomainError",
    "CurveFormatError",
    "PolySegment",
    "TemplateCurve",
    "CurveViolation",
    "segment",
    "default_narrative_curve",
    "eval_template",
    "sample_positions",
    "validate_curve",
    "load_curve",
    "write_curve_csv",
]

#: |left value - right value| allowed at a shared breakpoint.
CONTINUITY_TOL = 1e-9
#: |eval(t) - y| allowed at a declared anchor point.
ANCHOR_TOL = 1e-12
#: slack around [0, 1] for the range check.
RANGE_TOL = 1e-12


class CurveDomainError(ValueError):
    """Evaluation was requested outside the curve domain [0, 1]."""


class CurveFormatError(ValueError):
    """A curve definition file could not be parsed."""


RationalLike = Fraction | int | float | str


def _as_fraction(value: RationalLike) -> Fraction:
    """Convert ints, floats, and strings like ``"-25/4"`` to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise CurveFormatError(f"not a rational number: {value!r}") from exc


@dataclass(frozen=True)
class PolySegment:
    """One polynomial piece ``c0 + c1*t + c2*t**2`` on [t_lo, t_hi]."""

    t_lo: Fraction
    t_hi: Fraction
    c0: Fraction
    c1: Fraction
    c2: Fraction

    def __post_init__(self) -> None:
        if not self.t_lo < self.t_hi:
            raise ValueError(f"segment interval is empty: [{self.t_lo}, {self.t_hi}]")

    def value(self, t: float) -> float:
        """Evaluate in float64 (Horner form)."""
        return float(self.c0) + t * (float(self.c1) + t * float(self.c2))

    def value_exact(self, t: Fraction) -> Fraction:
        """Evaluate in exact rational arithmetic."""
        return self.c0 + self.c1 * t + self.c2 * t * t

    def derivative(self, t: float) -> float:
        """First derivative ``c1 + 2*c2*t`` in float64."""
        return float(self.c1) + 2.0 * float(self.c2) * t


def segment(
    t_lo: RationalLike,
    t_hi: RationalLike,
    c0: RationalLike,
    c1: RationalLike,
    c2: RationalLike,
) -> PolySegment:
    """Build a PolySegment, converting every argument to an exact Fraction."""
    return PolySegment(
        _as_fraction(t_lo),
        _as_fraction(t_hi),
        _as_fraction(c0),
        _as_fraction(c1),
        _as_fraction(c2),
    )


@dataclass(frozen=True)
class TemplateCurve:
    """An ordered list of polynomial segments plus declared anchor points.

    Segments own their interval half-open on the right, except the last
    segment which also serves t equal to its upper bound. Instances are
    immutable and safe to share across threads.
    """

    segments: tuple[PolySegment, ...]
    anchors: tuple[tuple[Fraction, Fraction], ...] = ()
    name: str = "custom"
    _inner_breaks: np.ndarray = field(init=False, repr=False, compare=False)
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a curve needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(
            self,
            "anchors",
            tuple((_as_fraction(t), _as_fraction(y)) for t, y in self.anchors),
        )
        inner = np.array([float(s.t_lo) for s in self.segments[1:]], dtype=np.float64)
        coeffs = np.array(
            [[float(s.c0), float(s.c1), float(s.c2)] for s in self.segments],
            dtype=np.float64,
        )
        object.__setattr__(self, "_inner_breaks", inner)
        object.__setattr__(self, "_coeffs", coeffs)

    def segment_index(self, t: float) -> int:
        """Index of the segment owning position t."""
        return int(np.searchsorted(self._inner_breaks, t, side="right"))

    def value(self, t: float) -> float:
        """Float64 value at t; no domain check (see :func:`eval_template`)."""
        c0, c1, c2 = self._coeffs[self.segment_index(t)]
        return c0 + t * (c1 + t * c2)

    def values(self, t: np.ndarray) -> np.ndarray:
        """Vectorized float64 evaluation over an array of positions."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self._inner_breaks, t, side="right")
        c = self._coeffs[idx]
        return c[..., 0] + t * (c[..., 1] + t * c[..., 2])


def _default_curve() -> TemplateCurve:
    segments = (
        segment(0, "1/5", "1/2", "5/2", "-25/4"),
        segment("1/5", "3/10", "-1/4", 10, -25),
        segment("3/10", "1/2", "25/8", "-25/2", "25/2"),
        segment("1/2", "13/20", "50/9", "-200/9", "200/9"),
        segment("13/20", "4/5", "-119/9", "320/9", "-200/9"),
        segment("4/5", 1, -3, 10, "-25/4"),
    )
    anchors = (
        (Fraction(0), Fraction(1, 2)),
        (Fraction(1, 5), Fraction(3, 4)),
        (Fraction(3, 10), Fraction(1, 2)),
        (Fraction(1, 2), Fraction(0)),
        (Fraction(13, 20), Fraction(1, 2)),
        (Fraction(4, 5), Fraction(1)),
        (Fraction(1), Fraction(3, 4)),
    )
    return TemplateCurve(segments=segments, anchors=anchors, name="default")


_DEFAULT = _default_curve()


def default_narrative_curve() -> TemplateCurve:
    """The shipped six-segment narrative arc (neutral start, midpoint crisis,
    late climax, elevated conclusion)."""
    return _DEFAULT


def eval_template(curve: TemplateCurve, t: float) -> float:
    """Value of the curve at position t in [0, 1].

    Raises:
        CurveDomainError: if t is outside [0, 1] (or NaN).
    """
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise CurveDomainError(f"position {t!r} outside curve domain [0, 1]")
    return curve.value(t)


def sample_positions(curve: TemplateCurve, n: int) -> np.ndarray:
    """Target values at the n grid positions j/(n-1), j = 0..n-1.

    A single-item grid is degenerate; it is pinned to the narrative start,
    t = 0. Raises ValueError for n < 1.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one position, got n={n}")
    if n == 1:
        return np.array([eval_template(curve, 0.0)])
    t = np.arange(n, dtype=np.float64) / (n - 1)
    return curve.values(t)


@dataclass(frozen=True)
class CurveViolation:
    """One invariant violation found by :func:`validate_curve`."""

    kind: str
    where: float
    magnitude: float
    message: str

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.message


def _segment_extrema(seg: PolySegment) -> list[tuple[Fraction, Fraction]]:
    """Exact (t, value) candidates for the extrema of one piece on its interval."""
    points = [(seg.t_lo, seg.value_exact(seg.t_lo)), (seg.t_hi, seg.value_exact(seg.t_hi))]
    if seg.c2 != 0:
        vertex = -seg.c1 / (2 * seg.c2)
        if seg.t_lo < vertex < seg.t_hi:
            points.append((vertex, seg.value_exact(vertex)))
    return points


def validate_curve(curve: TemplateCurve) -> list[CurveViolation]:
    """Check a curve against its structural invariants.

    Violations are returned as data, never raised: tiling of [0, 1] by the
    segment intervals, value continuity at shared breakpoints, anchor
    reproduction, and range containment in [0, 1]. An empty list means the
    curve is sound.
    """
    violations: list[CurveViolation] = []
    segs = curve.segments

    if segs[0].t_lo != 0:
        violations.append(
            CurveViolation(
                "domain-gap",
                float(segs[0].t_lo),
                abs(float(segs[0].t_lo)),
                f"segments start at t={float(segs[0].t_lo)} instead of 0",
            )
        )
    if segs[-1].t_hi != 1:
        violations.append(
            CurveViolation(
                "domain-gap",
                float(segs[-1].t_hi),
                abs(1.0 - float(segs[-1].t_hi)),
                f"segments end at t={float(segs[-1].t_hi)} instead of 1",
            )
        )
    for left, right in zip(segs, segs[1:]):
        if left.t_hi != right.t_lo:
            kind = "domain-gap" if right.t_lo > left.t_hi else "overlap"
            gap = abs(float(right.t_lo - left.t_hi))
            violations.append(
                CurveViolation(
                    kind,
                    float(left.t_hi),
                    gap,
                    f"segment boundary mismatch: {float(left.t_hi)} vs {float(right.t_lo)}",
                )
            )
            continue
        jump = abs(float(left.value_exact(left.t_hi) - right.value_exact(right.t_lo)))
        if jump > CONTINUITY_TOL:
            violations.append(
                CurveViolation(
                    "discontinuity",
                    float(left.t_hi),
                    jump,
                    f"value discontinuity of {jump:.6g} at t={float(left.t_hi)}",
                )
            )

    for t, y in curve.anchors:
        tf = float(t)
        if not 0.0 <= tf <= 1.0:
            violations.append(
                CurveViolation("anchor-mismatch", tf, 0.0, f"anchor t={tf} outside [0, 1]")
            )
            continue
        err = abs(curve.value(tf) - float(y))
        if err > ANCHOR_TOL:
            violations.append(
                CurveViolation(
                    "anchor-mismatch",
                    tf,
                    err,
                    f"anchor ({tf}, {float(y)}) missed by {err:.6g}",
                )
            )

    # Parabola extrema are exact, so the range check needs no sampling.
    for seg in segs:
        for t, v in _segment_extrema(seg):
            value = float(v)
            if value < -RANGE_TOL or value > 1.0 + RANGE_TOL:
                violations.append(
                    CurveViolation(
                        "range",
                        float(t),
                        max(-value, value - 1.0),
                        f"value {value:.6g} at t={float(t)} escapes [0, 1]",
                    )
                )

    return violations


def load_curve(raw: bytes | str, name: str = "custom") -> TemplateCurve:
    """Parse a curve definition from JSON.

    Expected shape::

        {"name": "...",                       # optional
         "segments": [{"t_lo": 0, "t_hi": "1/5",
                       "c0": "1/2", "c1": "5/2", "c2": "-25/4"}, ...],
         "anchors": [["0", "1/2"], ...]}      # optional

    Coefficients and breakpoints may be JSON numbers or rational strings.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CurveFormatError(f"curve file is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CurveFormatError(f"curve file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("segments"), list):
        raise CurveFormatError("curve file must be an object with a 'segments' array")
    segments = []
    for k, item in enumerate(doc["segments"]):
        if not isinstance(item, dict):
            raise CurveFormatError(f"segment {k} must be an object")
        try:
            segments.append(
                segment(item["t_lo"], item["t_hi"], item["c0"], item["c1"], item["c2"])
            )
        except KeyError as exc:
            raise CurveFormatError(f"segment {k} lacks field {exc}") from exc
        except ValueError as exc:
            raise CurveFormatError(f"segment {k}: {exc}") from exc
    anchors: list[tuple[Fraction, Fraction]] = []
    for k, pair in enumerate(doc.get("anchors", [])):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise CurveFormatError(f"anchor {k} must be a [t, y] pair")
        anchors.append((_as_fraction(pair[0]), _as_fraction(pair[1])))
    return TemplateCurve(
        segments=tuple(segments),
        anchors=tuple(anchors),
        name=str(doc.get("name", name)),
    )


def write_curve_csv(curve: TemplateCurve, n: int, out: IO[str]) -> None:
    """Write n uniform samples as CSV rows ``t,value`` (17 significant digits).

    Raises ValueError for n < 2 (a one-point grid cannot span [0, 1]).
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least two samples for a CSV export, got n={n}")
    t = np.arange(n, dtype=np.float64) / (n - 1)
    values = curve.values(t)
    out.write("t,value\n")
    for tj, vj in zip(t, values):
        out.write(f"{tj:.17g},{vj:.17g}\n")
