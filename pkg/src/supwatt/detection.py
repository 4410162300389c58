"""Turn-on detection in daily traces.

The pipeline is: correlate a reference pattern against the day with the
normalized absolute-difference cross-correlation, cancel low amplitudes with
tau, then read one candidate turn-on time off each contiguous residue run.

For a template S of n samples and a day D of m samples, the lag-t correlation
(0-based, t in [0, m-n]) is

    X(t) = (Max(S) + Max(D)) / 2 - (1/n) * sum_k |S(k) - D(t+k)|

so X never exceeds the normalization level and touches it only on an exact
window match. The threshold is tau = delta * (Max(S) + Max(D)) / 2 with
delta in (0, 1), and the residue is max(X - tau, 0) clamped at zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from supwatt.core import (
    OutOfRangeError,
    PowerSeries,
    ReferencePattern,
    Sup,
    ValidationError,
)

__all__ = [
    "CorrelationTrace",
    "ResiduePeriod",
    "DetectionResult",
    "DEFAULT_DELTA",
    "DEFAULT_MIN_GAP",
    "make_reference_pattern",
    "xcorr",
    "threshold_tau",
    "residue",
    "moving_average",
    "extract_turn_on_times",
    "detect",
    "detection_result_to_dict",
    "detection_result_from_dict",
    "save_detection_result",
    "load_detection_result",
]

DEFAULT_DELTA = 0.9
DEFAULT_MIN_GAP = 60
# Bound on the temporary window matrix while correlating (elements per chunk).
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class CorrelationTrace:
    """Correlation values, one per lag t in [0, m-n]."""

    values: np.ndarray
    n: int
    norm_level: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ResiduePeriod:
    """One contiguous positive residue run and its absolute maximum."""

    start: int
    end: int
    argmax: int
    max_value: float

    def __post_init__(self) -> None:
        if not (self.start <= self.argmax <= self.end):
            raise ValidationError("period argmax must lie inside [start, end]")
        if not (self.max_value > 0):
            raise ValidationError("period max_value must be > 0")


@dataclass(frozen=True)
class DetectionResult:
    """Candidate turn-on times, one per residue period, with the run parameters."""

    turn_on_times: tuple[int, ...]
    periods: tuple[ResiduePeriod, ...]
    tau: float
    delta: float
    n: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "turn_on_times", tuple(self.turn_on_times))
        object.__setattr__(self, "periods", tuple(self.periods))
        if len(self.turn_on_times) != len(self.periods) or any(
            t != p.argmax for t, p in zip(self.turn_on_times, self.periods)
        ):
            raise ValidationError("turn-on times must be the period argmaxes")


def make_reference_pattern(sup: Sup, n: int) -> ReferencePattern:
    """The first n samples of a usage profile, as the matching template."""
    if not (1 <= n <= len(sup)):
        raise OutOfRangeError(f"template length {n} not in [1, {len(sup)}]")
    return ReferencePattern(
        samples=sup.samples[:n],
        n=n,
        appliance_id=sup.appliance_id,
        source_mode_id=sup.mode_id,
    )


def xcorr(ref: ReferencePattern, day: PowerSeries) -> CorrelationTrace:
    """Normalized absolute-difference cross-correlation at every lag.

    Exact at every lag. Windows that contain only zero-watt day samples are
    evaluated in closed form (their mean absolute difference is mean(|S|)),
    which makes single-profile days with a zero baseline cheap; all other lags
    are evaluated directly in bounded-memory chunks.
    """
    s = ref.samples
    d = day.samples
    n = s.size
    m = d.size
    if n > m:
        raise OutOfRangeError(f"template ({n} samples) longer than day ({m} samples)")

    norm_level = (float(s.max()) + float(d.max())) / 2.0
    lags = m - n + 1
    values = np.full(lags, norm_level - float(np.mean(np.abs(s))), dtype=np.float64)

    # Lags whose window touches at least one nonzero day sample need the real sum.
    nz = np.flatnonzero(d)
    if nz.size:
        lo = max(0, int(nz[0]) - n + 1)
        hi = min(lags - 1, int(nz[-1]))
        span = np.arange(lo, hi + 1)
        counts = np.cumsum(d != 0)
        window_nnz = counts[span + n - 1] - np.where(span > 0, counts[span - 1], 0)
        needed = span[window_nnz > 0]
        if needed.size:
            chunk = max(1, _CHUNK_ELEMENTS // n)
            windows = sliding_window_view(d, n)
            for i in range(0, needed.size, chunk):
                idx = needed[i : i + chunk]
                values[idx] = norm_level - np.mean(np.abs(windows[idx] - s), axis=1)

    return CorrelationTrace(values=values, n=n, norm_level=norm_level)


def threshold_tau(ref: ReferencePattern, day: PowerSeries, delta: float) -> float:
    """Low-amplitude canceling threshold: delta times the normalization level."""
    if not (0 < delta < 1):
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    return delta * (float(ref.samples.max()) + float(day.samples.max())) / 2.0


def residue(x: CorrelationTrace, tau: float) -> CorrelationTrace:
    """Pointwise max(X - tau, 0). Clamping keeps run extraction well defined."""
    if tau < 0:
        raise ValidationError("tau must be >= 0")
    return CorrelationTrace(
        values=np.maximum(x.values - tau, 0.0), n=x.n, norm_level=x.norm_level
    )


def moving_average(x: CorrelationTrace, window: int) -> CorrelationTrace:
    """Optional centered moving-average smoother (odd window), off by default."""
    if window <= 1:
        return x
    if window % 2 == 0:
        raise ValidationError("smoothing window must be odd")
    if window > len(x):
        raise ValidationError("smoothing window longer than the correlation trace")
    half = window // 2
    padded = np.pad(x.values, half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    smoothed = np.convolve(padded, kernel, mode="valid")
    return CorrelationTrace(values=smoothed, n=x.n, norm_level=x.norm_level)


def _positive_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal contiguous runs of True, as inclusive (start, end) index pairs."""
    if not mask.any():
        return []
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    starts = edges[mask[edges + 1]] + 1
    ends = edges[~mask[edges + 1]]
    if mask[0]:
        starts = np.concatenate(([0], starts))
    if mask[-1]:
        ends = np.concatenate((ends, [mask.size - 1]))
    return list(zip(starts.tolist(), ends.tolist()))


def extract_turn_on_times(
    xbar: CorrelationTrace, min_gap: int = DEFAULT_MIN_GAP
) -> list[ResiduePeriod]:
    """Partition the positive residue support into periods, one per candidate.

    Runs separated by fewer than ``min_gap`` zero lags are first merged; for
    each resulting period the candidate is the smallest lag attaining the
    period's maximum.
    """
    if min_gap < 0:
        raise ValidationError("min_gap must be >= 0")
    v = xbar.values
    runs = _positive_runs(v > 0)
    merged: list[list[int]] = []
    for start, end in runs:
        if merged and start - merged[-1][1] - 1 < min_gap:
            merged[-1][1] = end
        else:
            merged.append([start, end])

    periods = []
    for start, end in merged:
        offset = int(np.argmax(v[start : end + 1]))  # first occurrence wins ties
        argmax = start + offset
        periods.append(
            ResiduePeriod(start=start, end=end, argmax=argmax, max_value=float(v[argmax]))
        )
    return periods


def detect(
    day: PowerSeries,
    ref: ReferencePattern,
    delta: float = DEFAULT_DELTA,
    min_gap: int = DEFAULT_MIN_GAP,
    *,
    smooth_window: int = 0,
) -> DetectionResult:
    """Full detection pass: correlate, threshold, clamp, extract candidates."""
    x = xcorr(ref, day)
    if smooth_window:
        x = moving_average(x, smooth_window)
    tau = threshold_tau(ref, day, delta)
    periods = extract_turn_on_times(residue(x, tau), min_gap)
    return DetectionResult(
        turn_on_times=tuple(p.argmax for p in periods),
        periods=tuple(periods),
        tau=tau,
        delta=delta,
        n=ref.n,
    )


def detection_result_to_dict(result: DetectionResult) -> dict:
    return {
        "delta": result.delta,
        "tau": result.tau,
        "n": result.n,
        "turn_on_times": list(result.turn_on_times),
        "periods": [
            {"start": p.start, "end": p.end, "argmax": p.argmax, "max_value": p.max_value}
            for p in result.periods
        ],
    }


def detection_result_from_dict(data: dict) -> DetectionResult:
    periods = tuple(
        ResiduePeriod(
            start=int(p["start"]),
            end=int(p["end"]),
            argmax=int(p["argmax"]),
            max_value=float(p["max_value"]),
        )
        for p in data["periods"]
    )
    return DetectionResult(
        turn_on_times=tuple(int(t) for t in data["turn_on_times"]),
        periods=periods,
        tau=float(data["tau"]),
        delta=float(data["delta"]),
        n=int(data["n"]),
    )


def save_detection_result(result: DetectionResult, path) -> None:
    Path(path).write_text(
        json.dumps(detection_result_to_dict(result), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_detection_result(path) -> DetectionResult:
    return detection_result_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
