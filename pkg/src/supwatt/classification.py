"""Operation-mode classification of detected activations.

Each candidate mode contributes a full-length reference pattern; the day is
segmented at the turn-on time once per candidate length, and the mode with the
smallest dynamic-time-warping distance to its segment wins. Ties break
lexicographically by mode id.

The DTW here is the classic dynamic program with absolute-difference local
cost, steps (1,1), (1,0), (0,1), boundary-to-boundary alignment, and an
unnormalized cumulative distance. An optional band constrains the warping
path around the (scaled) diagonal; an optional normalization divides by the
summed sequence lengths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import ceil
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from supwatt.core import OutOfRangeError, PowerSeries, Sup, ValidationError
from supwatt.detection import DetectionResult
from supwatt.simulator import Supro, canonical_sup

__all__ = [
    "ModePattern",
    "ClassifiedEvent",
    "segment",
    "dtw_distance",
    "dtw_cost_matrix",
    "classify",
    "classify_day",
    "build_mode_patterns",
    "classified_event_to_dict",
    "classified_event_from_dict",
    "save_classified_events",
    "load_classified_events",
]


@dataclass(frozen=True)
class ModePattern:
    """Full-length reference profile for one operation mode."""

    mode_id: str
    pattern: np.ndarray
    k: int

    def __post_init__(self) -> None:
        pattern = np.asarray(self.pattern, dtype=np.float64).copy()
        pattern.setflags(write=False)
        object.__setattr__(self, "pattern", pattern)
        if self.k != pattern.size or self.k < 1:
            raise ValidationError("k must equal the nonzero pattern length")

    @classmethod
    def from_sup(cls, sup: Sup) -> "ModePattern":
        return cls(mode_id=sup.mode_id, pattern=sup.samples, k=len(sup))


@dataclass(frozen=True)
class ClassifiedEvent:
    """Detector/classifier output for one activation."""

    t_on: int
    chosen_mode: str
    distances: Mapping[str, float]
    min_distance: float
    truncated: bool = False

    def __post_init__(self) -> None:
        distances = dict(self.distances)
        object.__setattr__(self, "distances", distances)
        if self.chosen_mode not in distances:
            raise ValidationError("chosen_mode must appear in distances")
        best = min(distances.values())
        if not (self.min_distance == distances[self.chosen_mode] == best):
            raise ValidationError("chosen_mode must attain the minimum distance")


def build_mode_patterns(supros: Mapping[str, Supro]) -> list[ModePattern]:
    """Deterministic per-mode templates from usage-profile models."""
    return [ModePattern.from_sup(canonical_sup(supros[m])) for m in sorted(supros)]


def segment(day: PowerSeries, t_on: int, k: int) -> tuple[PowerSeries, bool]:
    """Day sub-sequence [t_on, t_on + k), truncated at day end with a flag.

    Returns (segment, truncated). Matches a plain series slice exactly when
    the window fits inside the day.
    """
    if not (0 <= t_on < len(day)):
        raise OutOfRangeError(f"t_on {t_on} outside the day of {len(day)} samples")
    if k < 1:
        raise OutOfRangeError("segment length must be >= 1")
    end = t_on + k
    truncated = end > len(day)
    return day.slice(t_on, min(end, len(day)) - t_on), truncated


def _band_windows(n: int, m: int, half_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-row inclusive column windows around the scaled diagonal.

    The half-width is widened to the diagonal slope so the corner cell always
    stays reachable, even for very unequal lengths.
    """
    slope = (m - 1) / (n - 1) if n > 1 else 0.0
    w = max(half_width, ceil(slope))
    centers = np.arange(n) * slope
    lo = np.maximum(np.ceil(centers - w).astype(np.int64), 0)
    hi = np.minimum(np.floor(centers + w).astype(np.int64), m - 1)
    return lo, hi


def _dtw_rows(x: np.ndarray, y: np.ndarray, band: int | None):
    """Generate accumulated-cost rows with two-row rolling storage.

    Row recurrence: cost[i, j] = |x[i] - y[j]| + min(cost[i-1, j],
    cost[i-1, j-1], cost[i, j-1]). Within a row this is a running minimum
    after subtracting the local-cost prefix sum, so each row is a handful of
    vector operations instead of a scalar loop.
    """
    n = x.size
    m = y.size
    if band is None:
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, m - 1, dtype=np.int64)
    else:
        lo, hi = _band_windows(n, m, band)

    prev = np.full(m, np.inf)
    a, b = int(lo[0]), int(hi[0])
    if a == 0:
        prev[a : b + 1] = np.cumsum(np.abs(x[0] - y[a : b + 1]))
    yield prev
    for i in range(1, n):
        a, b = int(lo[i]), int(hi[i])
        cur = np.full(m, np.inf)
        local = np.abs(x[i] - y[a : b + 1])
        up = prev[a : b + 1]
        diag = prev[a - 1 : b] if a > 0 else np.concatenate(([np.inf], prev[a:b]))
        entry = np.minimum(up, diag) + local
        prefix = np.cumsum(local)
        cur[a : b + 1] = np.minimum.accumulate(entry - prefix) + prefix
        yield cur
        prev = cur


def dtw_distance(
    x: Sequence[float],
    y: Sequence[float],
    *,
    band: int | None = None,
    normalize: bool = False,
) -> float:
    """Dynamic-time-warping distance between two watt sequences.

    ``band`` is an optional half-width around the scaled diagonal; ``None``
    leaves the path unconstrained. ``normalize`` divides the cumulative cost
    by len(x) + len(y).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValidationError("DTW inputs must be nonempty")
    if band is not None and band < 0:
        raise ValidationError("band half-width must be >= 0")
    for row in _dtw_rows(x, y, band):
        pass
    dist = float(row[-1])
    if normalize:
        dist /= x.size + y.size
    return dist


def dtw_cost_matrix(
    x: Sequence[float], y: Sequence[float], *, band: int | None = None
) -> np.ndarray:
    """Full accumulated-cost matrix (for path tracing in tests; O(n*m) memory)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValidationError("DTW inputs must be nonempty")
    return np.vstack([row for row in _dtw_rows(x, y, band)])


def classify(
    day: PowerSeries,
    t_on: int,
    patterns: Sequence[ModePattern],
    *,
    band: int | None = None,
    normalize: bool = False,
) -> ClassifiedEvent:
    """Pick the mode whose pattern is nearest (DTW) to its day segment at t_on."""
    if not patterns:
        raise ValidationError("classify needs at least one mode pattern")
    distances: dict[str, float] = {}
    truncated_by_mode: dict[str, bool] = {}
    for p in patterns:
        seg, truncated = segment(day, t_on, p.k)
        distances[p.mode_id] = dtw_distance(
            p.pattern, seg.samples, band=band, normalize=normalize
        )
        truncated_by_mode[p.mode_id] = truncated
    chosen = min(distances, key=lambda m: (distances[m], m))
    return ClassifiedEvent(
        t_on=t_on,
        chosen_mode=chosen,
        distances=distances,
        min_distance=distances[chosen],
        truncated=truncated_by_mode[chosen],
    )


def classify_day(
    day: PowerSeries,
    detection: DetectionResult,
    patterns: Sequence[ModePattern],
    *,
    band: int | None = None,
    normalize: bool = False,
) -> list[ClassifiedEvent]:
    """One classified event per detected turn-on time, in time order."""
    return [
        classify(day, t_on, patterns, band=band, normalize=normalize)
        for t_on in sorted(detection.turn_on_times)
    ]


def classified_event_to_dict(event: ClassifiedEvent) -> dict:
    return {
        "t_on": event.t_on,
        "chosen_mode": event.chosen_mode,
        "min_distance": event.min_distance,
        "distances": dict(sorted(event.distances.items())),
        "truncated": event.truncated,
    }


def classified_event_from_dict(data: dict) -> ClassifiedEvent:
    return ClassifiedEvent(
        t_on=int(data["t_on"]),
        chosen_mode=str(data["chosen_mode"]),
        distances={str(k): float(v) for k, v in data["distances"].items()},
        min_distance=float(data["min_distance"]),
        truncated=bool(data.get("truncated", False)),
    )


def save_classified_events(events: Sequence[ClassifiedEvent], path) -> None:
    payload = [classified_event_to_dict(e) for e in events]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_classified_events(path) -> list[ClassifiedEvent]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [classified_event_from_dict(e) for e in data]
