"""Core time-series value types and the trace file format shared by every stage.

All values are immutable after construction; the backing numpy arrays are
marked read-only so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SupwattError",
    "ValidationError",
    "OutOfRangeError",
    "TraceFormatError",
    "PowerSeries",
    "Sup",
    "ReferencePattern",
    "load_series",
    "save_series",
    "slice_series",
    "max_value",
]

TRACE_FORMAT_CSV = "csv"


class SupwattError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SupwattError):
    """A value violates one of its documented invariants."""


class OutOfRangeError(ValidationError):
    """An index or length lies outside the valid range."""


class TraceFormatError(SupwattError):
    """A trace file is malformed or uses an unknown format."""


def _readonly_watts(samples, *, what: str) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{what} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values")
    if np.any(arr < 0):
        raise ValidationError(f"{what} contains negative watt values")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PowerSeries:
    """Uniformly sampled instantaneous power trace.

    Parameters
    ----------
    samples : array-like of float
        Power values in watts, all non-negative.
    sample_rate : float
        Samples per second, strictly positive. 1 Hz is the working default.
    epoch : float
        Absolute start time of the first sample, in seconds.
    """

    samples: np.ndarray
    sample_rate: float = 1.0
    epoch: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _readonly_watts(self.samples, what="samples"))
        if not (self.sample_rate > 0):
            raise ValidationError("sample_rate must be > 0")

    def __len__(self) -> int:
        return int(self.samples.size)

    def slice(self, start: int, length: int) -> "PowerSeries":
        return slice_series(self, start, length)

    def max_watts(self) -> float:
        return float(self.samples.max())


@dataclass(frozen=True)
class Sup:
    """Single usage profile: the samples of one appliance run, turn-on to turn-off."""

    samples: np.ndarray
    mode_id: str
    appliance_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _readonly_watts(self.samples, what="samples"))

    def __len__(self) -> int:
        return int(self.samples.size)


@dataclass(frozen=True)
class ReferencePattern:
    """Prefix slice of a usage profile, used as the matching template."""

    samples: np.ndarray
    n: int
    appliance_id: str
    source_mode_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _readonly_watts(self.samples, what="samples"))
        if self.n != self.samples.size:
            raise ValidationError("n must equal the number of template samples")

    def __len__(self) -> int:
        return int(self.samples.size)


def slice_series(series: PowerSeries, start: int, length: int) -> PowerSeries:
    """Return exactly samples [start, start+length) with the epoch advanced.

    Raises OutOfRangeError unless 0 <= start, length >= 1 and
    start + length <= len(series).
    """
    if start < 0 or length < 1 or start + length > len(series):
        raise OutOfRangeError(
            f"slice [{start}, {start}+{length}) out of range for series of length {len(series)}"
        )
    return PowerSeries(
        samples=series.samples[start : start + length],
        sample_rate=series.sample_rate,
        epoch=series.epoch + start / series.sample_rate,
    )


def max_value(series) -> float:
    """Maximum sample value of a PowerSeries, Sup, or ReferencePattern."""
    samples = series.samples
    if samples.size == 0:
        raise ValidationError("empty series has no maximum")
    return float(samples.max())


def _format_number(x: float) -> str:
    # repr() gives the shortest round-tripping decimal form; integral floats
    # are shortened to avoid the noisy trailing ".0" on every trace row.
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def save_series(series: PowerSeries, path) -> None:
    """Write a PowerSeries in the canonical trace CSV format.

    Layout: one metadata line ``# rate=<Hz> epoch=<seconds>``, a header line
    ``t,watts``, then one row per sample where ``t`` is the sample index from
    the epoch. UTF-8, LF line endings.
    """
    lines = [f"# rate={_format_number(series.sample_rate)} epoch={_format_number(series.epoch)}"]
    lines.append("t,watts")
    lines.extend(f"{i},{_format_number(w)}" for i, w in enumerate(series.samples))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def load_series(path, format: str = TRACE_FORMAT_CSV) -> PowerSeries:
    """Read a trace file written in the canonical trace CSV format.

    Raises TraceFormatError on malformed content and ValidationError when a
    parsed value violates a PowerSeries invariant (e.g. negative watts).
    """
    if format != TRACE_FORMAT_CSV:
        raise TraceFormatError(f"unknown trace format: {format!r}")
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise TraceFormatError(f"{path}: empty file")

    meta = lines[0].strip()
    if not meta.startswith("#"):
        raise TraceFormatError(f"{path}: missing '# rate=... epoch=...' metadata line")
    fields = dict(
        part.split("=", 1) for part in meta.lstrip("#").split() if "=" in part
    )
    try:
        rate = float(fields["rate"])
        epoch = float(fields["epoch"])
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"{path}: bad metadata line {meta!r}") from exc

    if len(lines) < 2 or lines[1].strip() != "t,watts":
        raise TraceFormatError(f"{path}: missing 't,watts' header line")

    watts = []
    for lineno, row in enumerate(lines[2:], start=3):
        row = row.strip()
        if not row:
            continue
        parts = row.split(",")
        if len(parts) != 2:
            raise TraceFormatError(f"{path}:{lineno}: malformed row {row!r}")
        try:
            t = int(parts[0])
            w = float(parts[1])
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: malformed row {row!r}") from exc
        if t != len(watts):
            raise TraceFormatError(
                f"{path}:{lineno}: sample index {t} breaks the gap-free 0..N-1 order"
            )
        if w < 0:
            raise ValidationError(f"{path}:{lineno}: negative watts value {w}")
        watts.append(w)
    if not watts:
        raise TraceFormatError(f"{path}: no samples")
    return PowerSeries(samples=np.array(watts, dtype=np.float64), sample_rate=rate, epoch=epoch)
