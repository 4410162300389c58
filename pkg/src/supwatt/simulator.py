"""Labeled daily power trace generation from declarative usage-profile models.

A usage-profile model (Supro) describes one appliance mode as ordered phases,
each repeating a short cycle list between repetition bounds. Days are assembled
by sampling a mode from the household usage intensity, synthesizing a usage
profile, and placing it at a turn-on time drawn by inverse transform sampling
from an empirical turn-on distribution.

Every public sampling function takes a ``seed`` that may be an int, a sequence
of ints, or a ``numpy.random.Generator``; identical seeds and configurations
yield identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from supwatt.core import PowerSeries, Sup, SupwattError, ValidationError

__all__ = [
    "Cycle",
    "Phase",
    "Supro",
    "UsageIntensity",
    "EmpiricalCdf",
    "GroundTruthEvent",
    "PlacementError",
    "DAY_SAMPLES",
    "DEFAULT_JITTER",
    "generate_sup",
    "canonical_sup",
    "build_empirical_cdf",
    "sample_turn_on_time",
    "sample_mode",
    "generate_day",
    "load_supro_file",
    "save_supro_file",
    "supro_from_dict",
    "supro_to_dict",
    "load_truth_file",
    "save_truth_file",
]

DAY_SAMPLES = 86_400  # one day at 1 Hz
DEFAULT_JITTER = 0.05
DEFAULT_PLACEMENT_RETRIES = 100


class PlacementError(SupwattError):
    """A usage profile could not be placed in the day within the retry budget."""


@dataclass(frozen=True)
class Cycle:
    """A stretch of stable power draw.

    ``duration_jitter`` is the fractional variation applied to the duration
    when the cycle is synthesized: the emitted length is
    ``round(duration_s * (1 + u))`` with ``u`` uniform in ``[-jitter, +jitter]``.
    """

    duration_s: float
    watts: float
    duration_jitter: float = DEFAULT_JITTER

    def __post_init__(self) -> None:
        if not (self.duration_s > 0):
            raise ValidationError("cycle duration_s must be > 0")
        if self.watts < 0:
            raise ValidationError("cycle watts must be >= 0")
        if not (0 <= self.duration_jitter < 1):
            raise ValidationError("duration_jitter must lie in [0, 1)")


@dataclass(frozen=True)
class Phase:
    """A cycle list repeated between ``rep_lower`` and ``rep_upper`` times."""

    cycles: tuple[Cycle, ...]
    rep_lower: int = 1
    rep_upper: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "cycles", tuple(self.cycles))
        if not self.cycles:
            raise ValidationError("phase must contain at least one cycle")
        if not (1 <= self.rep_lower <= self.rep_upper):
            raise ValidationError("repetition bounds must satisfy 1 <= lower <= upper")


@dataclass(frozen=True)
class Supro:
    """Usage-profile model for one appliance operation mode."""

    appliance_id: str
    mode_id: str
    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValidationError("supro must contain at least one phase")

    def with_jitter(self, value: float) -> "Supro":
        """Copy of this model with every cycle's duration_jitter set to ``value``."""
        phases = tuple(
            replace(ph, cycles=tuple(replace(c, duration_jitter=value) for c in ph.cycles))
            for ph in self.phases
        )
        return replace(self, phases=phases)

    def nominal_duration_s(self) -> float:
        """Duration with midpoint repetitions and no jitter, in seconds."""
        total = 0.0
        for ph in self.phases:
            reps = (ph.rep_lower + ph.rep_upper) // 2
            total += reps * sum(c.duration_s for c in ph.cycles)
        return total


@dataclass(frozen=True)
class UsageIntensity:
    """Household-level probability distribution over an appliance's modes."""

    mode_weights: Mapping[str, float]

    def __post_init__(self) -> None:
        weights = dict(self.mode_weights)
        if not weights:
            raise ValidationError("usage intensity needs at least one mode")
        if any(w < 0 for w in weights.values()):
            raise ValidationError("mode weights must be >= 0")
        if abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ValidationError("mode weights must sum to 1 within 1e-9")
        object.__setattr__(self, "mode_weights", weights)

    def ordered_modes(self) -> list[str]:
        """Mode ids in the fixed (lexicographic) sampling order."""
        return sorted(self.mode_weights)


@dataclass(frozen=True)
class EmpiricalCdf:
    """Step CDF over a finite support, e.g. observed turn-on seconds-of-day."""

    values: np.ndarray
    cum_probs: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        probs = np.asarray(self.cum_probs, dtype=np.float64)
        if values.size == 0 or values.size != probs.size:
            raise ValidationError("CDF needs matching nonempty support and probabilities")
        if np.any(np.diff(values) <= 0):
            raise ValidationError("CDF support must be strictly increasing")
        if np.any(np.diff(probs) < 0) or probs[-1] != 1.0:
            raise ValidationError("cumulative probabilities must be nondecreasing with last == 1")
        values = values.copy()
        probs = probs.copy()
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cum_probs", probs)

    def quantile(self, u: float) -> float:
        """Generalized inverse: smallest support value whose cumulative prob >= u."""
        idx = int(np.searchsorted(self.cum_probs, u, side="left"))
        idx = min(idx, self.values.size - 1)
        return float(self.values[idx])


@dataclass(frozen=True)
class GroundTruthEvent:
    """One simulated activation: where it starts, which mode, how long it runs."""

    t_on: int
    mode_id: str
    duration: int


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_sup(supro: Supro, seed) -> Sup:
    """Synthesize one usage profile from its model.

    Each phase draws a repetition count uniformly in its bounds, then emits its
    cycle list that many times; each emitted cycle draws its own jitter.
    """
    rng = _rng(seed)
    chunks: list[np.ndarray] = []
    for phase in supro.phases:
        reps = int(rng.integers(phase.rep_lower, phase.rep_upper, endpoint=True))
        for _ in range(reps):
            for cycle in phase.cycles:
                u = rng.uniform(-cycle.duration_jitter, cycle.duration_jitter)
                n = max(1, round(cycle.duration_s * (1.0 + u)))
                chunks.append(np.full(n, cycle.watts, dtype=np.float64))
    return Sup(
        samples=np.concatenate(chunks),
        mode_id=supro.mode_id,
        appliance_id=supro.appliance_id,
    )


def canonical_sup(supro: Supro) -> Sup:
    """Deterministic template profile: midpoint repetitions, no jitter."""
    chunks: list[np.ndarray] = []
    for phase in supro.phases:
        reps = (phase.rep_lower + phase.rep_upper) // 2
        for _ in range(reps):
            for cycle in phase.cycles:
                n = max(1, round(cycle.duration_s))
                chunks.append(np.full(n, cycle.watts, dtype=np.float64))
    return Sup(
        samples=np.concatenate(chunks),
        mode_id=supro.mode_id,
        appliance_id=supro.appliance_id,
    )


def build_empirical_cdf(turn_on_samples: Sequence[float]) -> EmpiricalCdf:
    """Standard empirical CDF over observed turn-on seconds-of-day."""
    samples = np.asarray(turn_on_samples, dtype=np.float64)
    if samples.size == 0:
        raise ValidationError("cannot build a CDF from an empty sample list")
    values, counts = np.unique(samples, return_counts=True)
    cum = np.cumsum(counts).astype(np.float64) / samples.size
    cum[-1] = 1.0
    return EmpiricalCdf(values=values, cum_probs=cum)


def sample_turn_on_time(cdf: EmpiricalCdf, seed) -> float:
    """Inverse transform sampling: one draw from the empirical distribution."""
    rng = _rng(seed)
    return cdf.quantile(rng.random())


def sample_mode(intensity: UsageIntensity, seed) -> str:
    """Multinomial mode draw with the fixed lexicographic ordering convention."""
    rng = _rng(seed)
    return _sample_mode(intensity, rng)


def _sample_mode(intensity: UsageIntensity, rng: np.random.Generator) -> str:
    modes = intensity.ordered_modes()
    cum = np.cumsum([intensity.mode_weights[m] for m in modes])
    cum[-1] = 1.0
    u = rng.random()
    return modes[int(np.searchsorted(cum, u, side="left"))]


def generate_day(
    supros: Mapping[str, Supro],
    intensity: UsageIntensity,
    cdf: EmpiricalCdf,
    usages_per_day: int,
    seed,
    *,
    noise_sigma: float = 0.0,
    day_samples: int = DAY_SAMPLES,
    max_retries: int = DEFAULT_PLACEMENT_RETRIES,
) -> tuple[PowerSeries, list[GroundTruthEvent]]:
    """One simulated day: a zero baseline plus ``usages_per_day`` placed profiles.

    A sampled placement that would overlap a prior profile or overrun midnight
    is retried with a fresh turn-on draw up to ``max_retries`` times; the
    profile itself is kept. Optional zero-mean Gaussian noise (clamped at 0 W)
    is added after placement when ``noise_sigma`` > 0.

    Returns the day trace and its ground-truth events sorted by turn-on time.
    """
    if usages_per_day < 0:
        raise ValidationError("usages_per_day must be >= 0")
    unknown = {m for m in intensity.mode_weights} - set(supros)
    if unknown:
        raise ValidationError(f"intensity references unknown modes: {sorted(unknown)}")

    rng = _rng(seed)
    day = np.zeros(day_samples, dtype=np.float64)
    events: list[GroundTruthEvent] = []
    occupied: list[tuple[int, int]] = []

    for _ in range(usages_per_day):
        mode = _sample_mode(intensity, rng)
        sup = generate_sup(supros[mode], rng)
        length = len(sup)
        for _attempt in range(max_retries + 1):
            t_on = int(cdf.quantile(rng.random()))
            end = t_on + length
            if end > day_samples:
                continue
            if all(end <= s or t_on >= e for s, e in occupied):
                break
        else:
            raise PlacementError(
                f"could not place a {length}-sample profile after {max_retries} retries"
            )
        day[t_on:end] += sup.samples
        occupied.append((t_on, end))
        events.append(GroundTruthEvent(t_on=t_on, mode_id=mode, duration=length))

    if noise_sigma > 0:
        day = np.maximum(day + rng.normal(0.0, noise_sigma, day_samples), 0.0)

    events.sort(key=lambda e: e.t_on)
    return PowerSeries(samples=day, sample_rate=1.0, epoch=0.0), events


# -- model and ground-truth file formats --------------------------------------

def supro_to_dict(supro: Supro) -> dict:
    return {
        "appliance": supro.appliance_id,
        "mode": supro.mode_id,
        "phases": [
            {
                "rep_lower": ph.rep_lower,
                "rep_upper": ph.rep_upper,
                "cycles": [
                    {
                        "duration_s": c.duration_s,
                        "watts": c.watts,
                        "duration_jitter": c.duration_jitter,
                    }
                    for c in ph.cycles
                ],
            }
            for ph in supro.phases
        ],
    }


def supro_from_dict(data: dict) -> Supro:
    try:
        phases = tuple(
            Phase(
                cycles=tuple(
                    Cycle(
                        duration_s=float(c["duration_s"]),
                        watts=float(c["watts"]),
                        duration_jitter=float(c.get("duration_jitter", DEFAULT_JITTER)),
                    )
                    for c in ph["cycles"]
                ),
                rep_lower=int(ph["rep_lower"]),
                rep_upper=int(ph["rep_upper"]),
            )
            for ph in data["phases"]
        )
        return Supro(appliance_id=str(data["appliance"]), mode_id=str(data["mode"]), phases=phases)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed usage-profile model object: {exc}") from exc


def load_supro_file(path) -> list[Supro]:
    """Load one model file: either a single model object or a list of them."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{path}: expected a model object or a nonempty list")
    return [supro_from_dict(item) for item in data]


def save_supro_file(supros: Sequence[Supro], path) -> None:
    payload = [supro_to_dict(s) for s in supros]
    body = json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, sort_keys=True)
    Path(path).write_text(body + "\n", encoding="utf-8")


def save_truth_file(events: Sequence[GroundTruthEvent], path) -> None:
    payload = [{"t_on": e.t_on, "mode": e.mode_id, "duration": e.duration} for e in events]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_truth_file(path) -> list[GroundTruthEvent]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        GroundTruthEvent(t_on=int(e["t_on"]), mode_id=str(e["mode"]), duration=int(e["duration"]))
        for e in data
    ]
