"""Scoring, experiment sweeps, and demand-response recommendations.

The sweep reproduces the detector's sensitivity to the reference-pattern size:
for each template length it simulates labeled single-usage days, runs the
detector with a template sliced from a freshly generated profile of a randomly
chosen mode, and averages the raw number of reported turn-on times.

Classification is evaluated in isolation by classifying every ground-truth
event at its true turn-on time, then tallying a per-mode confusion over all
simulated households; a detector-fed end-to-end variant sits behind a flag.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from supwatt.classification import ModePattern, build_mode_patterns, classify
from supwatt.core import PowerSeries, ValidationError
from supwatt.detection import (
    DEFAULT_DELTA,
    DEFAULT_MIN_GAP,
    detect,
    make_reference_pattern,
)
from supwatt.simulator import (
    EmpiricalCdf,
    GroundTruthEvent,
    Supro,
    UsageIntensity,
    generate_day,
    generate_sup,
)

__all__ = [
    "MatchReport",
    "ModeMetrics",
    "SweepRow",
    "EvaluationReport",
    "TariffSchedule",
    "Recommendation",
    "DEFAULT_MATCH_TOLERANCE",
    "match_detections",
    "prf1",
    "sweep_pattern_size",
    "evaluate_classification",
    "recommend",
    "load_tariff_file",
    "save_tariff_file",
    "thread_count",
]

DEFAULT_MATCH_TOLERANCE = 30
DAY_SECONDS = 86_400
TIERS = ("on-peak", "mid-peak", "off-peak")


@dataclass(frozen=True)
class MatchReport:
    """Greedy truth/detection matching counts."""

    true_positives: int
    false_positives: int
    false_negatives: int
    matched_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "matched_pairs", tuple(self.matched_pairs))
        if self.true_positives != len(self.matched_pairs):
            raise ValidationError("TP count must equal the number of matched pairs")


@dataclass(frozen=True)
class ModeMetrics:
    mode_id: str
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class SweepRow:
    n: int
    mean_detections: float
    std_detections: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-mode metrics overall and per appliance, plus the run bookkeeping."""

    per_mode: Mapping[str, ModeMetrics]
    per_appliance: Mapping[str, Mapping[str, ModeMetrics]]
    days_per_household: int
    households: tuple[str, ...]
    dtw_normalized: bool
    event_count: int


def thread_count() -> int:
    """Worker count from SUPWATT_THREADS; 0 or unset picks the CPU count."""
    raw = os.environ.get("SUPWATT_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"SUPWATT_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise ValidationError("SUPWATT_THREADS must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


def match_detections(
    truth: Sequence[GroundTruthEvent],
    detected: Sequence[int],
    tolerance: int = DEFAULT_MATCH_TOLERANCE,
) -> MatchReport:
    """Greedy nearest matching within +-tolerance, each side matched at most once.

    Truth events are processed in ascending turn-on order; the detected list
    may arrive in any order without changing the counts.
    """
    if tolerance < 0:
        raise ValidationError("tolerance must be >= 0")
    remaining = sorted(int(t) for t in detected)
    pairs: list[tuple[int, int]] = []
    for event in sorted(truth, key=lambda e: e.t_on):
        best = None
        for cand in remaining:
            dist = abs(cand - event.t_on)
            if dist <= tolerance and (best is None or dist < abs(best - event.t_on)):
                best = cand
        if best is not None:
            remaining.remove(best)
            pairs.append((event.t_on, best))
    return MatchReport(
        true_positives=len(pairs),
        false_positives=len(remaining),
        false_negatives=len(truth) - len(pairs),
        matched_pairs=tuple(pairs),
    )


def prf1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1; every 0/0 is defined as 0."""
    if min(tp, fp, fn) < 0:
        raise ValidationError("counts must be >= 0")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def sweep_pattern_size(
    supros: Mapping[str, Supro],
    intensity: UsageIntensity,
    cdf: EmpiricalCdf,
    n_values: Sequence[int],
    days: int,
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
    *,
    min_gap: int = DEFAULT_MIN_GAP,
    usages_per_day: int = 1,
    noise_sigma: float = 0.0,
    threads: int | None = None,
) -> list[SweepRow]:
    """Mean raw detection count per template length over freshly simulated days.

    Day d uses seed (seed, d) for both the day and its reference profile, so
    rerunning any (seed, n_values) combination reproduces the table exactly.
    """
    if not n_values:
        raise ValidationError("n_values must be nonempty")
    if days < 1:
        raise ValidationError("days must be >= 1")

    modes = sorted(supros)
    day_data = []
    for d in range(days):
        day, _truth = generate_day(
            supros, intensity, cdf, usages_per_day, seed=[seed, d, 0], noise_sigma=noise_sigma
        )
        ref_rng = np.random.default_rng([seed, d, 1])
        ref_mode = modes[int(ref_rng.integers(len(modes)))]
        ref_sup = generate_sup(supros[ref_mode], ref_rng)
        day_data.append((day, ref_sup))

    def count_for(n: int, day: PowerSeries, ref_sup) -> int:
        ref = make_reference_pattern(ref_sup, n)
        return len(detect(day, ref, delta=delta, min_gap=min_gap).turn_on_times)

    rows: list[SweepRow] = []
    workers = thread_count() if threads is None else threads
    for n in n_values:
        too_short = [len(ref) for _, ref in day_data if len(ref) < n]
        if too_short:
            raise ValidationError(
                f"template length {n} exceeds a generated profile ({min(too_short)} samples); "
                "shrink the sweep range or extend the profile model"
            )
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                counts = list(pool.map(lambda item: count_for(n, *item), day_data))
        else:
            counts = [count_for(n, day, ref) for day, ref in day_data]
        arr = np.asarray(counts, dtype=np.float64)
        rows.append(SweepRow(n=int(n), mean_detections=float(arr.mean()), std_detections=float(arr.std())))
    return rows


def _confusion_metrics(
    pairs: Sequence[tuple[str, str]], modes: Sequence[str]
) -> dict[str, ModeMetrics]:
    """Per-mode metrics from (truth_mode, predicted_mode) pairs.

    A missed event is encoded with predicted_mode None: it counts as a false
    negative for its true mode without crediting any other mode.
    """
    metrics = {}
    for mode in sorted(modes):
        tp = sum(1 for t, p in pairs if t == mode and p == mode)
        fp = sum(1 for t, p in pairs if t != mode and p == mode)
        fn = sum(1 for t, p in pairs if t == mode and p != mode)
        precision, recall, f1 = prf1(tp, fp, fn)
        metrics[mode] = ModeMetrics(mode_id=mode, precision=precision, recall=recall, f1=f1)
    return metrics


def evaluate_classification(
    appliances: Mapping[str, Mapping[str, Supro]],
    households: Mapping[str, UsageIntensity],
    cdf: EmpiricalCdf,
    days: int = 100,
    seed: int = 0,
    *,
    normalize: bool = False,
    band: int | None = None,
    usages_per_day: int = 1,
    noise_sigma: float = 0.0,
    end_to_end: bool = False,
    ref_n: int = 600,
    delta: float = DEFAULT_DELTA,
    min_gap: int = DEFAULT_MIN_GAP,
    tolerance: int = DEFAULT_MATCH_TOLERANCE,
    threads: int | None = None,
) -> EvaluationReport:
    """Per-mode precision/recall/F1 over simulated households.

    By default every ground-truth event is classified at its true turn-on time,
    isolating the classifier. With ``end_to_end`` the detector runs first and
    events are classified at detected times matched to the truth; unmatched
    truths count as misses.
    """
    if days < 1:
        raise ValidationError("days must be >= 1")

    jobs = []
    for h_idx, household in enumerate(sorted(households)):
        intensity = households[household]
        for a_idx, appliance in enumerate(sorted(appliances)):
            supros = appliances[appliance]
            patterns = build_mode_patterns(supros)
            for d in range(days):
                jobs.append((appliance, supros, patterns, intensity, [seed, h_idx, a_idx, d]))

    def run_one(job) -> list[tuple[str, str, str | None]]:
        appliance, supros, patterns, intensity, day_seed = job
        day, truth = generate_day(
            supros, intensity, cdf, usages_per_day, seed=day_seed, noise_sigma=noise_sigma
        )
        out = []
        if end_to_end:
            ref_rng = np.random.default_rng(day_seed + [1])
            modes = sorted(supros)
            ref_mode = modes[int(ref_rng.integers(len(modes)))]
            ref = make_reference_pattern(generate_sup(supros[ref_mode], ref_rng), ref_n)
            result = detect(day, ref, delta=delta, min_gap=min_gap)
            report = match_detections(truth, result.turn_on_times, tolerance)
            matched = dict(report.matched_pairs)
            for event in truth:
                if event.t_on in matched:
                    chosen = classify(
                        day, matched[event.t_on], patterns, band=band, normalize=normalize
                    ).chosen_mode
                    out.append((appliance, event.mode_id, chosen))
                else:
                    out.append((appliance, event.mode_id, None))
        else:
            for event in truth:
                chosen = classify(
                    day, event.t_on, patterns, band=band, normalize=normalize
                ).chosen_mode
                out.append((appliance, event.mode_id, chosen))
        return out

    workers = thread_count() if threads is None else threads
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(job) for job in jobs]

    tallies: list[tuple[str, str, str | None]] = [item for chunk in results for item in chunk]
    all_modes = sorted({m for supros in appliances.values() for m in supros})
    per_mode = _confusion_metrics([(t, p) for _, t, p in tallies], all_modes)
    per_appliance = {
        appliance: _confusion_metrics(
            [(t, p) for a, t, p in tallies if a == appliance], sorted(appliances[appliance])
        )
        for appliance in sorted(appliances)
    }
    return EvaluationReport(
        per_mode=per_mode,
        per_appliance=per_appliance,
        days_per_household=days,
        households=tuple(sorted(households)),
        dtw_normalized=normalize,
        event_count=len(tallies),
    )


# -- tariffs and recommendations ----------------------------------------------

@dataclass(frozen=True)
class TariffSchedule:
    """Ordered (start, end, tier) intervals covering [0, 86400) exactly once."""

    intervals: tuple[tuple[int, int, str], ...]

    def __post_init__(self) -> None:
        intervals = tuple((int(s), int(e), str(t)) for s, e, t in self.intervals)
        object.__setattr__(self, "intervals", intervals)
        if not intervals:
            raise ValidationError("tariff schedule must not be empty")
        cursor = 0
        for start, end, tier in intervals:
            if tier not in TIERS:
                raise ValidationError(f"unknown tariff tier {tier!r}")
            if start != cursor or end <= start:
                raise ValidationError("tariff intervals must cover [0, 86400) without gaps")
            cursor = end
        if cursor != DAY_SECONDS:
            raise ValidationError("tariff intervals must end at 86400")

    def tier_at(self, second: int) -> str:
        second = int(second) % DAY_SECONDS
        for start, end, tier in self.intervals:
            if start <= second < end:
                return tier
        raise AssertionError("unreachable: schedule covers the full day")

    def off_peak_intervals(self) -> list[tuple[int, int]]:
        return [(s, e) for s, e, t in self.intervals if t == "off-peak"]


@dataclass(frozen=True)
class Recommendation:
    """Demand-response advice for one classified event.

    ``advice`` holds zero or more of "shift-earlier", "shift-later",
    "use-lighter-mode"; empty means no action is suggested.
    """

    t_on: int
    mode_id: str
    advice: tuple[str, ...]
    detail: str
    tier: str


def recommend(
    event,
    schedule: TariffSchedule,
    mode_ranking: Sequence[str],
) -> Recommendation:
    """Advice for one event against a tariff schedule.

    Events in a non-off-peak interval are advised to shift toward the nearest
    off-peak boundary (earlier if strictly closer, later on a tie); events not
    already in the lightest mode are additionally advised to use it.
    """
    if not mode_ranking:
        raise ValidationError("mode_ranking must list modes lightest to heaviest")
    t_on = int(event.t_on)
    mode = getattr(event, "chosen_mode", None) or getattr(event, "mode_id")
    tier = schedule.tier_at(t_on)

    advice: list[str] = []
    details: list[str] = []
    if tier != "off-peak":
        off = schedule.off_peak_intervals()
        if not off:
            raise ValidationError("schedule has no off-peak interval to shift into")
        second = t_on % DAY_SECONDS
        # Distance back to the end of the nearest earlier off-peak interval and
        # forward to the start of the nearest later one, both cyclic.
        back = min((second - e) % DAY_SECONDS for _, e in off)
        forward = min((s - second) % DAY_SECONDS for s, _ in off)
        if back < forward:
            advice.append("shift-earlier")
            details.append(f"start {back}s earlier to leave the {tier} window")
        else:
            advice.append("shift-later")
            details.append(f"start {forward}s later to leave the {tier} window")
    if mode != mode_ranking[0]:
        advice.append("use-lighter-mode")
        details.append(f"prefer mode {mode_ranking[0]!r} over {mode!r}")

    detail = "; ".join(details) if details else "already off-peak in the lightest mode"
    return Recommendation(t_on=t_on, mode_id=str(mode), advice=tuple(advice), detail=detail, tier=tier)


def load_tariff_file(path) -> TariffSchedule:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TariffSchedule(
        intervals=tuple((int(i["start"]), int(i["end"]), str(i["tier"])) for i in data)
    )


def save_tariff_file(schedule: TariffSchedule, path) -> None:
    payload = [{"start": s, "end": e, "tier": t} for s, e, t in schedule.intervals]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
