"""Command line entry point wiring simulation, detection, classification, and reports.

Subcommands: simulate, detect, classify, evaluate, sweep, recommend. All
randomness flows from --seed, so repeating an invocation with the same
arguments reproduces every output file byte for byte.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from supwatt.classification import (
    build_mode_patterns,
    classified_event_to_dict,
    classify,
    classify_day,
    load_classified_events,
    save_classified_events,
)
from supwatt.core import (
    PowerSeries,
    SupwattError,
    TraceFormatError,
    ValidationError,
    load_series,
    save_series,
)
from supwatt.detection import (
    DEFAULT_DELTA,
    DEFAULT_MIN_GAP,
    detect,
    detection_result_to_dict,
    load_detection_result,
    make_reference_pattern,
)
from supwatt.evaluation import (
    DEFAULT_MATCH_TOLERANCE,
    evaluate_classification,
    load_tariff_file,
    recommend,
    sweep_pattern_size,
)
from supwatt.report import (
    save_metrics_csv,
    save_metrics_figure,
    save_recommendations_jsonl,
    save_sweep_csv,
    save_sweep_figure,
)
from supwatt.simulator import (
    EmpiricalCdf,
    Sup,
    Supro,
    UsageIntensity,
    build_empirical_cdf,
    generate_day,
    generate_sup,
    load_supro_file,
    save_truth_file,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4

BUILTIN_APPLIANCES = ("clothes_dryer", "clothes_washer", "dishwasher")
DEFAULT_THREE_MODE_WEIGHTS = {"heavy": 0.6, "light": 0.2, "medium": 0.2}


@dataclass
class RunConfig:
    """Validated bag of cross-subcommand parameters."""

    seed: int = 0
    delta: float = DEFAULT_DELTA
    min_gap: int = DEFAULT_MIN_GAP
    tolerance: int = DEFAULT_MATCH_TOLERANCE
    jitter: float | None = None
    noise_sigma: float = 0.0
    dtw_normalize: bool = False
    band: int | None = None

    def validate(self) -> None:
        if not (0 < self.delta < 1):
            raise ValidationError("--delta must lie in (0, 1)")
        if self.min_gap < 0:
            raise ValidationError("--min-gap must be >= 0")
        if self.tolerance < 0:
            raise ValidationError("--tolerance must be >= 0")
        if self.jitter is not None and not (0 <= self.jitter < 1):
            raise ValidationError("--jitter must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise ValidationError("--noise-sigma must be >= 0")
        if self.band is not None and self.band < 0:
            raise ValidationError("--band must be >= 0")
        if self.seed < 0:
            raise ValidationError("--seed must be >= 0")


def _profile_path(name: str) -> Path:
    return Path(str(resources.files("supwatt.profiles").joinpath(name)))


def _load_supros(args) -> dict[str, Supro]:
    if getattr(args, "appliance", None):
        if args.appliance not in BUILTIN_APPLIANCES:
            raise ValidationError(
                f"unknown builtin appliance {args.appliance!r}; choose from {BUILTIN_APPLIANCES}"
            )
        supros = load_supro_file(_profile_path(f"{args.appliance}.json"))
    else:
        paths = args.supro or []
        if not paths:
            raise ValidationError("provide --supro FILE (repeatable) or --appliance NAME")
        supros = [s for p in paths for s in load_supro_file(p)]
    by_mode: dict[str, Supro] = {}
    for s in supros:
        if s.mode_id in by_mode:
            raise ValidationError(f"duplicate mode {s.mode_id!r} in profile models")
        by_mode[s.mode_id] = s
    if getattr(args, "jitter", None) is not None:
        by_mode = {m: s.with_jitter(args.jitter) for m, s in by_mode.items()}
    return by_mode


def _intensity(args, modes) -> UsageIntensity:
    if getattr(args, "weights", None):
        weights = {}
        for part in args.weights.split(","):
            mode, _, value = part.partition("=")
            if not _:
                raise ValidationError(f"bad --weights entry {part!r}, expected mode=weight")
            weights[mode.strip()] = float(value)
        return UsageIntensity(weights)
    if set(modes) == set(DEFAULT_THREE_MODE_WEIGHTS):
        return UsageIntensity(DEFAULT_THREE_MODE_WEIGHTS)
    equal = 1.0 / len(modes)
    weights = {m: equal for m in modes}
    # exact unit total regardless of float division
    weights[sorted(modes)[-1]] += 1.0 - sum(weights.values())
    return UsageIntensity(weights)


def _turn_on_cdf(args) -> EmpiricalCdf:
    if getattr(args, "ton", None) is not None:
        return build_empirical_cdf([float(args.ton)])
    path = getattr(args, "ton_samples", None) or _profile_path("turn_on_seconds.json")
    samples = json.loads(Path(path).read_text(encoding="utf-8"))
    return build_empirical_cdf(samples)


def _parse_range(spec: str) -> list[int]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValidationError(f"bad range {spec!r}, expected a:b:step")
    a, b, step = (int(p) for p in parts)
    if step <= 0 or b < a:
        raise ValidationError(f"bad range {spec!r}: need a <= b and step > 0")
    return list(range(a, b + 1, step))


def _households(args) -> dict[str, UsageIntensity]:
    names = [h.strip() for h in args.households.split(",") if h.strip()]
    presets = {
        "high": UsageIntensity({"heavy": 0.6, "light": 0.2, "medium": 0.2}),
        "medium": UsageIntensity({"heavy": 0.2, "light": 0.2, "medium": 0.6}),
        "low": UsageIntensity({"heavy": 0.2, "light": 0.6, "medium": 0.2}),
    }
    out = {}
    for name in names:
        if name not in presets:
            raise ValidationError(f"unknown household preset {name!r}; choose from high,medium,low")
        out[name] = presets[name]
    if not out:
        raise ValidationError("--households must name at least one preset")
    return out


# -- subcommand bodies ---------------------------------------------------------

def _cmd_simulate(args, cfg: RunConfig) -> int:
    supros = _load_supros(args)
    intensity = _intensity(args, supros)
    cdf = _turn_on_cdf(args)
    if args.days < 1:
        raise ValidationError("--days must be >= 1")
    if args.usages < 0:
        raise ValidationError("--usages must be >= 0")

    out = Path(args.out)
    single_file = args.days == 1 and out.suffix == ".csv"
    if not single_file:
        out.mkdir(parents=True, exist_ok=True)
    for d in range(args.days):
        day, truth = generate_day(
            supros,
            intensity,
            cdf,
            args.usages,
            seed=[cfg.seed, d, 0],
            noise_sigma=cfg.noise_sigma,
        )
        if single_file:
            trace_path = out
            truth_path = out.with_suffix("").with_suffix(".truth.json")
        else:
            trace_path = out / f"day_{d:03d}.csv"
            truth_path = out / f"day_{d:03d}.truth.json"
        save_series(day, trace_path)
        save_truth_file(truth, truth_path)
    print(f"wrote {args.days} day trace(s) under {out}")
    return EXIT_OK


def _reference_from_args(args, cfg: RunConfig):
    if args.ref:
        series = load_series(args.ref)
        sup = Sup(samples=series.samples, mode_id="reference", appliance_id="reference")
        n = args.n or len(sup)
        return make_reference_pattern(sup, n)
    supros = _load_supros(args)
    if not args.n:
        raise ValidationError("--n is required when the reference comes from --supro/--appliance")
    mode = args.ref_mode
    if mode is None:
        modes = sorted(supros)
        rng = np.random.default_rng([cfg.seed, 1])
        mode = modes[int(rng.integers(len(modes)))]
    if mode not in supros:
        raise ValidationError(f"unknown reference mode {mode!r}")
    sup = generate_sup(supros[mode], [cfg.seed, 2])
    return make_reference_pattern(sup, args.n)


def _cmd_detect(args, cfg: RunConfig) -> int:
    day = load_series(args.day)
    ref = _reference_from_args(args, cfg)
    result = detect(day, ref, delta=cfg.delta, min_gap=cfg.min_gap, smooth_window=args.smooth)
    payload = json.dumps(detection_result_to_dict(result), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    return EXIT_OK


def _cmd_classify(args, cfg: RunConfig) -> int:
    day = load_series(args.day)
    supros = _load_supros(args)
    patterns = build_mode_patterns(supros)
    if args.t_on is not None:
        events = [
            classify(day, args.t_on, patterns, band=cfg.band, normalize=cfg.dtw_normalize)
        ]
    elif args.detection:
        detection = load_detection_result(args.detection)
        events = classify_day(day, detection, patterns, band=cfg.band, normalize=cfg.dtw_normalize)
    else:
        raise ValidationError("provide --detection FILE or --t-on INDEX")
    if args.out:
        save_classified_events(events, args.out)
    else:
        print(json.dumps([classified_event_to_dict(e) for e in events], indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_sweep(args, cfg: RunConfig) -> int:
    supros = _load_supros(args)
    intensity = _intensity(args, supros)
    cdf = _turn_on_cdf(args)
    n_values = _parse_range(args.n)
    if args.days < 1:
        raise ValidationError("--days must be >= 1")
    rows = sweep_pattern_size(
        supros,
        intensity,
        cdf,
        n_values,
        days=args.days,
        delta=cfg.delta,
        seed=cfg.seed,
        min_gap=cfg.min_gap,
        noise_sigma=cfg.noise_sigma,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_sweep_csv(rows, out / "sweep.csv")
    if not args.no_figure:
        label = args.appliance or "sweep"
        save_sweep_figure(rows, out / "sweep.png", title=f"{label}: detections vs pattern size")
    print(f"wrote {out / 'sweep.csv'}" + ("" if args.no_figure else f" and {out / 'sweep.png'}"))
    return EXIT_OK


def _cmd_evaluate(args, cfg: RunConfig) -> int:
    if args.appliance:
        names = [a.strip() for a in args.appliance.split(",") if a.strip()]
    else:
        names = list(BUILTIN_APPLIANCES)
    appliances = {}
    for name in names:
        sub_args = argparse.Namespace(appliance=name, supro=None, jitter=args.jitter)
        appliances[name] = _load_supros(sub_args)
    households = _households(args)
    cdf = _turn_on_cdf(args)
    if args.days < 1:
        raise ValidationError("--days must be >= 1")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    common = dict(
        days=args.days,
        seed=cfg.seed,
        band=cfg.band,
        noise_sigma=cfg.noise_sigma,
        end_to_end=args.end_to_end,
        ref_n=args.ref_n,
        delta=cfg.delta,
        min_gap=cfg.min_gap,
        tolerance=cfg.tolerance,
    )
    report = evaluate_classification(appliances, households, cdf, normalize=False, **common)
    save_metrics_csv(report, out / "metrics.csv")
    report_norm = evaluate_classification(appliances, households, cdf, normalize=True, **common)
    save_metrics_csv(report_norm, out / "metrics_dtw_normalized.csv")
    if not args.no_figure:
        save_metrics_figure(report, out / "metrics.png", title="per-mode classification metrics")
    print(
        f"wrote {out / 'metrics.csv'}, {out / 'metrics_dtw_normalized.csv'}"
        + ("" if args.no_figure else f", {out / 'metrics.png'}")
        + f" ({report.event_count} events over {args.days} day(s) per household)"
    )
    return EXIT_OK


def _cmd_recommend(args, cfg: RunConfig) -> int:
    events = load_classified_events(args.events)
    tariff_path = args.tariff or _profile_path("tariff_ontario.json")
    schedule = load_tariff_file(tariff_path)
    ranking = [m.strip() for m in args.ranking.split(",") if m.strip()]
    recommendations = [recommend(e, schedule, ranking) for e in events]
    if args.out:
        save_recommendations_jsonl(recommendations, args.out)
        print(f"wrote {args.out}")
    else:
        for r in recommendations:
            print(
                json.dumps(
                    {
                        "t_on": r.t_on,
                        "mode": r.mode_id,
                        "tier": r.tier,
                        "advice": list(r.advice),
                        "detail": r.detail,
                    },
                    sort_keys=True,
                )
            )
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="base RNG seed (u64)")
    p.add_argument("--config", type=str, default=None, help="JSON file of flag defaults")


def _add_supro_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--supro", action="append", help="usage-profile model JSON (repeatable)")
    p.add_argument(
        "--appliance", type=str, default=None, help=f"builtin fixture: {', '.join(BUILTIN_APPLIANCES)}"
    )
    p.add_argument("--jitter", type=float, default=None, help="override every cycle's duration jitter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supwatt",
        description="Simulate per-appliance power traces, detect activations, classify modes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate labeled day traces")
    _add_common(p)
    _add_supro_source(p)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--usages", type=int, default=1, help="appliance activations per day")
    p.add_argument("--weights", type=str, default=None, help="mode weights, e.g. heavy=0.6,light=0.2,medium=0.2")
    p.add_argument("--ton-samples", dest="ton_samples", type=str, default=None, help="JSON list of turn-on seconds")
    p.add_argument("--ton", type=int, default=None, help="fixed turn-on second (degenerate distribution)")
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p.add_argument("--out", type=str, required=True, help="output .csv (one day) or directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("detect", help="detect turn-on times in a day trace")
    _add_common(p)
    _add_supro_source(p)
    p.add_argument("--day", type=str, required=True, help="day trace CSV")
    p.add_argument("--ref", type=str, default=None, help="reference pattern as a trace CSV")
    p.add_argument("--ref-mode", dest="ref_mode", type=str, default=None, help="mode for a generated reference")
    p.add_argument("--n", type=int, default=None, help="reference pattern length in samples")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--min-gap", dest="min_gap", type=int, default=DEFAULT_MIN_GAP)
    p.add_argument("--smooth", type=int, default=0, help="odd moving-average window (0 = off)")
    p.add_argument("--out", type=str, default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("classify", help="classify activations into operation modes")
    _add_common(p)
    _add_supro_source(p)
    p.add_argument("--day", type=str, required=True)
    p.add_argument("--detection", type=str, default=None, help="DetectionResult JSON from 'detect'")
    p.add_argument("--t-on", dest="t_on", type=int, default=None, help="classify one known turn-on index")
    p.add_argument("--normalize", dest="dtw_normalize", action="store_true", help="divide DTW by summed lengths")
    p.add_argument("--band", type=int, default=None, help="warping band half-width")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("sweep", help="mean detections vs reference-pattern size")
    _add_common(p)
    _add_supro_source(p)
    p.add_argument("--n", type=str, required=True, help="pattern sizes a:b:step")
    p.add_argument("--days", type=int, default=100)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--min-gap", dest="min_gap", type=int, default=DEFAULT_MIN_GAP)
    p.add_argument("--weights", type=str, default=None)
    p.add_argument("--ton-samples", dest="ton_samples", type=str, default=None)
    p.add_argument("--ton", type=int, default=None)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p.add_argument("--no-figure", dest="no_figure", action="store_true")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("evaluate", help="per-mode classification metrics over simulated households")
    _add_common(p)
    p.add_argument("--appliance", type=str, default=None, help="comma list; default: all builtin")
    p.add_argument("--jitter", type=float, default=None)
    p.add_argument("--households", type=str, default="high,medium,low")
    p.add_argument("--days", type=int, default=100)
    p.add_argument("--ton-samples", dest="ton_samples", type=str, default=None)
    p.add_argument("--ton", type=int, default=None)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--end-to-end", dest="end_to_end", action="store_true", help="detector-fed evaluation")
    p.add_argument("--ref-n", dest="ref_n", type=int, default=600)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--min-gap", dest="min_gap", type=int, default=DEFAULT_MIN_GAP)
    p.add_argument("--tolerance", type=int, default=DEFAULT_MATCH_TOLERANCE)
    p.add_argument("--no-figure", dest="no_figure", action="store_true")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("recommend", help="demand-response advice for classified events")
    _add_common(p)
    p.add_argument("--events", type=str, required=True, help="classified events JSON from 'classify'")
    p.add_argument("--tariff", type=str, default=None, help="tariff schedule JSON (default: bundled sample)")
    p.add_argument("--ranking", type=str, default="light,medium,heavy", help="modes lightest to heaviest")
    p.add_argument("--out", type=str, default=None, help="recommendations JSONL")
    p.set_defaults(func=_cmd_recommend)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Seed parser defaults from --config JSON; explicit flags still win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    path = argv[idx + 1]
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TraceFormatError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    defaults = {str(k).replace("-", "_"): v for k, v in data.items()}
    parser.set_defaults(**defaults)
    return argv


def run(argv: list[str] | None = None) -> int:
    """Parse argv, execute the subcommand, and map errors to exit codes."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        cfg = RunConfig(
            seed=getattr(args, "seed", 0),
            delta=getattr(args, "delta", DEFAULT_DELTA),
            min_gap=getattr(args, "min_gap", DEFAULT_MIN_GAP),
            tolerance=getattr(args, "tolerance", DEFAULT_MATCH_TOLERANCE),
            jitter=getattr(args, "jitter", None),
            noise_sigma=getattr(args, "noise_sigma", 0.0),
            dtw_normalize=getattr(args, "dtw_normalize", False),
            band=getattr(args, "band", None),
        )
        cfg.validate()
        return args.func(args, cfg)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SupwattError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
