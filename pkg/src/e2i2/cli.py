"""Command-line front end: ``e2i2 <verb> --config <scenario> [options]``.

Verbs
-----
validate    check a scenario file and print its digest
analytic    write analytic correlation curves as CSV
montecarlo  simulate coincidence counting, write tallies and curves
estimate    recover diameter, separation or center vectors from curve files

Exit status is 0 on success, 1 on a diagnosed error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .correlation import CSV_HEADER, VARIANTS, CorrelationCurve, correlation_curve, map_from_csv, map_to_csv, normalize, total_weight
from .estimation import (
    EstimationError,
    estimate_diameter,
    estimate_separation,
    extract_center_vectors,
    report_csv,
    report_text,
)
from .montecarlo import histogram_to_curve, run_trials
from .scenario import ConfigError, ScenarioConfig


class CommandError(Exception):
    """A diagnosed failure; the message goes to stderr and the exit status is 1."""


def _count(text: str) -> int:
    """Trial counts: positive integers, also written as 1e6."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"count must be a positive integer, got {text!r}")
    return int(value)


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file (YAML)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=_seed, help="Monte Carlo seed (overrides the scenario)")
    common.add_argument("--trials", type=_count, help="trials per baseline, e.g. 1e6")
    common.add_argument("--variant", action="append", choices=VARIANTS,
                        help="correlation variant; may be repeated")
    common.add_argument("--plot", action="store_true", help="also write an SVG per curve (needs matplotlib)")

    parser = argparse.ArgumentParser(prog="e2i2", description="Multi-wavelength intensity interferometry toolkit.")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("validate", parents=[common], help="check a scenario file")
    sub.add_parser("analytic", parents=[common], help="analytic correlation curves")
    sub.add_parser("montecarlo", parents=[common], help="photon-counting simulation")
    est = sub.add_parser("estimate", parents=[common], help="estimate geometry from curve files")
    est.add_argument("curves", nargs="+", help="curve or map CSV files")
    return parser


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _plot(path: Path, curves):
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise CommandError("--plot needs matplotlib, which is not installed") from None
    fig, ax = plt.subplots(figsize=(6, 4))
    for c in curves:
        if c.error is not None:
            ax.errorbar(c.separation, c.value, c.error, fmt=".", label=c.variant)
        else:
            ax.plot(c.separation, c.value, label=c.variant)
    ax.set_xlabel("baseline (m)")
    ax.set_ylabel("normalized G2")
    ax.legend()
    fig.savefig(path.with_suffix(".svg"))
    plt.close(fig)


def _variants(cfg: ScenarioConfig, args):
    variants = args.variant or list(cfg.variants)
    if len(cfg.sources) > 1 and "single" in variants:
        raise CommandError("variant 'single' needs a one-source scenario")
    return variants


def cmd_validate(cfg: ScenarioConfig, args, out):
    print(f"ok: {cfg.name}: {len(cfg.sources)} source(s), sha256 {cfg.digest()}", file=out)


def cmd_analytic(cfg: ScenarioConfig, args, out):
    sources = cfg.build_sources()
    scale = total_weight(sources) ** 2
    b = cfg.baseline
    method = cfg.quadrature.method
    quad = cfg.quadrature_rule()
    outdir = Path(args.out)
    for variant in _variants(cfg, args):
        curves = [normalize(correlation_curve(sources, cfg.separations(), variant, b.direction, b.reference,
                                              offset, method, quad), scale)
                  for offset in cfg.offsets()]
        if b.offsets is None:
            path = _write(outdir, f"{cfg.name}_{variant}.csv", curves[0].to_csv())
            if args.plot:
                _plot(path, curves)
        else:
            path = _write(outdir, f"{cfg.name}_{variant}_map.csv", map_to_csv(curves))
        print(f"wrote {path}", file=out)


def cmd_montecarlo(cfg: ScenarioConfig, args, out):
    if cfg.baseline.offsets is not None:
        raise CommandError("Monte Carlo runs a single baseline sweep; remove baseline.offsets")
    sources = cfg.build_sources()
    scale = total_weight(sources) ** 2
    variants = args.variant or (["single"] if len(sources) == 1 else ["no-e2i2", "e2i2"])
    if "delta" in variants:
        variants = [v for v in variants if v != "delta"] + ["no-e2i2", "e2i2", "delta"]
        variants = list(dict.fromkeys(variants))
    outdir = Path(args.out)
    curves = {}
    seed = cfg.montecarlo.seed if args.seed is None else args.seed
    for variant in variants:
        if variant == "delta":
            continue
        if variant in ("single", "multi"):
            if variant == "single" and len(sources) != 1:
                raise CommandError("variant 'single' needs a one-source scenario")
            kind = "no-e2i2" if variant == "single" else "e2i2"
        else:
            kind = variant
        tally = run_trials(cfg, args.trials, seed, kind)
        tally.variant = variant
        curve = normalize(histogram_to_curve(tally), scale)
        curves[variant] = curve
        _write(outdir, f"{cfg.name}_{variant}_mc_tally.csv", tally.to_csv())
        path = _write(outdir, f"{cfg.name}_{variant}_mc.csv", curve.to_csv())
        acc = float(np.mean(tally.acceptance))
        print(f"{variant}: seed {seed}, {int(tally.trials[0])} trials/baseline, "
              f"mean acceptance {acc:.6f}; wrote {path}", file=out)
        if args.plot:
            _plot(path, [curve])
    if "delta" in variants:
        d = _difference(curves["e2i2"], curves["no-e2i2"])
        path = _write(outdir, f"{cfg.name}_delta_mc.csv", d.to_csv())
        print(f"delta: wrote {path}", file=out)


def _difference(e2i2: CorrelationCurve, plain: CorrelationCurve) -> CorrelationCurve:
    err = None
    if e2i2.error is not None and plain.error is not None:
        err = np.hypot(e2i2.error, plain.error)
    meta = {}
    empty = sorted(set(e2i2.meta.get("empty_bins", [])) | set(plain.meta.get("empty_bins", [])))
    if empty:
        meta["empty_bins"] = empty
    return CorrelationCurve(e2i2.separation, e2i2.value - plain.value, "delta", err, meta)


def _read_curves(paths):
    curves, maps = {}, {}
    for p in paths:
        path = Path(p)
        if not path.exists():
            raise CommandError(f"curve file not found: {p}")
        text = path.read_text(encoding="utf-8")
        header = text.split("\n", 1)[0].strip().split(",")
        if header[:2] == ["separation_m", "offset_m"]:
            m = map_from_csv(text)
            maps[m[0].variant] = m
        elif header[:3] == CSV_HEADER:
            c = CorrelationCurve.from_csv(text)
            curves[c.variant] = c
        else:
            raise CommandError(f"{p}: not a curve file (header {','.join(header)})")
    return curves, maps


def cmd_estimate(cfg: ScenarioConfig, args, out):
    curves, maps = _read_curves(args.curves)
    est = cfg.estimation
    wl = [s.wavelength for s in cfg.sources]
    n = len(cfg.sources)
    if n == 1:
        curve = curves.get("single") or curves.get("no-e2i2")
        if curve is None:
            raise CommandError("diameter estimation needs a curve with variant 'single'")
        result = estimate_diameter(curve, wl[0])
    elif n == 2:
        curve = curves.get("delta")
        if curve is None and "e2i2" in curves and "no-e2i2" in curves:
            curve = _difference(curves["e2i2"], curves["no-e2i2"])
        if curve is None:
            raise CommandError("separation estimation needs a curve with variant 'delta' "
                               "(or both 'e2i2' and 'no-e2i2')")
        result = estimate_separation(curve, wl[0], wl[1], cfg.distance(), est.window, est.zero_pad,
                                     est.snr_threshold_db)
    else:
        if "delta" not in maps:
            raise CommandError("center-vector extraction needs a 2-d map with variant 'delta'")
        result = extract_center_vectors(maps["delta"], wl, weights=[s.weight for s in cfg.sources],
                                        window=est.window, zero_pad=est.zero_pad,
                                        snr_threshold_db=est.snr_threshold_db)
    text = report_text(result)
    out.write(text)
    if args.out:
        _write(Path(args.out), f"{cfg.name}_estimate.txt", text)
        _write(Path(args.out), f"{cfg.name}_estimate.csv", report_csv(result))
    if n > 2 and not result.resolved:
        raise CommandError("some source pairs could not be resolved; see the report")


COMMANDS = {"validate": cmd_validate, "analytic": cmd_analytic, "montecarlo": cmd_montecarlo,
            "estimate": cmd_estimate}


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = ScenarioConfig.load(args.config)
        COMMANDS[args.verb](cfg, args, out)
    except FileNotFoundError as exc:
        print(f"error: {exc.strerror}: {exc.filename}", file=err)
        return 1
    except (ConfigError, EstimationError, CommandError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    return 0


def _entry():
    sys.exit(main())
