"""Command-line entry point: ``hgentangle run|validate|sweep|list-scenarios|calibrate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import (
    ScenarioConfig,
    bundled_names,
    load_raw,
    load_scenario,
    parse_value,
    save_scenario,
    validate,
)
from .errors import HGEntangleError
from .scenario import calibrate, run_scenario, sweep, write_sweep

CALIBRATION_HEADER = """\
Full experiment: one OPA squeezing TEM10 and TEM01 with a pi/7 relative ellipse
offset, the pi/2 Gouy shifter, a 45 degree basis rotation and quadrant-detector
readout. Generated by `hgentangle calibrate`; do not edit the solved values by hand."""


def _config_ref(args) -> str:
    ref = args.config or args.scenario
    if ref is None:
        raise HGEntangleError("give a bundled scenario name or --config PATH")
    return ref


def cmd_run(args) -> int:
    config = load_scenario(_config_ref(args))
    if args.seed is not None:
        config = config.with_seed(args.seed)
    report = run_scenario(
        config,
        args.out,
        montecarlo=False if args.no_montecarlo else None,
        export_timeseries=args.export_timeseries,
    )
    print(f"scenario {report.scenario} (seed {report.seed}) -> {args.out}")
    for label, ext in report.extrema.items():
        print(f"  {label:>14s}: min {ext['min_dB']:+.3f} dB  max {ext['max_dB']:+.3f} dB")
    if report.inseparability is not None:
        r = report.inseparability
        print(
            f"  inseparability: I_raw = {r.i_raw:.4f}  I_corrected = {r.i_corrected:.4f}  "
            f"phi0 = {r.phi0:.4f} rad"
        )
    if report.inseparability_montecarlo is not None:
        r = report.inseparability_montecarlo
        print(f"  Monte Carlo:    I_raw = {r.i_raw:.4f}  I_corrected = {r.i_corrected:.4f}")
    return 0


def cmd_validate(args) -> int:
    ref = _config_ref(args)
    problems = validate(load_raw(ref))
    for p in problems:
        print(p, file=sys.stderr)
    if not problems:
        print(f"{ref}: ok")
    return 1 if problems else 0


def cmd_sweep(args) -> int:
    config = load_scenario(_config_ref(args))
    values = [parse_value(v) for v in args.values.split(",") if v.strip()] if args.values else []
    rows = sweep(config, args.param, values)
    if args.out:
        out = Path(args.out)
        if out.suffix != ".csv":
            out.mkdir(parents=True, exist_ok=True)
            out = out / f"{config.name}_sweep.csv"
        write_sweep(out, rows)
        print(out)
    else:
        write_sweep(sys.stdout, rows)
    return 0


def cmd_list(args) -> int:
    for name in bundled_names():
        cfg = load_scenario(name)
        print(f"{name:18s} {cfg.description}")
    return 0


def cmd_calibrate(args) -> int:
    config = load_scenario(_config_ref(args))
    result = calibrate(config, args.target_squeezing_db, args.target_inseparability)
    data = result.to_dict()
    data["description"] = "calibrated to -1.7 dB detected squeezing and I = 0.81"
    result = ScenarioConfig.from_dict(data)
    out = Path(args.out) if args.out else None
    solved = result.calibration["solved"]
    check = result.calibration["check"]
    print(
        f"propagation transmittance {solved['propagation_transmittance']:.6f}, "
        f"antisqueezing {solved['antisqueezing_dB']:.4f} dB -> "
        f"detected {check['detected_squeezing_dB']:.4f} dB, I_corrected {check['I_corrected']:.4f}"
    )
    if out is not None:
        save_scenario(result, out, CALIBRATION_HEADER)
        print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hgentangle",
        description="Simulate spatial-mode entanglement within one beam",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("scenario", nargs="?", help="bundled scenario name")
        p.add_argument("--config", help="scenario YAML file (or a run report)")

    p = sub.add_parser("run", help="run a scenario and write CSV traces and a report")
    scenario_args(p)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("--no-montecarlo", action="store_true")
    p.add_argument("--export-timeseries", action="store_true", help="also write the raw photocurrents")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a scenario; diagnostics go to stderr")
    scenario_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="analytic inseparability versus one parameter")
    scenario_args(p)
    p.add_argument("--param", required=True, help="dotted path, e.g. source.relative_phase_offset_rad")
    p.add_argument("--values", default="", help="comma-separated values; pi and sqrt allowed")
    p.add_argument("--out", help="CSV file or directory (default stdout)")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("list-scenarios", help="list bundled scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("calibrate", help="fit loss and antisqueezing to the detected targets")
    scenario_args(p)
    p.add_argument("--out", help="write the calibrated scenario here")
    p.add_argument("--target-squeezing-db", type=float, default=-1.7)
    p.add_argument("--target-inseparability", type=float, default=0.81)
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        return args.func(args)
    except HGEntangleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
