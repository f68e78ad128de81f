"""Command line interface: ``wavechain {run, analyze, presets, check-stability}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, config_from_dict, parse_config
from .lti import DivergenceError
from .presets import describe, preset_dict, preset_names, preset_yaml

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_UNSTABLE = 0, 2, 3, 4


def _load(args):
    if args.preset:
        data = preset_dict(args.preset)
        cfg = config_from_dict(data, digest=f"preset:{args.preset}")
        text = None
    else:
        text = Path(args.config).read_text()
        cfg = parse_config(text)
    raw = dict(cfg.raw)
    sim = dict(raw.get("simulation") or {})
    grid = dict(raw.get("grid") or {})
    changed = False
    for flag, key in (("dt", "dt_s"), ("t_final", "t_final_s"), ("horizon", "fir_horizon_s")):
        if getattr(args, flag, None) is not None:
            sim[key] = getattr(args, flag)
            changed = True
    for flag, key in (("w_min", "w_min_rad_s"), ("w_max", "w_max_rad_s"), ("points", "points")):
        if getattr(args, flag, None) is not None:
            grid[key] = getattr(args, flag)
            changed = True
    if changed:
        raw["simulation"], raw["grid"] = sim, grid
        cfg = config_from_dict(raw, digest=cfg.digest)
    return cfg


def _add_common(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?", help="YAML scenario file")
    src.add_argument("--preset", choices=preset_names(), help="use a built-in scenario")
    p.add_argument("--out", help="output directory (default: config 'output.dir')")
    p.add_argument("--dt", type=float, help="simulation step [s]")
    p.add_argument("--t-final", type=float, help="simulated time [s]")
    p.add_argument("--horizon", type=float, help="FIR kernel horizon [s]")
    p.add_argument("--w-min", type=float, help="lowest grid frequency [rad/s]")
    p.add_argument("--w-max", type=float, help="highest grid frequency [rad/s]")
    p.add_argument("--points", type=int, help="frequency grid points")
    p.add_argument("--strict", action="store_true",
                   help="exit with status 4 when a WTF stability check fails")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavechain",
                                 description="Travelling-wave analysis of heterogeneous agent chains.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    _add_common(sub.add_parser("run", help="simulate, decompose and analyze a scenario"))
    _add_common(sub.add_parser("analyze", help="frequency-domain analysis only"))
    _add_common(sub.add_parser("check-stability", help="WTF stability test of every open loop"))
    p = sub.add_parser("presets", help="list presets or print one as YAML")
    p.add_argument("name", nargs="?", choices=preset_names())
    return ap


def _summary(report) -> str:
    lines = []
    for label, r in report.runs.items():
        parts = [f"{label}: N={r['n_agents']}", "boundaries=" + (",".join(r["boundaries"]) or "-")]
        st = r.get("settling_time_s")
        if st:
            parts.append(f"settle_{st['agent']}={st['value']}")
        if "plateau" in r:
            parts.append(f"plateau={r['plateau']['mean']:.4f} (pred {r['plateau']['predicted']:.4f})")
        lines.append("  ".join(parts))
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "presets":
        if args.name:
            sys.stdout.write(preset_yaml(args.name))
        else:
            for n in preset_names():
                print(f"{n:6s} {describe(n)}")
        return EXIT_OK
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if args.cmd == "check-stability":
        from .runner import _stability
        verdicts = {}
        for run in cfg.runs:
            verdicts[run.label] = _stability(run.chain)
        json.dump(verdicts, sys.stdout, indent=2, sort_keys=True)
        print()
        ok = all(v["verdict"] for r in verdicts.values() for v in r.values())
        return EXIT_UNSTABLE if args.strict and not ok else EXIT_OK

    from .runner import run_scenario
    try:
        report = run_scenario(cfg, args.out, simulate_runs=args.cmd == "run")
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    print(_summary(report))
    if args.strict and not report.stability_ok():
        print("error: WTF stability check failed", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
