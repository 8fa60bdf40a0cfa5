"""Command-line entry point: ``radreact run``, ``radreact list-presets``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from radreact.config import load_config
from radreact.errors import ConfigError, RadReactError
from radreact.scenarios import EXIT_ERROR, PRESETS, preset_section, run_section


def list_presets() -> str:
    width = max(len(name) for name in PRESETS)
    lines = [f"{name:<{width}}  [{cfg['kind']}]  {cfg['description']}" for name, cfg in PRESETS.items()]
    return "\n".join(lines)


def run(config_path=None, *, preset=None, out=None, tolerance=None, seed=None, stream=None) -> int:
    """Run one scenario and return its exit code."""
    stream = sys.stdout if stream is None else stream
    if preset is not None:
        root = preset_section(preset)
        out_dir = Path(out) if out else Path("runs") / preset
    else:
        root = load_config(config_path)
        target = root.section("output")
        default = Path("runs") / Path(config_path).stem
        if target:
            default = Path(target.get("dir", str(default), str))
            target.check_unknown()
        out_dir = Path(out) if out else default
    summary, code = run_section(root, out_dir, tolerance=tolerance, seed=seed, preset=preset)
    verdict = summary.get("verdict")
    print(f"scenario: {summary['kind']}  output: {out_dir}", file=stream)
    for name, audit in summary.get("audits", {}).items():
        flag = "pass" if audit["pass"] else "FAIL"
        print(f"  {flag}  {name}: {audit['value']:.3e} (threshold {audit['threshold']:.1e})", file=stream)
    if verdict:
        print(f"  verdict: {json.dumps(verdict)}", file=stream)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radreact", description="Radiation-reaction and balance-law scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario from a YAML file or a preset")
    p_run.add_argument("config", nargs="?", help="scenario YAML file")
    p_run.add_argument("--preset", help="name of a gallery preset")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--tolerance", type=float, help="relative integrator tolerance (overrides the scenario)")
    p_run.add_argument("--seed", type=int, help="seed for randomised scenarios")
    sub.add_parser("list-presets", help="print the scenario gallery")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-presets":
        print(list_presets())
        return 0
    if (args.config is None) == (args.preset is None):
        parser.error("run needs exactly one of a config file or --preset")
    if args.tolerance is not None and not args.tolerance > 0:
        parser.error("--tolerance must be positive")
    try:
        return run(args.config, preset=args.preset, out=args.out, tolerance=args.tolerance, seed=args.seed)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RadReactError, ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
