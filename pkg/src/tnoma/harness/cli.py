"""Command line: ``tnoma run | preset | compare``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

import argparse
import json
import os
import sys
import warnings

from . import compare as cmp
from .config import FIELD_TYPES, ConfigError, build_config, config_to_kv_text, parse_kv_text
from .presets import describe, preset, preset_names
from .runner import MANIFEST_FILE, load_manifest_config, run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _add_field_flags(p):
    g = p.add_argument_group("config fields (override file and preset values)")
    for name in FIELD_TYPES:
        g.add_argument(f"--{name.replace('_', '-')}", dest=f"field_{name}", metavar="VALUE")


def _overrides(args):
    return {k[6:]: v for k, v in vars(args).items() if k.startswith("field_") and v is not None}


def _base_from_file(path):
    if path.endswith(".json") or os.path.basename(path) == MANIFEST_FILE:
        return load_manifest_config(path)
    with open(path) as f:
        return build_config(None, parse_kv_text(f.read()))


def build_parser():
    ap = argparse.ArgumentParser(prog="tnoma", description="T-NOMA experiment harness")
    sub = ap.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run an experiment")
    pr.add_argument("--config", help="key = value file or a run manifest.json")
    pr.add_argument("--quiet", action="store_true")
    _add_field_flags(pr)

    pp = sub.add_parser("preset", help="print or run a named preset")
    pp.add_argument("name", nargs="?", help=f"one of {', '.join(preset_names())}")
    pp.add_argument("--scale", default="desk", choices=("desk", "full"))
    pp.add_argument("--run", action="store_true", help="execute instead of printing")
    pp.add_argument("--list", action="store_true", help="list presets")
    pp.add_argument("--quiet", action="store_true")
    _add_field_flags(pp)

    pc = sub.add_parser("compare", help="gains at matched BER between result files")
    pc.add_argument("results", nargs="+", help="results.csv files")
    pc.add_argument("--metric", default="ber")
    pc.add_argument("--user", default="avg", help="user id, 'avg' or 'any'")
    pc.add_argument("--scenario", help="only curves of this scenario")
    pc.add_argument("--target-ber", type=float, default=2e-3)
    pc.add_argument("--plot", help="write an SVG plot to this path")
    return ap


def _log(args):
    return None if getattr(args, "quiet", False) else (lambda m: print(m, file=sys.stderr))


def _do_run(cfg, args):
    out = run(cfg, log=_log(args))
    print(os.path.join(out, "results.csv"))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            base = _base_from_file(args.config) if args.config else None
            cfg = build_config(base, _overrides(args))
        elif args.command == "preset":
            if args.list or not args.name:
                for n in preset_names():
                    print(f"{n:<6} {describe(n)}")
                return EXIT_OK
            cfg = build_config(preset(args.name, args.scale), _overrides(args))
            if not args.run:
                sys.stdout.write(config_to_kv_text(cfg))
                return EXIT_OK
        else:
            cfg = None
    except (ConfigError, KeyError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "compare":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                user = None if args.user == "any" else args.user
                curves = cmp.load_curves(args.results, args.metric, user, args.scenario)
                print(cmp.summary(curves, args.target_ber))
                if args.plot:
                    cmp.plot(curves, args.plot)
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
        else:
            _do_run(cfg, args)
    except Exception as e:  # noqa: BLE001 - reported through the exit code
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
