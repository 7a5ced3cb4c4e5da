"""Command-line entry point: simulate, sweep, diagnose, overhead.

Every subcommand writes CSV to ``--out`` (stdout by default). Configuration
is a JSON object of ExperimentConfig fields, optionally overridden with
``--set key=value``. On a configuration error the process prints a single
JSON line ``{"error": ..., "message": ...}`` to stderr and exits with 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .solver_consensus import ConfigError


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, sets=(), preset=None, seed=None, trials=None):
    base = harness.DESK if preset == "desk" else harness.ExperimentConfig()
    d = base.to_dict()
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        d.update(user.get("experiment", user) if "sweep" in user else user)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        d[k.strip()] = _parse_value(v.strip())
    if seed is not None:
        d["seed"] = seed
    if trials is not None:
        d["trials"] = trials
    try:
        cfg = harness.ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def _sweep_spec(args):
    spec = None
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        if isinstance(raw, dict) and "sweep" in raw:
            spec = harness.SweepSpec.from_dict(raw["sweep"])
    if args.param:
        spec = harness.SweepSpec(args.param, [_parse_value(v) for v in args.values or []])
    if spec is None:
        raise ConfigError("sweep needs --param/--values or a 'sweep' block in the config")
    return spec.validate()


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def build_parser():
    p = argparse.ArgumentParser(prog="cfdetect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with ExperimentConfig fields")
        sp.add_argument("--preset", choices=["default", "desk"], default="default")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--out", help="output CSV path (default stdout)")

    common(sub.add_parser("simulate", help="run Monte-Carlo trials, one CSV row each"))
    sw = sub.add_parser("sweep", help="run trials over a list of parameter values")
    common(sw)
    sw.add_argument("--param")
    sw.add_argument("--values", nargs="*")
    dg = sub.add_parser("diagnose", help="pairwise similarity diagnostics of one deployment")
    common(dg)
    dg.add_argument("--trial", type=int, default=0)
    ov = sub.add_parser("overhead", help="fronthaul bit counts")
    common(ov)
    ov.add_argument("--iterations", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.preset, args.seed, args.trials)
        if args.command == "simulate":
            text = harness.to_csv(harness.run_trials(cfg), harness.ROW_FIELDS)
        elif args.command == "sweep":
            spec = _sweep_spec(args)
            text = harness.to_csv(harness.run_sweep(spec, cfg), harness.sweep_fields(spec))
        elif args.command == "diagnose":
            text = harness.to_csv(harness.diagnose(cfg, args.trial), harness.DIAG_FIELDS)
        else:
            text = harness.to_csv(harness.overhead(cfg, args.iterations), harness.OVERHEAD_FIELDS)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    _write(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
