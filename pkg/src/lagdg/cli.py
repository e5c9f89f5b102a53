"""Command line entry point: ``lagdg run <config>`` and ``lagdg verify <suite>``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import load_config, validate
from .io import ensure_dir, write_json
from .runner import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, apply_overrides, run


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagdg", description="Lagrangian DG hydrodynamics runs and acceptance checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each step")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", help="output directory (verify writes verify.json there)")
    common.add_argument("--seed", type=_non_negative_int, help="random seed")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one configuration file")
    p_run.add_argument("config", help="path to a configuration file")
    p_run.add_argument("--max-steps", type=_positive_int, help="stop after this many steps")
    p_ver = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    p_ver.add_argument("suite", help="suite name, e.g. quick, all, or a single criterion name")
    return parser


def cmd_run(args) -> int:
    try:
        cfg = apply_overrides(load_config(args.config), args.output_dir, args.seed, args.max_steps)
        validate(cfg)
    except ValueError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.literal_beta_warning:
        print("warning: literal beta scaling does not conserve element averages", file=sys.stderr)
    try:
        report = run(cfg)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    m = report.metrics
    if m:
        print(f"{cfg.problem}: t = {m['time']:.6g} after {m['steps']} steps, "
              f"max volume gap {m['max_gcl']:.2e}, energy drift {m['energy_drift']:.2e}")
        for key in ("shock_radius", "peak_density", "plateau_density"):
            if key in m:
                print(f"  {key} = {m[key]:.4f}")
        if "taylor_green_error" in m:
            e = m["taylor_green_error"]
            print(f"  L2 error nu = {e['l2_nu']:.4e}, velocity = {e['l2_vel']:.4e}")
        print(f"  summary written to {cfg.output_dir}/summary.json")
    if report.status != EXIT_OK:
        print(f"error: {report.message}", file=sys.stderr)
    return report.status


def cmd_verify(args) -> int:
    from . import acceptance

    if args.suite not in acceptance.SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(acceptance.SUITES))}", file=sys.stderr)
        return EXIT_CONFIG
    results = acceptance.verify(args.suite, seed=args.seed or 0, report=lambda line: print(line, flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if args.output_dir:
        out = ensure_dir(args.output_dir) / "verify.json"
        write_json(out, {"suite": args.suite, "seed": args.seed or 0,
                         "results": [dataclasses.asdict(r) for r in results]})
    return EXIT_INVARIANT if failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args)
    return cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
