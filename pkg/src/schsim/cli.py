"""Command-line front end.

Exit codes form part of the interface:

* 0 -- success,
* 2 -- configuration or usage problems (also used by argparse),
* 3 -- the dynamics blew up (or every ensemble path did),
* 4 -- a verification failed: checksum drift, rejected or violated
  moment bound, or broken twin determinism.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .ensemble import (
    run_commutators,
    run_converge,
    run_ensemble,
    run_gronwall,
    run_simulate,
    run_uniqueness,
)
from .runio import ChecksumMismatchError, ManifestError, verify_manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_CHECK = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schsim",
        description="Spectral simulator for viscous stochastic transport "
        "dynamics on the circle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_command(name: str, help_text: str):
        q = sub.add_parser(name, help=help_text)
        q.add_argument("--config", required=True, help="JSON config file")
        q.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="override a config entry (JSON value or bare string)",
        )
        return q

    add_config_command("simulate", "integrate a single driving path")
    add_config_command("ensemble", "Monte Carlo over many driving paths")
    conv = add_config_command("converge", "coupled-path convergence sweep")
    conv.add_argument("--axis", required=True, choices=("n", "dt", "delta"))
    add_config_command("uniqueness", "twin, perturbation and refinement checks")
    add_config_command("commutators", "mollifier commutator decay sweep")
    add_config_command("gronwall", "audit the stochastic Gronwall bound")

    ver = sub.add_parser("verify-manifest", help="re-hash a run directory")
    ver.add_argument("run_dir")
    return parser


def _finish(out: dict) -> int:
    status = out.get("status", "completed")
    print(f"status: {status}")
    print(f"run dir: {out['run_dir']}")
    if status == "blowup":
        print(f"blow-up at t = {out['blowup_time']:.6g}", file=sys.stderr)
        return EXIT_BLOWUP
    if status == "all_failed":
        print("every path blew up", file=sys.stderr)
        return EXIT_BLOWUP
    if status == "partial":
        failed = out.get("paths_failed", [])
        print(
            f"warning: {len(failed)} of {out['n_paths']} paths blew up; "
            "statistics cover the survivors",
            file=sys.stderr,
        )
    if status in ("rejected", "violated"):
        print(out.get("reason", "moment bound does not hold"), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "verify-manifest":
        try:
            manifest = verify_manifest(args.run_dir)
        except ChecksumMismatchError as exc:
            print(f"verification failed: {exc}", file=sys.stderr)
            return EXIT_CHECK
        except ManifestError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(
            f"ok: {len(manifest['files'])} files match "
            f"({manifest['command']} run)"
        )
        return EXIT_OK

    try:
        cfg = load_config(args.config, args.overrides)
        if args.command == "simulate":
            out = run_simulate(cfg)
            if out["status"] == "completed":
                print(f"final H1 energy: {out['final_h1_sq']:.12g}")
            return _finish(out)
        if args.command == "ensemble":
            out = run_ensemble(cfg)
            for name, est in sorted(out["stats"].items()):
                print(
                    f"{name}: {est.mean:.12g} +/- {est.stderr:.3g} "
                    f"(n = {est.n_samples})"
                )
            return _finish(out)
        if args.command == "converge":
            out = run_converge(cfg, args.axis)
            for key, rate in sorted(out.get("fitted_rates", {}).items()):
                print(f"fitted rate [{key}]: {rate:.6g}")
            for key, rate in sorted(out.get("rates", {}).items()):
                print(f"fitted rate [{key}]: {rate:.6g}")
            return _finish(out)
        if args.command == "uniqueness":
            out = run_uniqueness(cfg)
            code = _finish(out)
            if not out["twin_bitwise"]:
                print("twin runs are not bitwise identical", file=sys.stderr)
                return EXIT_CHECK
            return code
        if args.command == "commutators":
            out = run_commutators(cfg)
            for key, rate in sorted(out["rates"].items()):
                print(f"decay rate [{key}]: {rate:.6g}")
            return _finish(out)
        if args.command == "gronwall":
            out = run_gronwall(cfg)
            if out["report"] is not None:
                rep = out["report"]
                print(
                    f"lhs {rep.lhs:.9g} <= rhs {rep.rhs:.9g} "
                    f"(margin {rep.margin:.9g})"
                )
            return _finish(out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
