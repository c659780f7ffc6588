"""Command-line figure generation: one subcommand per figure kind.

Exit codes: 0 on success, 2 on usage errors or when the input does not
match the documented CSV schema.
"""

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render

EXIT_OK = 0
EXIT_SCHEMA = 2

_HELP = {
    "energy": "H^1 energy balance over time, with MC bands when present",
    "order_fit": "log-log strong-error fit per scheme from a convergence table",
    "commutator_decay": "mollifier commutator norms against delta",
    "slope_trace": "minimum spatial slope (steepening indicator) over time",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Batch figures from solver run directories (CSV only).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in FIGURE_KINDS:
        cmd = sub.add_parser(kind.replace("_", "-"), help=_HELP[kind])
        cmd.add_argument("--input", required=True,
                         help="run directory or CSV file")
        cmd.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = args.command.replace("-", "_")
    try:
        result = render(FigureSpec(kind, args.input, args.out))
    except (SchemaError, ValueError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"wrote {result.output_path}")
    for name in sorted(result.slopes):
        print(f"slope {name} = {result.slopes[name]:.17g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
