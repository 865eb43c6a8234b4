#!/usr/bin/env python3
"""
Command-line front end for rsperturb

    python cli.py solve  --config run.json [--out DIR] [--quiet]
    python cli.py sweep  --config run.json [--out DIR] [--quiet]
    python cli.py oracle --config run.json [--out DIR] [--quiet]

Exit codes: 0 success, 1 bad input or configuration, 2 solver refusal
(degenerate state, ill-conditioned hierarchy, noisy finite differences,
ambiguous state tracking).
"""

from typing import List, Optional
import argparse
import logging
import sys

from dotenv import load_dotenv
from pydantic import ValidationError

from rsperturb.config import RunConfig, resolve_log_level, resolve_output_dir
from rsperturb.server import EXIT_INPUT, PerturbationServer


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsperturb",
        description="Rayleigh-Schrodinger perturbation series with independent oracles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("solve", "series, partial sums and quality report"),
            ("sweep", "policy x lambda comparison table"),
            ("oracle", "direct energies and finite-difference coefficients")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="run configuration (JSON)")
        cmd.add_argument("--out", default=None,
                         help="output directory (default: output.directory, $RSPT_OUT_DIR, ./out)")
        cmd.add_argument("--quiet", action="store_true", help="log warnings and errors only")
    return parser


def configure_logging(quiet: bool):
    level = getattr(logging, resolve_log_level(quiet), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code"""
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.quiet)

    server = PerturbationServer()
    if not args.quiet:
        print(f"rsperturb {server.version} - {args.command}", file=sys.stderr)

    try:
        with open(args.config, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        print(f"Cannot read config {args.config}: {e}", file=sys.stderr)
        return EXIT_INPUT

    try:
        out_dir = resolve_output_dir(args.out, RunConfig.from_json(text))
    except (ValidationError, ValueError):
        # handle_request reports the invalid document
        out_dir = resolve_output_dir(args.out, RunConfig())

    result = server.handle_request(args.command, {"config": text, "out_dir": out_dir})
    code = result.get("exit_code", EXIT_INPUT)
    if not result.get("success", False) and "error" in result:
        print(f"{result['error_type']}: {result['error']}", file=sys.stderr)
    elif args.command == "sweep" and result.get("failed"):
        print(f"{result['failed']} of {result['total_rows']} rows failed", file=sys.stderr)
    if not args.quiet:
        for path in result.get("files", []):
            print(f"  wrote {path}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
