"""Command-line interface for running experiments from JSON configurations.

Usage::

    twoport <experiment> --config <path> [--seed S] [--out DIR]
                         [--trials T] [--workers W] [--quiet]

The subcommand must match the ``experiment`` field of the configuration
file. Flags override the corresponding file values. Exit codes:

- 0: success, artifacts written
- 2: configuration error (unreadable file, invalid JSON, bad field,
  experiment mismatch)
- 3: singular or numerically unusable configuration (singular tuning locus,
  ill-conditioned information matrix)
- 4: Monte Carlo validity failure (artifacts are still written first)
- 5: artifact I/O failure

All failures print a single machine-parsable line ``<kind>: <detail>`` to
stderr.
"""

from __future__ import annotations

import argparse
import sys

from .exceptions import (ArtifactError, ConfigError,
                         IllConditionedFisherError, SingularCoefficientError)
from .experiments import (EXPERIMENTS, apply_overrides, emit_artifacts,
                          load_config, run_experiment)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_VALIDITY = 4
EXIT_IO = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoport",
        description="Two-port homodyne sensing experiments: Fisher "
                    "information scans and Monte Carlo estimator campaigns.")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="{" + ",".join(EXPERIMENTS) + "}")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True,
                       help="path to a JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configuration's master seed")
        p.add_argument("--out", default=None,
                       help="override the configuration's output directory")
        p.add_argument("--trials", type=int, default=None,
                       help="override the Monte Carlo trial count")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for Monte Carlo trials "
                            "(default 1; results are identical at any value)")
        p.add_argument("--quiet", action="store_true",
                       help="suppress the success summary on stdout")
    return parser


def _fail(kind: str, detail: str) -> None:
    message = " ".join(str(detail).split())
    print(f"{kind}: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        _fail("config-error", "--workers must be >= 1")
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
        if config.experiment != args.experiment:
            raise ConfigError(
                f"configuration is for {config.experiment!r} but the "
                f"{args.experiment!r} subcommand was invoked")
        config = apply_overrides(config, seed=args.seed, out=args.out,
                                 trials=args.trials)
    except ConfigError as exc:
        _fail("config-error", str(exc))
        return EXIT_CONFIG

    try:
        table = run_experiment(config, workers=args.workers)
    except ConfigError as exc:
        _fail("config-error", str(exc))
        return EXIT_CONFIG
    except (SingularCoefficientError, IllConditionedFisherError) as exc:
        _fail("singular-configuration", str(exc))
        return EXIT_SINGULAR

    try:
        csv_path, svg_path = emit_artifacts(table, config.output_dir)
    except ArtifactError as exc:
        _fail("io-error", str(exc))
        return EXIT_IO

    if "invalid" in table.column_names:
        flagged = sum(1 for v in table.column("invalid") if v != 0.0)
        if flagged:
            _fail("validity-failure",
                  f"{flagged} of {len(table.rows)} Monte Carlo rows failed "
                  f"validity checks; artifacts written to {csv_path}")
            return EXIT_VALIDITY

    if not args.quiet:
        print(f"wrote {csv_path}")
        print(f"wrote {svg_path}")
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
