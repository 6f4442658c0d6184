"""Command line front end: ``navfilter simulate|replay|validate --config FILE``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .checks import all_checks
from .config import BACKENDS, RunConfig, load_config
from .errors import NavFilterError
from .euroc import export_dataset
from .harness import run, write_outputs, write_rows

log = logging.getLogger("navfilter")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navfilter", description=__doc__)
    parser.add_argument("mode", choices=("simulate", "replay", "validate"))
    parser.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--backend", choices=BACKENDS, default=None, help="attitude representation")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("NAVFILTER_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    kw = {"mode": args.mode}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.backend is not None:
        kw["backend"] = args.backend
    if args.out is not None:
        kw["out_dir"] = str(args.out)
    return replace(config, **kw)


def _validate(config: RunConfig, out: Path) -> int:
    v = config.validate
    results = all_checks(v.lemma_pairs, v.seeds, v.mutation)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "report.csv", ("property", "passed", "detail"), ((r.name, r.passed, r.detail) for r in results))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging()
    try:
        config = _apply_overrides(load_config(args.config), args)
        out = Path(config.out_dir)
        if config.mode == "validate":
            return _validate(config, out)
        result = run(config)
        paths = write_outputs(result, out)
        if config.mode == "simulate" and config.simulate.export:
            export_dataset(result.dataset, out)
    except NavFilterError as exc:
        log.error("%s failed: %s", args.mode, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    metrics = result.metrics
    for name, value in zip(metrics.NAMES, metrics.final()):
        print(f"{name} final {value:.6g}")
    print(f"outputs: {', '.join(str(p) for p in paths.values())}")
    for breach in metrics.breaches:
        print(f"breach: {breach}", file=sys.stderr)
    return 1 if metrics.breaches else 0


if __name__ == "__main__":
    sys.exit(main())
