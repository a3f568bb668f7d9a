"""Command-line front end.

    sawmbir simulate     --config run.ini
    sawmbir mask         --config run.ini
    sawmbir reconstruct  --config run.ini --mode saw
    sawmbir compare      --config run.ini A.sawv B.sawv [--reference truth.sawv]
    sawmbir paper-demo   --config run.ini

Any ``--section.key=value`` argument overrides one config entry.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiment
from .config import ConfigError, load_config, parse_override
from .io import FormatError
from .projector import set_threads
from .recon import ReconError

log = logging.getLogger("sawmbir")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="run config (INI)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $SAW_RECON_THREADS or all cores)")
    common.add_argument("--output", type=Path, default=None, help="output directory override")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sawmbir", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate sinogram and ground truth")
    sub.add_parser("mask", parents=[common], help="write the half-scan mask")
    rp = sub.add_parser("reconstruct", parents=[common], help="run full, half or SAW MBIR")
    rp.add_argument("--mode", required=True, choices=sorted(experiment.MODES))
    rp.add_argument("--sinogram", type=Path, default=None)
    cp = sub.add_parser("compare", parents=[common], help="per-slice RMSE between two volumes")
    cp.add_argument("volume_a", type=Path)
    cp.add_argument("volume_b", type=Path)
    cp.add_argument("--reference", type=Path, default=None,
                    help="exclusion reference (default: volume_a)")
    cp.add_argument("--csv", type=Path, default=None)
    sub.add_parser("paper-demo", parents=[common], help="simulate + 3 reconstructions + comparisons")
    return p


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("SAW_RECON_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SAW_RECON_THREADS: not an integer: {env!r}") from None
    return None


def run(argv: list[str] | None = None) -> int:
    args, extra = _parser().parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = [parse_override(a) for a in extra]
        if args.output is not None:
            overrides.append(("output", "directory", str(args.output)))
        cfg = load_config(args.config).with_overrides(overrides).validate()
        set_threads(_threads(args.threads))

        if args.command == "simulate":
            paths = experiment.simulate(cfg)
        elif args.command == "mask":
            paths = experiment.make_mask(cfg)
        elif args.command == "reconstruct":
            paths, _, report = experiment.reconstruct_mode(cfg, args.mode, args.sinogram)
            log.info("%s: %d iterations, final cost %.6g", args.mode, report.iterations,
                     report.costs[-1])
        elif args.command == "compare":
            out = cfg.output_dir
            out.mkdir(parents=True, exist_ok=True)
            csv_path = args.csv or out / f"rmse_{args.volume_a.stem}_vs_{args.volume_b.stem}.csv"
            summary = experiment.compare_files(args.volume_a, args.volume_b, args.reference, csv_path)
            print(experiment.format_summary(f"{args.volume_a.stem} vs {args.volume_b.stem}", summary))
            paths = {"profile": csv_path}
        else:
            summary = experiment.paper_demo(cfg)
            for name, s in summary["comparisons"].items():
                print(experiment.format_summary(name, s))
            print(json.dumps({k: v for k, v in summary.get("insert", {}).items() if k != "roi"},
                             indent=1))
            paths = {"summary": cfg.output_dir / "summary.json"}
    except (ConfigError, FormatError, FileNotFoundError, ValueError, ReconError) as exc:
        print(f"sawmbir {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for name, path in paths.items():
        log.info("wrote %s: %s", name, path)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
