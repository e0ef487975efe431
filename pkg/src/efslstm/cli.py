"""Command-line entry point: ``efslstm run | compare | multi-seed | inspect``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields

from .config import RunConfig, load_config
from .errors import EfsError, StageError, UsageError


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    group = p.add_argument_group("config overrides")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        group.add_argument(flag, dest=f.name, default=None, metavar=f.type.upper(),
                           help=f"override '{f.name}' (default {f.default!r})")
    p.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")


def _overrides(args) -> dict:
    return {f.name: getattr(args, f.name) for f in fields(RunConfig)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efslstm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline once")
    _add_config_flags(run)

    ms = sub.add_parser("multi-seed", help="run the pipeline for several seeds and aggregate")
    _add_config_flags(ms)
    ms.add_argument("--seeds", required=True,
                    help="comma-separated seeds, or a range like 0:10")

    cmp_ = sub.add_parser("compare", help="pairwise Diebold-Mariano tests between runs")
    cmp_.add_argument("run_dirs", nargs="+")
    cmp_.add_argument("--alpha", type=float, default=0.05)
    cmp_.add_argument("--output", help="directory for compare_dm.csv / compare_ranking.csv")

    ins = sub.add_parser("inspect", help="pretty-print a run manifest")
    ins.add_argument("path", help="run directory or run_manifest.json")
    return parser


def parse_seeds(text: str) -> list[int]:
    text = text.strip()
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            return list(range(int(a), int(b)))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse seeds {text!r}") from exc


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    # late import keeps `--help` fast (numba compilation happens on first use)
    from . import pipeline

    try:
        if args.command == "run":
            cfg = load_config(args.config, _overrides(args))
            report = pipeline.run_pipeline(cfg, overwrite=args.overwrite)
            m = report["metrics"]
            print(f"wrote {report['output']}")
            print(f"test mean RMSE {m['test']['mean_rmse']:.6f}  train mean RMSE "
                  f"{m['train']['mean_rmse']:.6f}  overfitting ratio {m['overfitting_ratio']:.5f}")
        elif args.command == "multi-seed":
            cfg = load_config(args.config, _overrides(args))
            doc = pipeline.multi_seed(cfg, parse_seeds(args.seeds), overwrite=args.overwrite)
            print(json.dumps(doc["summary"], indent=2))
        elif args.command == "compare":
            res = pipeline.compare_runs(args.run_dirs, args.alpha, args.output)
            print(pipeline.format_ranking(res["ranking"]))
        elif args.command == "inspect":
            print(pipeline.inspect_run(args.path))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.cause, UsageError) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EfsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
