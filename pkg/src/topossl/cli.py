"""Command-line entry point.

Subcommands: stats, extract, mine, train, sweep, report. Every flag
mirrors a config-file key; a --config file is read first and explicit
flags override it. Exit codes: 0 ok, 2 config error, 3 data error, 4
numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline, reporting
from .errors import ToposslError

log = logging.getLogger("topossl")

_STAGES = ("stats", "extract", "mine", "train", "sweep", "report")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="flat key-value config file")
    for key in pipeline.RunConfig.key_names():
        flag = "--" + key.replace("_", "-")
        if key in ("lcc", "reproducible", "dump_diagrams", "weight_pairs_by_distance"):
            group = p.add_mutually_exclusive_group()
            group.add_argument(flag, dest=key, action="store_const", const="true")
            group.add_argument("--no-" + key.replace("_", "-"), dest=key,
                               action="store_const", const="false")
        else:
            p.add_argument(flag, dest=key, metavar="V")


def _effective_config(args: argparse.Namespace) -> pipeline.RunConfig:
    cfg = pipeline.read_config(args.config) if args.config else pipeline.RunConfig()
    overrides = {}
    for key in pipeline.RunConfig.key_names():
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return cfg.apply_overrides(overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topossl",
        description="Persistence-image positive pairs and joint GCN training")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    descriptions = {
        "stats": "dataset statistics: homophily and the neighborhood-bias report",
        "extract": "ego nets -> filtrations -> diagrams -> persistence images",
        "mine": "mine distant structurally equivalent positive pairs",
        "train": "joint GCN + contrastive training (lambda 0 is the baseline)",
        "sweep": "grid over one axis (delta, lambda, resolution, filtration)",
        "report": "render figures and a summary table from run artifacts",
    }
    for name in _STAGES:
        p = sub.add_parser(name, help=descriptions[name])
        _add_config_flags(p)
        if name == "train":
            p.add_argument("--baseline", action="store_true",
                           help="force lambda 0 and skip the pairs file")
        if name == "sweep":
            p.add_argument("--axis", required=True,
                           choices=sorted(pipeline.SWEEP_AXES))
            p.add_argument("--values",
                           help="comma-separated values; default is the standard grid")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr)
    try:
        cfg = _effective_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        pipeline.write_config(out / "run.cfg", cfg)
        if args.command == "stats":
            path = pipeline.run_stats(cfg)
            sys.stdout.write((out / "stats_table.txt").read_text(encoding="utf-8"))
            log.info("stats -> %s", path)
        elif args.command == "extract":
            pipeline.run_extract(cfg)
        elif args.command == "mine":
            pipeline.run_mine(cfg)
        elif args.command == "train":
            res = pipeline.run_train(cfg, baseline=getattr(args, "baseline", False))
            met = res["metrics"]
            sys.stdout.write(
                f"train_acc {met.train_acc:.4f}\nval_acc {met.val_acc:.4f}\n"
                f"test_acc {met.test_acc:.4f}\nbest_epoch {met.best_epoch}\n")
        elif args.command == "sweep":
            values = None
            if args.values:
                values = [v.strip() for v in args.values.split(",") if v.strip()]
                if args.axis in ("delta",):
                    values = [int(v) for v in values]
                elif args.axis in ("lambda", "resolution"):
                    values = [float(v) for v in values]
            table = pipeline.run_sweep(cfg, args.axis, values)
            sys.stdout.write(Path(str(table).replace(".tsv", "_grid.txt"))
                             .read_text(encoding="utf-8"))
        elif args.command == "report":
            summary = reporting.render_report(cfg.out)
            sys.stdout.write(f"report -> {summary}\n")
    except ToposslError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        log.error("%s", exc)
        return 3
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
