"""Command-line entry point: ``segrank <subcommand> [flags]``.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .exceptions import SegRankError

log = logging.getLogger("segrank")

# flag -> RunConfig field
_FLAG_FIELDS = {
    "gt": "gt_dir",
    "pred": "pred_root",
    "manifest": "manifest_path",
    "scheme": "label_scheme",
    "out": "output_dir",
    "seed": "seed",
    "bootstrap": "bootstrap_b",
    "alpha": "alpha",
    "hd_q": "hd_percentile",
    "hd_column": "hd_column",
    "units": "units",
    "jobs": "parallelism",
    "rank_scheme": "rank_scheme",
    "subset": "subsets",
    "tie_eps": "tie_eps",
    "holm_family": "holm_family",
    "ratings": "ratings_path",
    "weights": "agreement_weights",
}


class _Parser(argparse.ArgumentParser):
    # bad flags are input errors, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override its values")
    common.add_argument("--gt", help="directory of reference label maps (<case_id>.nii[.gz])")
    common.add_argument("--pred", help="directory with one sub-directory of predictions per team")
    common.add_argument("--manifest", help="case metadata (CSV or JSON)")
    common.add_argument("--scheme", help="label scheme JSON (default: 8-class fetal brain codes 0-7)")
    common.add_argument("--out", help="output directory (default: segrank_out)")
    common.add_argument("--metrics", dest="metrics_csv", help="metrics CSV to read (default: <out>/metrics.csv)")
    common.add_argument("--seed", type=int)
    common.add_argument("--bootstrap", type=int, help="bootstrap sample count (default 1000)")
    common.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    common.add_argument("--hd-q", type=float, help="Hausdorff percentile (default 95)")
    common.add_argument("--hd-column", choices=("hd95", "hd"), help="distance column ranked as HD95")
    common.add_argument("--pooled-hd", action="store_true", default=None, help="percentile over both directions pooled")
    common.add_argument("--units", choices=("voxels", "mm"))
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("--rank-scheme", choices=pipeline.scheme_names())
    common.add_argument("--tie-eps", type=float, help="aggregates closer than this share a rank (default 0)")
    common.add_argument("--holm-family", choices=("row", "pooled"))
    common.add_argument("--subset", action="append", help="named subset to rank (repeatable; default all)")
    common.add_argument("--sweep", action="store_true", default=None, help="also rank under every ranking scheme")
    common.add_argument("--svg", action="store_true", default=None, help="also render simple SVG plots")
    common.add_argument("--ratings", help="quality ratings CSV (case column + one column per rater)")
    common.add_argument("--weights", choices=("ordinal", "identity", "linear"), help="agreement weights")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="segrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("evaluate", "score every team's predictions against the references"),
        ("rank", "per-metric, combined, per-label and per-subset rankings"),
        ("stats", "significance maps and bootstrap ranking stability"),
        ("agreement", "Gwet agreement of quality ratings plus median rating per case"),
        ("icv", "intracranial volume differences"),
        ("report", "plot data, optional SVGs and a checksummed file index"),
        ("all", "evaluate, rank, stats, icv and report in sequence"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def config_from_args(args: argparse.Namespace) -> pipeline.RunConfig:
    overrides = {field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()}
    overrides["pooled_hd"] = args.pooled_hd
    overrides["sweep"] = args.sweep
    overrides["svg"] = args.svg
    if args.config:
        return pipeline.RunConfig.from_file(args.config, **overrides)
    return pipeline.RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    cmd = args.command
    status = 0
    if cmd in ("evaluate", "all"):
        path, errors = pipeline.run_evaluate(config)
        print(f"wrote {path}")
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        if errors:
            status = 1
            if cmd == "evaluate":
                return status
    if cmd in ("rank", "all"):
        for p in pipeline.run_rank(config, args.metrics_csv):
            print(f"wrote {p}")
    if cmd in ("stats", "all"):
        for p in pipeline.run_stats(config, args.metrics_csv):
            print(f"wrote {p}")
    if cmd == "agreement" or (cmd == "all" and config.ratings_path):
        for p in pipeline.run_agreement(config):
            print(f"wrote {p}")
    if cmd in ("icv", "all"):
        for p in pipeline.run_icv(config):
            print(f"wrote {p}")
    if cmd in ("report", "all"):
        for p in pipeline.run_report(config, args.metrics_csv):
            print(f"wrote {p}")
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return run(args)
    except (SegRankError, OSError, ValueError) as exc:
        print(f"segrank: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
