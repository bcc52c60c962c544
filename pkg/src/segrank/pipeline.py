"""Batch orchestration behind the command-line subcommands.

Every ``run_*`` function reads its inputs from a :class:`RunConfig`, writes
into ``config.output_dir`` and returns the paths it wrote.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _validation as val
from . import report
from .cohort import load_manifest, standard_subsets
from .estimators import ChallengeRanker, RankingStability
from .exceptions import GridMismatch, MissingInput, SchemaError, SegRankError
from .metrics import evaluate_case, icv_percent_difference, intracranial_volume
from .ranking import ALL_SCHEMES, RankScheme, per_label_ranking, ranking_method_sweep, subset_ranking, write_rank_matrix
from .records import MetricTable, label_metrics_to_row, load_metric_table, write_metrics_csv
from .stats import QUALITY_LEVELS, bootstrap_ranking, gwet_ac, median_ordinal, significance_matrix
from .volume_io import DEFAULT_SCHEME, LabelScheme, LabelVolume, list_volumes, read_nifti

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    gt_dir: str | None = None
    pred_root: str | None = None
    manifest_path: str | None = None
    label_scheme: str | None = None
    metrics: tuple[str, ...] = ("DSC", "HD95", "VS")
    hd_percentile: float = 95.0
    hd_column: str = "hd95"
    pooled_hd: bool = False
    rank_scheme: str = "mean-then-rank"
    tie_eps: float = 0.0
    alpha: float = 0.05
    holm_family: str = "row"
    bootstrap_b: int = 1000
    seed: int = 0
    units: str = "voxels"
    output_dir: str = "segrank_out"
    parallelism: int = 1
    subsets: tuple[str, ...] | None = None
    sweep: bool = False
    svg: bool = False
    ratings_path: str | None = None
    agreement_weights: str = "ordinal"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        val.check_percentile(self.hd_percentile)
        val.check_alpha(self.alpha)
        val.check_positive_int(self.bootstrap_b, "bootstrap_b")
        val.check_positive_int(self.parallelism, "parallelism")
        if self.units not in ("voxels", "mm"):
            raise ValueError("units must be 'voxels' or 'mm'")
        RankScheme.parse(self.rank_scheme)
        self.metrics = tuple(self.metrics)
        if self.subsets is not None:
            self.subsets = tuple(self.subsets)

    @classmethod
    def from_file(cls, path: str | os.PathLike, **overrides) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    @property
    def scheme(self) -> LabelScheme:
        return LabelScheme.load(self.label_scheme) if self.label_scheme else DEFAULT_SCHEME

    @property
    def out(self) -> Path:
        p = Path(self.output_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p

    @property
    def metrics_csv(self) -> Path:
        return Path(self.output_dir) / "metrics.csv"


# evaluate

def _match_prediction(files: dict[str, Path], case_id: str) -> Path | None:
    if case_id in files:
        return files[case_id]
    hits = [p for stem, p in files.items() if case_id in stem]
    return hits[0] if len(hits) == 1 else None


def _evaluate_task(task):
    team, case, gt_path, pred_path, scheme, q, units, pooled = task
    gt = read_nifti(gt_path)
    if pred_path is None:
        pred = LabelVolume(np.full(gt.dims, scheme.background_code, dtype=np.uint8), gt.spacing)
    else:
        pred = read_nifti(pred_path)
    try:
        results = evaluate_case(gt, pred, scheme, q, units, pooled)
    except GridMismatch as exc:
        return team, case, None, f"{pred_path}: {exc}"
    return team, case, [label_metrics_to_row(team, case, m) for m in results], None


def discover_tasks(config: RunConfig) -> tuple[list[tuple], list[str]]:
    """(team, case, gt_path, pred_path or None) tuples plus warnings for missing files."""
    if not config.gt_dir or not config.pred_root:
        raise MissingInput("evaluation needs --gt and --pred")
    gt_dir, pred_root = Path(config.gt_dir), Path(config.pred_root)
    if not gt_dir.is_dir() or not pred_root.is_dir():
        raise MissingInput(f"missing input directory: {gt_dir if not gt_dir.is_dir() else pred_root}")
    gts = list_volumes(gt_dir)
    if config.manifest_path:
        wanted = set(load_manifest(config.manifest_path).case_ids)
        gts = {c: p for c, p in gts.items() if c in wanted}
    if not gts:
        raise MissingInput(f"no reference volumes in {gt_dir}")
    teams = sorted(p for p in pred_root.iterdir() if p.is_dir())
    if not teams:
        raise MissingInput(f"no team directories in {pred_root}")
    tasks, warnings = [], []
    for team_dir in teams:
        files = list_volumes(team_dir)
        for case, gt_path in gts.items():
            pred = _match_prediction(files, case)
            if pred is None:
                warnings.append(f"{team_dir.name}: no prediction for case {case}; scored as missing")
            tasks.append((team_dir.name, case, gt_path, pred))
    return tasks, warnings


def evaluate_tasks(tasks, scheme=DEFAULT_SCHEME, q=95.0, units="voxels", pooled=False, jobs=1):
    """Evaluate (team, case, gt_path, pred_path) tasks; rows come back sorted, errors listed."""
    payload = [(t, c, g, p, scheme, q, units, pooled) for t, c, g, p in tasks]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_task, payload, chunksize=1))
    else:
        results = [_evaluate_task(p) for p in payload]
    rows, errors = [], []
    for team, case, r, err in results:
        if err:
            errors.append(err)
        else:
            rows.extend(r)
    rows.sort(key=lambda r: (r["team"], r["case"], int(r["label_code"])))
    return rows, sorted(errors)


def run_evaluate(config: RunConfig) -> tuple[Path, list[str]]:
    tasks, warnings = discover_tasks(config)
    for w in warnings:
        log.warning(w)
    rows, errors = evaluate_tasks(
        tasks, config.scheme, config.hd_percentile, config.units, config.pooled_hd, config.parallelism
    )
    path = config.out / "metrics.csv"
    write_metrics_csv(rows, path)
    if errors:
        (config.out / "evaluate_errors.txt").write_text("\n".join(errors) + "\n", encoding="utf-8")
    return path, errors


# rank

def _load_table(config: RunConfig, metrics_csv=None) -> MetricTable:
    path = Path(metrics_csv) if metrics_csv else config.metrics_csv
    if not path.is_file():
        raise MissingInput(f"metrics file {path} not found; run 'evaluate' first")
    table = load_metric_table(path, config.hd_column)
    return table.select(metrics=config.metrics)


def _ranker(config: RunConfig) -> ChallengeRanker:
    s = RankScheme.parse(config.rank_scheme)
    return ChallengeRanker(order=s.order, aggregator=s.aggregator, tie_eps=config.tie_eps)


def run_rank(config: RunConfig, metrics_csv=None) -> list[Path]:
    table = _load_table(config, metrics_csv)
    out = config.out / "rankings"
    out.mkdir(exist_ok=True)
    ranker = _ranker(config).fit(table)
    scheme = ranker._scheme()
    written = []
    everything = {}
    for metric, rt in ranker.ranking_.per_metric.items():
        rt.write_csv(out / f"{metric}.csv")
        written.append(out / f"{metric}.csv")
        everything[metric] = rt.to_dict()
    ranker.ranking_.combined.write_csv(out / "combined.csv")
    written.append(out / "combined.csv")
    everything["combined"] = ranker.ranking_.combined.to_dict()

    names = {c: n for c, n in config.scheme.entries}
    per_label = {}
    with open(out / "per_label.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label_code", "label_name", "team", "mean_rank", "rank"])
        for code in table.labels:
            rt = per_label_ranking(table, code, scheme, config.tie_eps).combined
            per_label[names.get(code, str(code))] = rt
            for team, v, r in rt.rows():
                w.writerow([code, names.get(code, str(code)), team, repr(v), r])
    write_rank_matrix(per_label, out / "per_label_matrix.csv")
    written += [out / "per_label.csv", out / "per_label_matrix.csv"]
    everything["per_label"] = {k: v.to_dict() for k, v in per_label.items()}

    if config.manifest_path:
        subsets = standard_subsets(load_manifest(config.manifest_path), config.subsets)
        subset_tables = {}
        for name, ids in subsets.items():
            ids = ids & set(table.cases)
            if not ids:
                log.warning("subset %s has no evaluated cases; skipped", name)
                continue
            subset_tables[name] = subset_ranking(table, ids, scheme, config.tie_eps, subset=name).combined
        write_rank_matrix(subset_tables, out / "subsets.csv")
        written.append(out / "subsets.csv")
        everything["subsets"] = {k: v.to_dict() for k, v in subset_tables.items()}

    if config.sweep:
        for target in (*table.metrics, "combined"):
            sweep = ranker.sweep(table, target)
            write_rank_matrix(sweep, out / f"sweep_{target}.csv")
            written.append(out / f"sweep_{target}.csv")

    with open(out / "rankings.json", "w", encoding="utf-8") as fh:
        json.dump(everything, fh, indent=1)
        fh.write("\n")
    written.append(out / "rankings.json")
    return written


# stats

def run_stats(config: RunConfig, metrics_csv=None) -> list[Path]:
    table = _load_table(config, metrics_csv)
    if len(table.teams) < 2:
        raise SegRankError("significance testing needs at least two teams")
    s = RankScheme.parse(config.rank_scheme)
    est = RankingStability(
        n_bootstrap=config.bootstrap_b,
        random_state=config.seed,
        alpha=config.alpha,
        holm_family=config.holm_family,
        order=s.order,
        aggregator=s.aggregator,
        tie_eps=config.tie_eps,
        n_jobs=config.parallelism,
    ).fit(table)
    out = config.out / "stats"
    out.mkdir(exist_ok=True)
    written = []
    for metric, sig in est.significance_.items():
        sig.write_csv(out / f"significance_{metric}.csv")
        sig.write_csv(out / f"significance_{metric}_superior.csv", boolean=True)
        written += [out / f"significance_{metric}.csv", out / f"significance_{metric}_superior.csv"]
    tau_rows = []
    for target, summary in est.bootstrap_.items():
        p = out / f"bootstrap_{target}.json"
        p.write_text(summary.to_json(), encoding="utf-8")
        written.append(p)
        ts = summary.tau_summary()
        tau_rows.append([target, *(repr(ts[k]) for k in ("mean", "median", "q25", "q75"))])
    with open(out / "tau_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target", "mean", "median", "q25", "q75"])
        w.writerows(tau_rows)
    written.append(out / "tau_summary.csv")
    return written


# agreement

def read_ratings(path: str | os.PathLike) -> tuple[list[str], list[str], list[list[str | None]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        if len(header) < 3:
            raise SchemaError(f"{path}: need a case column and at least two rater columns")
        cases, ratings = [], []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path} line {n}: expected {len(header)} fields")
            cases.append(row[0])
            ratings.append([r.strip() or None for r in row[1:]])
    return header, cases, ratings


def run_agreement(config: RunConfig, ratings_path=None) -> list[Path]:
    path = ratings_path or config.ratings_path
    if not path:
        raise MissingInput("agreement needs a ratings CSV")
    header, cases, ratings = read_ratings(path)
    for row in ratings:
        for r in row:
            if r is not None and r not in QUALITY_LEVELS:
                raise SchemaError(f"unknown rating {r!r}; expected one of {QUALITY_LEVELS}")
    res = gwet_ac(ratings, QUALITY_LEVELS, config.agreement_weights)
    out = config.out
    doc = {
        "coefficient": res.coefficient,
        "pa": res.pa,
        "pe": res.pe,
        "weights": config.agreement_weights,
        "categories": list(res.categories),
        "n_items": len(cases),
        "n_raters": len(header) - 1,
    }
    (out / "agreement.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    with open(out / "ratings_median.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*header, "median"])
        for case, row in zip(cases, ratings):
            present = [r for r in row if r is not None]
            w.writerow([case, *[r or "" for r in row], median_ordinal(present) if present else "NA"])
    return [out / "agreement.json", out / "ratings_median.csv"]


# icv

def run_icv(config: RunConfig, tasks=None) -> list[Path]:
    if tasks is None:
        tasks, _ = discover_tasks(config)
    scheme = config.scheme
    rows, per_team = [], {}
    gt_cache: dict[str, tuple[LabelVolume, int]] = {}
    for team, case, gt_path, pred_path in sorted(tasks, key=lambda t: (t[1], t[0])):
        if case not in gt_cache:
            gt = read_nifti(gt_path)
            gt_cache.clear()
            gt_cache[case] = (gt, intracranial_volume(gt, scheme)[0])
        gt, icv_gt = gt_cache[case]
        if pred_path is None:
            rows.append((team, case, icv_gt, "NA", "NA"))
            continue
        pred = read_nifti(pred_path)
        val.check_same_grid(gt, pred)
        icv_pred = intracranial_volume(pred, scheme)[0]
        pct = icv_percent_difference(gt, pred, scheme)
        rows.append((team, case, icv_gt, icv_pred, repr(pct)))
        per_team.setdefault(team, []).append(pct)
    rows.sort(key=lambda r: (r[0], r[1]))
    out = config.out
    report._write_rows(out / "icv.csv", ["team", "case", "icv_gt", "icv_pred", "percent_difference"], rows)
    summary = [
        (team, repr(float(np.median(v))), int(abs(float(np.median(v))) <= 1.0 + 1e-12))
        for team, v in sorted(per_team.items())
    ]
    report._write_rows(out / "icv_summary.csv", ["team", "median_percent_difference", "within_1pct"], summary)
    return [out / "icv.csv", out / "icv_summary.csv"]


# report

def run_report(config: RunConfig, metrics_csv=None) -> list[Path]:
    if not (config.out / "rankings" / "combined.csv").is_file():
        raise MissingInput("rankings not found; run 'rank' first")
    table = _load_table(config, metrics_csv)
    out = config.out / "plots"
    out.mkdir(exist_ok=True)
    written = []
    for metric in table.metrics:
        written.append(report.write_dotbox(table, metric, out / f"dotbox_{metric}.csv"))
        written.append(report.write_podium(table, metric, out / f"podium_{metric}.csv"))
        written.append(report.write_heatmap(table, metric, out / f"heatmap_{metric}.csv"))
    scheme = RankScheme.parse(config.rank_scheme)
    for target in (*table.metrics, "combined"):
        sweep = ranking_method_sweep(table, target, config.tie_eps)
        written.append(report.write_lines(sweep, out / f"lines_{target}.csv"))

    summaries = {}
    for p in sorted((config.out / "stats").glob("bootstrap_*.json")):
        doc = json.loads(p.read_text(encoding="utf-8"))
        summaries[doc["target"]] = doc
    if not summaries:
        boot = bootstrap_ranking(table, scheme, config.bootstrap_b, config.seed, config.tie_eps, config.parallelism)
        summaries = {k: v.to_dict() for k, v in boot.items()}
    for target, summary in summaries.items():
        written.append(report.write_blob(summary, out / f"blob_{target}.csv"))

    if config.svg:
        for metric in table.metrics:
            p = out / f"box_{metric}.svg"
            p.write_text(report.svg_boxplot(table, metric), encoding="utf-8")
            written.append(p)
        for target, summary in summaries.items():
            p = out / f"blob_{target}.svg"
            p.write_text(report.svg_blob(summary), encoding="utf-8")
            written.append(p)
        if len(table.teams) >= 2:
            for metric in table.metrics:
                sig = significance_matrix(table, metric, config.alpha, config.holm_family)
                p = out / f"significance_{metric}.svg"
                p.write_text(report.svg_significance(sig), encoding="utf-8")
                written.append(p)
    written.append(report.write_index(config.out))
    return written


def scheme_names() -> list[str]:
    return [s.name for s in ALL_SCHEMES]
