"""Event-based scoring and the cross-validation experiment harness.

A predicted cycle matches a reference cycle when (i) the classes agree
(skipped in detection-only mode), (ii) onsets lie within the tolerance of
each other and (iii) offsets do too. Matching is greedy in onset order
with each reference used at most once; because both event lists are
time-ordered and non-overlapping, greedy first-fit attains the maximum
matching. Timestamps are minutes; the tolerance is specified in seconds
and compared at the boundary.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .balance import balance_mode_training_set, smoten_oversample
from .classifiers import grid_search, train_family
from .classifiers.grid import HyperGrid
from .datamodel import CycleClass, CycleEvent, SensorRecord
from .features import extract_series
from .ingest import Dataset
from .pipeline import PipelineConfig, cycle_training_encodings, run_approach

DEFAULT_TOLERANCE_SECONDS = 202.75
SECONDS_PER_MINUTE = 60.0

METRIC_COLUMNS = ["fold", "seed", "approach", "model", "class", "f1", "tp", "fp", "fn"]


@dataclass
class EvalCounts:
    """Per-class true positives, insertions (FP) and deletions (FN)."""

    tp: dict[CycleClass, int] = field(default_factory=lambda: {c: 0 for c in CycleClass})
    fp: dict[CycleClass, int] = field(default_factory=lambda: {c: 0 for c in CycleClass})
    fn: dict[CycleClass, int] = field(default_factory=lambda: {c: 0 for c in CycleClass})

    def add(self, other: "EvalCounts") -> None:
        for c in CycleClass:
            self.tp[c] += other.tp[c]
            self.fp[c] += other.fp[c]
            self.fn[c] += other.fn[c]

    def totals(self) -> tuple[int, int, int]:
        return (
            sum(self.tp.values()),
            sum(self.fp.values()),
            sum(self.fn.values()),
        )


def _check_event_list(events: list[CycleEvent], name: str) -> None:
    for prev, cur in zip(events, events[1:]):
        if cur.onset <= prev.offset:
            raise ValueError(f"{name} events must be time-ordered and non-overlapping")


def match_events(
    reference: list[CycleEvent],
    predicted: list[CycleEvent],
    tolerance_s: float = DEFAULT_TOLERANCE_SECONDS,
    class_sensitive: bool = True,
) -> EvalCounts:
    """Greedy tolerance matching; unmatched predictions are insertions,
    unmatched references deletions. In detection-only mode matched pairs
    count toward the reference class."""
    _check_event_list(reference, "reference")
    _check_event_list(predicted, "predicted")
    tol_min = tolerance_s / SECONDS_PER_MINUTE
    counts = EvalCounts()
    used = [False] * len(reference)
    for pred in predicted:
        hit = None
        for i, ref in enumerate(reference):
            if used[i]:
                continue
            if class_sensitive and ref.cycle_class != pred.cycle_class:
                continue
            if abs(pred.onset - ref.onset) <= tol_min and abs(pred.offset - ref.offset) <= tol_min:
                hit = i
                break
        if hit is None:
            counts.fp[pred.cycle_class] += 1
        else:
            used[hit] = True
            counts.tp[reference[hit].cycle_class] += 1
    for i, ref in enumerate(reference):
        if not used[i]:
            counts.fn[ref.cycle_class] += 1
    return counts


def f1_score(tp: int, fp: int, fn: int) -> float:
    """2*TP / (2*TP + FP + FN), with the empty case defined as 0."""
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def f1_per_class(counts: EvalCounts) -> dict[CycleClass, float]:
    return {c: f1_score(counts.tp[c], counts.fp[c], counts.fn[c]) for c in CycleClass}


def micro_f1(counts: EvalCounts) -> float:
    tp, fp, fn = counts.totals()
    return f1_score(tp, fp, fn)


# --------------------------------------------------------------------------
# Experiment harness


@dataclass
class ExperimentConfig:
    """Everything needed to train and score one approach on one dataset."""

    approach: int
    mode_family: str = "et"
    duty_family: str = "et"
    mode_params: dict | None = None     # fixed hyperparameters; None = grid search
    duty_params: dict | None = None
    mode_grid: HyperGrid | None = None  # None = family default grid
    duty_grid: HyperGrid | None = None
    speed_threshold: float = 5.0
    median_window: int = 3
    encoder_slots: int = 20
    tolerance_s: float = DEFAULT_TOLERANCE_SECONDS
    balance_k: int = 5
    mlp_scale_features: bool = False

    def model_tag(self) -> str:
        if self.approach == 3:
            return f"{self.mode_family}+{self.duty_family}"
        return self.mode_family


@dataclass
class MonthData:
    tag: str
    records: list[SensorRecord]
    features: np.ndarray
    labels: np.ndarray  # -1 where the ground-truth mode is missing
    events: list[CycleEvent]


@dataclass
class MetricRow:
    fold: str
    seed: str
    approach: int
    model: str
    label: str  # normal | abnormal | micro | detection
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass
class ExperimentReport:
    rows: list[MetricRow] = field(default_factory=list)
    skipped_folds: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0

    def mean_f1(self, label: str) -> float:
        vals = [r.f1 for r in self.rows if r.label == label]
        return float(np.mean(vals)) if vals else float("nan")

    def std_f1(self, label: str) -> float:
        vals = [r.f1 for r in self.rows if r.label == label]
        return float(np.std(vals)) if vals else float("nan")

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRIC_COLUMNS)
            for r in self.rows:
                writer.writerow([r.fold, r.seed, r.approach, r.model, r.label,
                                 repr(r.f1), r.tp, r.fp, r.fn])

    @classmethod
    def read_csv(cls, path: str | Path) -> "ExperimentReport":
        report = cls()
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != METRIC_COLUMNS:
                raise ValueError(f"unexpected metrics header {header!r}")
            for row in reader:
                report.rows.append(MetricRow(row[0], row[1], int(row[2]), row[3],
                                             row[4], float(row[5]), int(row[6]),
                                             int(row[7]), int(row[8])))
        return report

    def summary_table(self) -> str:
        """Mean and std of F1 grouped by (approach, model, label)."""
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.approach, r.model, r.label), []).append(r.f1)
        lines = [f"{'approach':>8}  {'model':<10} {'label':<10} {'mean_f1':>8} {'std':>7} {'n':>4}"]
        for (approach, model, label), vals in sorted(groups.items()):
            lines.append(
                f"{approach:>8}  {model:<10} {label:<10} "
                f"{np.mean(vals):>8.4f} {np.std(vals):>7.4f} {len(vals):>4}"
            )
        if self.skipped_folds:
            lines.append(f"skipped folds (no test cycles): {', '.join(self.skipped_folds)}")
        return "\n".join(lines)


def index_dataset(dataset: Dataset) -> dict[str, MonthData]:
    """Per-month records, features, labels and reference events."""
    by_month = dataset.records_by_month()
    cycles = dataset.cycles_by_month()
    out: dict[str, MonthData] = {}
    for tag, records in by_month.items():
        feats = extract_series(records)
        labels = np.array(
            [-1 if r.mode_label is None else int(r.mode_label) for r in records],
            dtype=np.int64,
        )
        out[tag] = MonthData(tag, records, feats, labels, cycles.get(tag, []))
    return out


def train_mode_classifier(
    months: list[MonthData], cfg: ExperimentConfig, seed: int
) -> tuple[object, dict]:
    """Balance the pooled training months, then fit (optionally via grid search)."""
    X = np.concatenate([m.features for m in months])
    y = np.concatenate([m.labels for m in months])
    if np.any(y < 0):
        raise ValueError("mode training requires ground-truth labels on every record")
    Xb, yb = balance_mode_training_set(X, y, seed=seed)
    params = cfg.mode_params
    if params is None:
        best, model, _ = grid_search(cfg.mode_family, Xb, yb, 4, cfg.mode_grid, seed=seed)
        return model, best
    params = dict(params)
    if cfg.mode_family == "mlp" and cfg.mlp_scale_features:
        params.setdefault("scale_features", True)
    model = train_family(cfg.mode_family, Xb, yb, 4, params, seed=seed)
    return model, params


def _label_cycle_spans(
    spans: list[tuple[int, int]], reference: list[CycleEvent], tolerance_s: float
) -> np.ndarray:
    """Class labels for detected cycles via tolerance matching; -1 if unmatched."""
    tol_min = tolerance_s / SECONDS_PER_MINUTE
    used = [False] * len(reference)
    labels = np.full(len(spans), -1, dtype=np.int64)
    for si, (onset, offset) in enumerate(spans):
        for i, ref in enumerate(reference):
            if used[i]:
                continue
            if abs(onset - ref.onset) <= tol_min and abs(offset - ref.offset) <= tol_min:
                used[i] = True
                labels[si] = int(ref.cycle_class)
                break
    return labels


def train_duty_classifier(
    months: list[MonthData],
    mode_model: object,
    cfg: ExperimentConfig,
    seed: int,
) -> tuple[object, dict]:
    """Fit the cycle classifier on predicted-mode encodings of the training months.

    Training on predictions (not ground-truth modes) lets the classifier
    absorb the mode model's systematic mistakes. Detected cycles are
    labeled by tolerance-matching against the reference cycles; unmatched
    detections are dropped. Abnormal cycles are SMOTEN-oversampled up to
    the normal count.
    """
    # Approach 2 here only configures the shared front end; the duty model
    # does not exist yet and encoding never consults it.
    pipe = PipelineConfig(approach=2, mode_model=mode_model,
                          speed_threshold=cfg.speed_threshold,
                          median_window=cfg.median_window,
                          encoder_slots=cfg.encoder_slots)
    vecs = []
    labels = []
    for m in months:
        matrix, spans = cycle_training_encodings(pipe, m.records)
        span_labels = _label_cycle_spans(spans, m.events, cfg.tolerance_s)
        keep = span_labels >= 0
        vecs.append(matrix[keep])
        labels.append(span_labels[keep])
    X = np.concatenate(vecs)
    y = np.concatenate(labels)
    if len(np.unique(y)) < 2:
        raise ValueError("duty-cycle training needs both classes among detected cycles")
    n_normal = int(np.sum(y == int(CycleClass.NORMAL)))
    synthetic = smoten_oversample(X, y, int(CycleClass.ABNORMAL), n_normal,
                                  k=cfg.balance_k, seed=seed)
    Xb = np.concatenate([X, synthetic]).astype(np.float64)
    yb = np.concatenate([y, np.full(len(synthetic), int(CycleClass.ABNORMAL), y.dtype)])
    if cfg.duty_params is None:
        best, model, _ = grid_search(cfg.duty_family, Xb, yb, 2, cfg.duty_grid, seed=seed)
        return model, best
    model = train_family(cfg.duty_family, Xb, yb, 2, dict(cfg.duty_params), seed=seed)
    return model, dict(cfg.duty_params)


def _evaluate_fold(
    cfg: ExperimentConfig,
    pipe: PipelineConfig,
    test_months: list[MonthData],
) -> tuple[EvalCounts, EvalCounts]:
    """Class-sensitive and detection-only counts pooled over test months."""
    counts = EvalCounts()
    detection = EvalCounts()
    for m in test_months:
        predicted = run_approach(pipe, m.records)
        counts.add(match_events(m.events, predicted, cfg.tolerance_s, True))
        detection.add(match_events(m.events, predicted, cfg.tolerance_s, False))
    return counts, detection


def _append_rows(
    report: ExperimentReport,
    cfg: ExperimentConfig,
    fold: str,
    seed_tag: str,
    counts: EvalCounts,
    detection: EvalCounts,
) -> None:
    per_class = f1_per_class(counts)
    for c in CycleClass:
        report.rows.append(MetricRow(fold, seed_tag, cfg.approach, cfg.model_tag(),
                                     c.name.lower(), per_class[c],
                                     counts.tp[c], counts.fp[c], counts.fn[c]))
    tp, fp, fn = counts.totals()
    report.rows.append(MetricRow(fold, seed_tag, cfg.approach, cfg.model_tag(),
                                 "micro", micro_f1(counts), tp, fp, fn))
    dtp, dfp, dfn = detection.totals()
    report.rows.append(MetricRow(fold, seed_tag, cfg.approach, cfg.model_tag(),
                                 "detection", micro_f1(detection), dtp, dfp, dfn))


def _run_fold(
    report: ExperimentReport,
    cfg: ExperimentConfig,
    fold_name: str,
    train_months: list[MonthData],
    test_months: list[MonthData],
    seeds: list[int],
    duty_seeds: list[int] | None,
) -> None:
    if all(len(m.events) == 0 for m in test_months):
        report.skipped_folds.append(fold_name)
        return
    duty_seeds = seeds if duty_seeds is None else duty_seeds
    for seed in seeds:
        mode_model, _ = train_mode_classifier(train_months, cfg, seed)
        if cfg.approach in (1, 2):
            pipe = PipelineConfig(cfg.approach, mode_model,
                                  speed_threshold=cfg.speed_threshold,
                                  median_window=cfg.median_window,
                                  encoder_slots=cfg.encoder_slots)
            counts, detection = _evaluate_fold(cfg, pipe, test_months)
            _append_rows(report, cfg, fold_name, str(seed), counts, detection)
            continue
        for dseed in duty_seeds:
            duty_model, _ = train_duty_classifier(train_months, mode_model, cfg, dseed)
            pipe = PipelineConfig(3, mode_model, duty_model,
                                  speed_threshold=cfg.speed_threshold,
                                  median_window=cfg.median_window,
                                  encoder_slots=cfg.encoder_slots)
            counts, detection = _evaluate_fold(cfg, pipe, test_months)
            _append_rows(report, cfg, fold_name, f"{seed}/{dseed}", counts, detection)


def loocv_run(
    dataset: Dataset,
    cfg: ExperimentConfig,
    seeds: list[int] | None = None,
    duty_seeds: list[int] | None = None,
) -> ExperimentReport:
    """Leave-one-month-out cross-validation, repeated per seed.

    For approach 3 the mode-model seeds cross with the duty-model seeds
    (10 x 10 combinations at the defaults).
    """
    seeds = list(range(10)) if seeds is None else seeds
    months = index_dataset(dataset)
    if len(months) < 2:
        raise ValueError("leave-one-month-out needs at least two month tags")
    report = ExperimentReport()
    start = time.perf_counter()
    for test_tag in months:
        train = [m for tag, m in months.items() if tag != test_tag]
        _run_fold(report, cfg, test_tag, train, [months[test_tag]], seeds, duty_seeds)
    report.wall_seconds = time.perf_counter() - start
    return report


def fixed_split_run(
    dataset: Dataset,
    cfg: ExperimentConfig,
    train_months: list[str],
    test_months: list[str],
    seeds: list[int] | None = None,
    duty_seeds: list[int] | None = None,
) -> ExperimentReport:
    """Train on one set of months and test on a disjoint set (drift studies)."""
    seeds = list(range(10)) if seeds is None else seeds
    months = index_dataset(dataset)
    missing = [t for t in train_months + test_months if t not in months]
    if missing:
        raise ValueError(f"unknown month tag(s): {', '.join(missing)}")
    overlap = set(train_months) & set(test_months)
    if overlap:
        raise ValueError(f"train and test months overlap: {', '.join(sorted(overlap))}")
    report = ExperimentReport()
    start = time.perf_counter()
    fold_name = "+".join(test_months)
    _run_fold(report, cfg, fold_name, [months[t] for t in train_months],
              [months[t] for t in test_months], seeds, duty_seeds)
    report.wall_seconds = time.perf_counter() - start
    return report
