"""Leakage-safe evaluation: subject-grouped stratified splits, ranking
metrics, and the seed-sweep experiment protocol.

Splitting operates on subjects, never on fragments: every fragment follows
its subject, so no subject can appear on both sides of any train/test
boundary. Metrics are computed per fragment.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .learn.forest import rf_fit
from .learn.training import TrainConfig, predict, train
from .records import DataError, EvalReport, ReportRow, ValidationError
from .rng import SplitMix64

log = logging.getLogger(__name__)

METRICS = ("auroc", "auprc", "accuracy")


class MetricUndefined(DataError):
    """Metric has no defined value for this label composition."""


# --------------------------------------------------------------------------
# metrics


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a positive outranks a negative, ties counting half.

    Computed from tie-averaged ranks, which equals the exhaustive pairwise
    count. Raises MetricUndefined if either class is absent.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefined("auroc needs both classes present")

    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average of 1-based ranks
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision over the score-sorted threshold sweep, step-wise
    with no interpolation; equal scores collapse into one threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise MetricUndefined("auprc needs at least one positive")

    order = np.argsort(-s, kind="mergesort")
    sorted_s = s[order]
    sorted_y = y[order]
    ap = 0.0
    tp = 0
    seen = 0
    recall_prev = 0.0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        tp += int(sorted_y[i:j + 1].sum())
        seen = j + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - recall_prev) * precision
        recall_prev = recall
        i = j + 1
    return ap


def accuracy(scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> float:
    """Fraction of samples where (score > threshold) matches the label."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if len(s) == 0:
        raise MetricUndefined("accuracy of an empty sample set")
    return float(np.mean((s > threshold).astype(int) == y))


# --------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitPlan:
    test_subjects: frozenset[str]
    folds: tuple[frozenset[str], ...]
    seed: int

    def __post_init__(self):
        parts = [self.test_subjects, *self.folds]
        total = sum(len(p) for p in parts)
        union = set().union(*parts)
        if total != len(union):
            raise ValidationError("split partitions overlap")


def make_split(
    subject_labels: Mapping[str, int],
    test_frac: float = 0.2,
    k: int = 5,
    seed: int = 0,
) -> SplitPlan:
    """Stratify subjects by label into a held-out test set and k CV folds.

    The test set takes round(test_frac * n_subjects) subjects, allocated
    per class by largest remainder; the rest are dealt round-robin per
    class into folds, so fold sizes stay balanced within one.
    """
    if not 0 < test_frac < 1:
        raise ValidationError(f"test_frac must be in (0, 1), got {test_frac}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    subjects = sorted(subject_labels)
    if len(subjects) < 2:
        raise ValidationError(f"need at least 2 subjects, got {len(subjects)}")

    rng = np.random.default_rng(seed)
    by_class: dict[int, list[str]] = {0: [], 1: []}
    for s in subjects:
        by_class[int(subject_labels[s])].append(s)
    for cls in by_class:
        by_class[cls] = [by_class[cls][i] for i in rng.permutation(len(by_class[cls]))]
        if 0 < len(by_class[cls]) < k + 1:
            log.warning("class %d has %d subjects, fewer than k+1=%d", cls, len(by_class[cls]), k + 1)

    n = len(subjects)
    n_test = int(np.floor(test_frac * n + 0.5))
    quotas = {cls: test_frac * len(members) for cls, members in by_class.items() if members}
    take = {cls: int(np.floor(q)) for cls, q in quotas.items()}
    remainders = sorted(quotas, key=lambda cls: (-(quotas[cls] - take[cls]), cls))
    i = 0
    while sum(take.values()) < n_test and i < 10 * n:
        cls = remainders[i % len(remainders)]
        if take[cls] < len(by_class[cls]):
            take[cls] += 1
        i += 1

    test: set[str] = set()
    rest: list[list[str]] = []
    for cls in sorted(by_class):
        members = by_class[cls]
        test.update(members[: take.get(cls, 0)])
        rest.append(members[take.get(cls, 0):])

    folds: list[set[str]] = [set() for _ in range(k)]
    cursor = 0
    for members in rest:
        for s in members:
            folds[cursor % k].add(s)
            cursor += 1
    return SplitPlan(
        test_subjects=frozenset(test),
        folds=tuple(frozenset(f) for f in folds),
        seed=seed,
    )


# --------------------------------------------------------------------------
# experiment protocol


@dataclass(frozen=True)
class FeatureSample:
    """One evaluation unit: a fragment's feature tensor plus its metadata."""

    values: np.ndarray  # (channels, length)
    label: int
    subject_id: str
    age_group: str


def samples_from_fragments(fragments, feature_set: str, angles_on_normalized: bool = False) -> list[FeatureSample]:
    from .features import build_features

    return [
        FeatureSample(
            values=build_features(f, feature_set, angles_on_normalized).values,
            label=f.label,
            subject_id=f.subject_id,
            age_group=f.age_group,
        )
        for f in fragments
    ]


@dataclass(frozen=True)
class ExperimentConfig:
    model: str                       # rf | cnn | lstm
    feature_set: str
    age_group: str | None = None     # None evaluates all fragments together
    grid: tuple[dict, ...] = ()      # empty -> model defaults
    n_seeds: int = 30
    test_frac: float = 0.2
    k_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ValidationError(f"n_seeds must be >= 1, got {self.n_seeds}")
        if self.model not in ("rf", "cnn", "lstm"):
            raise ValidationError(f"unknown model {self.model!r}")
        if not self.grid:
            object.__setattr__(self, "grid", (default_hyperparams(self.model),))


def default_hyperparams(model: str) -> dict:
    if model == "rf":
        return {"n_trees": 170}
    if model == "cnn":
        return {"lr": 1e-5, "batch_size": 6, "epochs": 150}
    if model == "lstm":
        return {"lr": 1e-3, "batch_size": 6, "epochs": 200}
    raise ValidationError(f"unknown model {model!r}")


@dataclass(frozen=True)
class RawRow:
    seed: int
    fold: str
    model: str
    feature_set: str
    age_group: str
    metric: str
    value: float


@dataclass
class ExperimentResult:
    report: EvalReport
    raw_rows: list[RawRow]
    skipped_seeds: list[tuple[int, str]] = field(default_factory=list)


def _fit(model_kind: str, samples: list[FeatureSample], hyper: dict, seed: int):
    labels = {s.label for s in samples}
    if labels != {0, 1}:
        raise MetricUndefined(f"training set has labels {sorted(labels)}")
    if model_kind == "rf":
        X = np.stack([s.values.reshape(-1) for s in samples])
        y = np.array([s.label for s in samples])
        return rf_fit(X, y, n_trees=hyper.get("n_trees", 170), seed=seed)
    config = TrainConfig(
        model=model_kind,
        lr=hyper.get("lr", 1e-5 if model_kind == "cnn" else 1e-3),
        batch_size=hyper.get("batch_size", 6),
        epochs=hyper.get("epochs", 150 if model_kind == "cnn" else 200),
        seed=seed,
    )
    model, _losses = train(model_kind, [(s.values, s.label) for s in samples], config)
    return model


def _score(model, samples: list[FeatureSample]) -> np.ndarray:
    return np.array([predict(model, s.values) for s in samples])


def run_experiment(config: ExperimentConfig, samples: Sequence[FeatureSample]) -> ExperimentResult:
    """Seed sweep: split, grid-select by mean CV AUROC, retrain, score test.

    Per seed: build a SplitPlan over subjects; pick the grid combination
    with the best mean CV AUROC (a single-entry grid skips the CV pass,
    which yields the identical final model); retrain on all non-test
    subjects; collect AUROC/AUPRC/accuracy on the held-out fragments.
    Seeds whose partitions violate class-presence preconditions are skipped
    and counted. Reported mean/std are over the surviving seeds.
    """
    pool = [s for s in samples if config.age_group is None or s.age_group == config.age_group]
    if not pool:
        raise ValidationError(f"no fragments for age group {config.age_group!r}")
    age_label = config.age_group if config.age_group is not None else "all"
    subject_labels: dict[str, int] = {}
    for s in pool:
        if subject_labels.setdefault(s.subject_id, s.label) != s.label:
            raise ValidationError(f"subject {s.subject_id} has inconsistent labels")

    seed_stream = SplitMix64(config.seed).derive("experiment-seeds")
    raw: list[RawRow] = []
    skipped: list[tuple[int, str]] = []
    per_metric: dict[str, list[float]] = {m: [] for m in METRICS}

    for seed_idx in range(config.n_seeds):
        split_seed = seed_stream.next_u64() % (2**31)
        train_seed = seed_stream.next_u64() % (2**31)
        plan = make_split(subject_labels, config.test_frac, config.k_folds, seed=split_seed)

        test = [s for s in pool if s.subject_id in plan.test_subjects]
        fold_samples = [[s for s in pool if s.subject_id in fold] for fold in plan.folds]
        dev = [s for fold in fold_samples for s in fold]
        if {s.label for s in test} != {0, 1}:
            skipped.append((seed_idx, "test partition lacks a class"))
            continue
        if {s.label for s in dev} != {0, 1}:
            skipped.append((seed_idx, "training partition lacks a class"))
            continue

        try:
            if len(config.grid) == 1:
                winner = config.grid[0]
            else:
                best_score = -np.inf
                winner = config.grid[0]
                for combo in config.grid:
                    fold_scores = []
                    for i in range(len(fold_samples)):
                        val = fold_samples[i]
                        tr = [s for j, f in enumerate(fold_samples) if j != i for s in f]
                        if not val or {s.label for s in tr} != {0, 1}:
                            continue
                        try:
                            model = _fit(config.model, tr, combo, seed=train_seed)
                            fold_scores.append(auroc(_score(model, val), [s.label for s in val]))
                        except MetricUndefined:
                            continue
                    if fold_scores and np.mean(fold_scores) > best_score:
                        best_score = float(np.mean(fold_scores))
                        winner = combo
            final_model = _fit(config.model, dev, winner, seed=train_seed)
        except MetricUndefined as exc:
            skipped.append((seed_idx, str(exc)))
            continue

        scores = _score(final_model, test)
        test_labels = [s.label for s in test]
        values = {
            "auroc": auroc(scores, test_labels),
            "auprc": auprc(scores, test_labels),
            "accuracy": accuracy(scores, test_labels),
        }
        for metric in METRICS:
            per_metric[metric].append(values[metric])
            raw.append(RawRow(seed_idx, "test", config.model, config.feature_set,
                              age_label, metric, values[metric]))

    if skipped:
        log.warning("skipped %d/%d seeds: %s", len(skipped), config.n_seeds, skipped)

    rows = []
    for metric in METRICS:
        vals = per_metric[metric]
        if not vals:
            continue
        rows.append(ReportRow(
            model=config.model,
            feature_set=config.feature_set,
            age_group=age_label,
            metric=metric,
            mean=float(np.mean(vals)),
            std=float(np.std(vals)),
            n_seeds=len(vals),
        ))
    return ExperimentResult(report=EvalReport(rows=tuple(rows)), raw_rows=raw, skipped_seeds=skipped)


# --------------------------------------------------------------------------
# raw per-seed persistence


def write_raw_results(rows: Sequence[RawRow], path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "fold", "model", "feature_set", "age_group", "metric", "value"])
        for r in sorted(rows, key=lambda r: (r.seed, r.fold, r.model, r.feature_set, r.age_group, r.metric)):
            w.writerow([r.seed, r.fold, r.model, r.feature_set, r.age_group, r.metric, repr(float(r.value))])


def read_raw_results(path: str | Path) -> list[RawRow]:
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["seed", "fold", "model", "feature_set", "age_group", "metric", "value"]:
            raise ValidationError(f"{path}: bad raw results header {header}")
        for row in reader:
            if not row:
                continue
            rows.append(RawRow(int(row[0]), row[1], row[2], row[3], row[4], row[5], float(row[6])))
    return rows


def aggregate_raw(rows: Sequence[RawRow]) -> EvalReport:
    """Recompute the summary report from persisted per-seed test rows."""
    groups: dict[tuple[str, str, str, str], list[float]] = {}
    for r in rows:
        if r.fold != "test":
            continue
        groups.setdefault((r.model, r.feature_set, r.age_group, r.metric), []).append(r.value)
    report_rows = [
        ReportRow(model=m, feature_set=f, age_group=a, metric=met,
                  mean=float(np.mean(vals)), std=float(np.std(vals)), n_seeds=len(vals))
        for (m, f, a, met), vals in groups.items()
    ]
    return EvalReport(rows=tuple(report_rows))
