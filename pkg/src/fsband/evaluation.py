"""Classifier evaluation: ranking metrics, threshold search, timing, ablation.

AUROC uses trapezoidal integration with tied scores collapsed into single ROC
steps, which makes it equal (to rounding) to the pairwise estimator
P(s+ > s-) + 0.5 P(s+ = s-). AUPRC is the right-continuous step area with the
same tie grouping. The optimal accuracy threshold comes from an exhaustive
scan over midpoints of consecutive distinct scores — accuracy as a function
of threshold is not unimodal, so a bisection refinement is kept only as a
comparison probe, not as the canonical search.

The ablation harness retrains the same compact network on different input
wirings (single/dual branch, which map feeds which branch) under an identical
split and seed, so score differences come from the inputs alone.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import net
from .errors import (
    CorruptDataError,
    EmptyInputError,
    ShapeMismatchError,
    SingleClassError,
    UnknownKindError,
)
from .freqmaps import LFMConfig, compute_freq_stacks, hfm_array, lfm_array
from .synth import DatasetManifest, load_arrays

ABLATION_VARIANTS = ("SB-HFM", "SB-LFM", "SB-I", "DB-HFM", "DB-LFM", "FS-BAND")


@dataclass(frozen=True)
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels)
        if s.size == 0:
            raise EmptyInputError("scored set is empty")
        if s.shape != y.shape or s.ndim != 1:
            raise ShapeMismatchError("scores and labels must be equal-length 1-D")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int64))
        self.scores.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return int(self.labels.size - self.labels.sum())


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    accuracy: float
    orientation: str  # "high": score >= threshold predicts positive; "low": the reverse

    def __iter__(self):
        return iter((self.threshold, self.accuracy))


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    auprc: float
    accuracy: float
    threshold: float
    seconds_per_patch: float = float("nan")

    def __post_init__(self):
        for name in ("auroc", "auprc", "accuracy"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "auprc": self.auprc,
            "accuracy": self.accuracy,
            "threshold": self.threshold,
            "seconds_per_patch": self.seconds_per_patch,
        }


def _tie_grouped_counts(s: ScoredSet):
    """Cumulative TP/FP after each distinct score, descending."""
    order = np.argsort(-s.scores, kind="stable")
    sc = s.scores[order]
    y = s.labels[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    last = np.nonzero(np.diff(sc))[0]
    idx = np.append(last, sc.size - 1)
    return tps[idx], fps[idx]


def auroc(s: ScoredSet) -> float:
    """Trapezoidal area under the ROC curve; ties form single segments."""
    if s.n_pos == 0 or s.n_neg == 0:
        raise SingleClassError("AUROC needs both labels present")
    tps, fps = _tie_grouped_counts(s)
    tpr = np.concatenate(([0.0], tps / s.n_pos))
    fpr = np.concatenate(([0.0], fps / s.n_neg))
    return float(np.trapezoid(tpr, fpr))


def auprc(s: ScoredSet) -> float:
    """Right-continuous step area under precision-recall, ties grouped."""
    if s.n_pos == 0 or s.n_neg == 0:
        raise SingleClassError("AUPRC needs both labels present")
    tps, fps = _tie_grouped_counts(s)
    precision = tps / (tps + fps)
    recall = tps / s.n_pos
    d_recall = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(d_recall * precision))


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    u = np.unique(scores)
    mids = (u[:-1] + u[1:]) / 2.0
    return np.concatenate(([u[0] - 1.0], mids, [u[-1] + 1.0]))


def _accuracy_at(s: ScoredSet, thr: float, orientation: str) -> float:
    pred = s.scores >= thr
    if orientation == "low":
        pred = ~pred
    return float(np.mean(pred == (s.labels == 1)))


def best_threshold_accuracy(s: ScoredSet) -> ThresholdResult:
    """Exact accuracy-optimal threshold by exhaustive midpoint scan.

    Both orientations are searched; ties prefer the "high" orientation and
    then the smallest threshold, so the result is deterministic.
    """
    cands = _candidate_thresholds(s.scores)
    pred_high = s.scores[None, :] >= cands[:, None]
    truth = (s.labels == 1)[None, :]
    acc_high = np.mean(pred_high == truth, axis=1)
    acc_low = 1.0 - acc_high
    best = ThresholdResult(float(cands[0]), float(acc_high[0]), "high")
    for orientation, accs in (("high", acc_high), ("low", acc_low)):
        i = int(np.argmax(accs))
        if accs[i] > best.accuracy + 1e-15:
            best = ThresholdResult(float(cands[i]), float(accs[i]), orientation)
    return best


def half_interval_threshold(s: ScoredSet, iterations: int = 24) -> ThresholdResult:
    """Half-interval style search: repeatedly narrow the score interval
    toward the more accurate of two interior probes.

    Accuracy vs threshold is piecewise constant and generally multi-modal, so
    this is not guaranteed optimal; it returns the best threshold among those
    it actually evaluated. Its accuracy can never exceed the exhaustive scan.
    """
    lo = float(s.scores.min()) - 1.0
    hi = float(s.scores.max()) + 1.0
    best = None
    for orientation in ("high", "low"):
        a, b = lo, hi
        for _ in range(iterations):
            m1 = a + (b - a) / 3.0
            m2 = b - (b - a) / 3.0
            acc1 = _accuracy_at(s, m1, orientation)
            acc2 = _accuracy_at(s, m2, orientation)
            for thr, acc in ((m1, acc1), (m2, acc2)):
                if best is None or acc > best.accuracy + 1e-15:
                    best = ThresholdResult(thr, acc, orientation)
            if acc1 >= acc2:
                b = m2
            else:
                a = m1
    return best


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

def benchmark_speed(model: net.Model, patches: np.ndarray, repetitions: int = 5,
                    lfm_cfg: LFMConfig | None = None) -> float:
    """Median seconds per patch for the full per-patch path (maps + forward).

    Patches run one at a time, the way a tiled image is processed; the first
    repetition is a warm-up and is discarded.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[0] < 10:
        raise ValueError("need at least 10 patches, shaped (N, side, side)")
    if repetitions < 3:
        raise ValueError("need at least 3 repetitions")
    cfg = lfm_cfg or LFMConfig()
    n_branches = model.config.n_branches

    def one_rep() -> float:
        t0 = time.perf_counter()
        for i in range(patches.shape[0]):
            hf = hfm_array(patches[i])
            lf = lfm_array(patches[i], cfg).data
            inputs = [hf[None], lf[None]][:n_branches]
            net.predict_batch(model, inputs)
        return (time.perf_counter() - t0) / patches.shape[0]

    one_rep()  # warm-up
    return float(np.median([one_rep() for _ in range(repetitions)]))


# ---------------------------------------------------------------------------
# Ablation harness
# ---------------------------------------------------------------------------

def _variant_inputs(variant: str, raw, hf, lf):
    if variant == "SB-HFM":
        return 1, [hf]
    if variant == "SB-LFM":
        return 1, [lf]
    if variant == "SB-I":
        return 1, [raw]
    if variant == "DB-HFM":
        return 2, [hf, hf]
    if variant == "DB-LFM":
        return 2, [lf, lf]
    if variant == "FS-BAND":
        return 2, [hf, lf]
    raise UnknownKindError(f"unknown ablation variant: {variant!r}")


def evaluate_scores(scores: np.ndarray, labels: np.ndarray,
                    seconds_per_patch: float = float("nan")) -> EvalReport:
    s = ScoredSet(scores, labels)
    thr = best_threshold_accuracy(s)
    return EvalReport(auroc=auroc(s), auprc=auprc(s), accuracy=thr.accuracy,
                      threshold=thr.threshold, seconds_per_patch=seconds_per_patch)


def run_ablation(manifest: DatasetManifest, variants=ABLATION_VARIANTS,
                 train_cfg: net.TrainConfig | None = None,
                 net_cfg: net.NetConfig | None = None,
                 lfm_cfg: LFMConfig | None = None,
                 jobs: int = 1,
                 measure_speed: bool = False) -> dict[str, EvalReport]:
    """Train each input-wiring variant under identical conditions.

    All variants share the patch data, frequency maps, train/holdout split,
    and parameter seed; metrics are computed on the holdout. Returns a
    variant -> report mapping in the order requested.
    """
    train_cfg = train_cfg or net.TrainConfig()
    net_cfg = net_cfg or net.NetConfig()
    raw, labels = load_arrays(manifest)
    hf, lf = compute_freq_stacks(raw, lfm_cfg, jobs=jobs)
    _, hold_idx = net.split_indices(labels.size, train_cfg.split_ratio, train_cfg.seed)

    reports = {}
    for variant in variants:
        n_branches, inputs = _variant_inputs(variant, raw, hf, lf)
        vcfg = replace(net_cfg, n_branches=n_branches)
        model = net.init_model(vcfg)
        trained, _ = net.train_arrays(model, inputs, labels, train_cfg)
        scores = net.predict_batch(trained, [x[hold_idx] for x in inputs])
        spp = float("nan")
        if measure_speed:
            spp = benchmark_speed(trained, raw[hold_idx][:32], lfm_cfg=lfm_cfg)
        reports[variant] = evaluate_scores(scores, labels[hold_idx], spp)
    return reports


# ---------------------------------------------------------------------------
# Report and ingestion files
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ("variant", "auroc", "auprc", "accuracy", "threshold", "seconds_per_patch")


def write_report_csv(reports: dict[str, EvalReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for name, rep in reports.items():
            d = rep.to_dict()
            writer.writerow([name] + [repr(d[c]) for c in _CSV_COLUMNS[1:]])


def write_report_json(reports: dict[str, EvalReport], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({k: v.to_dict() for k, v in reports.items()}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")


def ingest_scores_csv(path, manifest: DatasetManifest) -> ScoredSet:
    """Join an external (id, score) CSV against manifest labels.

    Lets externally computed baseline scores run through the same metrics.
    Every CSV id must exist in the manifest; records without a score are
    dropped from the set.
    """
    by_id = {rec.id: rec.label for rec in manifest.records}
    scores, labels = [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "score"} <= set(reader.fieldnames):
            raise CorruptDataError(f"{path}: expected CSV header with id,score")
        for row in reader:
            rid = row["id"]
            if rid not in by_id:
                raise CorruptDataError(f"{path}: id {rid!r} not present in manifest")
            try:
                scores.append(float(row["score"]))
            except ValueError as exc:
                raise CorruptDataError(f"{path}: bad score for id {rid!r}") from exc
            labels.append(by_id[rid])
    if not scores:
        raise CorruptDataError(f"{path}: no scores found")
    return ScoredSet(np.array(scores), np.array(labels))
