"""Stealthiness to spectral detection, and query-efficiency statistics.

Images are described by radially band-averaged log-magnitude DCT spectra
of their grayscale version. A polynomial-kernel SVM is cross-validated on
benign (negative) versus adversarial (positive) feature vectors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .svm import PolySVM, fit_svm
from .tensorops import dct2, to_grayscale

RECIPE = "gray/dct2-ortho/log1p-abs/radial-mean/v1"
DETECTOR_FORMAT = "eclipsekit.detector"
DETECTOR_VERSION = 1
METRICS = ("accuracy", "precision", "recall", "f1", "roc_auc")
TABLE_HEADERS = ("Comparison", "Accuracy", "Precision", "Recall", "F1-score", "ROC AUC")


def radial_band_index(height: int, width: int, bands: int) -> np.ndarray:
    i = np.arange(height)[:, None] / height
    j = np.arange(width)[None, :] / width
    r = np.sqrt(i ** 2 + j ** 2) / np.sqrt(2.0)
    return np.minimum((r * bands).astype(int), bands - 1)


def spectral_features(image, bands: int = 64) -> np.ndarray:
    """Unstandardized band means of ``log(1 + |DCT|)``; empty bands read 0."""
    if bands < 2:
        raise ValueError("need at least 2 bands")
    img = np.asarray(image, dtype=np.float64)
    gray = to_grayscale(img) if img.ndim == 3 else img
    mag = np.log1p(np.abs(dct2(gray)))
    idx = radial_band_index(*gray.shape, bands).ravel()
    sums = np.bincount(idx, weights=mag.ravel(), minlength=bands)
    counts = np.bincount(idx, minlength=bands)
    return np.divide(sums, counts, out=np.zeros(bands), where=counts > 0)


def feature_matrix(images, bands: int = 64) -> np.ndarray:
    return np.stack([spectral_features(img, bands) for img in images])


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        scale = X.std(axis=0)
        # constant columns (e.g. empty bands) pass through centred
        scale = np.where(scale > 0, scale, 1.0)
        return cls(X.mean(axis=0), scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


# ---------------------------------------------------------------------------
# metrics


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U over positive/negative pairs, ties counting one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def binary_metrics(decision, labels) -> dict[str, float]:
    y = np.asarray(labels).astype(bool)
    pred = np.asarray(decision) > 0
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "accuracy": float(np.mean(pred == y)),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "roc_auc": roc_auc(decision, y),
    }


# ---------------------------------------------------------------------------
# detector


@dataclass
class DetectorModel:
    svm: PolySVM
    standardizer: Standardizer
    bands: int
    recipe: str = RECIPE

    def decision_function(self, features) -> np.ndarray:
        return self.svm.decision_function(self.standardizer.transform(np.atleast_2d(features)))

    def predict(self, features) -> np.ndarray:
        """True where the detector flags an adversarial example."""
        return self.decision_function(features) > 0

    def to_dict(self) -> dict:
        return {
            "format": DETECTOR_FORMAT,
            "version": DETECTOR_VERSION,
            "recipe": self.recipe,
            "bands": self.bands,
            "kernel": {"type": "polynomial", "degree": self.svm.degree,
                       "gamma": self.svm.gamma, "coef0": self.svm.coef0},
            "C": self.svm.C,
            "support_vectors": self.svm.support_vectors.tolist(),
            "dual_coef": self.svm.dual_coef.tolist(),
            "bias": self.svm.bias,
            "standardization": {"mean": self.standardizer.mean.tolist(),
                                "scale": self.standardizer.scale.tolist()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectorModel":
        if doc.get("format") != DETECTOR_FORMAT:
            raise ValueError("not a detector document")
        if doc.get("version") != DETECTOR_VERSION:
            raise ValueError(f"unsupported detector version {doc.get('version')!r}")
        k = doc["kernel"]
        sv = np.asarray(doc["support_vectors"], dtype=np.float64).reshape(-1, doc["bands"])
        svm = PolySVM(sv, np.asarray(doc["dual_coef"], dtype=np.float64), float(doc["bias"]),
                      int(k["degree"]), float(k["gamma"]), float(k["coef0"]), float(doc["C"]))
        std = Standardizer(np.asarray(doc["standardization"]["mean"]),
                           np.asarray(doc["standardization"]["scale"]))
        return cls(svm, std, int(doc["bands"]), doc["recipe"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DetectorModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class CVReport:
    folds: list[dict] = field(default_factory=list)
    comparison: str = ""

    def mean(self, metric: str) -> float:
        return float(np.mean([f[metric] for f in self.folds]))

    def std(self, metric: str) -> float:
        return float(np.std([f[metric] for f in self.folds]))

    def summary(self) -> dict:
        return {m: {"mean": self.mean(m), "std": self.std(m)} for m in METRICS}

    def table_row(self) -> list[str]:
        return [self.comparison] + [f"{self.mean(m):.2f} (± {self.std(m):.2f})" for m in METRICS]


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample with each class spread evenly over the folds."""
    y = np.asarray(labels).astype(bool)
    rng = np.random.default_rng(seed)
    assign = np.empty(y.size, dtype=int)
    for cls in (False, True):
        idx = np.flatnonzero(y == cls)
        if idx.size < folds:
            raise ValueError(f"class {'adversarial' if cls else 'benign'} has {idx.size} samples, "
                             f"fewer than {folds} folds")
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = np.arange(idx.size) % folds
    return assign


def _fit(X, y, degree, C, gamma, coef0, tol, bands, recipe):
    std = Standardizer.fit(X)
    svm = fit_svm(std.transform(X), np.where(y, 1.0, -1.0), C=C, degree=degree,
                  gamma=gamma, coef0=coef0, tol=tol)
    return DetectorModel(svm, std, bands, recipe)


def train_detector(benign, adversarial, degree: int = 3, C: float = 1.0, folds: int = 5,
                   gamma: float | None = None, coef0: float = 1.0, tol: float = 1e-3,
                   seed: int = 0, comparison: str = "", recipe: str = RECIPE):
    """Cross-validate, then refit on all data.

    Returns ``(DetectorModel, CVReport)``; adversarial is the positive class.
    """
    benign = np.atleast_2d(np.asarray(benign, dtype=np.float64))
    adversarial = np.atleast_2d(np.asarray(adversarial, dtype=np.float64))
    if benign.shape[1] != adversarial.shape[1]:
        raise ValueError("benign and adversarial features differ in length")
    X = np.vstack([benign, adversarial])
    y = np.concatenate([np.zeros(len(benign), bool), np.ones(len(adversarial), bool)])
    bands = X.shape[1]
    gamma = 1.0 / bands if gamma is None else gamma
    fold_of = stratified_folds(y, folds, seed)
    report = CVReport(comparison=comparison)
    for k in range(folds):
        test = fold_of == k
        model = _fit(X[~test], y[~test], degree, C, gamma, coef0, tol, bands, recipe)
        metrics = binary_metrics(model.decision_function(X[test]), y[test])
        report.folds.append({"fold": k, **metrics})
    return _fit(X, y, degree, C, gamma, coef0, tol, bands, recipe), report


# ---------------------------------------------------------------------------
# query efficiency


@dataclass
class QueryStats:
    median: float | None
    iqr: float | None
    failures: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def query_stats(outcomes) -> QueryStats:
    """Median and interquartile range of total queries over successful runs.

    Accepts attack outcomes or ``(total_queries, success)`` pairs.
    """
    pairs = []
    for o in outcomes:
        if hasattr(o, "queries"):
            pairs.append((o.queries.total_queries, bool(o.success)))
        else:
            pairs.append((int(o[0]), bool(o[1])))
    if not pairs:
        raise ValueError("query_stats needs at least one outcome")
    ok = np.array([q for q, s in pairs if s], dtype=np.float64)
    failures = sum(1 for _, s in pairs if not s)
    if ok.size == 0:
        return QueryStats(None, None, failures, len(pairs))
    q1, med, q3 = np.percentile(ok, [25, 50, 75])
    return QueryStats(float(med), float(q3 - q1), failures, len(pairs))


# ---------------------------------------------------------------------------
# persistence


def write_features(path, ids, labels, X, bands: int, recipe: str = RECIPE) -> None:
    X = np.asarray(X)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# recipe={recipe}; bands={bands}\n")
        writer = csv.writer(fh)
        writer.writerow(["image_id", "label"] + [f"band_{b:03d}" for b in range(bands)])
        for i, lab, row in zip(ids, labels, X):
            writer.writerow([i, lab] + [repr(float(v)) for v in row])


def read_features(path):
    """Return ``(ids, labels, X, recipe, bands)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        head = fh.readline().strip()
        if not head.startswith("# recipe="):
            raise ValueError(f"{path} lacks the recipe header")
        meta = dict(part.strip().split("=", 1) for part in head[2:].split(";"))
        reader = csv.reader(fh)
        next(reader)
        ids, labels, rows = [], [], []
        for row in reader:
            ids.append(row[0])
            labels.append(row[1])
            rows.append([float(v) for v in row[2:]])
    return ids, labels, np.array(rows), meta["recipe"], int(meta["bands"])


def write_cv_table(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_HEADERS)
        for r in reports:
            writer.writerow(r.table_row())


def write_query_stats(path, rows) -> None:
    """``rows`` are ``(attack, QueryStats)`` pairs."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["attack", "median", "iqr", "failures", "n"])
        for name, qs in rows:
            writer.writerow([name, "" if qs.median is None else f"{qs.median:.1f}",
                             "" if qs.iqr is None else f"{qs.iqr:.1f}", qs.failures, qs.n])
