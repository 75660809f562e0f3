"""Cross-validation harness: K-fold and leave-one-subject-out splitters,
MAE/RMSE/Pearson metrics, the two prediction pipelines, and report assembly.

Per fold, imputation, standardization, feature selection, and model fitting
all see training rows only; MAE/RMSE are computed on clipped (reported)
scores while the pooled Pearson correlation uses raw predictions.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import featselect, highfeat, linreg, seqnet
from .errors import InputError
from .linreg import clip_scores

SCHEMA_VERSION = 1


def mae(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise InputError("mae needs equal nonzero-length inputs")
    return float(np.mean(np.abs(y - y_hat)))


def rmse(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise InputError("rmse needs equal nonzero-length inputs")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))


def pearson(y, y_hat):
    """Pearson correlation; NaN when either side has zero variance."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise InputError("pearson needs equal nonzero-length inputs")
    sy, sh = np.std(y), np.std(y_hat)
    if sy == 0 or sh == 0:
        return float("nan")
    return float(np.mean((y - y.mean()) * (y_hat - y_hat.mean())) / (sy * sh))


@dataclass(frozen=True)
class Fold:
    train_idx: np.ndarray
    test_idx: np.ndarray


def kfold_split(n, k=5, seed=0):
    """Shuffled K-fold; test sizes differ by at most one."""
    if n < k:
        raise InputError(f"cannot split {n} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(order, k)
    folds = []
    for i, test in enumerate(parts):
        train = np.concatenate([parts[j] for j in range(k) if j != i])
        folds.append(Fold(train_idx=np.sort(train), test_idx=np.sort(test)))
    return folds


def loso_split(dataset):
    """One fold per subject (ordered by id); each test set is one subject."""
    by_subject = {}
    for i, s in enumerate(dataset.samples):
        by_subject.setdefault(s.key.subject_id, []).append(i)
    subjects = sorted(by_subject)
    if len(subjects) < 2:
        raise InputError("LOSO needs at least 2 subjects")
    declared = getattr(dataset, "subjects", subjects)
    for subj in declared:
        if subj not in by_subject:
            warnings.warn(f"subject {subj} has no sequences; excluded from LOSO")
    n = len(dataset.samples)
    folds = []
    for subj in subjects:
        test = np.asarray(sorted(by_subject[subj]))
        train = np.asarray(sorted(set(range(n)) - set(by_subject[subj])))
        folds.append(Fold(train_idx=train, test_idx=test))
    return folds


class WindowImputer:
    """Per-feature median over all training windows, the fill-in for the
    NaN missing markers."""

    def __init__(self):
        self.medians = None

    def fit(self, samples):
        stack = np.vstack([s.X for s in samples])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
            med = np.nanmedian(stack, axis=0)
        self.medians = np.where(np.isfinite(med), med, 0.0)
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        bad = ~np.isfinite(X)
        if bad.any():
            X = X.copy()
            X[bad] = np.broadcast_to(self.medians, X.shape)[bad]
        return X


class LinearFsPipeline:
    """Descriptive statistics -> 5-step feature selection -> OLS."""

    name = "linear_fs"

    def __init__(self, threshold=featselect.DEFAULT_THRESHOLD, k_max=None):
        self.threshold = threshold
        self.k_max = k_max

    def describe(self):
        return {"pipeline": self.name, "threshold": self.threshold, "k_max": self.k_max}

    def fit(self, samples, feature_names, seed=0):
        imputer = WindowImputer().fit(samples)
        names = highfeat.highlevel_names(feature_names)
        Xh = np.vstack([highfeat.descriptive_stats(imputer.transform(s.X)) for s in samples])
        y = np.array([s.y for s in samples], dtype=np.float64)
        selector = featselect.FeatureSelector(
            threshold=self.threshold, k_max=self.k_max, seed=seed
        ).fit(Xh, y, feature_names=names)
        model = linreg.fit_ols(Xh[:, selector.selected], y, feature_names=selector.selected_names)
        return {"imputer": imputer, "selector": selector, "model": model}

    def predict(self, fitted, sample):
        xh = highfeat.descriptive_stats(fitted["imputer"].transform(sample.X))
        row = xh[fitted["selector"].selected].reshape(1, -1)
        return float(linreg.predict(fitted["model"], row)[0])

    def selected_features(self, fitted):
        return fitted["selector"].selected_names

    def selector_of(self, fitted):
        return fitted["selector"]

    def state_hash(self, fitted):
        payload = json.dumps({
            "imputer": fitted["imputer"].medians.tolist(),
            "selector": fitted["selector"].to_json(),
            "model": fitted["model"].to_json(),
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


class SeqPipeline:
    """Median imputation -> LSTM-family sequence model."""

    def __init__(self, config: seqnet.TrainConfig):
        self.config = config

    @property
    def name(self):
        return self.config.variant

    def describe(self):
        c = self.config
        return {
            "pipeline": c.variant, "hidden_size": c.hidden_size, "attn_size": c.attn_size,
            "lambda_csa": c.lambda_csa, "lr": c.lr, "epochs": c.epochs,
            "patience": c.patience, "clip_norm": c.clip_norm,
        }

    def fit(self, samples, feature_names, seed=0):
        from dataclasses import replace

        from .fusion import Dataset

        imputer = WindowImputer().fit(samples)
        imputed = [replace(s, X=imputer.transform(s.X)) for s in samples]
        cfg = seqnet.TrainConfig(**{**self.config.__dict__, "seed": seed})
        model, log = seqnet.train(Dataset(samples=imputed, feature_names=list(feature_names)), cfg)
        return {"imputer": imputer, "model": model, "log": log}

    def predict(self, fitted, sample):
        y_hat, _ = seqnet.predict_seq(fitted["model"], fitted["imputer"].transform(sample.X))
        return float(y_hat)

    def attention_of(self, fitted, sample):
        _, trace = seqnet.predict_seq(fitted["model"], fitted["imputer"].transform(sample.X))
        return trace

    def selected_features(self, fitted):
        return None

    def state_hash(self, fitted):
        payload = json.dumps({
            "imputer": fitted["imputer"].medians.tolist(),
            "model": fitted["model"].to_json(),
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


class MeanBaselinePipeline:
    """Predicts the training-fold mean label; the sanity floor."""

    name = "mean_baseline"

    def describe(self):
        return {"pipeline": self.name}

    def fit(self, samples, feature_names, seed=0):
        return {"mean": float(np.mean([s.y for s in samples]))}

    def predict(self, fitted, sample):
        return fitted["mean"]

    def selected_features(self, fitted):
        return None

    def state_hash(self, fitted):
        return hashlib.sha256(repr(fitted["mean"]).encode()).hexdigest()


@dataclass
class CvReport:
    pipeline: dict
    splitter: str
    n_samples: int
    folds: list
    aggregate: dict
    pooled: dict
    predictions: list  # per sample: key fields, y, raw, clipped, fold
    importance: list = field(default_factory=list)
    partial: bool = False

    def to_json(self):
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "pipeline": self.pipeline,
            "splitter": self.splitter,
            "n_samples": self.n_samples,
            "folds": self.folds,
            "aggregate": self.aggregate,
            "pooled": self.pooled,
            "predictions": self.predictions,
            "importance": self.importance,
            "partial": self.partial,
        }, sort_keys=True, allow_nan=True)


def _fold_seed(seed, fold_idx):
    return int(seed) + 7919 * (fold_idx + 1)


def run_cv(dataset, pipeline, splitter="kfold", k=5, seed=0):
    """Fit/evaluate the pipeline per fold and assemble a CvReport.

    A failing fold is recorded (error string) rather than aborting, and the
    report is marked partial.
    """
    samples = dataset.samples
    if splitter == "kfold":
        folds = kfold_split(len(samples), k=k, seed=seed)
    elif splitter == "loso":
        folds = loso_split(dataset)
    else:
        raise InputError(f"unknown splitter {splitter!r}")

    fold_rows = []
    predictions = []
    selectors = []
    partial = False
    for fi, fold in enumerate(folds):
        train_samples = [samples[i] for i in fold.train_idx]
        try:
            fitted = pipeline.fit(train_samples, dataset.feature_names, seed=_fold_seed(seed, fi))
            raw = np.array([pipeline.predict(fitted, samples[i]) for i in fold.test_idx])
        except Exception as e:  # noqa: BLE001 - partial-failure reporting
            fold_rows.append({"fold": fi, "n_train": len(fold.train_idx),
                              "n_test": len(fold.test_idx), "mae": None, "rmse": None,
                              "selected_features": None, "error": f"{type(e).__name__}: {e}"})
            partial = True
            continue
        clipped = clip_scores(raw)
        y = np.array([samples[i].y for i in fold.test_idx], dtype=np.float64)
        selected = pipeline.selected_features(fitted)
        if selected is not None:
            selectors.append(pipeline.selector_of(fitted))
        fold_rows.append({
            "fold": fi, "n_train": len(fold.train_idx), "n_test": len(fold.test_idx),
            "mae": mae(y, clipped), "rmse": rmse(y, clipped),
            "selected_features": selected, "error": None,
        })
        for j, i in enumerate(fold.test_idx):
            s = samples[i]
            predictions.append({
                "subject_id": s.key.subject_id, "date": s.key.date.isoformat(),
                "period": s.key.period, "y": int(s.y),
                "y_raw": float(raw[j]), "y_clipped": float(clipped[j]), "fold": fi,
            })

    ok = [r for r in fold_rows if r["error"] is None]
    agg = {}
    for metric in ("mae", "rmse"):
        vals = np.array([r[metric] for r in ok], dtype=np.float64)
        agg[f"{metric}_mean"] = float(np.mean(vals)) if vals.size else None
        agg[f"{metric}_std"] = float(np.std(vals)) if vals.size else None
    y_all = np.array([p["y"] for p in predictions], dtype=np.float64)
    raw_all = np.array([p["y_raw"] for p in predictions], dtype=np.float64)
    r = pearson(y_all, raw_all) if y_all.size else float("nan")
    pooled = {"pearson_r": None if np.isnan(r) else r, "n": int(y_all.size)}

    importance = featselect.feature_importance(selectors) if selectors else []
    return CvReport(
        pipeline=pipeline.describe(), splitter=splitter, n_samples=len(samples),
        folds=fold_rows, aggregate=agg, pooled=pooled, predictions=predictions,
        importance=importance, partial=partial,
    )


def leakage_probe(dataset, pipeline, splitter="kfold", k=5, seed=0):
    """True iff scrambling the test-fold labels leaves the fitted state
    (hashed) unchanged — i.e. fitting saw training rows only."""
    from dataclasses import replace

    samples = dataset.samples
    if splitter == "kfold":
        fold = kfold_split(len(samples), k=k, seed=seed)[0]
    else:
        fold = loso_split(dataset)[0]
    train_samples = [samples[i] for i in fold.train_idx]
    h1 = pipeline.state_hash(pipeline.fit(train_samples, dataset.feature_names, seed=_fold_seed(seed, 0)))

    rng = np.random.default_rng(seed + 1)
    noisy = list(samples)
    for i in fold.test_idx:
        noisy[i] = replace(samples[i], y=int(rng.integers(0, 11)))
    train_again = [noisy[i] for i in fold.train_idx]
    h2 = pipeline.state_hash(pipeline.fit(train_again, dataset.feature_names, seed=_fold_seed(seed, 0)))
    return h1 == h2


def write_report_files(report: CvReport, outdir):
    """report.json + scatter.csv (y, predictions) + importance.csv."""
    import os

    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(report.to_json())
        f.write("\n")
    with open(os.path.join(outdir, "scatter.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("subject_id,date,period,fold,y,y_raw,y_clipped\n")
        for p in report.predictions:
            f.write(f"{p['subject_id']},{p['date']},{p['period']},{p['fold']},"
                    f"{p['y']},{p['y_raw']!r},{p['y_clipped']!r}\n")
    with open(os.path.join(outdir, "importance.csv"), "w", encoding="utf-8", newline="\n") as f:
        f.write("name,frequency,mean_abs_weight\n")
        for row in report.importance:
            f.write(f"{row['name']},{row['frequency']!r},{row['mean_abs_weight']!r}\n")
