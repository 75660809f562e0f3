"""Correlation-grouped feature selection with LASSO refinement.

Five steps on the high-level training matrix: (1) all-pairs feature
correlations, (2) grouping |corr| > threshold into connected components,
(3) per-feature correlation with the target, (4) one champion per group by
absolute target correlation, (5) LASSO over the champions with the penalty
chosen by inner cross-validation.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InputError, SelectionError
from .linreg import lambda_max, lasso_path

DEFAULT_THRESHOLD = 0.8
LASSO_GRID_POINTS = 50
LASSO_GRID_DECADES = 4
INNER_FOLDS = 3


def correlation_matrix(Xh):
    """Pearson correlations between columns; zero-variance columns correlate
    0 with everything else and 1 with themselves."""
    Xh = np.asarray(Xh, dtype=np.float64)
    n, p = Xh.shape
    if n < 3:
        raise InputError("correlation matrix needs n >= 3 rows")
    mu = Xh.mean(axis=0)
    sd = Xh.std(axis=0)
    z = np.zeros_like(Xh)
    live = sd > 0
    z[:, live] = (Xh[:, live] - mu[live]) / sd[live]
    corr = (z.T @ z) / n
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def group_features(corr, threshold=DEFAULT_THRESHOLD):
    """Connected components of the graph with an edge iff |corr| > threshold."""
    corr = np.asarray(corr)
    p = corr.shape[0]
    adj = np.abs(corr) > threshold
    seen = np.zeros(p, dtype=bool)
    groups = []
    for start in range(p):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in np.flatnonzero(adj[u] & ~seen):
                seen[v] = True
                stack.append(int(v))
        groups.append(sorted(comp))
    return groups


def target_correlation(Xh, y):
    """Pearson correlation of each column with y; zero variance gives 0."""
    Xh = np.asarray(Xh, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sd_y = y.std()
    sd_x = Xh.std(axis=0)
    out = np.zeros(Xh.shape[1])
    if sd_y == 0:
        return out
    live = sd_x > 0
    yc = (y - y.mean()) / sd_y
    out[live] = ((Xh[:, live] - Xh[:, live].mean(axis=0)) / sd_x[live]).T @ yc / len(y)
    return np.clip(out, -1.0, 1.0)


def select_champions(groups, target_corr):
    """Per group, the member with the largest |target correlation|;
    ties go to the lowest index."""
    target_corr = np.asarray(target_corr)
    champions = []
    for g in groups:
        strengths = np.abs(target_corr[g])
        champions.append(g[int(np.argmax(strengths))])  # argmax takes first on ties
    return champions


def _inner_folds(n, k, seed):
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, k)


def _standardize_live(M):
    """(standardized copy, live mask, means, stds) with dead columns zeroed.

    Standardizes twice: on near-constant columns one pass leaves
    catastrophic-cancellation residue big enough to break the solver's
    zero-mean/unit-variance contract, and can even turn a column exactly
    constant (then it simply drops out of the live mask).
    """
    mu = M.mean(axis=0)
    sd = M.std(axis=0)
    live = sd > 0
    Z = np.zeros_like(M, dtype=np.float64)
    Z[:, live] = (M[:, live] - mu[live]) / sd[live]
    mu2 = Z.mean(axis=0)
    sd2 = Z.std(axis=0)
    live &= sd2 > 0
    Z[:, live] = (Z[:, live] - mu2[live]) / sd2[live]
    Z[:, ~live] = 0.0
    return Z, live, mu, sd


def lasso_refine(Xc, y, k_max=None, seed=0,
                 grid_points=LASSO_GRID_POINTS, grid_decades=LASSO_GRID_DECADES,
                 inner_folds=INNER_FOLDS):
    """LASSO over the champion matrix with inner-CV penalty choice.

    Standardizes internally (training statistics), scans a ``grid_points``-
    point log grid from lambda_max down ``grid_decades`` decades, picks the
    penalty with the best mean validation MSE over ``inner_folds`` folds,
    refits on all rows, and returns (kept column positions ordered by
    |weight| descending and truncated to k_max, their weights, chosen lambda,
    standardization constants).
    """
    Xc = np.asarray(Xc, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = Xc.shape
    if p == 0:
        raise SelectionError("no champion features to refine")

    Z, live, mu, sd = _standardize_live(Xc)
    yc = y - y.mean()

    if not np.any(live):
        raise SelectionError("every champion feature is constant")
    lmax = lambda_max(Z[:, live], yc)
    if lmax == 0.0:
        raise SelectionError("target uncorrelated with every champion at every penalty")
    grid = np.logspace(np.log10(lmax), np.log10(lmax) - grid_decades, grid_points)

    folds = _inner_folds(n, min(inner_folds, n), seed)
    cv_mse = np.zeros(grid.size)
    for vi in range(len(folds)):
        val = folds[vi]
        tr = np.concatenate([folds[k] for k in range(len(folds)) if k != vi])
        Zt, live_t, _, _ = _standardize_live(Z[tr])
        if not np.any(live_t):
            cv_mse += np.mean((yc[val] - yc[tr].mean()) ** 2)
            continue
        yt = yc[tr] - yc[tr].mean()
        path = lasso_path(Zt[:, live_t], yt, grid)
        mu_t = Z[tr][:, live_t].mean(axis=0)
        sd_t = Z[tr][:, live_t].std(axis=0)  # > 0 wherever live_t holds
        Zv = (Z[val][:, live_t] - mu_t) / sd_t
        pred = Zv @ path.T + yc[tr].mean()
        cv_mse += np.mean((pred - yc[val][:, None]) ** 2, axis=0)
    best = int(np.argmin(cv_mse))
    lam = float(grid[best])

    w = np.zeros(p)
    w[live] = lasso_path(Z[:, live], yc, grid[: best + 1])[-1]
    nonzero = np.flatnonzero(w != 0.0)
    if nonzero.size == 0:
        raise SelectionError("all-zero LASSO solution at the chosen penalty")
    order = nonzero[np.argsort(-np.abs(w[nonzero]), kind="stable")]
    if k_max is not None:
        order = order[:k_max]
    return order, w[order], lam, mu, sd


class FeatureSelector:
    """Fitted state of the 5-step procedure, serializable to JSON."""

    def __init__(self, threshold=DEFAULT_THRESHOLD, k_max=None, seed=0):
        self.threshold = threshold
        self.k_max = k_max
        self.seed = seed
        self.groups = None
        self.champions = None
        self.selected = None  # original column indices, |weight| descending
        self.weights = None
        self.lam = None
        self.feature_names = None
        self.means = None
        self.stds = None

    def fit(self, Xh, y, feature_names=None):
        Xh = np.asarray(Xh, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        p = Xh.shape[1]
        self.feature_names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
        corr = correlation_matrix(Xh)
        self.groups = group_features(corr, self.threshold)
        tcorr = target_correlation(Xh, y)
        self.champions = select_champions(self.groups, tcorr)
        pos, w, lam, mu, sd = lasso_refine(Xh[:, self.champions], y, k_max=self.k_max, seed=self.seed)
        self.selected = [self.champions[i] for i in pos]
        self.weights = w
        self.lam = lam
        self.means = mu
        self.stds = sd
        return self

    @property
    def selected_names(self):
        return [self.feature_names[j] for j in self.selected]

    def to_json(self):
        return json.dumps({
            "threshold": self.threshold,
            "k_max": self.k_max,
            "seed": self.seed,
            "groups": self.groups,
            "champions": self.champions,
            "selected": self.selected,
            "weights": self.weights.tolist(),
            "lambda": self.lam,
            "feature_names": self.feature_names,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        fs = cls(threshold=d["threshold"], k_max=d["k_max"], seed=d["seed"])
        fs.groups = [list(g) for g in d["groups"]]
        fs.champions = list(d["champions"])
        fs.selected = list(d["selected"])
        fs.weights = np.asarray(d["weights"], dtype=np.float64)
        fs.lam = d["lambda"]
        fs.feature_names = list(d["feature_names"])
        fs.means = np.asarray(d["means"], dtype=np.float64)
        fs.stds = np.asarray(d["stds"], dtype=np.float64)
        return fs


def feature_importance(selectors):
    """Aggregate selection frequency and mean |weight| across fitted selectors.

    Returns [{'name', 'frequency', 'mean_abs_weight'}] ranked by
    (frequency, mean |weight|) descending; never-selected features are absent.
    """
    if not selectors:
        raise InputError("need at least one fitted selector")
    hits = {}
    for fs in selectors:
        for j, w in zip(fs.selected, fs.weights):
            name = fs.feature_names[j]
            hits.setdefault(name, []).append(abs(float(w)))
    n = len(selectors)
    rows = [
        {"name": name, "frequency": len(ws) / n, "mean_abs_weight": float(np.mean(ws))}
        for name, ws in hits.items()
    ]
    rows.sort(key=lambda r: (-r["frequency"], -r["mean_abs_weight"], r["name"]))
    return rows
