"""Linear models for the interpretable path: OLS and a cyclic
coordinate-descent LASSO with soft-thresholding."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InputError, SchemaError

LASSO_TOL = 1e-7
LASSO_MAX_SWEEPS = 10_000
SCORE_MIN, SCORE_MAX = 0.0, 10.0


@dataclass
class LinearModel:
    weights: np.ndarray  # original-feature-space weights
    intercept: float
    feature_names: list
    means: np.ndarray  # per-feature standardization constants used in fitting
    stds: np.ndarray  # 0 marks a constant feature (forced to zero weight)

    def to_json(self):
        return json.dumps({
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "feature_names": self.feature_names,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            intercept=float(d["intercept"]),
            feature_names=list(d["feature_names"]),
            means=np.asarray(d["means"], dtype=np.float64),
            stds=np.asarray(d["stds"], dtype=np.float64),
        )


def fit_ols(X, y, feature_names=None) -> LinearModel:
    """Least squares via SVD (minimum-norm on rank-deficient designs).

    Columns are standardized internally for conditioning; the returned
    weights live in the original feature space. Constant columns get zero
    weight and the intercept absorbs the mean.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("OLS needs a non-empty n x p design")
    n, p = X.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise SchemaError("feature_names length must match design width")

    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 0
    w = np.zeros(p)
    y_mean = float(np.mean(y))
    if np.any(live):
        Z = (X[:, live] - mu[live]) / sd[live]
        w_std, *_ = np.linalg.lstsq(Z, y - y_mean, rcond=None)
        w[live] = w_std / sd[live]
    intercept = y_mean - float(np.dot(w, mu))
    return LinearModel(weights=w, intercept=intercept, feature_names=names,
                       means=mu, stds=sd)


def _check_standardized(X, y):
    n = X.shape[0]
    if np.max(np.abs(X.mean(axis=0))) > 1e-6 or np.max(np.abs(X.std(axis=0) - 1.0)) > 1e-6:
        raise ContractError("lasso_fit expects zero-mean unit-variance columns")
    if abs(float(np.mean(y))) > 1e-6:
        raise ContractError("lasso_fit expects centered y")
    return n


def _gram_stats(X, y):
    """(G, c, yty) for covariance-form coordinate descent.

    c uses the same per-column dots as lambda_max so the KKT zeroing at
    lam = lambda_max is exact, not off by an ulp.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    n = X.shape[0]
    G = (X.T @ X) / n
    c = np.array([float(X[:, j] @ y) for j in range(X.shape[1])]) / n
    return G, c, float(y @ y) / n


def _cd_sweeps(G, c, w, lam, tol, max_sweeps):
    """Cyclic coordinate descent in covariance form (numba-compilable).

    rho_j = w_j + c_j - (G w)_j is tracked incrementally; each changed
    coordinate costs one length-p axpy. Converged when a full cyclic sweep
    moves no weight by more than tol; between full sweeps, sweeps over the
    current active set do the bulk of the work. The soft threshold is
    written with branches; sign(rho)*max(|rho|-lam, 0) gives the same bits.
    """
    p = c.size
    g = c - G @ w if w.any() else c.copy()
    active = np.empty(p, dtype=np.int64)
    sweeps_left = max_sweeps
    while sweeps_left > 0:
        delta = 0.0
        for j in range(p):
            wj = w[j]
            rho = wj + g[j]
            if rho > lam:
                wj_new = rho - lam
            elif rho < -lam:
                wj_new = rho + lam
            else:
                wj_new = 0.0
            if wj_new != wj:
                g -= G[:, j] * (wj_new - wj)
                w[j] = wj_new
                d = abs(wj_new - wj)
                if d > delta:
                    delta = d
        sweeps_left -= 1
        if delta < tol:
            break
        na = 0
        for j in range(p):
            if w[j] != 0.0:
                active[na] = j
                na += 1
        while sweeps_left > 0 and 0 < na < p:
            sweeps_left -= 1
            d2 = 0.0
            for k in range(na):
                j = active[k]
                wj = w[j]
                rho = wj + g[j]
                if rho > lam:
                    wj_new = rho - lam
                elif rho < -lam:
                    wj_new = rho + lam
                else:
                    wj_new = 0.0
                if wj_new != wj:
                    g -= G[:, j] * (wj_new - wj)
                    w[j] = wj_new
                    d = abs(wj_new - wj)
                    if d > d2:
                        d2 = d
            if d2 < tol:
                break
    return w


try:  # optional JIT; the interpreted kernel is bit-identical, just slower
    from numba import njit

    _cd_sweeps_fast = njit(cache=True)(_cd_sweeps)
except ImportError:  # pragma: no cover - exercised only without numba
    _cd_sweeps_fast = _cd_sweeps


def _cd_solve(G, c, yty, lam, w, tol, max_sweeps, debug):
    if not debug:
        return _cd_sweeps_fast(G, c, w, lam, tol, max_sweeps)
    # debug mode re-runs the kernel one full sweep at a time, asserting the
    # objective never increases
    obj_prev = np.inf
    for _ in range(max_sweeps):
        before = w.copy()
        _cd_sweeps(G, c, w, lam, np.inf, 1)  # exactly one full sweep
        obj = 0.5 * float(w @ G @ w) - float(c @ w) + 0.5 * yty + lam * float(np.sum(np.abs(w)))
        assert obj <= obj_prev + 1e-12, "coordinate descent objective increased"
        obj_prev = obj
        if np.max(np.abs(w - before)) < tol:
            break
    return w


def lasso_fit(X, y, lam, w0=None, tol=LASSO_TOL, max_sweeps=LASSO_MAX_SWEEPS, debug=False):
    """Minimize (1/2n)||y - Xw||^2 + lam*||w||_1 by cyclic coordinate descent.

    Requires standardized columns and centered y (checked to 1e-6). With
    unit-variance columns each coordinate update is the exact soft-threshold
    w_j = S(w_j + x_j.(r)/n, lam). ``w0`` warm-starts the solve.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_standardized(X, y)
    G, c, yty = _gram_stats(X, y)
    w = np.zeros(c.size) if w0 is None else np.array(w0, dtype=np.float64)
    return _cd_solve(G, c, yty, lam, w, tol, max_sweeps, debug)


def lambda_max(X, y):
    """Smallest penalty that zeroes every weight (KKT bound).

    Uses the same per-column dot products as the descent setup so that
    lasso_fit(X, y, lambda_max(X, y)) is exactly zero, not zero up to one ulp.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    return max(abs(float(X[:, j] @ y)) for j in range(X.shape[1])) / X.shape[0]


def lasso_path(X, y, lambdas, debug=False):
    """Weights for a decreasing penalty grid, warm-starting along the path."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if np.any(np.diff(lambdas) > 0):
        raise InputError("lambda grid must be non-increasing")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_standardized(X, y)
    G, c, yty = _gram_stats(X, y)
    w = np.zeros(X.shape[1])
    out = np.empty((lambdas.size, X.shape[1]))
    for i, lam in enumerate(lambdas):
        w = _cd_solve(G, c, yty, lam, w, LASSO_TOL, LASSO_MAX_SWEEPS, debug)
        out[i] = w
    return out


def predict(model: LinearModel, X, feature_names=None):
    """Raw predictions X @ w + b; clip with clip_scores at reporting time."""
    X = np.asarray(X, dtype=np.float64)
    if feature_names is not None and list(feature_names) != model.feature_names:
        raise SchemaError("feature names do not match the fitted model")
    if X.shape[1] != len(model.weights):
        raise SchemaError("design width does not match the fitted model")
    return X @ model.weights + model.intercept


def clip_scores(y_hat):
    """Reported scores live on the questionnaire's 0-10 scale."""
    return np.clip(y_hat, SCORE_MIN, SCORE_MAX)
