"""Sequence models for the deep path: an LSTM encoder with three heads —
last-hidden-state readout, scaled dot-product self-attention, and
self-attention trained with a total-variation consistency penalty.

Everything runs in float64 numpy with hand-written backprop so gradients can
be checked against central finite differences (see ``grad_check``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ShapeError, TrainingError

VARIANTS = ("lstm", "lstm_sa", "lstm_csa")

CHECKPOINT_VERSION = 1

DEFAULT_HIDDEN = 128
DEFAULT_ATTN = 128
DEFAULT_LAMBDA_CSA = 0.1
DEFAULT_LR = 1e-3
DEFAULT_EPOCHS = 100
DEFAULT_PATIENCE = 10
DEFAULT_CLIP_NORM = 5.0
VAL_FRACTION = 0.1


def _sigmoid(z):
    # split on sign so exp never sees a large positive argument
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class AttentionTrace:
    alpha: np.ndarray  # T attention weights, nonnegative, summing to 1
    z: np.ndarray  # attended D_a representation


@dataclass
class SeqModel:
    variant: str
    params: dict  # name -> ndarray, keys fixed by _param_order
    hidden_size: int
    attn_size: int
    lambda_csa: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    feature_names: list = field(default_factory=list)

    def to_json(self):
        return json.dumps({
            "format_version": CHECKPOINT_VERSION,
            "variant": self.variant,
            "hidden_size": self.hidden_size,
            "attn_size": self.attn_size,
            "lambda_csa": self.lambda_csa,
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "feature_names": self.feature_names,
            "params": {k: v.tolist() for k, v in self.params.items()},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        if d.get("format_version") != CHECKPOINT_VERSION:
            raise InputError(f"unsupported checkpoint version {d.get('format_version')!r}")
        return cls(
            variant=d["variant"],
            params={k: np.asarray(v, dtype=np.float64) for k, v in d["params"].items()},
            hidden_size=int(d["hidden_size"]),
            attn_size=int(d["attn_size"]),
            lambda_csa=float(d["lambda_csa"]),
            feature_means=np.asarray(d["feature_means"], dtype=np.float64),
            feature_stds=np.asarray(d["feature_stds"], dtype=np.float64),
            feature_names=list(d["feature_names"]),
        )


def _param_order(variant):
    names = ["w_x", "w_h", "b"]
    if variant in ("lstm_sa", "lstm_csa"):
        names += ["w_q", "w_k", "w_v"]
    return names + ["w_r", "b_r"]


def init_params(variant, n_features, hidden_size, attn_size, rng):
    """Uniform(-1/sqrt(H), +1/sqrt(H)) weights; forget-gate bias raised by 1."""
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}")
    h, d, a = hidden_size, n_features, attn_size
    s = 1.0 / np.sqrt(h)

    def u(*shape):
        return rng.uniform(-s, s, shape)

    params = {"w_x": u(4 * h, d), "w_h": u(4 * h, h), "b": u(4 * h)}
    params["b"][h:2 * h] += 1.0
    if variant in ("lstm_sa", "lstm_csa"):
        params["w_q"] = u(a, h)
        params["w_k"] = u(a, h)
        params["w_v"] = u(a, h)
        params["w_r"] = u(a)
    else:
        params["w_r"] = u(h)
    params["b_r"] = np.zeros(1)
    return params


def lstm_forward(X, params):
    """Run the LSTM over X (T x D); returns all hidden states plus the gate
    cache needed by backprop. Zero initial state; gates i, f, o sigmoid and
    candidate tanh."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError("input must be T x D with T >= 1")
    w_x, w_h, b = params["w_x"], params["w_h"], params["b"]
    h4 = w_x.shape[0]
    if h4 % 4 or w_x.shape[1] != X.shape[1] or w_h.shape != (h4, h4 // 4):
        raise ShapeError("LSTM parameter shapes do not match the input")
    h = h4 // 4
    t_len = X.shape[0]

    pre = X @ w_x.T + b  # (T, 4H); recurrent term added stepwise
    I = np.empty((t_len, h)); F = np.empty((t_len, h))
    O = np.empty((t_len, h)); G = np.empty((t_len, h))
    C = np.empty((t_len, h)); TC = np.empty((t_len, h)); H = np.empty((t_len, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in range(t_len):
        a = pre[t] + w_h @ h_prev
        I[t] = _sigmoid(a[:h])
        F[t] = _sigmoid(a[h:2 * h])
        O[t] = _sigmoid(a[2 * h:3 * h])
        G[t] = np.tanh(a[3 * h:])
        C[t] = F[t] * c_prev + I[t] * G[t]
        TC[t] = np.tanh(C[t])
        H[t] = O[t] * TC[t]
        h_prev, c_prev = H[t], C[t]
    cache = {"X": X, "I": I, "F": F, "O": O, "G": G, "C": C, "TC": TC, "H": H}
    return H, cache


def lstm_backward(dH, params, cache):
    """BPTT: gradient of a scalar loss w.r.t. LSTM parameters, given the
    upstream gradient on every hidden state."""
    X, I, F, O, G, C, TC, H = (cache[k] for k in ("X", "I", "F", "O", "G", "C", "TC", "H"))
    w_h = params["w_h"]
    t_len, h = H.shape
    dW_x = np.zeros_like(params["w_x"])
    dW_h = np.zeros_like(w_h)
    db = np.zeros_like(params["b"])
    dc_next = np.zeros(h)
    dh_rec = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        dh = dH[t] + dh_rec
        do = dh * TC[t]
        dc = dc_next + dh * O[t] * (1.0 - TC[t] ** 2)
        c_prev = C[t - 1] if t > 0 else np.zeros(h)
        df = dc * c_prev
        di = dc * G[t]
        dg = dc * I[t]
        dc_next = dc * F[t]
        da = np.concatenate([
            di * I[t] * (1.0 - I[t]),
            df * F[t] * (1.0 - F[t]),
            do * O[t] * (1.0 - O[t]),
            dg * (1.0 - G[t] ** 2),
        ])
        h_prev = H[t - 1] if t > 0 else np.zeros(h)
        dW_x += np.outer(da, X[t])
        dW_h += np.outer(da, h_prev)
        db += da
        dh_rec = w_h.T @ da
    return dW_x, dW_h, db


def self_attention(H, params):
    """Eq.-style scaled dot-product attention over the hidden states.

    K, Q, V are linear maps of H; the score of step t is key_t . q_T /
    sqrt(D_a) with q_T the query of the last step; alpha is the softmax
    (max-subtracted for stability) and z = V^T alpha.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ShapeError("attention needs a nonempty T x D_l matrix")
    w_q, w_k, w_v = params["w_q"], params["w_k"], params["w_v"]
    d_a = w_q.shape[0]
    K = H @ w_k.T  # (T, D_a)
    V = H @ w_v.T
    q_T = w_q @ H[-1]
    s = (K @ q_T) / np.sqrt(d_a)
    s = s - np.max(s)
    e = np.exp(s)
    alpha = e / np.sum(e)
    z = V.T @ alpha
    cache = {"H": H, "K": K, "V": V, "q_T": q_T, "alpha": alpha, "d_a": d_a}
    return AttentionTrace(alpha=alpha, z=z), cache


def attention_backward(dz, dalpha_extra, params, cache):
    """Gradients through z = V^T alpha and the softmax attention scores.

    ``dalpha_extra`` carries any loss term that touches alpha directly
    (the consistency penalty); pass zeros otherwise.
    """
    H, K, V, q_T, alpha, d_a = (cache[k] for k in ("H", "K", "V", "q_T", "alpha", "d_a"))
    w_q, w_k, w_v = params["w_q"], params["w_k"], params["w_v"]
    dV = np.outer(alpha, dz)
    dalpha = V @ dz + dalpha_extra
    ds = alpha * (dalpha - float(alpha @ dalpha))  # softmax Jacobian-vector
    scale = 1.0 / np.sqrt(d_a)
    dK = np.outer(ds, q_T) * scale
    dq = (K.T @ ds) * scale
    dW_k = dK.T @ H
    dW_v = dV.T @ H
    dW_q = np.outer(dq, H[-1])
    dH = dK @ w_k + dV @ w_v
    dH[-1] += w_q.T @ dq
    return dW_q, dW_k, dW_v, dH


def csa_penalty(alpha):
    """Total-variation consistency penalty: T * sum_t |alpha_t - alpha_{t-1}|
    (the first weight has no predecessor). Zero iff alpha is constant."""
    alpha = np.asarray(alpha, dtype=np.float64)
    t = alpha.size
    if t < 2:
        return 0.0
    return float(t * np.sum(np.abs(np.diff(alpha))))


def _csa_grad(alpha):
    t = alpha.size
    g = np.zeros(t)
    if t < 2:
        return g
    sgn = np.sign(np.diff(alpha))
    g[1:] += sgn
    g[:-1] -= sgn
    return t * g


def loss(y_hat, y, alpha=None, variant="lstm", lambda_csa=0.0):
    """Per-sample squared error, plus the weighted consistency penalty for
    the csa variant."""
    diff = np.float64(y_hat) - np.float64(y)  # inf rather than OverflowError
    value = float(diff * diff)
    if variant == "lstm_csa" and alpha is not None:
        value += lambda_csa * csa_penalty(alpha)
    return value


def _standardize(X, means, stds):
    sd = np.where(stds > 0, stds, 1.0)
    return (np.asarray(X, dtype=np.float64) - means) / sd


def forward(params, X, variant):
    """Prediction pass on an already-standardized sequence."""
    H, lstm_cache = lstm_forward(X, params)
    if variant == "lstm":
        y_hat = float(params["w_r"] @ H[-1] + params["b_r"][0])
        return y_hat, None, {"lstm": lstm_cache}
    trace, attn_cache = self_attention(H, params)
    y_hat = float(params["w_r"] @ trace.z + params["b_r"][0])
    return y_hat, trace, {"lstm": lstm_cache, "attn": attn_cache}


def backward(params, caches, y_hat, y, variant, lambda_csa):
    """Gradients of the full per-sample loss for every parameter."""
    dy = 2.0 * (y_hat - y)
    grads = {}
    if variant == "lstm":
        h_last = caches["lstm"]["H"][-1]
        grads["w_r"] = dy * h_last
        grads["b_r"] = np.array([dy])
        dH = np.zeros_like(caches["lstm"]["H"])
        dH[-1] = dy * params["w_r"]
    else:
        attn_cache = caches["attn"]
        alpha = attn_cache["alpha"]
        z = attn_cache["V"].T @ alpha
        grads["w_r"] = dy * z
        grads["b_r"] = np.array([dy])
        dz = dy * params["w_r"]
        dalpha_extra = (
            lambda_csa * _csa_grad(alpha) if variant == "lstm_csa" else np.zeros_like(alpha)
        )
        grads["w_q"], grads["w_k"], grads["w_v"], dH = attention_backward(
            dz, dalpha_extra, params, attn_cache
        )
    grads["w_x"], grads["w_h"], grads["b"] = lstm_backward(dH, params, caches["lstm"])
    return grads


def predict_seq(model: SeqModel, X):
    """(raw prediction, attention trace or None) for one raw feature sequence."""
    Xs = _standardize(X, model.feature_means, model.feature_stds)
    if Xs.shape[1] != model.params["w_x"].shape[1]:
        raise ShapeError("feature width does not match the fitted model")
    y_hat, trace, _ = forward(model.params, Xs, model.variant)
    return y_hat, trace


@dataclass
class TrainConfig:
    variant: str = "lstm_csa"
    hidden_size: int = DEFAULT_HIDDEN
    attn_size: int = DEFAULT_ATTN
    lambda_csa: float = DEFAULT_LAMBDA_CSA
    lr: float = DEFAULT_LR
    epochs: int = DEFAULT_EPOCHS
    patience: int = DEFAULT_PATIENCE
    clip_norm: float = DEFAULT_CLIP_NORM
    seed: int = 0


def train(dataset, config: TrainConfig):
    """Train a sequence model with per-sample adaptive-moment updates.

    Batch size is 1 (sequences keep their native lengths); gradients are
    clipped at ``clip_norm`` global norm; early stopping watches MAE on a
    held-out 10% validation split and restores the best parameters.
    Returns (SeqModel, training log rows).
    """
    samples = list(dataset.samples)
    if len(samples) < 2:
        raise InputError("training needs at least 2 samples")
    if config.variant not in VARIANTS:
        raise InputError(f"unknown variant {config.variant!r}")

    rng = np.random.default_rng(config.seed)
    n = len(samples)
    n_val = max(1, int(round(VAL_FRACTION * n)))
    order = rng.permutation(n)
    val_idx, train_idx = order[:n_val], order[n_val:]

    stack = np.vstack([samples[i].X for i in train_idx])
    means = np.nanmean(stack, axis=0)
    stds = np.nanstd(stack, axis=0)
    std_train = [(_standardize(samples[i].X, means, stds), float(samples[i].y)) for i in train_idx]
    std_val = [(_standardize(samples[i].X, means, stds), float(samples[i].y)) for i in val_idx]

    d = stack.shape[1]
    params = init_params(config.variant, d, config.hidden_size, config.attn_size, rng)
    keys = _param_order(config.variant)
    adam_m = {k: np.zeros_like(params[k]) for k in keys}
    adam_v = {k: np.zeros_like(params[k]) for k in keys}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best_params = {k: params[k].copy() for k in keys}
    stale = 0
    log = []

    for epoch in range(config.epochs):
        total = 0.0
        for i in rng.permutation(len(std_train)):
            X, y = std_train[i]
            y_hat, trace, caches = forward(params, X, config.variant)
            alpha = trace.alpha if trace is not None else None
            sample_loss = loss(y_hat, y, alpha, config.variant, config.lambda_csa)
            if not np.isfinite(sample_loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            total += sample_loss
            grads = backward(params, caches, y_hat, y, config.variant, config.lambda_csa)
            gnorm = np.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in keys))
            if config.clip_norm > 0 and gnorm > config.clip_norm:
                scale = config.clip_norm / gnorm
                for k in keys:
                    grads[k] = grads[k] * scale
            step += 1
            for k in keys:
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                m_hat = adam_m[k] / (1 - beta1**step)
                v_hat = adam_v[k] / (1 - beta2**step)
                params[k] = params[k] - config.lr * m_hat / (np.sqrt(v_hat) + eps)
        train_loss = total / len(std_train)
        val_mae = float(np.mean([
            abs(forward(params, X, config.variant)[0] - y) for X, y in std_val
        ]))
        if not np.isfinite(train_loss) or not np.isfinite(val_mae):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        log.append({"epoch": epoch, "train_loss": train_loss, "val_mae": val_mae})
        if val_mae < best_val:
            best_val = val_mae
            best_params = {k: params[k].copy() for k in keys}
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    model = SeqModel(
        variant=config.variant,
        params=best_params,
        hidden_size=config.hidden_size,
        attn_size=config.attn_size,
        lambda_csa=config.lambda_csa if config.variant == "lstm_csa" else 0.0,
        feature_means=means,
        feature_stds=stds,
        feature_names=list(getattr(dataset, "feature_names", [])),
    )
    return model, log


def write_training_log(log, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch,train_loss,val_mae\n")
        for row in log:
            f.write(f"{row['epoch']},{row['train_loss']!r},{row['val_mae']!r}\n")


def grad_check(model: SeqModel, X, y, eps=1e-5):
    """Max relative error between BPTT and central finite differences over
    every parameter of the full loss (CSA term included). Relative error
    uses max(|analytic|, |numeric|, 1e-12) as the denominator. Keep the
    dimensions small; the sweep is quadratic in parameter count."""
    params = model.params
    variant = model.variant
    lam = model.lambda_csa if variant == "lstm_csa" else 0.0
    Xs = _standardize(X, model.feature_means, model.feature_stds)

    def full_loss():
        y_hat, trace, _ = forward(params, Xs, variant)
        alpha = trace.alpha if trace is not None else None
        return loss(y_hat, y, alpha, variant, lam)

    y_hat, trace, caches = forward(params, Xs, variant)
    grads = backward(params, caches, y_hat, y, variant, lam)

    worst = 0.0
    for k in _param_order(variant):
        flat = params[k].reshape(-1)
        gflat = grads[k].reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = full_loss()
            flat[idx] = orig - eps
            down = full_loss()
            flat[idx] = orig
            numeric = (up - down) / (2 * eps)
            denom = max(abs(gflat[idx]), abs(numeric), 1e-12)
            worst = max(worst, abs(gflat[idx] - numeric) / denom)
    return worst


def grad_check_random(variant, n_features=3, hidden_size=4, attn_size=4, t_len=5,
                      lambda_csa=0.7, seed=0, eps=1e-5):
    """grad_check on a freshly initialized model and a random sequence.

    The target sits one unit from the initial prediction so the loss is O(1):
    finite-difference roundoff scales with |loss|/eps and would otherwise
    swamp legitimately tiny gradient entries.
    """
    rng = np.random.default_rng(seed)
    params = init_params(variant, n_features, hidden_size, attn_size, rng)
    X = rng.normal(0.0, 1.0, (t_len, n_features))
    model = SeqModel(
        variant=variant, params=params, hidden_size=hidden_size, attn_size=attn_size,
        lambda_csa=lambda_csa if variant == "lstm_csa" else 0.0,
        feature_means=np.zeros(n_features), feature_stds=np.ones(n_features),
    )
    y = forward(params, X, variant)[0] - 1.0
    return grad_check(model, X, y, eps=eps)
