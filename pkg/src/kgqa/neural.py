"""Small double-precision autodiff-free kernel.

Frozen embeddings, a one-layer bidirectional LSTM, batch normalization,
Adam/AMSGrad, plateau schedules and a finite-difference gradient checker.
Every forward function returns a cache consumed by its backward twin.
Parameters are plain ``dict[str, np.ndarray]`` blocks so optimizers and
checkpoints can treat all models uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

DTYPE = np.float64


class NonFiniteError(FloatingPointError):
    """Raised when a loss or gradient block stops being finite."""


# --------------------------------------------------------------------------
# embeddings


class EmbeddingTable:
    """Frozen word vectors; unknown tokens map to the mean vector."""

    def __init__(self, words: list[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=DTYPE)
        if vectors.ndim != 2 or len(words) != vectors.shape[0] or not len(words):
            raise ValueError("embedding table needs one row per word and at least one row")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding vectors must be finite")
        self.vocab = {w: i for i, w in enumerate(words)}
        self.words = list(words)
        self.vectors = vectors
        self.vectors.setflags(write=False)
        self.unk_vector = vectors.mean(axis=0)
        self.unk_vector.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.vocab

    def embed(self, tokens) -> np.ndarray:
        out = np.empty((len(tokens), self.dim), dtype=DTYPE)
        for i, tok in enumerate(tokens):
            row = self.vocab.get(tok)
            out[i] = self.unk_vector if row is None else self.vectors[row]
        return out


def read_embeddings(path, keep: Optional[Iterable[str]] = None) -> EmbeddingTable:
    """Parse a ``word v1 ... vD`` text file (GloVe/FastText layout).

    A leading ``count dim`` header is skipped. When ``keep`` is given, only
    those words are retained; the unknown vector is then the mean of the
    retained rows.
    """
    keep = set(keep) if keep is not None else None
    words, rows = [], []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) < 2:
                continue
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            if keep is not None and parts[0] not in keep:
                continue
            words.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise ValueError(f"{path}: no embedding rows")
    return EmbeddingTable(words, np.array(rows, dtype=DTYPE))


# --------------------------------------------------------------------------
# bidirectional LSTM


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_bilstm(rng: np.random.Generator, d_in: int, hidden: int, scale=0.1) -> dict:
    params = {}
    for side in ("fw", "bw"):
        params[f"{side}_W"] = rng.uniform(-scale, scale, (4 * hidden, d_in))
        params[f"{side}_U"] = rng.uniform(-scale, scale, (4 * hidden, hidden))
        params[f"{side}_b"] = rng.uniform(-scale, scale, 4 * hidden)
    return params


def _lstm_forward(W, U, b, X):
    n, H = X.shape[0], U.shape[1]
    h = np.zeros(H)
    c = np.zeros(H)
    hs = np.empty((n, H))
    steps = []
    pre_x = X @ W.T + b
    for t in range(n):
        z = pre_x[t] + U @ h
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        o = _sigmoid(z[2 * H:3 * H])
        g = np.tanh(z[3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[t] = h
        steps.append((i, f, o, g, c_prev, h_prev, tc))
    return hs, steps


def _lstm_backward(W, U, X, steps, dhs):
    n, H = dhs.shape
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dX = np.zeros_like(X)
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in reversed(range(n)):
        i, f, o, g, c_prev, h_prev, tc = steps[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)])
        dW += np.outer(dz, X[t])
        dU += np.outer(dz, h_prev)
        db += dz
        dX[t] = W.T @ dz
        dh_next = U.T @ dz
        dc_next = dc * f
    return dW, dU, db, dX


def bi_encode(params: dict, X: np.ndarray):
    """Run both directions over ``X`` (n x D).

    Returns ``(outputs, final, cache)`` where ``outputs`` is n x 2H
    (forward half first) and ``final`` is the concatenation of each
    direction's last hidden state.
    """
    X = np.asarray(X, dtype=DTYPE)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("bi_encode needs a non-empty n x D input")
    hf, sf = _lstm_forward(params["fw_W"], params["fw_U"], params["fw_b"], X)
    hb_rev, sb = _lstm_forward(params["bw_W"], params["bw_U"], params["bw_b"], X[::-1])
    hb = hb_rev[::-1]
    outputs = np.concatenate([hf, hb], axis=1)
    final = np.concatenate([hf[-1], hb[0]])
    return outputs, final, (X, sf, sb)


def bi_encode_backward(params: dict, cache, d_outputs=None, d_final=None):
    """Gradients for all encoder blocks plus d/dX, given upstream grads."""
    X, sf, sb = cache
    n = X.shape[0]
    H = params["fw_U"].shape[1]
    dout = np.zeros((n, 2 * H)) if d_outputs is None else np.array(d_outputs, dtype=DTYPE)
    if d_final is not None:
        dout[-1, :H] += d_final[:H]
        dout[0, H:] += d_final[H:]
    gW, gU, gb, dXf = _lstm_backward(params["fw_W"], params["fw_U"], X, sf, dout[:, :H])
    bW, bU, bb, dXb = _lstm_backward(params["bw_W"], params["bw_U"], X[::-1], sb, dout[::-1, H:])
    grads = {"fw_W": gW, "fw_U": gU, "fw_b": gb, "bw_W": bW, "bw_U": bU, "bw_b": bb}
    return grads, dXf + dXb[::-1]


# --------------------------------------------------------------------------
# batch normalization


@dataclass
class BatchNorm:
    """Per-feature batch normalization with running statistics.

    ``momentum`` weights the newest batch when updating running stats;
    running variance uses the unbiased batch variance.
    """

    dim: int
    eps: float = 1e-5
    momentum: float = 0.1
    running_mean: np.ndarray = None
    running_var: np.ndarray = None

    def __post_init__(self):
        if self.eps <= 0 or not 0 < self.momentum < 1:
            raise ValueError("batchnorm needs eps > 0 and momentum in (0, 1)")
        if self.running_mean is None:
            self.running_mean = np.zeros(self.dim)
        if self.running_var is None:
            self.running_var = np.ones(self.dim)

    @staticmethod
    def init_params(dim: int) -> dict:
        return {"bn_scale": np.ones(dim), "bn_shift": np.zeros(dim)}

    def forward(self, params: dict, X: np.ndarray, train: bool):
        scale, shift = params["bn_scale"], params["bn_shift"]
        if not train:
            xhat = (X - self.running_mean) / np.sqrt(self.running_var + self.eps)
            return scale * xhat + shift, None
        m = X.shape[0]
        if m < 2:
            raise ValueError("train-mode batch norm needs a batch of at least 2 rows")
        mu = X.mean(axis=0)
        var = X.var(axis=0)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (X - mu) * inv
        self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
        self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var * m / (m - 1)
        return scale * xhat + shift, (xhat, inv)

    @staticmethod
    def backward(params: dict, cache, dY: np.ndarray):
        xhat, inv = cache
        m = dY.shape[0]
        dscale = (dY * xhat).sum(axis=0)
        dshift = dY.sum(axis=0)
        dxhat = dY * params["bn_scale"]
        dX = inv / m * (m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        return {"bn_scale": dscale, "bn_shift": dshift}, dX


# --------------------------------------------------------------------------
# optimizers and schedules


class Adam:
    """Adam with bias correction; ``amsgrad=True`` keeps the running max
    of the second-moment estimate in the denominator."""

    def __init__(self, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, amsgrad=False):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.amsgrad = amsgrad
        self.step_count = 0
        self.m: dict = {}
        self.v: dict = {}
        self.v_max: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        """Update ``params`` in place."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient in parameter block {name!r}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
                if self.amsgrad:
                    self.v_max[name] = np.zeros_like(params[name])
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            if self.amsgrad:
                v = self.v_max[name] = np.maximum(self.v_max[name], v)
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        return {"lr": self.lr, "step": self.step_count, "amsgrad": self.amsgrad}


class Plateau:
    """Fires once the best accuracy has not strictly improved for
    ``patience`` consecutive epochs; the window restarts after firing."""

    def __init__(self, patience: int = 3):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.best = -math.inf
        self.stale = 0

    def step(self, accuracy: float) -> bool:
        if accuracy > self.best:
            self.best = accuracy
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            return True
        return False


def plateau_triggers(history, patience: int) -> list[int]:
    """1-based epochs after which a plateau action fires."""
    sched = Plateau(patience)
    return [epoch for epoch, acc in enumerate(history, 1) if sched.step(acc)]


# --------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    tolerance: float
    worst: Optional[tuple] = None
    per_block: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(loss_fn: Callable[[dict], tuple], params: dict, tolerance=1e-4, h=1e-5,
               max_coords=None, seed=0, floor=1e-6) -> GradCheckReport:
    """Compare analytic grads from ``loss_fn(params) -> (loss, grads)``
    against central differences.

    ``max_coords`` caps how many coordinates per block are probed (random
    subsample). Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = np.random.default_rng(seed)
    _, grads = loss_fn(params)
    worst = 0.0
    worst_at = None
    per_block = {}
    checked = 0
    for name in sorted(grads):
        p = params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = rng.choice(flat.size, max_coords, replace=False)
        block_worst = 0.0
        g = np.asarray(grads[name]).reshape(-1)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            lp, _ = loss_fn(params)
            flat[j] = orig - h
            lm, _ = loss_fn(params)
            flat[j] = orig
            num = (lp - lm) / (2 * h)
            err = abs(g[j] - num) / max(abs(g[j]), abs(num), floor)
            checked += 1
            block_worst = max(block_worst, err)
            if err > worst:
                worst, worst_at = err, (name, int(j), float(g[j]), float(num))
        per_block[name] = block_worst
    return GradCheckReport(worst, checked, tolerance, worst_at, per_block)
