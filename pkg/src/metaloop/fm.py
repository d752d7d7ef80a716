"""Second-order factorization machine on binary inputs.

    y(x) = w0 + sum_i w_i x_i + 1/2 sum_f [(sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2]

The pairwise term is evaluated in factored form, O(n k) per sample.  Training
is plain mini-batch gradient descent on mean squared error.  Each batch is
sharded across ``workers`` threads; partial gradient sums are reduced in a
fixed left-to-right order so results do not depend on the worker count beyond
floating-point regrouping.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, SchemaError

# Arithmetic terms touched by predict(); used by the complexity checks.
_counters = {"predict_terms": 0}


def op_counts():
    return dict(_counters)


def reset_op_counts():
    _counters["predict_terms"] = 0


@dataclass(frozen=True, eq=False)
class FMModel:
    w0: float
    w: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        V = np.array(self.V, dtype=float)
        if w.ndim != 1 or V.ndim != 2 or V.shape[0] != w.shape[0]:
            raise DimensionError(f"w has shape {w.shape}, V has shape {V.shape}")
        if w.shape[0] < 1 or V.shape[1] < 1:
            raise DimensionError("need n >= 1 and k >= 1")
        if not (np.isfinite(self.w0) and np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
            raise DimensionError("model parameters must be finite")
        w.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "w0", float(self.w0))
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "V", V)

    @property
    def n(self):
        return self.w.shape[0]

    @property
    def k(self):
        return self.V.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "k": self.k, "w0": self.w0, "w": self.w.tolist(), "V": self.V.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "FMModel":
        doc = json.loads(text)
        try:
            model = cls(doc["w0"], doc["w"], doc["V"])
        except KeyError as exc:
            raise SchemaError(f"model JSON missing field {exc}") from None
        if (model.n, model.k) != (doc.get("n", model.n), doc.get("k", model.k)):
            raise SchemaError("model JSON n/k disagree with parameter shapes")
        return model


def predict(model: FMModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"expected a length-{model.n} vector, got shape {x.shape}")
    s = x @ model.V
    sq = (x * x) @ (model.V * model.V)
    _counters["predict_terms"] += model.n * (2 * model.k + 1)
    return float(model.w0 + x @ model.w + 0.5 * np.sum(s * s - sq))


def predict_many(model: FMModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n:
        raise DimensionError(f"expected rows of length {model.n}, got shape {X.shape}")
    S = X @ model.V
    return model.w0 + X @ model.w + 0.5 * (np.sum(S * S, axis=1) - (X * X) @ np.sum(model.V**2, axis=1))


class Dataset:
    """Binary design vectors with real targets; rows are unique."""

    def __init__(self, n: int):
        if n < 1:
            raise DimensionError("bit length must be >= 1")
        self.n = n
        self._X: list[np.ndarray] = []
        self._y: list[float] = []
        self.provenance: list[str] = []
        self._seen: set[bytes] = set()

    @classmethod
    def from_arrays(cls, X, y, provenance=None):
        X = np.asarray(X)
        if X.ndim != 2:
            raise DimensionError("X must be 2-D")
        ds = cls(X.shape[1])
        provenance = provenance or ["given"] * len(X)
        if not (len(X) == len(y) == len(provenance)):
            raise DimensionError("X, y and provenance lengths differ")
        for row, target, tag in zip(X, y, provenance):
            ds.append(row, target, tag)
        return ds

    def __len__(self):
        return len(self._y)

    def __contains__(self, bits):
        return self._key(bits) in self._seen

    def _key(self, bits):
        return np.asarray(bits, dtype=np.uint8).tobytes()

    def append(self, bits, target, provenance="given"):
        bits = np.asarray(bits)
        if bits.shape != (self.n,):
            raise DimensionError(f"expected {self.n} bits, got shape {bits.shape}")
        if np.any((bits != 0) & (bits != 1)):
            raise DimensionError("dataset rows must be binary")
        key = self._key(bits)
        if key in self._seen:
            raise ValueError("duplicate bit vector")
        if not np.isfinite(target):
            raise ValueError("target must be finite")
        self._seen.add(key)
        self._X.append(bits.astype(np.uint8))
        self._y.append(float(target))
        self.provenance.append(provenance)

    @property
    def X(self) -> np.ndarray:
        return np.array(self._X, dtype=np.uint8).reshape(len(self._X), self.n)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._y, dtype=float)

    def to_csv(self) -> str:
        """``bits,fom`` rows.  Targets are stored as -FOM, so fom = -target."""
        out = io.StringIO()
        out.write("bits,fom\n")
        for row, target in zip(self._X, self._y):
            out.write(f"{''.join(map(str, row.tolist()))},{-target!r}\n")
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["bits", "fom"]:
            raise SchemaError("dataset CSV needs header bits,fom")
        body = [r for r in rows[1:] if r]
        if not body:
            raise SchemaError("dataset CSV has no rows")
        ds = None
        for r in body:
            bits = r[0].strip()
            if not bits or set(bits) - {"0", "1"}:
                raise SchemaError(f"bad bit string {bits!r}")
            ds = ds or cls(len(bits))
            ds.append(np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"), -float(r[1]), "csv")
        return ds


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 300
    batch_size: int = 64
    init_scale: float = 0.01
    seed: int = 0
    workers: int = 1
    k: int = 8

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1 or self.batch_size < 1 or self.workers < 1 or self.k < 1:
            raise ValueError("epochs, batch_size, workers and k must be positive")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be > 0")


def loss(model: FMModel, dataset) -> float:
    X, y = _arrays(dataset)
    if len(y) == 0:
        raise DimensionError("loss of an empty dataset")
    r = predict_many(model, X) - y
    return float(np.mean(r * r))


def _arrays(data):
    if isinstance(data, Dataset):
        return data.X.astype(float), data.y
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def _partial_gradients(w0, w, V, X, y):
    """Gradient sums (not means) of squared error over the rows of X."""
    S = X @ V
    pred = w0 + X @ w + 0.5 * (np.sum(S * S, axis=1) - (X * X) @ np.sum(V * V, axis=1))
    e = 2.0 * (pred - y)
    g_w0 = float(np.sum(e))
    g_w = X.T @ e
    g_V = X.T @ (e[:, None] * S) - V * ((X * X).T @ e)[:, None]
    return g_w0, g_w, g_V


def gradients(model: FMModel, batch, workers: int = 1, pool=None):
    """Batch-mean gradient of MSE with respect to (w0, w, V)."""
    X, y = _arrays(batch)
    if len(y) == 0:
        raise DimensionError("gradient of an empty batch")
    if X.shape[1] != model.n:
        raise DimensionError(f"batch rows have length {X.shape[1]}, model expects {model.n}")
    return _sharded(model.w0, model.w, model.V, X, y, workers, pool)


def _sharded(w0, w, V, X, y, workers, pool):
    m = len(y)
    if workers == 1 or m == 1:
        parts = [_partial_gradients(w0, w, V, X, y)]
    else:
        size = -(-m // workers)
        shards = [(X[i : i + size], y[i : i + size]) for i in range(0, m, size)]
        if pool is None:
            parts = [_partial_gradients(w0, w, V, xs, ys) for xs, ys in shards]
        else:
            parts = list(pool.map(lambda s: _partial_gradients(w0, w, V, *s), shards))
    g_w0, g_w, g_V = parts[0]
    g_w, g_V = g_w.copy(), g_V.copy()
    for p in parts[1:]:
        g_w0 += p[0]
        g_w += p[1]
        g_V += p[2]
    return g_w0 / m, g_w / m, g_V / m


def init_model(n, config: TrainConfig) -> FMModel:
    rng = np.random.default_rng(config.seed)
    return FMModel(0.0, np.zeros(n), rng.normal(0.0, config.init_scale, size=(n, config.k)))


def train(dataset, config: TrainConfig = TrainConfig(), history=None) -> FMModel:
    """Mini-batch gradient descent; returns the lowest full-data-loss model seen.

    ``history``, when a list, receives the full-dataset loss after each epoch.
    """
    X, y = _arrays(dataset)
    m = len(y)
    if m == 0:
        raise DimensionError("cannot train on an empty dataset")
    model = init_model(X.shape[1], config)
    rng = np.random.default_rng([config.seed, 1])
    batch = min(config.batch_size, m)
    w0, w, V = model.w0, model.w.copy(), model.V.copy()
    best, best_loss = model, loss(model, (X, y))
    lr = config.learning_rate
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(m)
            for start in range(0, m, batch):
                idx = order[start : start + batch]
                g_w0, g_w, g_V = _sharded(w0, w, V, X[idx], y[idx], config.workers, pool)
                w0 -= lr * g_w0
                w -= lr * g_w
                V -= lr * g_V
            with np.errstate(all="ignore"):
                S = X @ V
                pred = w0 + X @ w + 0.5 * (np.sum(S * S, axis=1) - (X * X) @ np.sum(V * V, axis=1))
                current = float(np.mean((pred - y) ** 2))
            if not np.isfinite(current):
                raise DivergenceError(epoch, current)
            if history is not None:
                history.append(current)
            if current < best_loss:
                best, best_loss = FMModel(w0, w, V), current
    finally:
        if pool is not None:
            pool.shutdown()
    return best
