"""QUBO matrices, the FM -> QUBO compiler and classical solvers."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError, DimensionError, SchemaError
from .fm import FMModel

BRUTE_FORCE_MAX_N = 26


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Upper-triangular Q with a constant offset; energy(x) = x^T Q x."""

    Q: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
            raise DimensionError(f"Q must be a non-empty square matrix, got shape {Q.shape}")
        if np.any(np.tril(Q, -1) != 0):
            raise SchemaError("Q must be upper triangular")
        if not (np.all(np.isfinite(Q)) and math.isfinite(self.offset)):
            raise SchemaError("Q and offset must be finite")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self):
        return self.Q.shape[0]

    def to_json(self) -> str:
        i, j = np.nonzero(self.Q)
        entries = [[int(a), int(b), float(self.Q[a, b])] for a, b in zip(i, j)]
        return json.dumps({"n": self.n, "offset": self.offset, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "QuboMatrix":
        doc = json.loads(text)
        try:
            n = int(doc["n"])
            Q = np.zeros((n, n))
            for i, j, v in doc["entries"]:
                if not (0 <= i <= j < n):
                    raise SchemaError(f"entry ({i}, {j}) is not upper-triangular inside n={n}")
                Q[i, j] += v
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad QUBO JSON: {exc}") from None
        return cls(Q, doc.get("offset", 0.0))


@dataclass
class Solution:
    bits: np.ndarray
    energy: float
    solver: str
    elapsed: float = 0.0
    evaluations: int = 0
    accuracy: float | None = None
    accuracy_mode: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        doc = {
            "bits": bits_to_str(self.bits),
            "energy": self.energy,
            "accuracy": self.accuracy,
            "solver": self.solver,
            "elapsed_s": self.elapsed,
            "evaluations": self.evaluations,
        }
        if self.accuracy_mode is not None:
            doc["accuracy_mode"] = self.accuracy_mode
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def str_to_bits(text: str) -> np.ndarray:
    if set(text) - {"0", "1"}:
        raise SchemaError(f"bit string may only contain 0/1, got {text!r}")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def from_fm(model: FMModel) -> QuboMatrix:
    """Diagonal carries the linear weights, the strict upper triangle the
    latent inner products; x_i^2 = x_i makes the self-interaction vanish."""
    Q = np.triu(model.V @ model.V.T, 1) + np.diag(model.w)
    return QuboMatrix(Q, model.w0)


def energy(q: QuboMatrix, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (q.n,):
        raise DimensionError(f"expected {q.n} bits, got shape {x.shape}")
    return float(x @ q.Q @ x)


def energies(q: QuboMatrix, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.einsum("bi,ij,bj->b", X, q.Q, X)


def enumerate_bits(n, start=0, stop=None) -> np.ndarray:
    """Rows for integers start..stop-1; bit 0 is the most significant, so row
    order equals lexicographic order of the bit vectors."""
    stop = 2**n if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


def brute_force(q: QuboMatrix, chunk: int = 1 << 20) -> Solution:
    """Exact minimizer by enumeration; ties go to the lexicographically smallest x."""
    n = q.n
    if n > BRUTE_FORCE_MAX_N:
        raise CapacityError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    t0 = time.perf_counter()
    h = n // 2
    low = n - h
    Q = q.Q
    XL = enumerate_bits(low).astype(float)
    EL = energies(QuboMatrix(Q[h:, h:]), XL)
    if h == 0:
        bits = XL[int(np.argmin(EL))]
    else:
        XH = enumerate_bits(h).astype(float)
        EH = energies(QuboMatrix(Q[:h, :h]), XH)
        cross = XH @ Q[:h, h:]
        rows = max(1, chunk // len(XL))
        best_e, best_idx = math.inf, -1
        for start in range(0, len(XH), rows):
            block = EH[start : start + rows, None] + EL[None, :] + cross[start : start + rows] @ XL.T
            i = int(np.argmin(block))
            if block.flat[i] < best_e:
                best_e, best_idx = float(block.flat[i]), start * len(XL) + i
        bits = np.concatenate([XH[best_idx // len(XL)], XL[best_idx % len(XL)]])
    bits = bits.astype(np.int8)
    # report the energy recomputed on the winning vector, not the blocked sum
    return Solution(bits, energy(q, bits), "exhaustive", time.perf_counter() - t0, 2**n)


def default_temperatures(q: QuboMatrix):
    """Hot enough to flip any single bit freely, cold enough to freeze."""
    sym = q.Q + q.Q.T - np.diag(np.diag(q.Q))
    scale = float(np.max(np.abs(sym).sum(axis=1)))
    scale = scale if scale > 0 else 1.0
    return scale, scale * 1e-3


def simulated_annealing(q: QuboMatrix, sweeps: int = 200, t_hot=None, t_cold=None, seed=0, restarts: int = 1, trace=None) -> Solution:
    """Single-flip Metropolis with a geometric temperature schedule.

    ``restarts`` independent chains run side by side; the best state ever
    visited by any chain is returned.  ``trace`` (a list) receives the
    best-ever energy after every sweep.
    """
    if t_hot is None or t_cold is None:
        dh, dc = default_temperatures(q)
        t_hot = dh if t_hot is None else t_hot
        t_cold = dc if t_cold is None else t_cold
    if not (t_cold > 0 and t_cold <= t_hot):
        raise ConfigError(f"need 0 < t_cold <= t_hot, got t_hot={t_hot}, t_cold={t_cold}")
    if sweeps < 1 or restarts < 1:
        raise ConfigError("sweeps and restarts must be positive")
    t0 = time.perf_counter()
    n = q.n
    rng = np.random.default_rng(seed)
    diag = np.diag(q.Q).copy()
    coup = q.Q + q.Q.T
    np.fill_diagonal(coup, 0.0)

    x = rng.integers(0, 2, size=(restarts, n)).astype(float)
    field_ = x @ coup  # sum_j coup_ij x_j
    e = np.einsum("ri,ij,rj->r", x, q.Q, x)
    best_e = e.copy()
    best_x = x.copy()
    temps = np.geomspace(t_hot, t_cold, sweeps) if sweeps > 1 else np.array([t_cold])
    for temp in temps:
        u = np.log(rng.random((n, restarts)))
        for i in range(n):
            xi = x[:, i]
            delta = (1.0 - 2.0 * xi) * (diag[i] + field_[:, i])
            accept = (delta <= 0) | (u[i] < -delta / temp)
            if accept.any():
                step = np.where(accept, 1.0 - 2.0 * xi, 0.0)
                x[:, i] += step
                e += np.where(accept, delta, 0.0)
                field_ += step[:, None] * coup[i][None, :]
                better = e < best_e
                if better.any():
                    best_e[better] = e[better]
                    best_x[better] = x[better]
        if trace is not None:
            trace.append(float(best_e.min()))
    # exact recomputation removes drift from the incremental energy updates
    exact = np.einsum("ri,ij,rj->r", best_x, q.Q, best_x)
    winner = min(range(restarts), key=lambda r: (exact[r], tuple(best_x[r])))
    bits = best_x[winner].astype(np.int8)
    return Solution(
        bits,
        energy(q, bits),
        "annealing",
        time.perf_counter() - t0,
        sweeps * n * restarts,
        extra={"sweeps": sweeps, "restarts": restarts, "t_hot": t_hot, "t_cold": t_cold},
    )


def accuracy_mode(found: float, optimum: float) -> str:
    if optimum == 0 or (found != 0 and math.copysign(1, found) != math.copysign(1, optimum)):
        return "gap"
    return "ratio"


def accuracy(found: float, optimum: float) -> float:
    """found / optimum; when the ratio is meaningless (optimum 0 or opposite
    signs) falls back to 1 / (1 + |found - optimum|)."""
    if found == optimum:
        return 1.0
    if accuracy_mode(found, optimum) == "gap":
        value = 1.0 / (1.0 + abs(found - optimum))
    else:
        value = found / optimum
    # keep "1.0 iff equal" exact when rounding collapses a tiny difference
    return math.nextafter(1.0, 0.0) if value == 1.0 else value


def random_qubo(n: int, seed=0) -> QuboMatrix:
    if not 1 <= n <= 32:
        raise ConfigError(f"random instances support 1 <= n <= 32, got {n}")
    rng = np.random.default_rng(seed)
    return QuboMatrix(np.triu(rng.uniform(-1.0, 1.0, size=(n, n))))
