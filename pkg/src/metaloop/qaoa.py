"""Statevector QAOA for QUBO problems.

Basis index i encodes qubit q in bit q (qubit 0 is the least significant
bit); qubit q carries QUBO variable x_q with |0> <-> x_q = 0 and spin
z_q = 1 - 2 x_q.  The cost layer is one diagonal phase pass over the
precomputed energy spectrum; the mixer applies exp(-i beta X) qubit by qubit
as in-place butterflies.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import CapacityError, ConfigError
from .qubo import BRUTE_FORCE_MAX_N, QuboMatrix, accuracy, accuracy_mode, bits_to_str, brute_force, energy, simulated_annealing

STATEVECTOR_MAX_N = 24

# Ansatz depths the reference study reports for its transpiled circuits.
REFERENCE_DEPTHS = {10: 87, 12: 105, 16: 141, 20: 177, 24: 213, 28: 249}


@dataclass(frozen=True, eq=False)
class IsingModel:
    """E(z) = constant + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j, z in {-1, +1}."""

    h: np.ndarray
    J: dict
    constant: float = 0.0

    @property
    def n(self):
        return len(self.h)

    def __post_init__(self):
        for i, j in self.J:
            if not 0 <= i < j < len(self.h):
                raise ValueError(f"coupling key ({i}, {j}) must satisfy 0 <= i < j < n")


def qubo_to_ising(q: QuboMatrix) -> IsingModel:
    d = np.diag(q.Q)
    upper = np.triu(q.Q, 1)
    h = -d / 2 - (upper.sum(axis=1) + upper.sum(axis=0)) / 4
    ii, jj = np.nonzero(upper)
    J = {(int(i), int(j)): float(upper[i, j]) / 4 for i, j in zip(ii, jj)}
    constant = q.offset + d.sum() / 2 + upper.sum() / 4
    return IsingModel(h, J, float(constant))


def ising_energy(model: IsingModel, z) -> float:
    z = np.asarray(z, dtype=float)
    e = model.constant + float(model.h @ z)
    for (i, j), c in model.J.items():
        e += c * z[i] * z[j]
    return e


def ising_diagonal(model: IsingModel) -> np.ndarray:
    """Energy of every basis state, built qubit by qubit in O(n 2^n)."""
    E = np.array([model.constant])
    J = np.zeros((model.n, model.n))
    for (i, j), c in model.J.items():
        J[i, j] = c
    for q in range(model.n):
        size = 1 << q
        idx = np.arange(size)
        f = np.full(size, model.h[q])
        for j in np.nonzero(J[:q, q])[0]:
            f += J[j, q] * (1 - 2 * ((idx >> j) & 1))
        E = np.concatenate([E + f, E - f])
    return E


def uniform_state(n: int) -> np.ndarray:
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)


def apply_cost_layer(state, diagonal, gamma):
    """Multiply amplitude i by exp(-i gamma E_i).  ``diagonal`` is either the
    energy spectrum or an IsingModel."""
    if isinstance(diagonal, IsingModel):
        diagonal = ising_diagonal(diagonal)
    return state * np.exp(-1j * gamma * diagonal)


def apply_mixer_layer(state, beta):
    n = int(state.size).bit_length() - 1
    c, s = math.cos(beta), -1j * math.sin(beta)
    out = np.array(state, dtype=complex)
    for q in range(n):
        view = out.reshape(-1, 2, 1 << q)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = c * a0 + s * a1
        view[:, 1, :] = s * a0 + c * a1
    return out


def expectation(state, diagonal) -> float:
    if isinstance(diagonal, IsingModel):
        diagonal = ising_diagonal(diagonal)
    p = state.real**2 + state.imag**2
    return float(p @ diagonal)


def index_to_bits(index: int, n: int) -> np.ndarray:
    return np.array([(index >> q) & 1 for q in range(n)], dtype=np.int8)


def bits_to_index(bits) -> int:
    return int(sum(int(b) << q for q, b in enumerate(bits)))


def sample(state, shots: int, seed=0) -> dict:
    """Histogram {bit string x_0..x_{n-1}: count} of ``shots`` measurements."""
    if shots <= 0:
        return {}
    n = int(state.size).bit_length() - 1
    p = state.real**2 + state.imag**2
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(shots, p)
    return {bits_to_str(index_to_bits(int(i), n)): int(counts[i]) for i in np.nonzero(counts)[0]}


def qaoa_state(diagonal, gammas, betas):
    n = int(len(diagonal)).bit_length() - 1
    state = uniform_state(n)
    for g, b in zip(gammas, betas):
        state = apply_cost_layer(state, diagonal, g)
        state = apply_mixer_layer(state, b)
    return state


@dataclass
class QaoaParams:
    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        self.gammas = np.asarray(self.gammas, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float)
        if len(self.gammas) != len(self.betas) or len(self.gammas) < 1:
            raise ConfigError("gammas and betas need equal length p >= 1")

    @property
    def p(self):
        return len(self.gammas)


@dataclass
class QaoaResult:
    best_bits: np.ndarray
    best_energy: float
    accuracy: float
    accuracy_mode: str
    reference: str
    reference_energy: float
    expectation_trace: list
    shots_histogram: dict
    depth_report: dict
    elapsed: float
    params: QaoaParams
    optimized_expectation: float
    uniform_expectation: float
    evaluations: int
    restart_expectations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "bits": bits_to_str(self.best_bits),
            "energy": self.best_energy,
            "accuracy": self.accuracy,
            "accuracy_mode": self.accuracy_mode,
            "reference": self.reference,
            "reference_energy": self.reference_energy,
            "solver": "qaoa",
            "elapsed_s": self.elapsed,
            "evaluations": self.evaluations,
            "gammas": self.params.gammas.tolist(),
            "betas": self.params.betas.tolist(),
            "optimized_expectation": self.optimized_expectation,
            "uniform_expectation": self.uniform_expectation,
            "expectation_trace": list(self.expectation_trace),
            "shots_histogram": dict(self.shots_histogram),
            "depth_report": dict(self.depth_report),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def run_qaoa(q: QuboMatrix, p: int = 1, shots: int = 1024, outer_budget=None, restarts: int = 5, seed=0) -> QaoaResult:
    """Optimize (gamma, beta) with Nelder-Mead, sample the optimized state and
    report its most frequent bit vector.

    Every restart starts from uniform(0, pi) angles.  The zero-angle point
    (the uniform superposition) is scored first, so the optimized
    expectation never exceeds the uniform-state expectation.
    """
    n = q.n
    if n > STATEVECTOR_MAX_N:
        raise CapacityError(f"statevector simulation limited to n <= {STATEVECTOR_MAX_N}, got {n}")
    if p < 1 or restarts < 1:
        raise ConfigError("p and restarts must be positive")
    outer_budget = 250 * p if outer_budget is None else outer_budget
    t0 = time.perf_counter()
    diag = ising_diagonal(qubo_to_ising(q))
    rng = np.random.default_rng(seed)
    trace = []
    best = {}

    def objective(theta):
        value = expectation(qaoa_state(diag, theta[:p], theta[p:]), diag)
        trace.append(value)
        # Nelder-Mead reports its final simplex; keep the best point actually probed
        if value < best["value"]:
            best["value"], best["theta"] = value, np.array(theta)
        return value

    best.update(value=math.inf, theta=None)
    uniform_value = objective(np.zeros(2 * p))
    best_theta, best_value = best["theta"], best["value"]
    restart_values = []
    for _ in range(restarts):
        best.update(value=math.inf, theta=None)
        minimize(objective, rng.uniform(0.0, math.pi, 2 * p), method="Nelder-Mead",
                 options={"maxfev": outer_budget, "xatol": 1e-6, "fatol": 1e-9})
        restart_values.append(best["value"])
        if best["value"] < best_value:
            best_theta, best_value = best["theta"], best["value"]
    state = qaoa_state(diag, best_theta[:p], best_theta[p:])
    hist = sample(state, shots, seed=[seed, 1])
    if hist:
        top = max(hist.items(), key=lambda kv: (kv[1], [-int(c) for c in kv[0]]))[0]
        bits = np.array([int(c) for c in top], dtype=np.int8)
    else:
        bits = index_to_bits(int(np.argmax(np.abs(state))), n)
    e = energy(q, bits)
    if n <= BRUTE_FORCE_MAX_N:
        ref, ref_e = "exact", brute_force(q).energy
    else:
        ref, ref_e = "sa", simulated_annealing(q, seed=seed, restarts=10).energy
    return QaoaResult(
        bits, e, accuracy(e, ref_e), accuracy_mode(e, ref_e), ref, ref_e,
        trace, hist, circuit_metrics(n, p, q), time.perf_counter() - t0,
        QaoaParams(best_theta[:p], best_theta[p:]), best_value, uniform_value, len(trace), restart_values,
    )


def circuit_metrics(n: int, p: int, q: QuboMatrix | None = None) -> dict:
    """Qubits and depth of an explicit gate-level ansatz.

    Gates: one Hadamard layer, then per QAOA layer one RZ per nonzero field,
    one RZZ per nonzero coupling and one RX per qubit.  Depth is found by
    as-soon-as-possible scheduling of gates in that order; couplings are
    emitted in round-robin order so disjoint pairs share a layer.  Without a
    QUBO the problem is taken as fully dense.
    """
    if q is None:
        fields = list(range(n))
        pairs = {(i, j) for i in range(n) for j in range(i + 1, n)}
    else:
        ising = qubo_to_ising(q)
        fields = [i for i in range(n) if ising.h[i] != 0]
        pairs = {k for k, v in ising.J.items() if v != 0}
    ready = [1] * n if n else []  # after the Hadamard layer
    depth = 1
    gates = {"h": n, "rz": 0, "rzz": 0, "rx": 0}
    for _ in range(p):
        for i in fields:
            ready[i] += 1
            gates["rz"] += 1
        for i, j in _round_robin(n):
            if (i, j) in pairs:
                layer = max(ready[i], ready[j]) + 1
                ready[i] = ready[j] = layer
                gates["rzz"] += 1
        for i in range(n):
            ready[i] += 1
            gates["rx"] += 1
    depth = max([depth, *ready])
    return {
        "qubits": n,
        "layers": p,
        "depth": depth,
        "gates": gates,
        "reference_depth": REFERENCE_DEPTHS.get(n),
        "reference_fit_depth": 9 * n - 3,
    }


def _round_robin(n):
    """All pairs i<j grouped into rounds of disjoint pairs (circle method)."""
    players = list(range(n)) + ([None] if n % 2 else [])
    m = len(players)
    for _ in range(m - 1):
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a is not None and b is not None:
                yield (min(a, b), max(a, b))
        players = [players[0], players[-1], *players[1:-1]]
