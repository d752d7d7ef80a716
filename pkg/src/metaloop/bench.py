"""Desk-scale scaling and accuracy studies.

Each function returns a list of row dicts; :func:`to_csv` renders them.
Timings use a monotonic clock and are machine dependent.
"""

from __future__ import annotations

import csv
import io
import time

import numpy as np

from . import fm, qaoa, qubo, tmm
from .materials import AIR, IncidenceCondition, Layer, LayerStack, Material, SpectralGrid


def to_csv(rows) -> str:
    if not rows:
        return ""
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return out.getvalue()


def benchmark_stack(layers=1000, seed=0) -> LayerStack:
    """Random lossless two-material stack; lossless keeps thick stacks well conditioned."""
    rng = np.random.default_rng(seed)
    low = Material.constant_index("low", 1.45)
    high = Material.constant_index("high", 2.2)
    glass = Material.constant_index("glass", 1.5)
    picks = rng.integers(0, 2, layers)
    thick = rng.uniform(20.0, 200.0, layers)
    return LayerStack(AIR, tuple(Layer(high if p else low, float(t)) for p, t in zip(picks, thick)), glass)


def benchmark_conditions(count):
    """``count`` (angle, polarization) pairs spread over 0-89 degrees."""
    pols = ("s", "p")
    angles = np.linspace(0.0, 89.0, -(-count // 2))
    conds = [IncidenceCondition(float(a), p) for a in angles for p in pols]
    return conds[:count]


def bench_tmm(layers=1000, condition_counts=(50, 100, 200, 350), workers=(1, 2, 4, 8), wavelengths=100, seed=0, repeats=1):
    stack = benchmark_stack(layers, seed)
    grid = SpectralGrid.linspace(0.3, 2.5, wavelengths)
    rows = []
    for count in condition_counts:
        conds = benchmark_conditions(count)
        serial = None
        for w in workers:
            best = np.inf
            for _ in range(repeats):
                t0 = time.perf_counter()
                tmm.sweep(stack, grid, conds, workers=w)
                best = min(best, time.perf_counter() - t0)
            if w == 1 or serial is None:
                serial = best if w == 1 else serial
            rows.append(
                {
                    "layers": layers,
                    "conditions": count,
                    "wavelengths": wavelengths,
                    "workers": w,
                    "elapsed_s": best,
                    "serial_s": serial if serial is not None else float("nan"),
                    "speedup": (serial / best) if serial else float("nan"),
                }
            )
    return rows


def bench_fm(bit_lengths=(120, 240), sizes=(1000, 2000, 5000, 10000), workers=(1, 2, 4), epochs=5, seed=0):
    """Training wall-clock per (bits x rows, workers); targets from a random planted FM."""
    rows = []
    for n in bit_lengths:
        rng = np.random.default_rng(seed)
        planted = fm.FMModel(0.0, rng.normal(0, 0.1, n), rng.normal(0, 0.05, (n, 8)))
        for m in sizes:
            X = rng.integers(0, 2, (m, n)).astype(float)
            y = fm.predict_many(planted, X)
            serial = None
            for w in workers:
                cfg = fm.TrainConfig(epochs=epochs, workers=w, seed=seed)
                t0 = time.perf_counter()
                fm.train((X, y), cfg)
                elapsed = time.perf_counter() - t0
                if w == 1:
                    serial = elapsed
                rows.append(
                    {
                        "bits": n,
                        "rows": m,
                        "epochs": epochs,
                        "workers": w,
                        "elapsed_s": elapsed,
                        "serial_s": serial if serial is not None else float("nan"),
                        "speedup": serial / elapsed if serial else float("nan"),
                    }
                )
    return rows


def bench_qaoa(sizes=(4, 8, 12, 16, 20, 24), p=1, shots=1024, restarts=2, outer_budget=None, sweeps=200, sa_restarts=10, seed=0, solvers=("qaoa", "annealing", "exhaustive")):
    """Accuracy against brute force and time-to-solution per problem size."""
    rows = []
    for n in sizes:
        q = qubo.random_qubo(n, seed + n)
        exact = qubo.brute_force(q)
        for solver in solvers:
            t0 = time.perf_counter()
            if solver == "exhaustive":
                found, elapsed = exact.energy, exact.elapsed
            elif solver == "annealing":
                found = qubo.simulated_annealing(q, sweeps, seed=seed, restarts=sa_restarts).energy
                elapsed = time.perf_counter() - t0
            elif solver == "qaoa":
                if n > qaoa.STATEVECTOR_MAX_N:
                    continue
                res = qaoa.run_qaoa(q, p=p, shots=shots, outer_budget=outer_budget, restarts=restarts, seed=seed)
                found, elapsed = res.best_energy, res.elapsed
            else:
                raise ValueError(f"unknown solver {solver!r}")
            rows.append(
                {
                    "n": n,
                    "solver": solver,
                    "energy": found,
                    "optimum": exact.energy,
                    "accuracy": qubo.accuracy(found, exact.energy),
                    "accuracy_mode": qubo.accuracy_mode(found, exact.energy),
                    "elapsed_s": elapsed,
                    "depth": qaoa.circuit_metrics(n, p, q)["depth"] if solver == "qaoa" else "",
                }
            )
    return rows
