import os

import numpy as np
import pytest

from metaloop import bench, qaoa


def inversions(values):
    return int(np.sum(np.diff(values) < 0))


def test_bench_tmm_table():
    rows = bench.bench_tmm(layers=30, condition_counts=(6, 24), workers=(1, 2), wavelengths=20)
    assert len(rows) == 4
    for r in rows:
        if r["workers"] == 1:
            # the serial row is its own baseline
            assert r["serial_s"] == r["elapsed_s"] and r["speedup"] == 1.0
        assert r["speedup"] == pytest.approx(r["serial_s"] / r["elapsed_s"])
    text = bench.to_csv(rows)
    assert text.splitlines()[0] == "layers,conditions,wavelengths,workers,elapsed_s,serial_s,speedup"


def test_benchmark_conditions():
    conds = bench.benchmark_conditions(350)
    assert len(conds) == len(set(conds)) == 350
    assert min(c.angle for c in conds) == 0 and max(c.angle for c in conds) == 89


def test_bench_fm_table():
    rows = bench.bench_fm(bit_lengths=(40,), sizes=(500, 2000, 8000), workers=(1, 2), epochs=2)
    assert len(rows) == 6
    serial = [r["elapsed_s"] for r in rows if r["workers"] == 1]
    # more rows means more work
    assert inversions(serial) == 0
    for r in rows:
        if r["workers"] == 1:
            assert r["serial_s"] == r["elapsed_s"]


def test_bench_qaoa_table():
    rows = bench.bench_qaoa(sizes=(4, 8, 12, 16), restarts=1, shots=256)
    by = {}
    for r in rows:
        by.setdefault(r["solver"], []).append(r)
    assert all(r["accuracy"] == 1.0 for r in by["exhaustive"])
    for r in by["qaoa"]:
        if r["optimum"] < 0:
            assert r["accuracy"] <= 1.0 + 1e-9
        assert r["depth"] == qaoa.circuit_metrics(r["n"], 1)["depth"]
    # time to solution grows with problem size, one inversion allowed
    assert inversions([r["elapsed_s"] for r in by["qaoa"]]) <= 1


@pytest.mark.skipif((os.cpu_count() or 1) < 2, reason="parallel benefit needs at least two cores")
def test_bench_tmm_parallel_benefit():
    rows = bench.bench_tmm(layers=300, condition_counts=(100,), workers=(1, 2), wavelengths=200)
    assert rows[1]["speedup"] > 1.2
