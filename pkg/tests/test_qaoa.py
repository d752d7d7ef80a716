import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaloop import qaoa, qubo
from metaloop.errors import CapacityError, ConfigError
from oracles import all_bits


def spins(x):
    return 1 - 2 * np.asarray(x, dtype=float)


def test_ising_examples():
    zero = qaoa.qubo_to_ising(qubo.QuboMatrix(np.zeros((3, 3)), offset=0.7))
    assert not zero.h.any() and not any(zero.J.values()) and zero.constant == 0.7
    m = qaoa.qubo_to_ising(qubo.QuboMatrix([[-1.0]], offset=2.0))
    assert m.h.tolist() == [0.5]
    assert m.constant == pytest.approx(1.5)
    assert qaoa.ising_energy(m, [-1]) == pytest.approx(-1 + 2.0)
    assert qaoa.ising_energy(m, [1]) == pytest.approx(0 + 2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.floats(-3, 3))
def test_ising_equivalence(seed, n, offset):
    q = qubo.random_qubo(n, seed)
    q = qubo.QuboMatrix(q.Q, offset)
    m = qaoa.qubo_to_ising(q)
    diag = qaoa.ising_diagonal(m)
    for x in all_bits(n):
        ref = qubo.energy(q, x) + offset
        assert qaoa.ising_energy(m, spins(x)) == pytest.approx(ref, abs=1e-9)
        assert diag[qaoa.bits_to_index(x)] == pytest.approx(ref, abs=1e-9)


def test_ising_key_validation():
    with pytest.raises(ValueError):
        qaoa.IsingModel(np.zeros(2), {(1, 0): 1.0})


def test_uniform_state():
    np.testing.assert_allclose(qaoa.uniform_state(1), [2**-0.5] * 2)
    assert qaoa.uniform_state(0).tolist() == [1.0]
    assert np.linalg.norm(qaoa.uniform_state(10)) == pytest.approx(1.0, abs=1e-14)


def test_cost_layer():
    m = qaoa.IsingModel(np.array([0.5]), {})
    s = qaoa.uniform_state(1)
    np.testing.assert_array_equal(qaoa.apply_cost_layer(s, m, 0.0), s)
    g = 0.37
    out = qaoa.apply_cost_layer(s, m, g)
    # |0> has z=+1 -> E=+1/2, |1> has z=-1 -> E=-1/2
    np.testing.assert_allclose(out, s * np.exp([-0.5j * g, 0.5j * g]), atol=1e-15)
    rng = np.random.default_rng(0)
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    np.testing.assert_allclose(np.abs(qaoa.apply_cost_layer(v, rng.normal(size=64), 1.3)), np.abs(v), atol=1e-14)


def test_mixer_layer():
    rng = np.random.default_rng(1)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    v /= np.linalg.norm(v)
    np.testing.assert_array_equal(qaoa.apply_mixer_layer(v, 0.0), v)
    u = qaoa.uniform_state(5)
    out = qaoa.apply_mixer_layer(u, math.pi / 2)
    phase = out[0] / u[0]
    np.testing.assert_allclose(out, phase * u, atol=1e-14)
    for beta in rng.uniform(-5, 5, 10):
        assert np.linalg.norm(qaoa.apply_mixer_layer(v, beta)) == pytest.approx(1.0, abs=1e-12)


def test_mixer_matches_kron():
    rng = np.random.default_rng(2)
    n, beta = 4, 0.81
    rx = np.array([[math.cos(beta), -1j * math.sin(beta)], [-1j * math.sin(beta), math.cos(beta)]])
    full = np.array([[1.0]])
    for _ in range(n):
        full = np.kron(full, rx)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    np.testing.assert_allclose(qaoa.apply_mixer_layer(v, beta), full @ v, atol=1e-13)


def test_expectation_examples():
    q = qubo.random_qubo(6, seed=4)
    q = qubo.QuboMatrix(q.Q, 0.3)
    m = qaoa.qubo_to_ising(q)
    d = np.diag(q.Q)
    closed = 0.3 + d.sum() / 2 + np.triu(q.Q, 1).sum() / 4
    assert qaoa.expectation(qaoa.uniform_state(6), m) == pytest.approx(closed, abs=1e-12)
    for x in all_bits(6)[::7]:
        basis = np.zeros(64, complex)
        basis[qaoa.bits_to_index(x)] = 1
        assert qaoa.expectation(basis, m) == pytest.approx(qubo.energy(q, x) + 0.3, abs=1e-12)
    best = qubo.brute_force(q).energy + 0.3
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = rng.normal(size=64) + 1j * rng.normal(size=64)
        assert qaoa.expectation(v / np.linalg.norm(v), m) >= best - 1e-12


def test_unitarity_through_layers():
    q = qubo.random_qubo(10, seed=1)
    diag = qaoa.ising_diagonal(qaoa.qubo_to_ising(q))
    rng = np.random.default_rng(0)
    s = qaoa.uniform_state(10)
    for _ in range(20):
        s = qaoa.apply_mixer_layer(qaoa.apply_cost_layer(s, diag, rng.uniform(-3, 3)), rng.uniform(-3, 3))
    assert abs(np.linalg.norm(s) - 1) <= 1e-10


def test_sample_examples():
    basis = np.zeros(8, complex)
    basis[5] = 1  # qubits 0 and 2 set
    assert qaoa.sample(basis, 100, seed=1) == {"101": 100}
    assert qaoa.sample(qaoa.uniform_state(2), 0) == {}
    hist = qaoa.sample(qaoa.uniform_state(2), 100_000, seed=3)
    assert set(hist) == {"00", "01", "10", "11"}
    for count in hist.values():
        assert abs(count / 100_000 - 0.25) <= 0.01
    assert hist == qaoa.sample(qaoa.uniform_state(2), 100_000, seed=3)


def test_bit_index_round_trip():
    for i in range(32):
        assert qaoa.bits_to_index(qaoa.index_to_bits(i, 5)) == i


def test_run_qaoa_single_qubit():
    res = qaoa.run_qaoa(qubo.QuboMatrix([[-1.0]]), p=1, shots=256, seed=0)
    assert res.best_bits.tolist() == [1]
    assert res.accuracy == 1.0 and res.reference == "exact"


def test_run_qaoa_contract():
    q = qubo.random_qubo(6, seed=11)
    res = qaoa.run_qaoa(q, p=2, shots=512, restarts=2, seed=4)
    assert res.best_energy == pytest.approx(qubo.energy(q, res.best_bits), abs=1e-9)
    assert res.optimized_expectation <= res.uniform_expectation + 1e-12
    assert res.expectation_trace[0] == pytest.approx(res.uniform_expectation)
    envelope = np.minimum.accumulate(res.expectation_trace)
    assert np.all(np.diff(envelope) <= 0)
    assert res.evaluations == len(res.expectation_trace) <= 1 + 2 * 500 + 10
    assert sum(res.shots_histogram.values()) == 512
    top = max(res.shots_histogram.values())
    assert res.shots_histogram[qubo.bits_to_str(res.best_bits)] == top
    assert res.accuracy <= 1.0 + 1e-9
    doc = json.loads(res.to_json())
    assert {"bits", "energy", "accuracy", "expectation_trace", "shots_histogram", "depth_report", "elapsed_s"} <= set(doc)
    again = qaoa.run_qaoa(q, p=2, shots=512, restarts=2, seed=4)
    assert again.to_dict() | {"elapsed_s": 0} == res.to_dict() | {"elapsed_s": 0}


def test_run_qaoa_guards():
    with pytest.raises(CapacityError):
        qaoa.run_qaoa(qubo.QuboMatrix(np.zeros((25, 25))))
    with pytest.raises(ConfigError):
        qaoa.run_qaoa(qubo.random_qubo(3), p=0)
    with pytest.raises(ConfigError):
        qaoa.QaoaParams([0.1, 0.2], [0.3])


def test_circuit_metrics():
    assert qaoa.circuit_metrics(10, 1)["reference_depth"] == 87
    assert qaoa.circuit_metrics(20, 1)["reference_depth"] == 177
    assert qaoa.circuit_metrics(7, 0)["depth"] == 1
    for n, ref in qaoa.REFERENCE_DEPTHS.items():
        assert qaoa.circuit_metrics(n, 1)["reference_fit_depth"] == ref == 9 * n - 3
    r = qaoa.circuit_metrics(10, 2)
    assert r["qubits"] == 10
    assert r["gates"] == {"h": 10, "rz": 20, "rzz": 90, "rx": 20}
    # dense couplings pack into n-1 disjoint rounds for even n
    assert r["depth"] == 1 + 2 * (1 + 9 + 1)
    assert qaoa.circuit_metrics(3, 1, qubo.QuboMatrix(np.zeros((3, 3))))["gates"]["rzz"] == 0


def test_round_robin_covers_pairs_once():
    for n in range(2, 12):
        pairs = list(qaoa._round_robin(n))
        assert len(pairs) == len(set(pairs)) == n * (n - 1) // 2
