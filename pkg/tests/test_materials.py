import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaloop.errors import EncodingError, PhysicsError, RangeError, SchemaError
from metaloop.materials import (
    AIR,
    BinaryEncoding,
    IncidenceCondition,
    Layer,
    LayerStack,
    Material,
    SpectralGrid,
    builtin_material,
    decode,
    dump_dispersion,
    load_dispersion,
    refractive_index_at,
)

TWO_ROWS = "wavelength_um,n,k\n0.5,1.5,0.0\n1.0,1.45,0.0\n"

A = Material.constant_index("A", 1.45)
B = Material.constant_index("B", 2.2)


def test_load_two_rows():
    m = load_dispersion(TWO_ROWS.encode())
    assert len(m.wavelengths) == 2
    assert not m.constant
    np.testing.assert_array_equal(m.n, [1.5, 1.45])


def test_load_sources_agree(tmp_path):
    path = tmp_path / "silica.csv"
    path.write_text(TWO_ROWS)
    from_path = load_dispersion(str(path))
    assert from_path.name == "silica"
    for src in (TWO_ROWS, TWO_ROWS.encode(), io.StringIO(TWO_ROWS), io.BytesIO(TWO_ROWS.encode())):
        m = load_dispersion(src, "silica")
        assert m == from_path


def test_load_decreasing_wavelengths():
    with pytest.raises(SchemaError):
        load_dispersion(b"wavelength_um,n,k\n1.0,1.5,0.0\n0.5,1.45,0.0\n")


@pytest.mark.parametrize(
    "body, err",
    [
        ("wavelength_um,n,k\n0.5,1.5,-0.1\n1.0,1.4,0\n", PhysicsError),
        ("wavelength_um,n,k\n0.5,0.0,0.0\n1.0,1.4,0\n", PhysicsError),
        ("wavelength_um,n,k\n", SchemaError),
        ("", SchemaError),
        ("lambda,n,k\n0.5,1.5,0\n", SchemaError),
        ("wavelength_um,n,k\n0.5,abc,0\n", SchemaError),
        ("wavelength_um,n,k\n0.5,1.5\n", SchemaError),
    ],
)
def test_load_rejects(body, err):
    with pytest.raises(err):
        load_dispersion(body.encode())


def test_single_row_is_constant():
    m = load_dispersion(b"wavelength_um,n,k\n0.5,2.0,0.1\n")
    assert m.constant
    for wl in (0.1, 0.5, 3.0, 50.0):
        assert refractive_index_at(m, wl) == 2.0 + 0.1j


def test_interpolation_examples():
    m = load_dispersion(TWO_ROWS.encode())
    # hand interpolation halfway between the rows
    assert refractive_index_at(m, 0.75) == pytest.approx(1.475 + 0j, abs=1e-15)
    assert refractive_index_at(m, 0.5) == 1.5 + 0j
    with pytest.raises(RangeError):
        refractive_index_at(m, 1.2)
    with pytest.raises(RangeError):
        refractive_index_at(m, [0.6, 0.4])


def test_interpolation_vectorised():
    m = load_dispersion(TWO_ROWS.encode())
    out = refractive_index_at(m, np.array([0.5, 0.75, 1.0]))
    np.testing.assert_allclose(out, [1.5, 1.475, 1.45])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.2, 20.0), min_size=2, max_size=30, unique=True), st.integers(0, 2**32 - 1))
def test_exact_at_grid_points_and_round_trip(wls, seed):
    rng = np.random.default_rng(seed)
    wl = np.sort(np.array(wls))
    if np.any(np.diff(wl) <= 0):
        return
    m = Material("x", wl, rng.uniform(1.0, 4.0, len(wl)), rng.uniform(0.0, 1.0, len(wl)))
    for i, w in enumerate(wl):
        assert refractive_index_at(m, w) == complex(m.n[i], m.k[i])
    again = load_dispersion(dump_dispersion(m), "x")
    assert again.wavelengths.tobytes() == m.wavelengths.tobytes()
    assert again.n.tobytes() == m.n.tobytes()
    assert again.k.tobytes() == m.k.tobytes()


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 1.0))
def test_interpolation_between_bounds(w):
    m = load_dispersion(TWO_ROWS.encode())
    v = refractive_index_at(m, w)
    assert 1.45 - 1e-15 <= v.real <= 1.5 + 1e-15
    assert v.imag == 0


def test_layer_and_stack_invariants():
    with pytest.raises(PhysicsError):
        Layer(A, 0.0)
    with pytest.raises(PhysicsError):
        Layer(A, -5.0)
    with pytest.raises(PhysicsError):
        LayerStack(Material.constant_index("lossy", 1.0, 0.1))
    empty = LayerStack(AIR)
    assert len(empty) == 0 and empty.substrate == AIR


def test_grid_and_condition_invariants():
    with pytest.raises(SchemaError):
        SpectralGrid([])
    with pytest.raises(SchemaError):
        SpectralGrid([1.0, 1.0])
    with pytest.raises(RangeError):
        IncidenceCondition(90.0, "s")
    with pytest.raises(RangeError):
        IncidenceCondition(-1.0, "s")
    with pytest.raises(SchemaError):
        IncidenceCondition(0.0, "te")


def test_decode_all_zero():
    enc = BinaryEncoding(1, 120, (A, B), 50.0)
    stack = decode(np.zeros(120, int), enc)
    assert len(stack) == 120
    assert all(layer.material == A for layer in stack.layers)


def test_decode_alternating():
    enc = BinaryEncoding(1, 120, (A, B), 50.0)
    stack = decode([0, 1] * 60, enc)
    assert [layer.material for layer in stack.layers] == [A, B] * 60


def test_decode_length_mismatch():
    enc = BinaryEncoding(1, 120, (A, B), 50.0)
    with pytest.raises(EncodingError):
        decode(np.zeros(121, int), enc)
    with pytest.raises(EncodingError):
        decode([2] * 120, enc)


def test_decode_multibit_msb_first():
    C, D = Material.constant_index("C", 3.0), Material.constant_index("D", 3.5)
    enc = BinaryEncoding(2, 3, (A, B, C, D), (10.0, 20.0, 30.0))
    stack = decode([0, 1, 1, 0, 1, 1], enc)
    assert [layer.material for layer in stack.layers] == [B, C, D]
    assert [layer.thickness for layer in stack.layers] == [10.0, 20.0, 30.0]


def test_encoding_invariants():
    with pytest.raises(EncodingError):
        BinaryEncoding(1, 4, (A,))
    with pytest.raises(EncodingError):
        BinaryEncoding(2, 4, (A, B))
    with pytest.raises(EncodingError):
        BinaryEncoding(1, 2, (A, B), (10.0,))
    assert BinaryEncoding(3, 5, (A,) * 8).n_bits == 15


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
def test_decode_injective(a, b):
    enc = BinaryEncoding(1, 16, (A, B), 80.0)
    xa = [(a >> i) & 1 for i in range(16)]
    xb = [(b >> i) & 1 for i in range(16)]
    assert (decode(xa, enc) == decode(xb, enc)) == (a == b)


def test_builtins_are_physical():
    for name in ("lowindex", "highindex", "glass"):
        m = builtin_material(name)
        assert m.wavelengths[0] <= 0.3 and m.wavelengths[-1] >= 13.0
        assert np.all(m.n > 0) and np.all(m.k >= 0)
        # transparent in the visible, absorbing somewhere in 8-13 um
        vis = refractive_index_at(m, 0.55)
        ir = refractive_index_at(m, np.linspace(8, 13, 50))
        assert vis.imag < 1e-3
        assert ir.imag.max() > 0.1
    with pytest.raises(SchemaError):
        builtin_material("unobtainium")
