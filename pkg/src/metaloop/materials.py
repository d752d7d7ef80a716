"""Optical constants, layer stacks and the bit-vector encoding of stacks.

Dispersion tables are read from CSV (``wavelength_um,n,k``) and interpolated
linearly in n and k.  Nothing is extrapolated: asking for a wavelength outside
the table raises :class:`RangeError`.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EncodingError, PhysicsError, RangeError, SchemaError

CSV_HEADER = ("wavelength_um", "n", "k")
POLARIZATIONS = ("s", "p", "unpolarized")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Material:
    """Tabulated complex refractive index n + ik versus wavelength (um)."""

    name: str
    wavelengths: np.ndarray
    n: np.ndarray
    k: np.ndarray
    constant: bool = False

    def __post_init__(self):
        wl, n, k = _frozen(self.wavelengths), _frozen(self.n), _frozen(self.k)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        if wl.ndim != 1 or not (wl.shape == n.shape == k.shape):
            raise SchemaError(f"{self.name}: wavelength, n and k columns differ in shape")
        if len(wl) == 0:
            raise SchemaError(f"{self.name}: empty dispersion table")
        # arrays are frozen, so the identity key can be computed once
        object.__setattr__(self, "_key", (self.name, wl.tobytes(), n.tobytes(), k.tobytes()))
        if len(wl) == 1:
            object.__setattr__(self, "constant", True)
            w0, n0, k0 = float(wl[0]), float(n[0]), float(k[0])
            if not (math.isfinite(w0) and math.isfinite(n0) and math.isfinite(k0)):
                raise SchemaError(f"{self.name}: non-finite entries")
            if n0 <= 0 or k0 < 0:
                raise PhysicsError(f"{self.name}: need n > 0 and k >= 0")
            return
        if self.constant:
            raise SchemaError(f"{self.name}: constant-index material must have one row")
        if not np.all(np.isfinite(wl)) or not np.all(np.isfinite(n)) or not np.all(np.isfinite(k)):
            raise SchemaError(f"{self.name}: non-finite entries")
        if np.any(np.diff(wl) <= 0):
            raise SchemaError(f"{self.name}: wavelengths must be strictly increasing")
        if np.any(n <= 0) or np.any(k < 0):
            raise PhysicsError(f"{self.name}: need n > 0 and k >= 0")

    @classmethod
    def constant_index(cls, name: str, n: float, k: float = 0.0) -> "Material":
        return cls(name, [1.0], [n], [k], constant=True)

    @property
    def lossless(self) -> bool:
        return bool(np.all(self.k == 0))

    def key(self):
        return self._key

    def __eq__(self, other):
        return isinstance(other, Material) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        if self.constant:
            return f"Material({self.name!r}, n={self.n[0]}, k={self.k[0]})"
        return f"Material({self.name!r}, {len(self.wavelengths)} rows, {self.wavelengths[0]}-{self.wavelengths[-1]} um)"


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # nm

    def __post_init__(self):
        if not (self.thickness > 0 and math.isfinite(self.thickness)):
            raise PhysicsError(f"layer thickness must be > 0 nm, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Layers ordered front (ambient side) to back (substrate side)."""

    ambient: Material
    layers: tuple = ()
    substrate: Material | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.substrate is None:
            object.__setattr__(self, "substrate", self.ambient)
        if not self.ambient.lossless:
            raise PhysicsError("ambient medium must be lossless (k = 0)")

    def __len__(self):
        return len(self.layers)

    def media(self):
        """Ambient, every layer material, then substrate."""
        return [self.ambient, *(layer.material for layer in self.layers), self.substrate]

    def materials(self):
        seen = {}
        for m in self.media():
            seen.setdefault(m, None)
        return list(seen)

    def reversed(self) -> "LayerStack":
        return LayerStack(self.ambient, self.layers[::-1], self.substrate)

    def wavelength_range(self):
        lo, hi = -math.inf, math.inf
        for m in self.materials():
            if not m.constant:
                lo = max(lo, m.wavelengths[0])
                hi = min(hi, m.wavelengths[-1])
        return lo, hi


@dataclass(frozen=True)
class SpectralGrid:
    wavelengths: np.ndarray

    def __post_init__(self):
        wl = _frozen(self.wavelengths)
        if wl.ndim != 1 or len(wl) == 0:
            raise SchemaError("spectral grid must be a non-empty 1-D sequence")
        if np.any(np.diff(wl) <= 0) or np.any(wl <= 0):
            raise SchemaError("spectral grid must be positive and strictly increasing")
        object.__setattr__(self, "wavelengths", wl)

    @classmethod
    def linspace(cls, start, stop, num):
        return cls(np.linspace(start, stop, num))

    def __len__(self):
        return len(self.wavelengths)


@dataclass(frozen=True)
class IncidenceCondition:
    angle: float = 0.0  # degrees
    polarization: str = "unpolarized"

    def __post_init__(self):
        if not (0.0 <= self.angle <= 89.0):
            raise RangeError(f"incidence angle must lie in [0, 89] degrees, got {self.angle}")
        if self.polarization not in POLARIZATIONS:
            raise SchemaError(f"polarization must be one of {POLARIZATIONS}, got {self.polarization!r}")


@dataclass(frozen=True)
class BinaryEncoding:
    """Maps bit vectors to stacks: each group of ``bits_per_layer`` bits
    (most significant first) indexes the palette."""

    bits_per_layer: int
    layer_count: int
    palette: tuple
    thickness_nm: float | tuple = 100.0
    ambient: Material = field(default_factory=lambda: AIR)
    substrate: Material | None = None

    def __post_init__(self):
        object.__setattr__(self, "palette", tuple(self.palette))
        if self.bits_per_layer < 1 or self.layer_count < 1:
            raise EncodingError("bits_per_layer and layer_count must be positive")
        if len(self.palette) != 2**self.bits_per_layer:
            raise EncodingError(
                f"palette needs exactly {2**self.bits_per_layer} materials, got {len(self.palette)}"
            )
        if isinstance(self.thickness_nm, (int, float)):
            thick = (float(self.thickness_nm),) * self.layer_count
        else:
            thick = tuple(float(t) for t in self.thickness_nm)
            if len(thick) != self.layer_count:
                raise EncodingError("need one thickness per layer")
        if any(not t > 0 for t in thick):
            raise PhysicsError("layer thickness must be > 0 nm")
        object.__setattr__(self, "thickness_nm", thick)

    @property
    def n_bits(self) -> int:
        return self.bits_per_layer * self.layer_count


def load_dispersion(source, name: str | None = None) -> Material:
    """Read a ``wavelength_um,n,k`` CSV from bytes, text, a path or a file object."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        name = name or os.path.splitext(os.path.basename(source))[0]
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise SchemaError("empty dispersion CSV")
    header = tuple(c.strip() for c in rows[0])
    if header != CSV_HEADER:
        raise SchemaError(f"expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
    body = rows[1:]
    if not body:
        raise SchemaError("dispersion CSV has a header but no rows")
    try:
        table = np.array([[float(c) for c in r] for r in body])
    except ValueError as exc:
        raise SchemaError(f"non-numeric dispersion entry: {exc}") from None
    if table.shape[1] != 3:
        raise SchemaError("each dispersion row needs exactly three columns")
    return Material(name or "material", table[:, 0], table[:, 1], table[:, 2])


def dump_dispersion(material: Material) -> str:
    """Serialize to CSV text; repr() keeps every float bit-exact."""
    lines = [",".join(CSV_HEADER)]
    for w, n, k in zip(material.wavelengths, material.n, material.k):
        lines.append(f"{float(w)!r},{float(n)!r},{float(k)!r}")
    return "\n".join(lines) + "\n"


def refractive_index_at(material: Material, wavelength):
    """Complex index n + ik at ``wavelength`` (scalar or array, um)."""
    wl = np.asarray(wavelength, dtype=float)
    if material.constant:
        out = np.full(wl.shape, complex(material.n[0], material.k[0]))
    else:
        lo, hi = material.wavelengths[0], material.wavelengths[-1]
        if np.any(wl < lo) or np.any(wl > hi) or np.any(np.isnan(wl)):
            raise RangeError(
                f"{material.name}: wavelength outside tabulated range [{lo}, {hi}] um"
            )
        out = np.interp(wl, material.wavelengths, material.n) + 1j * np.interp(
            wl, material.wavelengths, material.k
        )
    return complex(out) if out.ndim == 0 else out


def decode(bits: Sequence[int], encoding: BinaryEncoding) -> LayerStack:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if len(bits) != encoding.n_bits:
        raise EncodingError(f"expected {encoding.n_bits} bits, got {len(bits)}")
    if np.any((bits != 0) & (bits != 1)):
        raise EncodingError("bit vector entries must be 0 or 1")
    b = encoding.bits_per_layer
    weights = 1 << np.arange(b - 1, -1, -1)
    codes = bits.reshape(encoding.layer_count, b) @ weights
    layers = tuple(
        Layer(encoding.palette[c], t) for c, t in zip(codes.tolist(), encoding.thickness_nm)
    )
    return LayerStack(encoding.ambient, layers, encoding.substrate)


# Synthetic dispersive materials.  Single Lorentz oscillator in wavenumber
# (1/um): a transparent low/high index pair with a phonon-like absorption band
# in the mid infrared.  They are model materials, not measured data.

def lorentz_material(name, eps_inf, strength, resonance_um, damping, wavelengths=None):
    wl = np.geomspace(0.25, 20.0, 400) if wavelengths is None else np.asarray(wavelengths, float)
    nu, nu0 = 1.0 / wl, 1.0 / resonance_um
    eps = eps_inf + strength * nu0**2 / (nu0**2 - nu**2 - 1j * damping * nu)
    nk = np.sqrt(eps)
    return Material(name, wl, nk.real, np.abs(nk.imag))


AIR = Material.constant_index("air", 1.0)

BUILTIN = {
    "air": lambda: AIR,
    "lowindex": lambda: lorentz_material("lowindex", 2.0, 0.1, 9.5, 0.012),
    "highindex": lambda: lorentz_material("highindex", 5.6, 0.3, 11.0, 0.02),
    "glass": lambda: lorentz_material("glass", 2.2, 0.15, 10.0, 0.015),
}


def builtin_material(name: str) -> Material:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise SchemaError(f"unknown built-in material {name!r}; known: {sorted(BUILTIN)}") from None
