"""Transfer-matrix optics for planar multilayers.

Amplitude convention: each medium carries a forward (+z, towards the
substrate) and backward amplitude.  An interface matrix
``(1/t) [[1, r], [r, 1]]`` maps the amplitudes just right of an interface to
those just left of it, and the propagation matrix ``diag(e^{i kz d},
e^{-i kz d})`` maps amplitudes at the front face of a layer to those at its
back face.  The system matrix therefore maps substrate-side amplitudes back
to the ambient side::

    M = D(0,1) P1^-1 D(1,2) P2^-1 ... PN^-1 D(N,N+1)

so that ``r = m21 / m11`` and ``t = 1 / m11``.  Time dependence is
``exp(-i w t)`` with refractive index ``n + ik``; complex ``kz`` takes the
branch with non-negative imaginary part.

Two independent code paths are kept: the scalar 2x2 reference path
(:func:`system_matrix`, :func:`rt_from_matrix`) and the array kernel behind
:func:`spectrum` and :func:`sweep`, which processes a block of
(conditions x wavelengths) at once.
"""

from __future__ import annotations

import cmath
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, SchemaError, SingularInterfaceError, SingularSystemError
from .materials import IncidenceCondition, Layer, LayerStack, Material, SpectralGrid, refractive_index_at

QUANTITIES = ("T", "R", "A")

# Matrix products performed by the array kernel, summed over workers.
_counters = {"matmul": 0, "points": 0}


def op_counts():
    return dict(_counters)


def reset_op_counts():
    for key in _counters:
        _counters[key] = 0


# ---------------------------------------------------------------------------
# scalar reference path


def _normal_admittance(n, ambient_index, angle):
    """n cos(theta) in the medium, i.e. sqrt(n^2 - (n_amb sin theta)^2)."""
    s = ambient_index * math.sin(math.radians(angle))
    eta = cmath.sqrt(complex(n) ** 2 - s * s)
    if eta.imag < 0 or (eta.imag == 0 and eta.real < 0):
        eta = -eta
    return eta


def _fresnel(n_left, n_right, eta_left, eta_right, pol):
    if pol == "s":
        den = eta_left + eta_right
        return (eta_left - eta_right) / den, 2 * eta_left / den
    if pol == "p":
        den = n_right**2 * eta_left + n_left**2 * eta_right
        return (n_right**2 * eta_left - n_left**2 * eta_right) / den, 2 * n_left * n_right * eta_left / den
    raise SchemaError(f"interface matrices need 's' or 'p' polarization, got {pol!r}")


def propagation_matrix(layer: Layer, wavelength, angle, ambient_index):
    n = refractive_index_at(layer.material, wavelength)
    kz_d = 2 * math.pi / wavelength * _normal_admittance(n, ambient_index, angle) * (layer.thickness * 1e-3)
    return np.array([[cmath.exp(1j * kz_d), 0], [0, cmath.exp(-1j * kz_d)]], dtype=complex)


def interface_matrix(n_left, n_right, angle, pol, ambient_index):
    eta_l = _normal_admittance(n_left, ambient_index, angle)
    eta_r = _normal_admittance(n_right, ambient_index, angle)
    r, t = _fresnel(complex(n_left), complex(n_right), eta_l, eta_r, pol)
    if t == 0 or not cmath.isfinite(r):
        raise SingularInterfaceError(f"vanishing transmission at {n_left}|{n_right}")
    return np.array([[1, r], [r, 1]], dtype=complex) / t


def system_matrix(stack: LayerStack, wavelength, angle, pol):
    n_amb = refractive_index_at(stack.ambient, wavelength).real
    idx = [refractive_index_at(m, wavelength) for m in stack.media()]
    m = interface_matrix(idx[0], idx[1], angle, pol, n_amb)
    for j, layer in enumerate(stack.layers, start=1):
        p = propagation_matrix(layer, wavelength, angle, n_amb)
        p_inv = np.diag([p[1, 1], p[0, 0]])
        m = m @ p_inv @ interface_matrix(idx[j], idx[j + 1], angle, pol, n_amb)
    return m


def rt_from_matrix(m, n_amb, n_sub, angle, pol):
    """Power reflectance and transmittance from a system matrix."""
    m11, m21 = complex(m[0, 0]), complex(m[1, 0])
    if m11 == 0:
        raise SingularSystemError("m11 vanished")
    r, t = m21 / m11, 1 / m11
    eta_amb = _normal_admittance(n_amb, n_amb, angle).real
    eta_sub = _normal_admittance(n_sub, n_amb, angle)
    if pol == "s":
        ratio = eta_sub.real / eta_amb
    else:
        n_sub = complex(n_sub)
        ratio = (n_sub.conjugate() * eta_sub / n_sub).real / eta_amb
    return abs(r) ** 2, abs(t) ** 2 * ratio


# ---------------------------------------------------------------------------
# array kernel


# complex entries per chunk of layers in the vectorized kernel
_CHUNK_ELEMENTS = 1 << 21


def _block_rt(stack, wavelengths, angles, pol):
    """R, T arrays of shape (len(angles), len(wavelengths)) for one polarization."""
    wl = np.asarray(wavelengths, dtype=float)[None, :]
    n_amb = np.asarray(refractive_index_at(stack.ambient, wl[0]), dtype=complex).real[None, :]
    s = n_amb * np.sin(np.radians(np.asarray(angles, dtype=float)))[:, None]
    s2 = s * s
    shape = s.shape

    media = stack.media()
    distinct = stack.materials()
    table = np.empty((len(distinct), wl.shape[1]), dtype=complex)
    for i, mat in enumerate(distinct):
        table[i] = refractive_index_at(mat, wl[0])
    slot = {m: i for i, m in enumerate(distinct)}
    where = np.array([slot[m] for m in media])
    thickness = np.array([layer.thickness for layer in stack.layers], dtype=float) * 1e-3

    def admittance(rows):
        nk = table[where[rows]][:, None, :]
        e = np.sqrt(nk * nk - s2)
        return nk, np.where((e.imag < 0) | ((e.imag == 0) & (e.real < 0)), -e, e)

    def interfaces(lo, hi):
        """inv(t) and r/t for the interfaces between media lo..hi."""
        nk, eta = admittance(slice(lo, hi + 1))
        nl, nr, el, er = nk[:-1], nk[1:], eta[:-1], eta[1:]
        if pol == "s":
            den = el + er
            r, t = (el - er) / den, 2 * el / den
        else:
            den = nr * nr * el + nl * nl * er
            r, t = (nr * nr * el - nl * nl * er) / den, 2 * nl * nr * el / den
        bad = np.flatnonzero(np.any(t == 0, axis=(1, 2)))
        if len(bad):
            j = lo + int(bad[0])
            raise SingularInterfaceError(f"vanishing transmission at {media[j].name}|{media[j + 1].name}")
        inv_t = 1 / t
        return inv_t, r * inv_t

    layers = len(stack.layers)
    chunk = max(1, _CHUNK_ELEMENTS // (shape[0] * shape[1]))
    a, b = interfaces(0, 1)
    m11, m12 = np.broadcast_to(a[0], shape).copy(), np.broadcast_to(b[0], shape).copy()
    m21, m22 = m12.copy(), m11.copy()
    for lo in range(1, layers + 1, chunk):
        hi = min(lo + chunk, layers + 1)
        # interfaces lo..hi between media lo..hi, layers lo..hi-1 in between
        a, b = interfaces(lo, hi)
        _, eta = admittance(slice(lo, hi))
        kz_d = (2 * np.pi / wl) * eta * thickness[lo - 1 : hi - 1, None, None]
        P, Q = np.exp(-1j * kz_d), np.exp(1j * kz_d)
        for j in range(hi - lo):
            p, q, aj, bj = P[j], Q[j], a[j], b[j]
            m11 *= p
            m21 *= p
            m12 *= q
            m22 *= q
            m11, m12 = m11 * aj + m12 * bj, m11 * bj + m12 * aj
            m21, m22 = m21 * aj + m22 * bj, m21 * bj + m22 * aj

    if np.any(m11 == 0):
        raise SingularSystemError("m11 vanished")
    r = m21 / m11
    t = 1 / m11
    nsub = table[where[-1]][None, :]
    _, esub = admittance(slice(len(media) - 1, len(media)))
    esub = esub[0]
    eamb = np.sqrt(n_amb * n_amb - s2)
    if pol == "s":
        ratio = esub.real / eamb
    else:
        ratio = (np.conj(nsub) * esub / nsub).real / eamb
    R = (r * np.conj(r)).real
    T = (t * np.conj(t)).real * ratio
    _counters["matmul"] += (2 * layers + 1) * shape[0] * shape[1]
    _counters["points"] += shape[0] * shape[1]
    return R, T


def _block_response(stack, wavelengths, conditions):
    """R, T for every condition on a wavelength block; unpolarized = mean(s, p)."""
    conditions = list(conditions)
    out_r = np.empty((len(conditions), len(wavelengths)))
    out_t = np.empty_like(out_r)
    results = {}
    for pol in ("s", "p"):
        rows = [i for i, c in enumerate(conditions) if c.polarization in (pol, "unpolarized")]
        if rows:
            angles = [conditions[i].angle for i in rows]
            R, T = _block_rt(stack, wavelengths, angles, pol)
            results[pol] = {i: (R[k], T[k]) for k, i in enumerate(rows)}
    for i, c in enumerate(conditions):
        if c.polarization == "unpolarized":
            (rs, ts), (rp, tp) = results["s"][i], results["p"][i]
            out_r[i] = 0.5 * (rs + rp)
            out_t[i] = 0.5 * (ts + tp)
        else:
            out_r[i], out_t[i] = results[c.polarization][i]
    return out_r, out_t


@dataclass(frozen=True)
class SpectralResponse:
    wavelengths: np.ndarray
    R: np.ndarray
    T: np.ndarray
    A: np.ndarray

    def quantity(self, name):
        return {"R": self.R, "T": self.T, "A": self.A}[name]


def _check_coverage(stack, grid):
    lo, hi = stack.wavelength_range()
    if grid.wavelengths[0] < lo or grid.wavelengths[-1] > hi:
        raise RangeError(
            f"grid {grid.wavelengths[0]}-{grid.wavelengths[-1]} um not covered by materials ({lo}-{hi} um)"
        )


def spectrum(stack: LayerStack, grid: SpectralGrid, cond: IncidenceCondition) -> SpectralResponse:
    _check_coverage(stack, grid)
    R, T = _block_response(stack, grid.wavelengths, [cond])
    return SpectralResponse(grid.wavelengths, R[0], T[0], 1.0 - R[0] - T[0])


@dataclass
class SweepResult:
    conditions: tuple
    wavelengths: np.ndarray
    R: np.ndarray  # (conditions, wavelengths)
    T: np.ndarray
    elapsed: float = 0.0
    workers: int = 1
    matmuls: int = 0

    @property
    def A(self):
        return 1.0 - self.R - self.T

    def response(self, cond) -> SpectralResponse:
        i = self.conditions.index(cond)
        return SpectralResponse(self.wavelengths, self.R[i], self.T[i], 1.0 - self.R[i] - self.T[i])

    @property
    def responses(self):
        return {c: self.response(c) for c in self.conditions}

    def to_csv(self) -> str:
        lines = ["angle_deg,polarization,wavelength_um,R,T,A"]
        A = self.A
        for i, c in enumerate(self.conditions):
            for j, w in enumerate(self.wavelengths):
                lines.append(
                    f"{c.angle:.12g},{c.polarization},{w:.12g},{self.R[i, j]:.12g},{self.T[i, j]:.12g},{A[i, j]:.12g}"
                )
        return "\n".join(lines) + "\n"


def partition(count, workers):
    """Contiguous blocks of size ceil(count / workers); trailing workers may idle."""
    size = max(1, -(-count // workers))
    return [(lo, min(lo + size, count)) for lo in range(0, count, size)]


_worker_state = {}


def _init_worker(stack, wavelengths, conditions):
    _worker_state.update(stack=stack, wavelengths=wavelengths, conditions=conditions)
    reset_op_counts()


def _run_block(bounds):
    lo, hi = bounds
    before = _counters["matmul"]
    R, T = _block_response(_worker_state["stack"], _worker_state["wavelengths"][lo:hi], _worker_state["conditions"])
    return lo, R, T, _counters["matmul"] - before


def sweep(stack: LayerStack, grid: SpectralGrid, conditions, workers: int = 1) -> SweepResult:
    """Evaluate every (condition, wavelength) pair.

    The wavelength axis is cut into ``workers`` contiguous sub-domains; each
    worker process handles one sub-domain for all conditions and a single
    collector stitches the blocks back in order.  Output does not depend on
    ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    conditions = tuple(dict.fromkeys(conditions))
    if not conditions:
        raise SchemaError("sweep needs at least one incidence condition")
    _check_coverage(stack, grid)
    wl = grid.wavelengths
    t0 = time.perf_counter()
    blocks = partition(len(wl), workers)
    R = np.empty((len(conditions), len(wl)))
    T = np.empty_like(R)
    before = _counters["matmul"]
    if workers == 1 or len(blocks) == 1:
        for lo, hi in blocks:
            R[:, lo:hi], T[:, lo:hi] = _block_response(stack, wl[lo:hi], conditions)
        matmuls = _counters["matmul"] - before
    else:
        ctx = multiprocessing.get_context("fork" if "fork" in multiprocessing.get_all_start_methods() else None)
        matmuls = 0
        with ProcessPoolExecutor(
            max_workers=min(workers, len(blocks)),
            mp_context=ctx,
            initializer=_init_worker,
            initargs=(stack, wl, conditions),
        ) as pool:
            futures = [pool.submit(_run_block, b) for b in blocks]
            try:
                for fut in futures:
                    lo, r, t, count = fut.result()
                    R[:, lo : lo + r.shape[1]] = r
                    T[:, lo : lo + t.shape[1]] = t
                    matmuls += count
            except BaseException:
                for fut in futures:
                    fut.cancel()
                raise
        _counters["matmul"] += matmuls
        _counters["points"] += R.size
    return SweepResult(conditions, wl, R, T, time.perf_counter() - t0, workers, matmuls)


# ---------------------------------------------------------------------------
# figure of merit


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float
    quantity: str
    weight: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SchemaError(f"band needs lo < hi, got {self.lo}..{self.hi}")
        if self.quantity not in QUANTITIES:
            raise SchemaError(f"band quantity must be one of {QUANTITIES}")
        if not self.weight >= 0:
            raise SchemaError("band weight must be >= 0")


@dataclass(frozen=True)
class FomSpec:
    bands: tuple = field(default_factory=tuple)

    def __post_init__(self):
        bands = tuple(b if isinstance(b, Band) else Band(*b) for b in self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands or sum(b.weight for b in bands) <= 0:
            raise SchemaError("FOM spec needs at least one band with positive weight")


def default_trc_fom() -> FomSpec:
    """Transparent radiative cooler: pass visible, reflect UV and NIR, emit in 8-13 um."""
    return FomSpec(
        (
            Band(0.4, 0.8, "T", 1.0),
            Band(0.3, 0.4, "R", 1.0),
            Band(0.8, 2.5, "R", 1.0),
            Band(8.0, 13.0, "A", 1.0),
        )
    )


def default_trc_grid() -> SpectralGrid:
    return SpectralGrid(np.concatenate([np.linspace(0.3, 2.5, 45), np.linspace(8.0, 13.0, 11)]))


def evaluate_fom(result: SweepResult, spec: FomSpec) -> float:
    wl = result.wavelengths
    total = 0.0
    for band in spec.bands:
        if band.lo < wl[0] or band.hi > wl[-1]:
            raise RangeError(f"band {band.lo}-{band.hi} um outside grid {wl[0]}-{wl[-1]} um")
        mask = (wl >= band.lo) & (wl <= band.hi)
        if not mask.any():
            raise RangeError(f"band {band.lo}-{band.hi} um contains no grid points")
        values = {"R": result.R, "T": result.T, "A": result.A}[band.quantity][:, mask]
        total += band.weight * float(values.mean(axis=1).mean())
    return total / sum(b.weight for b in spec.bands)
