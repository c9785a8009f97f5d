"""Truncated periodic grids, complex fields, transforms and weighted norms.

A `Grid` truncates R^d (d = 1 or 2) to the torus [-L, L)^d with n points
per axis; fields are complex samples on it.  Norm claims only make sense
for fields that decay at the boundary, which `boundary_mass` diagnoses.

The weighted norms are

    ||f||_{H^{r,rho}} = || <x>^r <D>^rho f ||_{L2}
    ||f||_{HZ_{z,zeta}} = sum_{j=0..z} ||f||_{H^{z-j, j+zeta}}

with <x>^r applied after <D>^rho (the factored form all estimate checks
use; `quantize.apply_op` reduces to the same composition).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import conventions as conv

FIELD_LAYOUT = "float64-le (re,im) pairs, row-major"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^d."""

    d: int
    n: int
    half_width: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def spacing(self) -> float:
        return conv.spacing(self.n, self.half_width)

    @property
    def freq_spacing(self) -> float:
        return conv.freq_spacing(self.half_width)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    def axis(self) -> np.ndarray:
        """Spatial nodes along one axis (ascending)."""
        return conv.axis_points(self.n, self.half_width)

    def freq_axis_fft(self) -> np.ndarray:
        """Frequency nodes along one axis, fft bin order."""
        return conv.axis_freqs_fft_order(self.n, self.half_width)

    def freq_axis(self) -> np.ndarray:
        """Frequency nodes along one axis, ascending."""
        return np.fft.fftshift(self.freq_axis_fft())

    def points(self) -> tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays (one per axis, `shape`-shaped)."""
        return tuple(np.meshgrid(*([self.axis()] * self.d), indexing="ij"))

    def freq_points_fft(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.freq_axis_fft()] * self.d), indexing="ij"))

    def dual(self) -> "Grid":
        """The frequency-side grid (nodes pi k / L, k in [-n/2, n/2))."""
        return Grid(self.d, self.n, self.freq_spacing * self.n / 2.0)


@lru_cache(maxsize=128)
def _x_bracket(grid: Grid) -> np.ndarray:
    return conv.bracket_radial(*([grid.axis()] * grid.d))


@lru_cache(maxsize=128)
def _xi_bracket_fft(grid: Grid) -> np.ndarray:
    return conv.bracket_radial(*([grid.freq_axis_fft()] * grid.d))


@dataclass
class Field:
    """Complex samples of u on a grid.  Value-semantic: ops return copies."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        self.values = vals

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), dict(self.meta))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values.view(np.float64))))


def field_from_function(grid: Grid, fn) -> Field:
    """Sample fn(x) (d=1) or fn(x, y) (d=2) on the grid."""
    vals = np.asarray(fn(*grid.points()), dtype=np.complex128)
    return Field(grid, np.broadcast_to(vals, grid.shape).copy())


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=np.complex128))


def gaussian_field(grid: Grid, width: float = 1.0, center=0.0, amp: float = 1.0) -> Field:
    """amp * exp(-|x - c|^2 / (2 width^2)), the workhorse test datum."""
    centers = np.broadcast_to(np.asarray(center, dtype=float), (grid.d,))
    sq = 0.0
    for ax, c in zip(grid.points(), centers):
        sq = sq + (ax - c) ** 2
    return Field(grid, (amp * np.exp(-sq / (2.0 * width**2))).astype(np.complex128))


# -- transforms ---------------------------------------------------------------

def forward_values(vals: np.ndarray, grid: Grid) -> np.ndarray:
    """Rectangle-rule approximation of (F f)(xi) on the dual grid (ascending)."""
    h = grid.spacing
    return (h**grid.d) * np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(vals)))


def inverse_values(spec: np.ndarray, grid: Grid) -> np.ndarray:
    """Inverse of `forward_values` (exact round trip on the grid)."""
    h = grid.spacing
    return np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(spec))) / (h**grid.d)


def forward_transform(f: Field) -> Field:
    """Forward transform; the result lives on the dual (frequency) grid."""
    return Field(f.grid.dual(), forward_values(f.values, f.grid))


def inverse_transform(fhat: Field, grid: Grid) -> Field:
    """Inverse transform back onto the given spatial grid."""
    if fhat.grid != grid.dual():
        raise ValueError("spectrum grid does not match the dual of the target grid")
    return Field(grid, inverse_values(fhat.values, grid))


def multiplier_values(vals: np.ndarray, mult_fft: np.ndarray) -> np.ndarray:
    """Apply a frequency multiplier given in fft bin order.

    Equals inverse(mult * forward(.)): the grid-offset phases cancel for
    diagonal multipliers, so no shifts or h-factors are needed.  Batches
    over any leading axes of `vals`.
    """
    axes = tuple(range(vals.ndim - mult_fft.ndim, vals.ndim))
    return np.fft.ifftn(mult_fft * np.fft.fftn(vals, axes=axes), axes=axes)


# -- norms --------------------------------------------------------------------

def l2_norm_values(vals: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(vals) ** 2)))


def l2_norm(f: Field) -> float:
    """Discrete L2 norm (rectangle rule)."""
    return l2_norm_values(f.values, f.grid)


def _sk_values(vals: np.ndarray, grid: Grid, r: float, rho: float) -> np.ndarray:
    """<x>^r <D>^rho applied to a batch (..., *grid.shape) of samples."""
    out = vals
    if rho != 0.0:
        axes = tuple(range(vals.ndim - grid.d, vals.ndim))
        out = np.fft.ifftn(_xi_bracket_fft(grid) ** rho * np.fft.fftn(vals, axes=axes), axes=axes)
    if r != 0.0:
        out = _x_bracket(grid) ** r * out
    return out


def sobolev_kato_norm_batch(vals: np.ndarray, grid: Grid, r: float, rho: float) -> np.ndarray:
    w = _sk_values(vals, grid, r, rho)
    axes = tuple(range(vals.ndim - grid.d, vals.ndim))
    return np.sqrt(grid.cell_volume * np.sum(np.abs(w) ** 2, axis=axes))


def sobolev_kato_norm(f: Field, r: float, rho: float) -> float:
    """|| <x>^r <D>^rho f ||_{L2}; (0,0) is the plain L2 norm."""
    return float(sobolev_kato_norm_batch(f.values, f.grid, r, rho))


def h_zz_norm_batch(vals: np.ndarray, grid: Grid, z: int, zeta: int) -> np.ndarray:
    if z < 0 or zeta < 0:
        raise ValueError("z and zeta must be nonnegative integers")
    total = 0.0
    for j in range(z + 1):
        total = total + sobolev_kato_norm_batch(vals, grid, z - j, j + zeta)
    return total


def h_zz_norm(f: Field, z: int, zeta: int) -> float:
    """Solution-space norm: sum_{j=0..z} ||f||_{H^{z-j, j+zeta}}."""
    return float(h_zz_norm_batch(f.values, f.grid, z, zeta))


@dataclass(frozen=True)
class NormSpec:
    """Either a single Sobolev-Kato pair (r, rho) or the summed (z, zeta) norm."""

    r: float | None = None
    rho: float | None = None
    z: int | None = None
    zeta: int | None = None

    def __post_init__(self):
        sk = self.r is not None and self.rho is not None
        hz = self.z is not None and self.zeta is not None
        if sk == hz:
            raise ValueError("specify exactly one of (r, rho) or (z, zeta)")
        if hz and (self.z < 0 or self.zeta < 0):
            raise ValueError("z, zeta must be nonnegative integers")

    def of(self, f: Field) -> float:
        return float(self.of_batch(f.values, f.grid))

    def of_batch(self, vals: np.ndarray, grid: Grid) -> np.ndarray:
        if self.z is not None:
            return h_zz_norm_batch(vals, grid, self.z, self.zeta)
        return sobolev_kato_norm_batch(vals, grid, self.r, self.rho)


# -- diagnostics ---------------------------------------------------------------

BOUNDARY_FLAG_THRESHOLD = 1e-8


def boundary_mass(f: Field, layers: int = 2) -> float:
    """sup |f| on the outermost grid layers relative to sup |f| overall.

    Periodization error is negligible only while this stays tiny; runs
    are flagged when it exceeds BOUNDARY_FLAG_THRESHOLD.
    """
    a = np.abs(f.values)
    peak = float(a.max(initial=0.0))
    if peak == 0.0:
        return 0.0
    edge = 0.0
    for ax in range(f.grid.d):
        sl_lo = [slice(None)] * f.grid.d
        sl_hi = [slice(None)] * f.grid.d
        sl_lo[ax] = slice(0, layers)
        sl_hi[ax] = slice(-layers, None)
        edge = max(edge, float(a[tuple(sl_lo)].max()), float(a[tuple(sl_hi)].max()))
    return edge / peak


def algebra_constant_probe(z: int, zeta: int, samples: list[tuple[Field, Field]]) -> float:
    """max ||uv|| / (||u|| ||v||) over sample pairs in the (z, zeta) norm.

    Only meaningful when zeta > d/2 (the algebra regime); callers gate on
    that before claiming a PASS.
    """
    best = 0.0
    for u, v in samples:
        nu, nv = h_zz_norm(u, z, zeta), h_zz_norm(v, z, zeta)
        if nu == 0.0 or nv == 0.0:
            continue
        prod = Field(u.grid, u.values * v.values)
        best = max(best, h_zz_norm(prod, z, zeta) / (nu * nv))
    return best


# -- serialization -------------------------------------------------------------

def field_to_bytes(f: Field) -> bytes:
    """Little-endian float64 (re, im) pairs in row-major order."""
    flat = np.empty(f.values.size * 2, dtype="<f8")
    flat[0::2] = f.values.real.ravel()
    flat[1::2] = f.values.imag.ravel()
    return flat.tobytes()


def field_sidecar(f: Field, checksum: str) -> dict:
    return {
        "d": f.grid.d,
        "n": f.grid.n,
        "L": f.grid.half_width,
        "layout": FIELD_LAYOUT,
        "count": int(f.values.size),
        "sha256": checksum,
    }


def save_field(f: Field, path) -> dict:
    """Write <path> (binary) and <path>.json (sidecar); returns the sidecar."""
    raw = field_to_bytes(f)
    checksum = hashlib.sha256(raw).hexdigest()
    with open(path, "wb") as fh:
        fh.write(raw)
    side = field_sidecar(f, checksum)
    with open(f"{path}.json", "w") as fh:
        json.dump(side, fh, indent=1)
    return side


def load_field(path) -> Field:
    with open(f"{path}.json") as fh:
        side = json.load(fh)
    with open(path, "rb") as fh:
        raw = fh.read()
    if hashlib.sha256(raw).hexdigest() != side["sha256"]:
        raise ValueError(f"checksum mismatch for {path}")
    flat = np.frombuffer(raw, dtype="<f8")
    vals = (flat[0::2] + 1j * flat[1::2]).reshape((side["n"],) * side["d"])
    return Field(Grid(side["d"], side["n"], side["L"]), vals)
