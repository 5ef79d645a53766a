"""Periodic-box discretization of R^d, Fourier conventions and L^p functionals.

The box is [-L, L)^d sampled at n points per axis.  Fourier transforms use the
unnormalized convention

    fhat(xi) = int e^{-i x.xi} f(x) dx

approximated by a Riemann sum on the grid, so Plancherel carries a (2 pi)^{-d}
factor.  Spectra are stored in FFT (not centered) order; ``Grid.xi`` gives the
matching frequency axes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.signal import czt

__all__ = [
    "Grid",
    "Field",
    "Spectrum",
    "make_grid",
    "fourier",
    "inverse_fourier",
    "mass",
    "inner",
    "lp_norm",
    "spacetime_lp_norm",
    "time_integral",
    "boundary_mass",
    "translate",
    "dilate",
    "write_field",
    "read_field",
]

SNAPSHOT_MAGIC = b"MCNL"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    dim: int
    n: int
    L: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_axis must be a power of two >= 8, got {n}")
        if not self.L > 0:
            raise ValueError(f"box_halfwidth must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell(self) -> float:
        """Volume element h^d."""
        return self.h**self.dim

    @property
    def nyquist(self) -> float:
        return self.n * np.pi / (2.0 * self.L)

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def xi_axis(self) -> np.ndarray:
        return self.dxi * np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x_axis] * self.dim), indexing="ij"))

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.xi_axis] * self.dim), indexing="ij"))

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(c**2 for c in self.x)

    @cached_property
    def xi2(self) -> np.ndarray:
        return sum(k**2 for k in self.xi)

    @cached_property
    def _sign(self) -> np.ndarray:
        # (-1)^k accounts for the box starting at -L rather than 0
        s1 = np.where(np.fft.fftfreq(self.n, 1.0 / self.n).astype(int) % 2 == 0, 1.0, -1.0)
        out = s1
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, s1)
        return out

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)

    def to_json(self) -> dict:
        return {"dim": self.dim, "n": int(self.n), "L": float(self.L)}


def make_grid(dim: int, points_per_axis: int, box_halfwidth: float) -> Grid:
    return Grid(int(dim), int(points_per_axis), float(box_halfwidth))


@dataclass
class Field:
    """One time slice u(t) sampled on a grid."""

    grid: Grid
    values: np.ndarray
    label: str | None = None
    diverged: bool = False
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.size == self.grid.size and self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not self.diverged and not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite samples")

    def copy(self, values=None, **kw) -> "Field":
        return Field(
            self.grid,
            self.values.copy() if values is None else values,
            kw.get("label", self.label),
            kw.get("diverged", self.diverged),
            dict(self.meta),
        )

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Spectrum:
    grid: Grid
    coeffs: np.ndarray

    def centered(self) -> np.ndarray:
        return np.fft.fftshift(self.coeffs)


def fourier(f: Field) -> Spectrum:
    g = f.grid
    return Spectrum(g, g.cell * g._sign * np.fft.fftn(f.values))


def inverse_fourier(s: Spectrum, label: str | None = None) -> Field:
    g = s.grid
    return Field(g, np.fft.ifftn(s.coeffs * g._sign) / g.cell, label)


def mass(f: Field) -> float:
    return float(np.sum(np.abs(f.values) ** 2) * f.grid.cell)


def spectral_mass(s: Spectrum) -> float:
    g = s.grid
    return float(np.sum(np.abs(s.coeffs) ** 2) * (g.dxi / (2 * np.pi)) ** g.dim)


def inner(f: Field, g: Field) -> complex:
    """<f, g> = int f conj(g) dx."""
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.cell)


def lp_norm(f: Field, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * f.grid.cell) ** (1.0 / p))


def time_integral(times, values) -> float:
    """Trapezoid rule over (possibly nonuniform) time nodes."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


def spacetime_lp_norm(trajectory, p: float) -> float:
    """||u||_{L^p_{t,x}} with the trapezoid rule in t over stored snapshots."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = trajectory.grid
    axes = tuple(range(1, g.dim + 1))
    dens = np.sum(np.abs(trajectory.values) ** p, axis=axes) * g.cell
    return time_integral(trajectory.times, dens) ** (1.0 / p)


def boundary_mass(f: Field) -> float:
    """Mass outside the inner half box |x|_inf <= L/2."""
    g = f.grid
    outer = np.zeros(g.shape, dtype=bool)
    for c in g.x:
        outer |= np.abs(c) > g.L / 2
    return float(np.sum(np.abs(f.values[outer]) ** 2) * g.cell)


def translate(values: np.ndarray, grid: Grid, shift) -> np.ndarray:
    """Periodic band-limited translation v(x) -> v(x - shift)."""
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (grid.dim,))
    if not np.any(shift):
        return values
    phase = sum(k * s for k, s in zip(grid.xi, shift))
    return np.fft.ifftn(np.fft.fftn(values) * np.exp(-1j * phase))


def _dilate_axis(a: np.ndarray, grid: Grid, lam: float, axis: int) -> np.ndarray:
    # evaluate the trigonometric interpolant along `axis` at y_j = x_j / lam
    n, L, h, dxi = grid.n, grid.L, grid.h, grid.dxi
    a = np.moveaxis(a, axis, -1)
    k = np.fft.fftfreq(n, 1.0 / n)
    c = np.fft.fftshift(np.fft.fft(a, axis=-1) * np.where(k % 2 == 0, 1.0, -1.0) / n, axes=-1)
    # split the unpaired -n/2 mode symmetrically between -n/2 and +n/2
    c = np.concatenate([c, c[..., :1] / 2], axis=-1)
    c[..., 0] /= 2
    kk = np.arange(-n // 2, n // 2 + 1)
    y = grid.x_axis / lam
    dy = h / lam
    c = c * np.exp(1j * kk * dxi * y[0])
    out = czt(c, m=n, w=np.exp(1j * dxi * dy), a=1.0, axis=-1)
    out = out * np.exp(-1j * (n // 2) * dxi * dy * np.arange(n))
    # functions live in the box: no periodic images when shrinking
    out = out * (np.abs(y) <= L)
    return np.moveaxis(out, -1, axis)


MAX_STAGE = 8.0


def dilate(values: np.ndarray, grid: Grid, lam: float) -> np.ndarray:
    """v(x) -> v(x / lam) by band-limited interpolation (lam may be negative).

    Dilations beyond [1/8, 8] are applied in equal geometric stages.
    """
    if lam == 1.0:
        return values
    if lam == 0:
        raise ValueError("dilation factor must be nonzero")
    mag = abs(lam)
    stages = max(1, math.ceil(abs(math.log(mag)) / math.log(MAX_STAGE) - 1e-12))
    steps = [mag ** (1.0 / stages)] * stages
    if lam < 0:
        steps[0] = -steps[0]
    out = np.asarray(values, dtype=complex)
    for step in steps:
        for ax in range(grid.dim):
            out = _dilate_axis(out, grid, step, ax)
    return out


def write_field(path, f: Field) -> None:
    g = f.grid
    header = SNAPSHOT_MAGIC + struct.pack("<HHId", SNAPSHOT_VERSION, g.dim, g.n, g.L)
    body = np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C")
    Path(path).write_bytes(header + body)


def read_field(path) -> Field:
    raw = Path(path).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not an MCNL snapshot")
    version, dim, n, L = struct.unpack("<HHId", raw[4:20])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    g = Grid(dim, n, L)
    vals = np.frombuffer(raw[20:], dtype="<c16")
    if vals.size != g.size:
        raise ValueError(f"{path}: expected {g.size} samples, found {vals.size}")
    return Field(g, vals.reshape(g.shape).astype(complex), diverged=not np.all(np.isfinite(vals)))
