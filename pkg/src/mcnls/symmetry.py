"""The symmetry group G, its enlargement G' and the radial subgroups.

A group element g = (theta, xi0, x0, lam) acts on L^2 by

    g f(x) = lam^{-d/2} e^{i theta} e^{i x.xi0} f((x - x0) / lam)

and an enlarged element (g, t0) acts by g e^{i t0 Delta}.  Parameter names
follow the (theta, xi0, x0, lam) ordering throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, dilate, lp_norm, translate
from .propagator import Trajectory, free_propagate

TWO_PI = 2.0 * math.pi
ALIAS_TOL = 1e-6

__all__ = [
    "GroupElement",
    "EnlargedElement",
    "RadialElement",
    "identity",
    "compose",
    "inverse",
    "apply",
    "apply_enlarged",
    "apply_trajectory",
    "separation",
    "galilean",
    "mixed_norm",
]


def _vec(v, dim: int | None = None) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if dim is not None and arr.size == 1 and dim > 1:
        arr = np.full(dim, float(arr[0]))
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class GroupElement:
    theta: float = 0.0
    xi0: tuple = (0.0,)
    x0: tuple = (0.0,)
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        xi0 = _vec(self.xi0)
        x0 = _vec(self.x0, len(xi0))
        if len(xi0) != len(x0):
            xi0 = _vec(self.xi0, len(x0))
        object.__setattr__(self, "xi0", xi0)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dim(self) -> int:
        return len(self.xi0)

    @property
    def t0(self) -> float:
        return 0.0

    @property
    def base(self) -> "GroupElement":
        return self

    def params(self) -> np.ndarray:
        return np.array([self.theta, *self.xi0, *self.x0, self.lam])

    def to_json(self) -> dict:
        return {"theta": self.theta, "xi0": list(self.xi0), "x0": list(self.x0), "lambda": self.lam}

    @classmethod
    def from_json(cls, d: dict) -> "GroupElement":
        if "t0" in d and d["t0"] is not None:
            return EnlargedElement.from_json(d)
        return cls(d.get("theta", 0.0), d.get("xi0", [0.0]), d.get("x0", [0.0]), d.get("lambda", 1.0))

    # one-parameter factors
    @classmethod
    def phase(cls, theta, dim=1):
        return cls(theta, (0.0,) * dim, (0.0,) * dim, 1.0)

    @classmethod
    def modulation(cls, xi0, dim=1):
        return cls(0.0, _vec(xi0, dim), (0.0,) * len(_vec(xi0, dim)), 1.0)

    @classmethod
    def translation(cls, x0, dim=1):
        return cls(0.0, (0.0,) * len(_vec(x0, dim)), _vec(x0, dim), 1.0)

    @classmethod
    def dilation(cls, lam, dim=1):
        return cls(0.0, (0.0,) * dim, (0.0,) * dim, lam)


@dataclass(frozen=True)
class EnlargedElement:
    base: GroupElement
    t0: float = 0.0

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def theta(self):
        return self.base.theta

    @property
    def xi0(self):
        return self.base.xi0

    @property
    def x0(self):
        return self.base.x0

    @property
    def lam(self):
        return self.base.lam

    def to_json(self) -> dict:
        return {**self.base.to_json(), "t0": float(self.t0)}

    @classmethod
    def from_json(cls, d: dict) -> "EnlargedElement":
        base = GroupElement(d.get("theta", 0.0), d.get("xi0", [0.0]), d.get("x0", [0.0]), d.get("lambda", 1.0))
        return cls(base, float(d.get("t0") or 0.0))


@dataclass(frozen=True)
class RadialElement:
    theta: float = 0.0
    lam: float = 1.0
    t0: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def embed(self, dim: int = 1):
        base = GroupElement(self.theta, (0.0,) * dim, (0.0,) * dim, self.lam)
        return base if self.t0 is None else EnlargedElement(base, self.t0)


def identity(dim: int = 1) -> GroupElement:
    return GroupElement(0.0, (0.0,) * dim, (0.0,) * dim, 1.0)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """The product g h (apply h first)."""
    xi, x, xi2, x2 = map(np.asarray, (g.xi0, g.x0, h.xi0, h.x0))
    return GroupElement(
        g.theta + h.theta - float(x @ xi2) / g.lam,
        xi + xi2 / g.lam,
        x + g.lam * x2,
        g.lam * h.lam,
    )


def inverse(g: GroupElement) -> GroupElement:
    xi, x = np.asarray(g.xi0), np.asarray(g.x0)
    return GroupElement(-g.theta - float(x @ xi), -g.lam * xi, -x / g.lam, 1.0 / g.lam)


def _aliasing_fraction(values: np.ndarray, grid: Grid, lam: float) -> float:
    # spectral mass that a shrink by lam pushes beyond ~0.9 of the Nyquist band
    if lam >= 1.0:
        return 0.0
    spec = np.abs(np.fft.fftn(values)) ** 2
    total = spec.sum()
    if total == 0:
        return 0.0
    kmax = np.max(np.abs(np.stack(grid.xi)), axis=0)
    return float(spec[kmax > 0.9 * lam * grid.nyquist].sum() / total)


def apply(g: GroupElement, f: Field) -> Field:
    grid = f.grid
    if g.dim != grid.dim:
        raise ValueError(f"group element has dim {g.dim}, field has dim {grid.dim}")
    v = f.values
    alias = _aliasing_fraction(v, grid, g.lam)
    v = dilate(v, grid, g.lam)
    v = translate(v, grid, g.x0)
    phase = g.theta + sum(c * k for c, k in zip(grid.x, g.xi0))
    v = v * np.exp(1j * phase) * g.lam ** (-grid.dim / 2)
    out = Field(grid, v, f.label, diverged=f.diverged or alias > ALIAS_TOL)
    out.meta["aliasing"] = alias
    return out


def apply_enlarged(g, f: Field) -> Field:
    if isinstance(g, RadialElement):
        g = g.embed(f.grid.dim)
    if isinstance(g, EnlargedElement):
        return apply(g.base, free_propagate(f, g.t0))
    return apply(g, f)


def _slice_element(g, t: float):
    """Group element applied to u(t / lam^2) at output time t."""
    xi = np.asarray(g.xi0)
    base = GroupElement(g.theta - t * float(xi @ xi), xi, np.asarray(g.x0) + 2 * xi * t, g.lam)
    if isinstance(g, EnlargedElement):
        return EnlargedElement(base, g.t0)
    return base


def apply_trajectory(g, traj: Trajectory) -> Trajectory:
    """T_g u on the rescaled interval lam^2 I (times rescaled, not re-integrated)."""
    if isinstance(g, RadialElement):
        g = g.embed(traj.grid.dim)
    new_times = g.lam**2 * np.asarray(traj.times)
    vals = np.empty_like(traj.values)
    for i, (t, u) in enumerate(zip(new_times, traj.values)):
        vals[i] = apply_enlarged(_slice_element(g, t), Field(traj.grid, u)).values
    return traj.replace(times=new_times, values=vals, label=f"T_g({traj.label})")


def separation(a, b) -> float:
    la, lb = a.lam, b.lam
    ta, tb = getattr(a, "t0", 0.0) or 0.0, getattr(b, "t0", 0.0) or 0.0
    return float(
        la / lb
        + lb / la
        + abs(ta * la**2 - tb * lb**2)
        + np.linalg.norm(np.subtract(a.xi0, b.xi0))
        + np.linalg.norm(np.subtract(a.x0, b.x0))
    )


def galilean(xi, t: float = 0.0, dim: int = 1) -> GroupElement:
    """The slice-time element of the Galilean transform T_{g_{0,xi,0,1}} at time t."""
    return _slice_element(GroupElement.modulation(xi, dim), t)


def mixed_norm(v: Trajectory, w: Trajectory, theta: float = 0.5) -> float:
    """|| |v|^{1-theta} |w|^theta ||_{L^{2(d+2)/d}_{t,x}} on common snapshot times."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    p = 2 * (v.grid.dim + 2) / v.grid.dim
    prod = np.abs(v.values) ** (1 - theta) * np.abs(w.values) ** theta
    return v.replace(values=prod.astype(complex)).spacetime_norm(p)


def field_mixed_norm(f: Field, g: Field, theta: float = 0.5) -> float:
    p = 2 * (f.grid.dim + 2) / f.grid.dim
    return lp_norm(Field(f.grid, np.abs(f.values) ** (1 - theta) * np.abs(g.values) ** theta), p)
