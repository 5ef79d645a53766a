"""Concentration parameters, Littlewood-Paley projections and frequency-side checks.

x(t) and xi(t) are coordinate-wise mass medians; N(t) is the smallest dyadic
radius around xi(t) outside of which at most a fraction eta_ref of the mass
lives.  The concentration constants C(eta) use absolute mass thresholds eta.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .grid import Field, Grid, fourier, inverse_fourier, lp_norm, mass, spectral_mass, time_integral
from .propagator import SolverConfig, Trajectory, dual_norm, evolve, pde_defect, scattering_exponent

__all__ = [
    "LPProjector",
    "ConcentrationTrack",
    "lp_bands",
    "project",
    "centers",
    "concentration_scale",
    "scale",
    "concentration_profile",
    "frequency_localization_report",
    "bilinear_ratio",
    "strong_strichartz_norm",
    "negative_regularity_check",
    "galilean_functional",
]


def _raised_cosine_low(r: np.ndarray, N: float) -> np.ndarray:
    # 1 on |xi| <= N, 0 on |xi| >= 2N, cos^2 in log2 |xi| between
    out = np.ones_like(r)
    mid = (r > N) & (r < 2 * N)
    out[mid] = np.cos(0.5 * np.pi * np.log2(r[mid] / N)) ** 2
    out[r >= 2 * N] = 0.0
    return out


@dataclass(frozen=True)
class LPProjector:
    cutoff: float
    shape: str = "raised_cosine"
    kind: str = "low"
    upper: float | None = None
    center: tuple | None = None

    def __post_init__(self):
        if self.shape not in ("sharp", "raised_cosine"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.kind not in ("low", "band", "high"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not self.cutoff > 0 or (self.upper is not None and self.upper <= self.cutoff):
            raise ValueError("need 0 < cutoff < upper")

    def _low(self, r: np.ndarray, N: float) -> np.ndarray:
        if self.shape == "sharp":
            return (r <= N).astype(float)
        return _raised_cosine_low(r, N)

    def multiplier(self, grid: Grid) -> np.ndarray:
        c = (0.0,) * grid.dim if self.center is None else tuple(np.broadcast_to(self.center, (grid.dim,)))
        r = np.sqrt(sum((k - ck) ** 2 for k, ck in zip(grid.xi, c)))
        if self.kind == "low":
            return self._low(r, self.cutoff)
        if self.kind == "high":
            return 1.0 - self._low(r, self.cutoff)
        if self.upper is not None:
            # annulus cutoff < |xi| < upper
            if self.shape == "sharp":
                return ((r > self.cutoff) & (r < self.upper)).astype(float)
            return self._low(r, self.upper / 2) - self._low(r, self.cutoff)
        # dyadic piece "~N": low_N - low_{N/2}
        if self.shape == "sharp":
            return ((r > self.cutoff / 2) & (r <= self.cutoff)).astype(float)
        return self._low(r, self.cutoff) - self._low(r, self.cutoff / 2)


def lp_bands(grid: Grid, shape: str = "raised_cosine") -> list[LPProjector]:
    """Dyadic partition of unity: a low piece holding the zero mode, then bands."""
    n_min = 2.0 ** math.floor(math.log2(grid.dxi) - 1e-12)
    if n_min >= grid.dxi:
        n_min /= 2
    top = math.sqrt(grid.dim) * grid.nyquist
    bands = [LPProjector(n_min, shape, "low")]
    N = 2 * n_min
    while True:
        bands.append(LPProjector(N, shape, "band"))
        # sharp bands end once N covers the corner; smooth ones once low_{N}=1 there
        if N >= top:
            break
        N *= 2
    return bands


def project(f: Field, projector: LPProjector) -> Field:
    s = fourier(f)
    m = projector.multiplier(f.grid)
    return inverse_fourier(type(s)(s.grid, s.coeffs * m), f.label)


def _median(coord: np.ndarray, weights: np.ndarray) -> float:
    cum = np.cumsum(weights)
    i = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(coord[min(i, coord.size - 1)])


def _marginals(w: np.ndarray, d: int):
    for ax in range(d):
        other = tuple(a for a in range(d) if a != ax)
        yield ax, (w.sum(axis=other) if other else w)


def centers(f: Field) -> tuple[np.ndarray, np.ndarray]:
    """(x_center, xi_center): coordinate-wise mass medians in space and frequency."""
    g = f.grid
    if mass(f) < 1e-12:
        raise ValueError("field has (near) zero mass; use the N(t) floor convention instead of centers")
    w = np.abs(f.values) ** 2
    x_c = np.array([_median(g.x_axis, m) for _, m in _marginals(w, g.dim)])
    spec = np.fft.fftshift(np.abs(fourier(f).coeffs) ** 2)
    xi_sorted = np.fft.fftshift(g.xi_axis)
    xi_c = np.array([_median(xi_sorted, m) for _, m in _marginals(spec, g.dim)])
    return x_c, xi_c


def _capture_radius(dist: np.ndarray, weights: np.ndarray, eta_mass: float) -> float:
    """Smallest r such that the weight at dist > r is at most eta_mass."""
    order = np.argsort(dist.ravel(), kind="stable")
    d = dist.ravel()[order]
    w = weights.ravel()[order]
    tail = np.cumsum(w[::-1])[::-1]  # tail[k] = weight at indices >= k
    ok = np.nonzero(tail <= eta_mass)[0]
    if ok.size == 0:
        return float(d[-1])
    k = int(ok[0])
    return 0.0 if k == 0 else float(d[k - 1])


def concentration_scale(f: Field, eta_ref: float = 0.1) -> float:
    """Smallest dyadic N with spectral mass outside |xi - xi_center| <= N at most eta_ref * M."""
    g = f.grid
    if mass(f) < 1e-12:
        return g.dxi
    _, xi_c = centers(f)
    spec = np.abs(fourier(f).coeffs) ** 2 * (g.dxi / (2 * np.pi)) ** g.dim
    dist = np.sqrt(sum((k - c) ** 2 for k, c in zip(g.xi, xi_c)))
    r = _capture_radius(dist, spec, eta_ref * spec.sum())
    N = 2.0 ** math.ceil(math.log2(r)) if r > 0 else g.dxi
    return float(min(max(N, g.dxi), g.nyquist))


scale = concentration_scale


@dataclass
class ConcentrationTrack:
    times: np.ndarray
    x_center: np.ndarray
    xi_center: np.ndarray
    scale: np.ndarray
    c_eta_table: dict = dc_field(default_factory=dict)

    def monotone(self) -> bool:
        etas = sorted(self.c_eta_table)
        vals = [self.c_eta_table[e] for e in etas]
        return all(a >= b for a, b in zip(vals, vals[1:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eta", "C"])
            for e in sorted(self.c_eta_table):
                w.writerow([repr(float(e)), repr(float(self.c_eta_table[e]))])

    def to_json(self) -> dict:
        return {
            "times": self.times.tolist(),
            "x_center": self.x_center.tolist(),
            "xi_center": self.xi_center.tolist(),
            "scale": self.scale.tolist(),
            "c_eta": {repr(float(k)): float(v) for k, v in sorted(self.c_eta_table.items())},
        }


def concentration_profile(traj: Trajectory, etas=(0.5, 0.1, 0.01)) -> ConcentrationTrack:
    g = traj.grid
    xs, xis, Ns = [], [], []
    per_snap = []
    for f in traj.fields:
        xc, xic = centers(f)
        N = concentration_scale(f, traj.config.eta_ref)
        xs.append(xc)
        xis.append(xic)
        Ns.append(N)
        dx = np.sqrt(sum((c - a) ** 2 for c, a in zip(g.x, xc))) * N
        dk = np.sqrt(sum((k - a) ** 2 for k, a in zip(g.xi, xic))) / N
        wx = np.abs(f.values) ** 2 * g.cell
        wk = np.abs(fourier(f).coeffs) ** 2 * (g.dxi / (2 * np.pi)) ** g.dim
        per_snap.append((dx, wx, dk, wk))
    table = {}
    for eta in etas:
        c = 0.0
        for dx, wx, dk, wk in per_snap:
            c = max(c, _capture_radius(dx, wx, eta), _capture_radius(dk, wk, eta))
        table[float(eta)] = c
    return ConcentrationTrack(traj.times.copy(), np.array(xs), np.array(xis), np.array(Ns), table)


def frequency_localization_report(f: Field, eta: float = 0.1, c: float = 1 / 16, C: float = 16.0) -> dict:
    N = concentration_scale(f, eta)
    norm = math.sqrt(mass(f))
    lo = lp_norm(project(f, LPProjector(c * N, "sharp", "low")), 2)
    hi = lp_norm(project(f, LPProjector(C * N, "sharp", "high")), 2)
    band = lp_norm(project(f, LPProjector(c * N, "sharp", "band", upper=C * N)), 2)
    return {
        "N_loc": N,
        "low_mass": lo,
        "high_mass": hi,
        "band_mass": band,
        "norm": norm,
        "localized": bool(lo <= eta * norm and hi <= eta * norm and band >= norm / 2),
    }


def strong_strichartz_norm(traj: Trajectory, t0_index: int = 0) -> float:
    """||u(t0)||_2 + ||(i d_t + Delta) u||_{L^{2(d+2)/(d+4)}_{t,x}}."""
    g = traj.grid
    u = traj.values
    ut = np.gradient(u, traj.times, axis=0, edge_order=2)
    axes = tuple(range(1, g.dim + 1))
    lap = np.fft.ifftn(-g.xi2[None] * np.fft.fftn(u, axes=axes), axes=axes)
    return math.sqrt(mass(traj.field(t0_index))) + dual_norm(traj, 1j * ut + lap)


def _support_gap(a: np.ndarray, b: np.ndarray, grid: Grid, rel: float = 1e-10) -> float:
    pts = np.stack([k.ravel() for k in grid.xi], axis=1)
    sa = pts[(a.ravel() > rel * a.max())]
    sb = pts[(b.ravel() > rel * b.max())]
    if grid.dim == 1:
        sa, sb = np.sort(sa[:, 0]), sb[:, 0]
        j = np.clip(np.searchsorted(sa, sb), 1, sa.size - 1)
        return float(np.min(np.minimum(np.abs(sb - sa[j - 1]), np.abs(sb - sa[j]))))
    from scipy.spatial import cKDTree

    return float(cKDTree(sa).query(sb)[0].min())


def bilinear_ratio(u1: Trajectory, u2: Trajectory, q: float = 2.0, N: float = 1.0, freq_gap: float = 0.0) -> float:
    """||u1 u2||_{L^q_{t,x}} / (N^{d - (d+2)/q} ||u1||_{S*} ||u2||_{S*})."""
    g = u1.grid
    d = g.dim
    # the endpoint q = (d+3)/(d+1) is admitted: it is the default q = 2 in d = 1
    if q < (d + 3) / (d + 1):
        raise ValueError(f"q must be at least (d+3)/(d+1) = {(d + 3) / (d + 1)}")
    if not np.array_equal(u1.times, u2.times):
        raise ValueError("trajectories must share snapshot times")
    if mass(u2.field(0)) == 0 or mass(u1.field(0)) == 0:
        return 0.0
    spec1 = np.abs(np.fft.fftn(u1.values[0])) ** 2
    spec2 = np.abs(np.fft.fftn(u2.values[0])) ** 2
    r = np.sqrt(g.xi2)
    for s in (spec1, spec2):
        leak = s[r > N].sum() / s.sum()
        if leak > 1e-6:
            raise ValueError(f"input not frequency-supported in |xi| <= N (leakage {leak:.2e})")
    gap = _support_gap(spec1, spec2, g)
    if gap < freq_gap:
        raise ValueError(f"insufficient frequency separation: {gap:.4g} < {freq_gap:.4g}")
    axes = tuple(range(1, d + 1))
    dens = np.sum(np.abs(u1.values * u2.values) ** q, axis=axes) * g.cell
    num = time_integral(u1.times, dens) ** (1.0 / q)
    return float(num / (N ** (d - (d + 2) / q) * strong_strichartz_norm(u1) * strong_strichartz_norm(u2)))


def negative_regularity_check(
    u0: Field,
    A: float | None,
    s: float,
    t_span,
    config: SolverConfig,
    shape: str = "raised_cosine",
    traj: Trajectory | None = None,
) -> dict:
    """Per-dyadic spacetime norms ||P_N u||_{L^{2(d+2)/d}} against the envelope A N^s."""
    g = u0.grid
    bands = lp_bands(g, shape)
    data = [lp_norm(project(u0, b), 2) for b in bands]
    Ns = [b.cutoff for b in bands]
    if A is None:
        A = max(v / N**s for v, N in zip(data, Ns))
    hyp = all(v <= A * N**s * (1 + 1e-9) for v, N in zip(data, Ns))
    if traj is None:
        traj = evolve(u0, t_span, config)
    if traj.diverged:
        return {"diverged": True, "worst_ratio": float("inf"), "per_N_table": [], "A": A, "hypothesis_ok": hyp}
    p = scattering_exponent(g.dim)
    axes = tuple(range(1, g.dim + 1))
    uh = np.fft.fftn(traj.values, axes=axes)
    rows = []
    for b, N in zip(bands, Ns):
        m = b.multiplier(g)
        # fourier() carries the (-1)^k box-origin sign; plain fftn/ifftn round trips without it
        pu = np.fft.ifftn(uh * m[None], axes=axes)
        dens = np.sum(np.abs(pu) ** p, axis=axes) * g.cell
        norm = time_integral(traj.times, dens) ** (1.0 / p)
        rows.append({"N": N, "norm": norm, "bound_ratio": norm / (A * N**s)})
    worst = max(r["bound_ratio"] for r in rows)
    return {"diverged": False, "worst_ratio": worst, "per_N_table": rows, "A": A, "hypothesis_ok": hyp, "s": s}


def write_per_n_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "norm", "bound_ratio"])
        for r in report["per_N_table"]:
            w.writerow([repr(float(r["N"])), repr(float(r["norm"])), repr(float(r["bound_ratio"]))])


def galilean_functional(f: Field, xi, t: float = 0.0) -> float:
    """|| |grad|^{-1/4} G_xi(u)(t) ||_{L^{4d/(2d-1)}}, zero mode dropped."""
    from .symmetry import apply, galilean

    g = f.grid
    if mass(f) == 0:
        return 0.0
    v = apply(galilean(xi, t, g.dim), f)
    r = np.sqrt(g.xi2)
    mult = np.zeros_like(r)
    nz = r > 0
    mult[nz] = r[nz] ** -0.25
    w = np.fft.ifftn(np.fft.fftn(v.values) * mult)
    return lp_norm(Field(g, w), 4.0 * g.dim / (2 * g.dim - 1))
