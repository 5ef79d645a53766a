"""Free and nonlinear evolution of iu_t + Delta u = mu |u|^{4/d} u.

The nonlinear flow is integrated with Strang splitting: half a kinetic step
(exact spectral multiplier), a full nonlinear phase rotation (exact, since it
conserves |u| pointwise), half a kinetic step.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field, replace as dc_replace

import numpy as np

from .grid import Field, Grid, dilate, mass, spacetime_lp_norm, time_integral

__all__ = [
    "SolverConfig",
    "Trajectory",
    "ResidualReport",
    "free_propagate",
    "free_trajectory",
    "evolve",
    "scattering_size",
    "scattering_size_before",
    "scattering_size_after",
    "duhamel_residual",
    "pde_defect",
    "pseudoconformal",
    "stability_experiment",
    "stability_sweep",
    "blowup_monitor",
    "save_trajectory",
    "load_trajectory",
]


@dataclass(frozen=True)
class SolverConfig:
    mu: int = -1
    dim: int = 1
    dt: float = 1e-3
    dt_policy: str = "fixed"
    adaptive_cap: float = 0.1
    store_every: float = 1e-2
    max_steps: int = 10_000_000
    eta_ref: float = 0.1

    def __post_init__(self):
        if self.mu not in (-1, 0, 1):
            raise ValueError(f"mu must be +1 or -1 (0 for the free flow), got {self.mu}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.dt_policy not in ("fixed", "adaptive"):
            raise ValueError(f"unknown dt_policy {self.dt_policy!r}")
        if not self.store_every > 0:
            raise ValueError("store_every must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    config: SolverConfig
    grid: Grid
    times: np.ndarray
    values: np.ndarray
    diverged: bool = False
    boundary_mass_max: float = 0.0
    mass_drift: float = 0.0
    label: str = "u"
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != self.times.size:
            raise ValueError("times and snapshots differ in length")
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError("snapshot shape does not match grid")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def fields(self) -> list[Field]:
        return [Field(self.grid, v, diverged=self.diverged) for v in self.values]

    def field(self, i: int) -> Field:
        return Field(self.grid, self.values[i], diverged=self.diverged)

    def index(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a snapshot time")
        return i

    def at(self, t: float) -> Field:
        return self.field(self.index(t))

    def masses(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=tuple(range(1, self.grid.dim + 1))) * self.grid.cell

    def spacetime_norm(self, p: float) -> float:
        return spacetime_lp_norm(self, p)

    def replace(self, **kw) -> "Trajectory":
        out = dc_replace(self, meta=dict(self.meta), **kw)
        if "values" in kw:
            out.refresh_monitors()
        return out

    def refresh_monitors(self) -> None:
        m = self.masses()
        m0 = m[0] if m.size else 0.0
        self.mass_drift = float(np.max(np.abs(m - m0)) / m0) if m0 > 0 else 0.0
        outer = np.zeros(self.grid.shape, dtype=bool)
        for c in self.grid.x:
            outer |= np.abs(c) > self.grid.L / 2
        bm = np.sum(np.abs(self.values[:, outer]) ** 2, axis=-1) * self.grid.cell
        self.boundary_mass_max = float(bm.max() / m0) if m0 > 0 and bm.size else 0.0

    def window(self, t0: float, t1: float) -> "Trajectory":
        sel = (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)
        return self.replace(times=self.times[sel], values=self.values[sel])

    def manifest(self) -> dict:
        return {
            "label": self.label,
            "config": self.config.to_json(),
            "grid": self.grid.to_json(),
            "t_span": [float(self.times[0]), float(self.times[-1])],
            "snapshots": int(len(self)),
            "diverged": bool(self.diverged),
            "mass_drift": float(self.mass_drift),
            "boundary_mass_max": float(self.boundary_mass_max),
        }


@dataclass(frozen=True)
class ResidualReport:
    duhamel_l2: float
    pde_dual_norm: float
    interval: tuple[float, float]


def _power(d: int) -> float:
    return 4.0 / d


def scattering_exponent(d: int) -> float:
    return 2.0 * (d + 2) / d


def nonlinearity(u: np.ndarray, mu: int, d: int) -> np.ndarray:
    return mu * np.abs(u) ** _power(d) * u


def free_propagate(f: Field, t: float) -> Field:
    if t == 0:
        return f.copy()
    g = f.grid
    out = np.fft.ifftn(np.fft.fftn(f.values) * np.exp(-1j * t * g.xi2))
    return Field(g, out, f.label, f.diverged)


def free_trajectory(u0: Field, times, config: SolverConfig | None = None) -> Trajectory:
    """Exact free evolution sampled at arbitrary times (relative to u0 at t=0)."""
    g = u0.grid
    times = np.asarray(times, dtype=float)
    uh = np.fft.fftn(u0.values)
    axes = tuple(range(1, g.dim + 1))
    vals = np.fft.ifftn(uh[None] * np.exp(-1j * times.reshape((-1,) + (1,) * g.dim) * g.xi2[None]), axes=axes)
    cfg = config or SolverConfig(mu=0, dim=g.dim)
    traj = Trajectory(cfg, g, times, vals, label="free")
    traj.refresh_monitors()
    return traj


def _snapshot_times(t0: float, t1: float, store_every: float) -> np.ndarray:
    k = max(1, math.ceil((t1 - t0) / store_every - 1e-9))
    return t0 + (t1 - t0) * np.arange(k + 1) / k


def evolve(u0: Field, t_span, config: SolverConfig, times=None) -> Trajectory:
    """Integrate from t_span[0] to t_span[1]; backward spans use time reversal.

    ``times`` overrides the snapshot schedule (must start and end at the span).
    Diverged runs are returned truncated, with ``diverged`` set.
    """
    t0, t1 = map(float, t_span)
    if t1 == t0:
        raise ValueError("empty time span")
    if config.dim != u0.grid.dim:
        raise ValueError("config.dim does not match the field's grid")
    if t1 < t0:
        # u(t0 - s) = conj(w(s)) where w solves the equation forward from conj(u0)
        sched = None if times is None else np.sort(t0 - np.asarray(times, dtype=float))
        fwd = evolve(Field(u0.grid, np.conj(u0.values)), (0.0, t0 - t1), config, sched)
        out = fwd.replace(times=(t0 - fwd.times)[::-1], values=np.conj(fwd.values)[::-1].copy())
        out.diverged = fwd.diverged
        out.meta["direction"] = "backward"
        return out

    g = u0.grid
    d = g.dim
    stops = _snapshot_times(t0, t1, config.store_every) if times is None else np.asarray(times, dtype=float)
    m0 = mass(u0)
    u = u0.values.astype(complex).copy()
    snaps = [u.copy()]
    kept = [stops[0]]
    diverged = False
    steps_taken = 0
    amp_guard = 1e3 * max(1.0, float(np.max(np.abs(u))))
    scales = []
    for a, b in zip(stops[:-1], stops[1:]):
        dt = config.dt
        if config.dt_policy == "adaptive":
            from .diagnostics import concentration_scale

            N = concentration_scale(Field(g, u, diverged=True), config.eta_ref)
            scales.append(N)
            if N > g.n * np.pi / (8 * g.L):
                diverged = True
                break
            dt = min(dt, config.adaptive_cap / N**2)
        nsteps = max(1, math.ceil((b - a) / dt - 1e-9))
        if steps_taken + nsteps > config.max_steps:
            diverged = True
            break
        h = (b - a) / nsteps
        half = np.exp(-0.5j * h * g.xi2)
        full = half * half
        uh = np.fft.fftn(u) * half
        for s in range(nsteps):
            v = np.fft.ifftn(uh)
            if config.mu:
                v *= np.exp(-1j * config.mu * h * np.abs(v) ** _power(d))
            uh = np.fft.fftn(v)
            uh *= full if s < nsteps - 1 else half
        u = np.fft.ifftn(uh)
        steps_taken += nsteps
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > amp_guard:
            diverged = True
            break
        snaps.append(u.copy())
        kept.append(b)

    traj = Trajectory(config, g, np.array(kept), np.array(snaps), diverged=diverged, label=u0.label or "u")
    traj.refresh_monitors()
    traj.meta["steps"] = steps_taken
    if m0 > 0 and not diverged:
        traj.mass_drift = float(np.max(np.abs(traj.masses() - m0)) / m0)
    if scales:
        traj.meta["scales"] = scales
    return traj


def _density(traj: Trajectory) -> np.ndarray:
    p = scattering_exponent(traj.grid.dim)
    return np.sum(np.abs(traj.values) ** p, axis=tuple(range(1, traj.grid.dim + 1))) * traj.grid.cell


def scattering_size(traj: Trajectory) -> float:
    return time_integral(traj.times, _density(traj))


def _split(traj: Trajectory, t: float):
    times, dens = traj.times, _density(traj)
    if not times[0] <= t <= times[-1]:
        raise ValueError(f"t={t} lies outside the trajectory interval")
    j = int(np.searchsorted(times, t))
    if j < times.size and times[j] == t:
        return (times[: j + 1], dens[: j + 1]), (times[j:], dens[j:])
    w = (t - times[j - 1]) / (times[j] - times[j - 1])
    dt_ = (1 - w) * dens[j - 1] + w * dens[j]
    left = (np.append(times[:j], t), np.append(dens[:j], dt_))
    right = (np.insert(times[j:], 0, t), np.insert(dens[j:], 0, dt_))
    return left, right


def scattering_size_before(traj: Trajectory, t: float) -> float:
    return time_integral(*_split(traj, t)[0])


def scattering_size_after(traj: Trajectory, t: float) -> float:
    return time_integral(*_split(traj, t)[1])


def _trap_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    dt = np.diff(times)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def pde_defect(traj: Trajectory) -> np.ndarray:
    """i u_t + Delta u - F(u) at every snapshot (second-order differences in t)."""
    g, d = traj.grid, traj.grid.dim
    u, t = traj.values, traj.times
    if t.size < 3:
        raise ValueError("need at least three snapshots for the PDE defect")
    ut = np.gradient(u, t, axis=0, edge_order=2)
    axes = tuple(range(1, d + 1))
    lap = np.fft.ifftn(-g.xi2[None] * np.fft.fftn(u, axes=axes), axes=axes)
    return 1j * ut + lap - nonlinearity(u, traj.config.mu, d)


def dual_norm(traj: Trajectory, values: np.ndarray) -> float:
    d = traj.grid.dim
    q = 2.0 * (d + 2) / (d + 4)
    dens = np.sum(np.abs(values) ** q, axis=tuple(range(1, d + 1))) * traj.grid.cell
    return time_integral(traj.times, dens) ** (1.0 / q)


def duhamel_residual(traj: Trajectory, t0: float, t1: float, chunk: int = 512) -> ResidualReport:
    """L^2 defect of the Duhamel formula between two snapshot times."""
    i0, i1 = traj.index(t0), traj.index(t1)
    lo, hi = min(i0, i1), max(i0, i1)
    g, d = traj.grid, traj.grid.dim
    axes = tuple(range(1, d + 1))
    ts = traj.times[lo : hi + 1]
    w = _trap_weights(ts) * (1.0 if i1 >= i0 else -1.0)
    tt1 = traj.times[i1]
    acc = np.zeros(g.shape, dtype=complex)
    for s in range(0, ts.size, chunk):
        blk = traj.values[lo + s : lo + s + chunk]
        Fh = np.fft.fftn(nonlinearity(blk, traj.config.mu, d), axes=axes)
        tb = ts[s : s + chunk].reshape((-1,) + (1,) * d)
        wb = w[s : s + chunk].reshape((-1,) + (1,) * d)
        acc += np.sum(wb * np.exp(-1j * (tt1 - tb) * g.xi2[None]) * Fh, axis=0)
    u0h = np.fft.fftn(traj.values[i0])
    u1h = np.fft.fftn(traj.values[i1])
    res_h = u1h - np.exp(-1j * (tt1 - traj.times[i0]) * g.xi2) * u0h + 1j * acc
    duhamel = float(np.sqrt(np.sum(np.abs(res_h) ** 2) / g.size * g.cell))
    sub = traj.replace(times=ts, values=traj.values[lo : hi + 1])
    dual = dual_norm(sub, pde_defect(sub)) if ts.size >= 3 else 0.0
    return ResidualReport(duhamel, float(dual), (float(traj.times[i0]), float(tt1)))


def pseudoconformal(traj: Trajectory) -> Trajectory:
    """v(t,x) = |t|^{-d/2} e^{i|x|^2/4t} u(-1/t, x/t) on the mapped interval."""
    t = traj.times
    if t[0] <= 0 <= t[-1]:
        raise ValueError("source interval must not contain t = 0")
    g, d = traj.grid, traj.grid.dim
    new_t = -1.0 / t
    vals = np.empty_like(traj.values)
    for i, (s, tau) in enumerate(zip(t, new_t)):
        v = dilate(traj.values[i], g, tau)
        vals[i] = abs(tau) ** (-d / 2) * np.exp(1j * g.r2 / (4 * tau)) * v
    order = np.argsort(new_t)
    out = traj.replace(times=new_t[order], values=vals[order], label=f"pc({traj.label})")
    return out


def stability_experiment(u_traj: Trajectory, v0: Field, delta: float | None = None) -> dict:
    """Evolve v from v0 on u's snapshot schedule and measure S(u - v)."""
    u0 = u_traj.field(0)
    gap = mass(u0 - v0)
    v = evolve(v0, (u_traj.times[0], u_traj.times[-1]), u_traj.config, times=u_traj.times)
    report = {
        "delta": delta,
        "mass_gap": gap,
        "hypothesis_ok": None if delta is None else bool(gap <= delta**2 * (1 + 1e-9)),
        "diverged": bool(v.diverged),
    }
    if v.diverged:
        report.update(S_diff=float("inf"), passed=False)
        return report
    diff = u_traj.replace(values=u_traj.values - v.values)
    s = scattering_size(diff)
    report.update(S_diff=float(s), passed=bool(np.isfinite(s)))
    return report


def stability_sweep(u_traj: Trajectory, perturbation: Field, deltas) -> dict:
    """Run stability_experiment with v0 = u(t0) + delta * perturbation / ||perturbation||."""
    u0 = u_traj.field(0)
    unit = perturbation.values / math.sqrt(mass(perturbation))
    rows = []
    for delta in sorted(deltas):
        r = stability_experiment(u_traj, Field(u0.grid, u0.values + delta * unit), delta)
        rows.append(r)
    s = [r["S_diff"] for r in rows]
    monotone = all(a <= b for a, b in zip(s, s[1:]))
    return {"rows": rows, "monotone": monotone, "passed": monotone and all(r["passed"] for r in rows)}


@dataclass
class MonitorSeries:
    t: np.ndarray
    N: np.ndarray
    max_amplitude: np.ndarray
    mass_in_ball: np.ndarray
    x_center: np.ndarray
    xi_center: np.ndarray
    radius: float

    def to_json(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def blowup_monitor(traj: Trajectory, radius: float = 1.0, eta_ref: float | None = None, floor: float | None = None):
    from .diagnostics import centers, concentration_scale

    g = traj.grid
    eta = traj.config.eta_ref if eta_ref is None else eta_ref
    floor = g.dxi if floor is None else floor
    Ns, amps, balls, xs, xis = [], [], [], [], []
    for f in traj.fields:
        amps.append(float(np.max(np.abs(f.values))))
        if mass(f) < 1e-12:
            Ns.append(floor)
            balls.append(0.0)
            xs.append(np.full(g.dim, np.nan))
            xis.append(np.full(g.dim, np.nan))
            continue
        xc, xic = centers(f)
        Ns.append(concentration_scale(f, eta))
        r2 = sum((c - x) ** 2 for c, x in zip(g.x, xc))
        balls.append(float(np.sum(np.abs(f.values[r2 <= radius**2]) ** 2) * g.cell))
        xs.append(np.asarray(xc))
        xis.append(np.asarray(xic))
    return MonitorSeries(
        traj.times.copy(), np.array(Ns), np.array(amps), np.array(balls), np.array(xs), np.array(xis), radius
    )


def save_trajectory(path, traj: Trajectory) -> None:
    """Trajectory as .npz: times, snapshots, grid and solver config."""
    g = traj.grid
    np.savez(
        path,
        times=traj.times,
        values=traj.values,
        grid=np.array([g.dim, g.n, g.L]),
        config=np.array(json.dumps(traj.config.to_json())),
        label=np.array(traj.label),
    )


def load_trajectory(path) -> Trajectory:
    with np.load(path) as z:
        dim, n, L = z["grid"]
        cfg = SolverConfig(**json.loads(str(z["config"])))
        traj = Trajectory(cfg, Grid(int(dim), int(n), float(L)), z["times"], z["values"], label=str(z["label"]))
    traj.refresh_monitors()
    return traj
