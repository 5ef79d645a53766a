"""Greedy linear-profile extraction over the enlarged group, with decoupling reports.

Each iteration searches (template, lambda, t0, x0, xi0) for the bubble that
correlates best with the current residual r, pulls r back to the bubble's frame
v = e^{-i t0 Delta} g^{-1} r, keeps the windowed content phi = A v with A a
self-adjoint multiplier-window sandwich (0 <= A <= 1, so masses stay Bessel),
and subtracts g phi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from .grid import Field, Grid, boundary_mass, inner, mass, translate
from .propagator import free_propagate, free_trajectory, scattering_size
from .symmetry import EnlargedElement, GroupElement, apply, apply_enlarged, inverse, separation

__all__ = [
    "ExtractionConfig",
    "Profile",
    "ProfileDecomposition",
    "SeparationReport",
    "extract_profiles",
    "extract_profiles_radial",
    "default_templates",
    "decoupling_check",
    "orthogonality_report",
    "orbit_distance",
    "radial_projection",
    "radial_asymmetry",
    "linear_S",
    "pair_decoupling",
    "streaming_linear_S",
    "s_nodes",
    "focus_time",
]


@dataclass(frozen=True)
class ExtractionConfig:
    max_profiles: int = 8
    mass_floor: float | None = None  # absolute; default 1e-3 * M(u)
    t_ref: float = 4.0
    t0_step: float = 0.5
    log2_lam_range: tuple = (-4, 4)
    window_x: float = 6.0  # frame radius kept whole; tapers to 1.5x
    window_xi: float = 8.0
    refine: bool = True
    s_nodes: int = 201
    use_q: bool = True


@dataclass
class Profile:
    phi: Field
    fit: EnlargedElement
    captured_mass: float
    template: str
    score: float

    def bubble(self) -> Field:
        return apply_enlarged(self.fit, self.phi)


@dataclass
class ProfileDecomposition:
    profiles: list
    remainder: Field
    decoupling_defect: float
    remainder_linear_S: float
    input_mass: float
    t_ref: float = 4.0
    meta: dict = dc_field(default_factory=dict)

    @property
    def captured_masses(self) -> list[float]:
        return [p.captured_mass for p in self.profiles]

    def to_json(self, templates: dict | None = None) -> dict:
        rows = []
        for p in self.profiles:
            row = {"fit": p.fit.to_json(), "captured_mass": p.captured_mass, "template": p.template}
            if templates and p.template in templates:
                tau = templates[p.template]  # compared at the profile's own norm
                row["orbit_distance_to_template"] = orbit_distance(p.phi, tau * math.sqrt(mass(p.phi) / mass(tau)))
            rows.append(row)
        return {
            "profiles": rows,
            "input_mass": self.input_mass,
            "decoupling_defect": self.decoupling_defect,
            "remainder_mass": mass(self.remainder),
            "remainder_linear_S": self.remainder_linear_S,
            "t_ref": self.t_ref,
        }

    def write_json(self, path, templates: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(templates), fh, indent=2, sort_keys=True)


@dataclass
class SeparationReport:
    pairwise: np.ndarray
    min_offdiag: float
    suspect: bool = False

    def to_json(self) -> dict:
        return {"pairwise": self.pairwise.tolist(), "min_offdiag": self.min_offdiag, "suspect": self.suspect}


# ---------------------------------------------------------------- templates


def default_templates(grid: Grid, use_q: bool) -> dict[str, Field]:
    out = {"gaussian": Field(grid, np.exp(-grid.r2 / 2) + 0j, label="gaussian")}
    if use_q and grid.L >= 12:
        from .groundstate import ConvergenceError, petviashvili_solve

        try:
            out["Q"] = petviashvili_solve(grid).field
        except ConvergenceError:
            pass
    return {k: v * (1 / math.sqrt(mass(v))) for k, v in out.items()}


def _enlarged(theta, xi0, x0, lam, t0) -> EnlargedElement:
    return EnlargedElement(GroupElement(theta, xi0, x0, lam), t0)


def _transported(tau: Field, lam: float, t0: float) -> Field | None:
    """lam-dilate of e^{i t0 Delta} tau, or None when it does not fit the box."""
    g = tau.grid
    v = apply(GroupElement.dilation(lam, g.dim), free_propagate(tau, t0))
    m = mass(v)
    if v.diverged or m < 0.999 * mass(tau) or boundary_mass(v) > 1e-2 * m:
        return None
    return v


def _stft_scores(tpl: np.ndarray, r: np.ndarray, grid: Grid, stride: int):
    """|<e^{i x.xi0} tpl(x - x0), r>|^2 for x0 on a strided lattice, xi0 on the full lattice."""
    d = grid.dim
    idx = [np.arange(0, grid.n, stride)] * d
    best = (-1.0, None, None)
    for j in np.ndindex(*[len(i) for i in idx]):
        shift = tuple(int(idx[a][j[a]]) for a in range(d))
        win = np.roll(tpl, shift, axis=tuple(range(d)))
        c = np.abs(np.fft.fftn(np.conj(win) * r)) ** 2
        k = np.unravel_index(int(np.argmax(c)), c.shape)
        if c[k] > best[0]:
            best = (float(c[k]), shift, k)
    s, shift, k = best
    x0 = np.array([grid.x_axis[sh] - grid.x_axis[0] for sh in shift])
    x0 = (x0 + grid.L) % (2 * grid.L) - grid.L
    xi0 = np.array([grid.xi_axis[kk] for kk in k])
    return s * grid.cell**2, x0, xi0


def _stft_scores_1d(tpl: np.ndarray, r: np.ndarray, grid: Grid):
    n = grid.n
    rows = np.arange(n)[:, None]
    cols = (np.arange(n)[None, :] - rows) % n
    c = np.abs(np.fft.fft(np.conj(tpl[cols]) * r[None, :], axis=1)) ** 2
    j, k = np.unravel_index(int(np.argmax(c)), c.shape)
    x0 = (j * grid.h + grid.L) % (2 * grid.L) - grid.L
    return float(c[j, k]) * grid.cell**2, np.array([x0]), np.array([grid.xi_axis[k]])


def _score(g, tau: Field, r: Field) -> tuple[float, complex]:
    b = apply_enlarged(g, tau)
    m = mass(b)
    if m == 0 or b.diverged:
        return 0.0, 0j
    c = inner(r, b)
    return abs(c) ** 2 / m, c


def _tie_key(t0, lam, x0, xi0):
    return (round(abs(t0), 9), round(abs(math.log2(lam)), 9), tuple(np.round(x0, 9)), tuple(np.round(xi0, 9)))


def _coarse_search(r: Field, templates: dict, cfg: ExtractionConfig, radial: bool):
    g = r.grid
    lo, hi = cfg.log2_lam_range
    t0s = np.arange(-cfg.t_ref, cfg.t_ref + 1e-12, cfg.t0_step)
    stride = 1 if g.dim == 1 else max(1, g.n // 32)
    cands = []
    for name, tau in templates.items():
        for k in range(lo, hi + 1):
            lam = 2.0**k
            for t0 in t0s:
                v = _transported(tau, lam, float(t0))
                if v is None:
                    continue
                m = mass(v)
                if radial:
                    s = abs(inner(r, v)) ** 2 / m
                    x0 = xi0 = np.zeros(g.dim)
                elif g.dim == 1:
                    s, x0, xi0 = _stft_scores_1d(v.values, r.values, g)
                    s /= m
                else:
                    s, x0, xi0 = _stft_scores(v.values, r.values, g, stride)
                    s /= m
                cands.append((s, name, lam, float(t0), x0, xi0))
    best = {}
    for name in templates:
        mine = [c for c in cands if c[1] == name]
        if mine:
            top = max(c[0] for c in mine)
            ties = [c for c in mine if c[0] >= top * (1 - 1e-9)]
            best[name] = min(ties, key=lambda c: _tie_key(c[3], c[2], c[4], c[5]))
    return best


def _refine(r: Field, tau: Field, lam, t0, x0, xi0, radial: bool, cfg: ExtractionConfig):
    g = r.grid
    d = g.dim
    lo, hi = cfg.log2_lam_range

    def unpack(p):
        ll = float(np.clip(p[0], lo, hi))
        if radial:
            return 2.0**ll, p[1], np.zeros(d), np.zeros(d)
        return 2.0**ll, p[1], p[2 : 2 + d], p[2 + d : 2 + 2 * d]

    def obj(p):
        la, t, xx, kk = unpack(p)
        return -_score(_enlarged(0.0, kk, xx, la, t), tau, r)[0]

    p0 = np.array([math.log2(lam), t0] + ([] if radial else [*x0, *xi0]))
    steps = np.array([0.25, 0.25] + ([] if radial else [2 * g.h] * d + [2 * g.dxi] * d))
    simplex = np.vstack([p0] + [p0 + np.diag(steps)[i] for i in range(p0.size)])
    res = minimize(obj, p0, method="Nelder-Mead", options={"initial_simplex": simplex, "xatol": 1e-5, "fatol": 1e-12, "maxiter": 200 * p0.size})
    best = res.x if res.fun <= obj(p0) else p0
    return unpack(best)


def _frame_window(grid: Grid, radius_x: float, radius_xi: float):
    def taper(r, R):
        out = np.ones_like(r)
        mid = (r > R) & (r < 1.5 * R)
        out[mid] = np.cos(0.5 * np.pi * (r[mid] - R) / (0.5 * R)) ** 2
        out[r >= 1.5 * R] = 0.0
        return out

    sx = np.sqrt(taper(np.sqrt(grid.r2), radius_x))
    mk = taper(np.sqrt(grid.xi2), radius_xi)
    return sx, mk


def _extract_one(r: Field, templates: dict, cfg: ExtractionConfig, radial: bool):
    hits = _coarse_search(r, templates, cfg, radial)
    if not hits:
        return None
    fits = []
    for name, (_, _, lam, t0, x0, xi0) in hits.items():
        tau = templates[name]
        if cfg.refine:
            lam, t0, x0, xi0 = _refine(r, tau, lam, t0, x0, xi0, radial, cfg)
        score, c = _score(_enlarged(0.0, xi0, x0, lam, float(t0)), tau, r)
        fits.append((score, name, lam, float(t0), x0, xi0, c))
    top = max(f[0] for f in fits)
    score, name, lam, t0, x0, xi0, c = min((f for f in fits if f[0] >= top * (1 - 1e-9)), key=lambda f: _tie_key(f[3], f[2], f[4], f[5]))
    theta = float(np.angle(c)) if c != 0 else 0.0
    fit = _enlarged(theta, xi0, x0, lam, t0)
    # pull the residual back to the bubble frame and keep the windowed content
    v = free_propagate(apply(inverse(fit.base), r), -fit.t0)
    sx, mk = _frame_window(r.grid, cfg.window_x, cfg.window_xi)
    w = np.fft.ifftn(np.fft.fftn(sx * v.values) * mk) * sx
    phi = Field(r.grid, w, label=name)
    return Profile(phi, fit, mass(phi), name, score)


def linear_S(f: Field, t_ref: float = 4.0, nodes: int = 201) -> float:
    """S of the free evolution of f over [-t_ref, t_ref]."""
    if mass(f) == 0:
        return 0.0
    return scattering_size(free_trajectory(f, np.linspace(-t_ref, t_ref, nodes)))


def _extract(u: Field, cfg: ExtractionConfig, radial: bool, templates: dict | None = None) -> ProfileDecomposition:
    m_u = mass(u)
    floor = cfg.mass_floor if cfg.mass_floor is not None else 1e-3 * m_u
    r = u.copy(label="remainder")
    profiles = []
    if m_u > 0 and m_u > floor:
        templates = templates or default_templates(u.grid, cfg.use_q)
        while len(profiles) < cfg.max_profiles:
            p = _extract_one(r, templates, cfg, radial)
            if p is None or p.captured_mass < floor or p.score < floor:
                break
            new_r = r - p.bubble()
            if radial:
                new_r = radial_projection(new_r)
            if mass(new_r) >= mass(r):
                break
            r = new_r
            r.label = "remainder"
            profiles.append(p)
    profiles.sort(key=lambda p: -p.captured_mass)
    defect = abs(m_u - sum(p.captured_mass for p in profiles) - mass(r))
    return ProfileDecomposition(profiles, r, defect, linear_S(r, cfg.t_ref, cfg.s_nodes), m_u, cfg.t_ref)


def extract_profiles(u: Field, max_profiles: int = 8, mass_floor: float | None = None, config: ExtractionConfig | None = None, templates=None) -> ProfileDecomposition:
    cfg = config or ExtractionConfig()
    cfg = ExtractionConfig(**{**cfg.__dict__, "max_profiles": max_profiles, "mass_floor": mass_floor if mass_floor is not None else cfg.mass_floor})
    return _extract(u, cfg, radial=False, templates=templates)


# ---------------------------------------------------------------- radial


def _reflect(f: Field) -> np.ndarray:
    """f(-x) as the spectral flip xi -> -xi (the unpaired -n/2 mode maps to itself)."""
    spec = np.fft.fftn(f.values)
    for ax in range(f.grid.dim):
        spec = np.take(spec, (-np.arange(f.grid.n)) % f.grid.n, axis=ax)
    return np.fft.ifftn(spec)


def _angular_average(f: Field, n_r: int | None = None, n_theta: int = 64) -> np.ndarray:
    g = f.grid
    n_r = n_r or 4 * g.n
    rmax = g.L * math.sqrt(2)
    rr = np.linspace(0, rmax, n_r)
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    px = (rr[:, None] * np.cos(th)[None]).ravel()
    py = (rr[:, None] * np.sin(th)[None]).ravel()
    c = np.fft.fftn(f.values) / g.size
    k = g.xi_axis
    # trig interpolant of the periodic samples at (px, py), zero outside the box
    ex = np.exp(1j * np.outer(px + g.L, k))
    ey = np.exp(1j * np.outer(py + g.L, k))
    vals = np.einsum("pk,pk->p", ex @ c, ey)
    vals[(np.abs(px) > g.L) | (np.abs(py) > g.L)] = 0.0
    prof = vals.reshape(n_r, n_theta).mean(axis=1)
    return CubicSpline(rr, prof)(np.sqrt(g.r2))


def radial_projection(f: Field) -> Field:
    """Orthogonal projection onto radial functions (even part in d=1, angular mean in d=2)."""
    if f.grid.dim == 1:
        return Field(f.grid, 0.5 * (f.values + _reflect(f)), f.label)
    return Field(f.grid, _angular_average(f), f.label)


def radial_asymmetry(f: Field) -> float:
    m = mass(f)
    if m == 0:
        return 0.0
    if f.grid.dim == 1:
        diff = f.values - _reflect(f)
    else:
        v = f.values
        # invariance under the lattice symmetries is the checkable part of radiality
        diff = np.concatenate([(v - np.roll(v[::-1], 1, axis=0)).ravel(), (v - np.roll(v[:, ::-1], 1, axis=1)).ravel(), (v - v.T).ravel()])
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) * f.grid.cell / m))


def extract_profiles_radial(u: Field, max_profiles: int = 8, mass_floor: float | None = None, config: ExtractionConfig | None = None, tol: float = 1e-6) -> ProfileDecomposition:
    asym = radial_asymmetry(u)
    if asym > tol:
        raise ValueError(f"input is not radially symmetric (asymmetry {asym:.3e} > {tol:g})")
    cfg = config or ExtractionConfig()
    cfg = ExtractionConfig(**{**cfg.__dict__, "max_profiles": max_profiles, "mass_floor": mass_floor if mass_floor is not None else cfg.mass_floor})
    return _extract(u, cfg, radial=True)


# ---------------------------------------------------------------- reports


def decoupling_check(dec: ProfileDecomposition, u: Field, nodes: int = 201) -> dict:
    m_u = mass(u)
    mass_gap = abs(m_u - sum(p.captured_mass for p in dec.profiles) - mass(dec.remainder)) / m_u if m_u > 0 else 0.0
    bubbles = [p.bubble() for p in dec.profiles]
    if bubbles:
        total = Field(u.grid, sum(b.values for b in bubbles))
        s_parts = sum(linear_S(b, dec.t_ref, nodes) for b in bubbles)
        s_gap = abs(linear_S(total, dec.t_ref, nodes) - s_parts) / s_parts if s_parts > 0 else 0.0
    else:
        s_gap = 0.0
    return {"mass_gap": mass_gap, "S_gap": s_gap, "flagged": bool(mass_gap > 0.1)}


def orthogonality_report(dec_or_fits) -> SeparationReport:
    fits = [p.fit for p in dec_or_fits.profiles] if isinstance(dec_or_fits, ProfileDecomposition) else list(dec_or_fits)
    k = len(fits)
    if k < 2:
        return SeparationReport(np.zeros((0, 0)), float("nan"), False)
    mat = np.array([[separation(a, b) for b in fits] for a in fits])
    off = mat[~np.eye(k, dtype=bool)]
    mn = float(off.min())
    return SeparationReport(mat, mn, suspect=bool(mn <= 2 + 1e-9))


def orbit_distance(f: Field, h: Field) -> float:
    """min over phase and translation of ||f - e^{i theta} h(. - y)||_2."""
    g = f.grid
    corr = np.fft.ifftn(np.fft.fftn(f.values) * np.conj(np.fft.fftn(h.values))) * g.cell * g.size
    j = np.unravel_index(int(np.argmax(np.abs(corr))), corr.shape)
    y0 = np.array([(jj * g.h + g.L) % (2 * g.L) - g.L for jj in j])

    def neg(y):
        return -abs(inner(f, Field(g, translate(h.values, g, y))))

    res = minimize(neg, y0, method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-14, "initial_simplex": np.vstack([y0] + [y0 + 0.5 * g.h * e for e in np.eye(g.dim)])})
    best = max(-res.fun, -neg(y0))
    return float(math.sqrt(max(0.0, mass(f) + mass(h) - 2 * best)))


# ---------------------------------------------------------------- planted pairs


def focus_time(g) -> float:
    """Time at which the free evolution of g v refocuses (g e^{i t0 Delta} v is v transported at t = -t0 lam^2)."""
    return -float(getattr(g, "t0", 0.0) or 0.0) * g.lam**2


def s_nodes(foci, lam_min: float, t_ref: float = 4.0, n_uniform: int = 401, n_geo: int = 200) -> np.ndarray:
    """Time nodes covering [min focus - t_ref, max focus + t_ref], graded geometrically near each focus."""
    lo, hi = min(foci) - t_ref, max(foci) + t_ref
    pts = [np.linspace(lo, hi, n_uniform)]
    for c in foci:
        geo = np.geomspace(1e-2 * lam_min**2, t_ref, n_geo)
        pts += [c - geo, c + geo, [c]]
    t = np.unique(np.concatenate(pts))
    return t[(t >= lo) & (t <= hi)]


def streaming_linear_S(f: Field, times) -> float:
    """S of e^{it Delta} f over the given nodes, one snapshot in memory at a time."""
    g = f.grid
    fh = np.fft.fftn(f.values)
    p = 2.0 * (g.dim + 2) / g.dim
    dens = np.empty(len(times))
    for i, t in enumerate(times):
        dens[i] = np.sum(np.abs(np.fft.ifftn(fh * np.exp(-1j * t * g.xi2))) ** p) * g.cell
    from .grid import time_integral

    return time_integral(np.asarray(times), dens)


def pair_decoupling(v: Field, g_a, g_b, t_ref: float = 4.0) -> dict:
    """|<g_a v, g_b v>| and the relative S cross term of the free evolutions of the two bubbles."""
    a = apply_enlarged(g_a, v)
    b = apply_enlarged(g_b, v)
    ts = s_nodes([focus_time(g_a), focus_time(g_b)], min(g_a.lam, g_b.lam), t_ref)
    s_a, s_b = streaming_linear_S(a, ts), streaming_linear_S(b, ts)
    s_ab = streaming_linear_S(a + b, ts)
    return {
        "separation": separation(g_a, g_b),
        "inner": abs(inner(a, b)),
        "S_gap": abs(s_ab - s_a - s_b) / (s_a + s_b),
        "boundary": (boundary_mass(a) + boundary_mass(b)) / (mass(a) + mass(b)),
        "diverged": bool(a.diverged or b.diverged),
    }
