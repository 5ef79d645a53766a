"""Ground state Q of Delta Q + Q^{1+4/d} = Q by Petviashvili iteration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Field, Grid, mass, write_field

__all__ = ["GroundState", "ConvergenceError", "petviashvili_solve", "closed_form_q", "soliton_initial_data"]


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(f"{msg} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass
class GroundState:
    field: Field
    residual: float
    mass: float
    iterations: int
    history: list

    @property
    def dim(self) -> int:
        return self.field.grid.dim

    def export(self, path) -> None:
        """Write the snapshot plus a JSON sidecar {d, mass, residual, iterations}."""
        path = Path(path)
        write_field(path, self.field)
        sidecar = {"d": self.dim, "mass": self.mass, "residual": self.residual, "iterations": self.iterations}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def closed_form_q(grid: Grid) -> Field:
    """d = 1 only: Q(x) = 3^{1/4} sech^{1/2}(2x)."""
    if grid.dim != 1:
        raise ValueError("closed form is only available in d = 1")
    x = grid.x_axis
    return Field(grid, 3**0.25 / np.sqrt(np.cosh(2 * x)) + 0j, label="Q")


def _residual(q: np.ndarray, grid: Grid, p: float) -> float:
    lap = np.real(np.fft.ifftn(-grid.xi2 * np.fft.fftn(q)))
    r = lap + np.abs(q) ** (p - 1) * q - q
    return float(np.sqrt(np.sum(r**2) * grid.cell))


def petviashvili_solve(grid: Grid, d: int | None = None, tol: float = 1e-10, max_iter: int = 500, initial=None) -> GroundState:
    d = grid.dim if d is None else d
    if d != grid.dim:
        raise ValueError("d must match the grid dimension")
    p = 1.0 + 4.0 / d
    alpha = p / (p - 1.0)
    symbol = 1.0 + grid.xi2
    q = np.exp(-grid.r2) if initial is None else np.real(np.asarray(initial.values if isinstance(initial, Field) else initial))
    q = q.astype(float)
    history = []
    res = _residual(q, grid, p)
    it = 0
    while res >= tol:
        if it >= max_iter:
            raise ConvergenceError("Petviashvili iteration did not converge", res, it)
        qh = np.fft.fftn(q)
        nl = np.abs(q) ** (p - 1) * q
        nlh = np.fft.fftn(nl)
        num = np.sum(symbol * np.abs(qh) ** 2)
        den = np.real(np.sum(nlh * np.conj(qh)))
        if den <= 0:
            raise ConvergenceError("iterate collapsed", res, it)
        gamma = num / den
        q = np.real(np.fft.ifftn(gamma**alpha * nlh / symbol))
        it += 1
        res = _residual(q, grid, p)
        history.append(res)
        if np.sum(q**2) * grid.cell < 1e-10:
            raise ConvergenceError("iterate collapsed to zero", res, it)
    f = Field(grid, q + 0j, label="Q")
    return GroundState(f, res, mass(f), it, history)


def soliton_initial_data(Q: GroundState, g) -> Field:
    """g Q, tagged with the element so the exact solution T_g(e^{it}Q) is recoverable."""
    from .symmetry import apply_enlarged

    out = apply_enlarged(g, Q.field)
    out.label = "soliton"
    out.meta["soliton_element"] = g.to_json()
    return out
