"""Scalar functionals of saturation snapshots and the per-step time series
collected while a simulation runs.

All functionals are pure functions of their snapshot, so re-evaluation is
bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarField

# Sides treated as homogeneous Dirichlet in the gradient quadratic form,
# matching the ghost rules of the implicit operator in each mode.
_DIRICHLET_SIDES = {
    "analysis": ("x_lo", "x_hi", "z_lo", "z_hi"),
    "experiment": ("x_lo",),
    "closed": (),
}


def total_mass(S: ScalarField) -> float:
    return float(np.sum(S.values)) * S.grid.cell_volume


def l2_sq(S: ScalarField) -> float:
    return float(np.sum(S.values**2)) * S.grid.cell_volume


def grad_energy(S: ScalarField, bc_mode: str = "analysis") -> float:
    """Discrete squared gradient norm matching the implicit operator.

    This is exactly <-Lap_h v, v> for the mode's ghost conventions:
    interior face differences plus, on Dirichlet sides, the boundary
    closure term 2*v_edge^2/h^2 (homogeneous part).
    """
    sides = _DIRICHLET_SIDES[bc_mode]
    g = S.grid
    v = S.values
    dv = g.cell_volume
    total = float(np.sum((v[1:, :] - v[:-1, :]) ** 2)) / g.dx**2
    total += float(np.sum((v[:, 1:] - v[:, :-1]) ** 2)) / g.dz**2
    if "x_lo" in sides:
        total += 2.0 * float(np.sum(v[0, :] ** 2)) / g.dx**2
    if "x_hi" in sides:
        total += 2.0 * float(np.sum(v[-1, :] ** 2)) / g.dx**2
    if "z_lo" in sides:
        total += 2.0 * float(np.sum(v[:, 0] ** 2)) / g.dz**2
    if "z_hi" in sides:
        total += 2.0 * float(np.sum(v[:, -1] ** 2)) / g.dz**2
    return total * dv


def energy(S: ScalarField, beta2: float, bc_mode: str = "analysis") -> float:
    """Squared L2 norm plus beta^2 times the discrete gradient norm."""
    e = l2_sq(S)
    if beta2 > 0.0:
        e += beta2 * grad_energy(S, bc_mode)
    return e


def increment_energy(
    S_new: ScalarField, S_old: ScalarField, beta2: float, bc_mode: str = "analysis"
) -> float:
    delta = ScalarField(S_new.grid, S_new.values - S_old.values)
    return energy(delta, beta2, bc_mode)


def overshoot_max(S: ScalarField, plateau: float) -> float:
    """Largest excess of the field above the injected plateau value."""
    if not 0.0 <= plateau <= 1.0:
        raise ValueError(f"plateau {plateau!r} outside [0,1]")
    return float(S.values.max() - plateau)


def _row_index(grid, z_line: float) -> int:
    return int(np.clip(np.round(z_line * grid.nz - 0.5), 0, grid.nz - 1))


def _front_or_none(S: ScalarField, level: float, z_line: float):
    g = S.grid
    sat = S.values[:, _row_index(g, z_line)]
    above = np.nonzero(sat >= level)[0]
    if above.size == 0:
        return None
    k = int(above[-1])
    if k == g.nx - 1:
        return 1.0
    x_k = (k + 0.5) * g.dx
    return x_k + g.dx * (sat[k] - level) / (sat[k] - sat[k + 1])


def front_position(S: ScalarField, level: float, z_line: float) -> float:
    """Largest x on the given height line where the field reaches the level.

    Linear interpolation between cell centers; 0 if the level is never
    attained on the line, 1 if it still holds at the last cell.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level {level!r} outside (0,1)")
    if not 0.0 < z_line < 1.0:
        raise ValueError(f"z_line {z_line!r} outside (0,1)")
    pos = _front_or_none(S, level, z_line)
    return 0.0 if pos is None else float(pos)


def front_width(
    S: ScalarField, lo_level: float, hi_level: float, z_line: float
) -> float:
    """Distance between the low-level and high-level front positions.

    A proxy for diffusional smearing of the invading front.  Returns NaN
    (missing, not zero) when either level is absent on the line.
    """
    if not 0.0 < lo_level < hi_level < 1.0:
        raise ValueError("levels must satisfy 0 < lo_level < hi_level < 1")
    pos_lo = _front_or_none(S, lo_level, z_line)
    pos_hi = _front_or_none(S, hi_level, z_line)
    if pos_lo is None or pos_hi is None:
        return math.nan
    return float(pos_lo - pos_hi)


@dataclass
class DiagnosticsReport:
    """Per-step time series collected over a run."""

    time: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    increment: list = field(default_factory=list)
    overshoot: list = field(default_factory=list)
    front_pos: list = field(default_factory=list)
    front_width: list = field(default_factory=list)
    incomp_residual: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)

    COLUMNS = (
        "time",
        "dt",
        "mass",
        "energy",
        "increment",
        "overshoot",
        "front_pos",
        "front_width",
        "incomp_residual",
        "cg_iterations",
        "grad_sq",
    )

    def add_step(self, **kw):
        for name in self.COLUMNS:
            getattr(self, name).append(kw[name])

    @property
    def n_steps(self) -> int:
        return len(self.time)

    def column(self, name: str) -> list:
        return getattr(self, name)
