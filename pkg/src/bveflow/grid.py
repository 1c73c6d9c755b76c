"""Cartesian grid on the unit square, cell-centered scalar fields, and the
discrete differential / integral operators built on them.

Fields are value-semantic and the operators are pure functions.  Array
layout is (nx, nz) in C order, so index (i, j) flattens row-major with
the x index outermost and each vertical column contiguous in memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid covering (0,1) x (0,1)."""

    nx: int
    nz: int

    def __post_init__(self):
        if self.nx < 4 or self.nz < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.nx}x{self.nz}")

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dz(self) -> float:
        return 1.0 / self.nz

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dz

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def z_centers(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.dz


class ScalarField:
    """Cell-centered scalar quantity on a Grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.nx, grid.nz):
            raise ValueError(
                f"values shape {values.shape} does not match grid "
                f"({grid.nx}, {grid.nz})"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.nx, grid.nz)))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.nx, grid.nz), float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        x = grid.x_centers()[:, None]
        z = grid.z_centers()[None, :]
        return cls(grid, np.broadcast_to(fn(x, z), (grid.nx, grid.nz)).copy())

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())


@dataclass(frozen=True)
class BoundarySpec:
    """Ghost-value conventions per side for the stencil operators.

    Dirichlet sides reflect through the pinned face value (homogeneous
    reflection when the value is zero); Neumann sides mirror the edge
    cell.  Only the x_lo side supports a non-zero pinned profile, which
    is what the inflow boundary needs.
    """

    x_lo: str = NEUMANN
    x_hi: str = NEUMANN
    z_lo: str = NEUMANN
    z_hi: str = NEUMANN
    x_lo_values: np.ndarray | float = 0.0

    @classmethod
    def analysis(cls) -> "BoundarySpec":
        """Homogeneous Dirichlet on all sides."""
        return cls(DIRICHLET, DIRICHLET, DIRICHLET, DIRICHLET, 0.0)

    @classmethod
    def closed(cls) -> "BoundarySpec":
        """Mirror ghosts on all sides (no-flux box)."""
        return cls()

    @classmethod
    def experiment(cls, inflow_values) -> "BoundarySpec":
        """Pinned inflow at x=0, mirrors elsewhere."""
        return cls(x_lo=DIRICHLET, x_lo_values=np.asarray(inflow_values, dtype=float))


def _padded(field: ScalarField, bc: BoundarySpec) -> np.ndarray:
    """Field extended by one ghost layer on each side per the spec."""
    v = field.values
    nx, nz = v.shape
    p = np.empty((nx + 2, nz + 2))
    p[1:-1, 1:-1] = v
    if bc.x_lo == DIRICHLET:
        p[0, 1:-1] = 2.0 * np.asarray(bc.x_lo_values) - v[0, :]
    else:
        p[0, 1:-1] = v[0, :]
    p[-1, 1:-1] = -v[-1, :] if bc.x_hi == DIRICHLET else v[-1, :]
    p[1:-1, 0] = -v[:, 0] if bc.z_lo == DIRICHLET else v[:, 0]
    p[1:-1, -1] = -v[:, -1] if bc.z_hi == DIRICHLET else v[:, -1]
    # corners never enter the 5-point stencil
    p[0, 0] = p[0, -1] = p[-1, 0] = p[-1, -1] = 0.0
    return p


def gradient_x_array(v: np.ndarray, dx, *, stencil: str = "centered") -> np.ndarray:
    """d/dx along axis 0; dtype-generic so extended precision passes through.

    The centered stencil is second order in the interior with one-sided
    second-order closure at both x boundaries.  The one-sided variant
    (backward differences everywhere) exists as a deliberately degraded
    negative control for the incompressibility diagnostic.
    """
    g = np.empty_like(v)
    if stencil == "centered":
        g[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
        g[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
        g[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dx)
    elif stencil == "one_sided":
        g[1:] = (v[1:] - v[:-1]) / dx
        g[0] = (v[1] - v[0]) / dx
    else:
        raise ValueError(f"unknown stencil {stencil!r}")
    return g


def gradient_x(field: ScalarField) -> ScalarField:
    """Second-order x-derivative (one-sided closure at x boundaries)."""
    return ScalarField(field.grid, gradient_x_array(field.values, field.grid.dx))


def laplacian(field: ScalarField, bc: BoundarySpec) -> ScalarField:
    """5-point Laplacian with ghost values chosen by the boundary spec."""
    g = field.grid
    p = _padded(field, bc)
    v = field.values
    lap = (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / g.dx**2
    lap += (p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]) / g.dz**2
    return ScalarField(g, lap)


def column_cumulative_integral(field: ScalarField) -> ScalarField:
    """Cumulative midpoint-rule integral in z within each column.

    Entry (i, j) holds dz * sum of cells 0..j of column i, i.e. the
    integral from 0 up to the top face of cell j.  The full-column
    entry equals the composite midpoint rule over (0,1).
    """
    g = field.grid
    return ScalarField(g, np.cumsum(field.values, axis=1) * g.dz)


def inner(a: ScalarField, b: ScalarField) -> float:
    """Discrete L2 inner product (cell sums weighted by cell volume)."""
    return float(np.sum(a.values * b.values)) * a.grid.cell_volume


def l2_norm(field: ScalarField) -> float:
    return float(np.sqrt(np.sum(field.values**2) * field.grid.cell_volume))
