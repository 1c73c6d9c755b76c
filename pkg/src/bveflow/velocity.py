"""Nonlocal velocity pair reconstructed from saturation, and the discrete
incompressibility diagnostic.

The horizontal component is the total mobility normalized by its own
column integral, so every column carries unit flux by construction; the
vertical component is minus the x-derivative of the cumulative column
integral of the horizontal one.  Because the vertical component is built
from the discrete horizontal field (not from a separate formula), the
cell divergence cancels algebraically and the residual diagnostic below
measures roundoff only.

Velocity reconstruction runs in extended precision and casts the result
to float64: in pure double precision, column-sum roundoff (~nz*eps) gets
amplified by the 1/dx of the x-derivative and would exceed the 1e-13
normalization / 1e-12 residual budgets that the rest of the package
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import CoefficientSet
from .grid import Grid, ScalarField, gradient_x_array

_LD = np.longdouble


class DegenerateColumnError(RuntimeError):
    """A column mobility integral fell below half the mobility floor."""


@dataclass(frozen=True)
class VelocityField:
    """Cell-centered velocity pair.

    The vertical values are fluxes through the cell top faces: entry
    (i, j) is the vertical velocity at the face between cells j and j+1
    of column i, with an implicit zero at the bottom boundary.
    """

    u: ScalarField
    w: ScalarField


def horizontal_velocity(
    S: ScalarField, coeffs: CoefficientSet, *, extended: bool = False
) -> ScalarField:
    """Column-normalized total mobility.

    Strictly positive, bounded by mobility_sup / mobility_floor, and
    each column satisfies dz * sum_j u(i, j) = 1 to near roundoff.
    """
    lam = coeffs.total_mobility(S.values, extended=extended)
    g = S.grid
    lam_ld = lam.astype(_LD)
    dz_ld = _LD(1.0) / _LD(g.nz)
    col = lam_ld.sum(axis=1) * dz_ld
    if np.any(col < coeffs.mobility_floor / 2.0):
        raise DegenerateColumnError(
            f"column mobility integral {float(col.min()):.6g} below "
            f"{coeffs.mobility_floor / 2.0:.6g}; coefficient contract violated"
        )
    u_ld = lam_ld / col[:, None]
    return ScalarField(g, u_ld.astype(float))


def vertical_velocity(U: ScalarField, *, stencil: str = "centered") -> ScalarField:
    """Minus the x-derivative of the cumulative column integral of U.

    Entry (i, j) is the velocity through the top face of cell j.  For a
    column-normalized U the full-column integral is 1, so the top-face
    value vanishes; x-independent U gives an identically zero field.
    """
    g = U.grid
    u_ld = U.values.astype(_LD)
    dz_ld = _LD(1.0) / _LD(g.nz)
    dx_ld = _LD(1.0) / _LD(g.nx)
    cum = np.cumsum(u_ld, axis=1) * dz_ld
    w_ld = -gradient_x_array(cum, dx_ld, stencil=stencil)
    return ScalarField(g, w_ld.astype(float))


def velocity_pair(
    S: ScalarField,
    coeffs: CoefficientSet,
    *,
    extended: bool = False,
    stencil: str = "centered",
) -> VelocityField:
    u = horizontal_velocity(S, coeffs, extended=extended)
    w = vertical_velocity(u, stencil=stencil)
    return VelocityField(u=u, w=w)


def incompressibility_residual(V: VelocityField, *, stencil: str = "centered") -> float:
    """Max-norm of the discrete divergence of the velocity pair.

    The z-derivative is the exact inverse of the cumulative column sum
    (backward difference with an implicit zero below the bottom cell);
    the x-derivative uses the same stencil family as the vertical
    reconstruction.  With matched stencils the result is roundoff-level.
    """
    g = V.u.grid
    u_ld = V.u.values.astype(_LD)
    w_ld = V.w.values.astype(_LD)
    dx_ld = _LD(1.0) / _LD(g.nx)
    dz_ld = _LD(1.0) / _LD(g.nz)
    du = gradient_x_array(u_ld, dx_ld, stencil=stencil)
    dw = np.empty_like(w_ld)
    dw[:, 0] = w_ld[:, 0] / dz_ld
    dw[:, 1:] = (w_ld[:, 1:] - w_ld[:, :-1]) / dz_ld
    return float(np.max(np.abs(du + dw)))
