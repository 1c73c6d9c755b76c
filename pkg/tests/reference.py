"""Independent reference implementations used as test oracles.

These deliberately share no code with the package: the 1-D upwind
transport stepper is a plain loop over faces, the tridiagonal solver is
direct elimination, and the primitive uses a dense trapezoid rule.
"""

from __future__ import annotations

import numpy as np


def bl_flux(s, m=2.0):
    s = np.asarray(s, dtype=float)
    return m * s * s / (m * s * s + (1.0 - s) ** 2)


def bl_upwind_step(s, dt, dx, inflow, m=2.0, velocity=1.0):
    """One forward-Euler upwind step of 1-D fractional-flow transport.

    Unit positive velocity: the upwind value at every face is the left
    neighbor, with a pinned inflow ghost on the left and free outflow on
    the right.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    flux = np.empty(n + 1)
    flux[0] = velocity * bl_flux(inflow, m)
    for i in range(1, n + 1):
        flux[i] = velocity * bl_flux(s[i - 1], m)
    out = s.copy()
    for i in range(n):
        out[i] = s[i] - dt * (flux[i + 1] - flux[i]) / dx
    return out


def thomas_solve(lower, diag, upper, rhs):
    """Direct tridiagonal elimination (no pivoting; diagonally dominant)."""
    n = len(rhs)
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def trapezoid_primitive(fn, upper, n=1_000_000):
    """Composite trapezoid value of the integral of fn over [0, upper]."""
    if upper == 0.0:
        return 0.0
    s = np.linspace(0.0, upper, n + 1)
    return float(np.trapezoid(fn(s), s))


def dense_product_projection(fn, k, l, n=1000):
    """Tensor midpoint quadrature of fn against 2 sin(k pi x) sin(l pi z)."""
    x = (np.arange(n) + 0.5) / n
    z = (np.arange(n) + 0.5) / n
    vals = fn(x[:, None], z[None, :])
    mode = 2.0 * np.sin(k * np.pi * x)[:, None] * np.sin(l * np.pi * z)[None, :]
    return float(np.sum(vals * mode)) / n**2


def richardson_slope(errors, factors):
    """Observed convergence order from error pairs under refinement."""
    errors = np.asarray(errors, dtype=float)
    factors = np.asarray(factors, dtype=float)
    return float(np.polyfit(np.log(factors), np.log(errors), 1)[0])
