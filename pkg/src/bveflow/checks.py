"""Randomized structural invariant suite, runnable from the CLI.

Each check returns a CheckResult with a one repeatable verdict line; a
fixed seed reproduces the whole report bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import corey
from .grid import Grid, ScalarField, gradient_x, l2_norm
from .velocity import (
    incompressibility_residual,
    horizontal_velocity,
    velocity_pair,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.detail}"


def random_smooth_field(
    grid: Grid, rng: np.random.Generator, kmax: int = 4, lo: float = 0.05, hi: float = 0.95
) -> ScalarField:
    """Random band-limited field mapped affinely into [lo, hi]."""
    x = grid.x_centers()[:, None]
    z = grid.z_centers()[None, :]
    v = np.zeros((grid.nx, grid.nz))
    for k in range(kmax + 1):
        for l in range(kmax + 1):
            a, b = rng.standard_normal(2) / (1.0 + k + l)
            v += a * np.cos(np.pi * (k * x + l * z)) + b * np.sin(
                np.pi * (k * x - l * z)
            )
    vmin, vmax = v.min(), v.max()
    if vmax - vmin < 1e-12:
        return ScalarField.full(grid, 0.5 * (lo + hi))
    return ScalarField(grid, lo + (v - vmin) * (hi - lo) / (vmax - vmin))


def check_velocity_normalization(seed: int, n_fields: int = 20, grid=None) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = grid or Grid(256, 16)
    coeffs = corey(2.0)
    worst_col = 0.0
    worst_top = 0.0
    for _ in range(n_fields):
        S = random_smooth_field(grid, rng)
        V = velocity_pair(S, coeffs)
        col = np.abs(V.u.values.sum(axis=1) * grid.dz - 1.0).max()
        top = np.abs(V.w.values[:, -1]).max()
        worst_col = max(worst_col, float(col))
        worst_top = max(worst_top, float(top))
    ok = worst_col <= 1e-13 and worst_top <= 1e-12
    return CheckResult(
        "velocity-normalization",
        ok,
        f"max column defect {worst_col:.2e} (tol 1e-13), "
        f"max top-face velocity {worst_top:.2e} (tol 1e-12)",
    )


def check_incompressibility(seed: int, n_fields: int = 20, grid=None) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = grid or Grid(256, 16)
    coeffs = corey(2.0)
    worst = 0.0
    control = 0.0
    for _ in range(n_fields):
        S = random_smooth_field(grid, rng)
        V = velocity_pair(S, coeffs)
        worst = max(worst, incompressibility_residual(V))
        V_bad = velocity_pair(S, coeffs, stencil="one_sided")
        control = max(control, incompressibility_residual(V_bad))
    ok = worst <= 1e-12 and control >= 1e-4
    return CheckResult(
        "incompressibility",
        ok,
        f"matched residual {worst:.2e} (tol 1e-12), "
        f"mismatched control {control:.2e} (must be >= 1e-4)",
    )


def check_velocity_bounds(seed: int, n_pairs: int = 20, grid=None) -> CheckResult:
    """Boundedness, Lipschitz dependence, and the gradient growth bound."""
    rng = np.random.default_rng(seed)
    grid = grid or Grid(128, 16)
    coeffs = corey(2.0)
    bound = coeffs.mobility_sup / coeffs.mobility_floor
    lip = 2.0 * coeffs.mobility_sup * coeffs.lipschitz_mobility / coeffs.mobility_floor**2
    violations = 0
    worst_ratio = 0.0
    for _ in range(n_pairs):
        s1 = random_smooth_field(grid, rng)
        s2 = random_smooth_field(grid, rng)
        u1 = horizontal_velocity(s1, coeffs)
        u2 = horizontal_velocity(s2, coeffs)
        if u1.values.max() > bound or u2.values.max() > bound:
            violations += 1
        diff_u = l2_norm(ScalarField(grid, u1.values - u2.values))
        diff_s = l2_norm(ScalarField(grid, s1.values - s2.values))
        if diff_u > lip * diff_s:
            violations += 1
        w1 = velocity_pair(s1, coeffs).w
        rhs = lip * l2_norm(gradient_x(s1))
        wn = l2_norm(w1)
        worst_ratio = max(worst_ratio, wn / rhs if rhs > 0 else 0.0)
        if wn > rhs:
            violations += 1
    ok = violations == 0
    return CheckResult(
        "velocity-growth-bounds",
        ok,
        f"{violations} violations over {n_pairs} pairs "
        f"(sup/floor = {bound:.6g}, worst W ratio {worst_ratio:.3f})",
    )


def check_scaling_invariance(seed: int, grid=None) -> CheckResult:
    """Rescaling the mobility by a constant cancels in the velocities."""
    rng = np.random.default_rng(seed)
    grid = grid or Grid(96, 12)
    base = corey(2.0)
    S = random_smooth_field(grid, rng)
    from dataclasses import replace as dc_replace

    scaled = dc_replace(
        base,
        mobility_floor=7.0 * base.mobility_floor,
        mobility_sup=7.0 * base.mobility_sup,
        _mobility=lambda s: 7.0 * base._mobility(s),
    )
    v0 = velocity_pair(S, base)
    v1 = velocity_pair(S, scaled)
    du = np.abs(v0.u.values - v1.u.values).max()
    dw = np.abs(v0.w.values - v1.w.values).max()
    ok = du <= 1e-13 and dw <= 1e-13
    return CheckResult(
        "mobility-scaling-invariance",
        ok,
        f"max |dU| {du:.2e}, max |dW| {dw:.2e} (tol 1e-13)",
    )


def check_coefficient_contracts(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    coeffs = corey(2.0)
    mirror = corey(0.5)
    s = rng.uniform(0.0, 1.0, size=2000)
    f = coeffs.frac_flow(s)
    lam = coeffs.total_mobility(s)
    pair = rng.uniform(0.0, 1.0, size=(1000, 2))
    lhs = np.abs(coeffs.frac_flow(pair[:, 0]) - coeffs.frac_flow(pair[:, 1]))
    rhs = coeffs.lipschitz_frac_flow * np.abs(pair[:, 0] - pair[:, 1])
    sym = np.abs(coeffs.frac_flow(s) - (1.0 - mirror.frac_flow(1.0 - s)))
    problems = []
    if not (f.min() >= 0.0 and f.max() <= 1.0):
        problems.append("flux range")
    if not (lam.min() >= coeffs.mobility_floor and lam.max() <= coeffs.mobility_sup):
        problems.append("mobility range")
    if not (lhs <= rhs + 1e-15).all():
        problems.append("Lipschitz")
    if sym.max() > 1e-12:
        problems.append("viscosity-ratio symmetry")
    ok = not problems
    return CheckResult(
        "coefficient-contracts",
        ok,
        "all bounds hold" if ok else "violated: " + ", ".join(problems),
    )


def run_invariant_suite(seed: int = 0) -> list[CheckResult]:
    return [
        check_coefficient_contracts(seed),
        check_velocity_normalization(seed + 1),
        check_incompressibility(seed + 2),
        check_velocity_bounds(seed + 3),
        check_scaling_invariance(seed + 4),
    ]
