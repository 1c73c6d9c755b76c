"""Constitutive saturation functions (fractional flow, diffusion, total
mobility) together with the bounds derived from them.

Two built-in families are provided.  The quadratic-mobility family uses

    lambda_w = M*S^2,   lambda_nw = (1-S)^2,   lambda_tot = M*S^2 + (1-S)^2,

which is the unique total mobility for which the fractional flow
f = M*S^2 / (M*S^2 + (1-S)^2) is the wetting-phase flux fraction.  The
total-mobility form itself is an assumption of this package (only f and
the diffusion function are pinned by the model); it is chosen to be
consistent with quadratic Corey mobilities.  The linear family
(f(s) = s, unit mobility) exists for verification runs where the
transport term must be affine.

All constants (mobility floor/sup, Lipschitz bounds) are derived once at
construction by a dense scan rather than by closed-form algebra.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

# Inputs may drift outside [0,1] by this much (linear-solve roundoff)
# before they are treated as a contract violation.
DOMAIN_TOL = 1e-12

_SCAN_POINTS = 1_000_001


class DomainError(ValueError):
    """Saturation outside [0,1] beyond the clamping tolerance."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def _check_domain(s):
    s = np.asarray(s, dtype=float)
    if s.size and (s.min() < -DOMAIN_TOL or s.max() > 1.0 + DOMAIN_TOL):
        bad = s[(s < -DOMAIN_TOL) | (s > 1.0 + DOMAIN_TOL)]
        raise DomainError(
            f"saturation {float(bad.flat[0]):.17g} outside [0,1] beyond {DOMAIN_TOL:g}"
        )
    return np.clip(s, 0.0, 1.0)


@dataclass(frozen=True)
class CoefficientSet:
    """Constitutive functions of saturation plus their derived bounds.

    Immutable after construction; safe for concurrent reads.  The raw
    callables are defined on [0,1]; evaluation with ``extended=True``
    clamps the argument first, which realises the constant extension of
    the functions outside the physical range (they stay Lipschitz,
    bounded and monotone under that extension).
    """

    viscosity_ratio: float
    mobility_floor: float  # strictly positive lower bound of lambda_tot
    mobility_sup: float
    lipschitz_frac_flow: float
    lipschitz_mobility: float
    _frac_flow: Callable = field(repr=False)
    _diffusion: Callable = field(repr=False)
    _mobility: Callable = field(repr=False)

    def _prep(self, s, extended):
        if extended:
            return np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        return _check_domain(s)

    def frac_flow(self, s, *, extended=False):
        """Fraction of the total flux carried by the wetting phase."""
        return self._frac_flow(self._prep(s, extended))

    def diffusion(self, s, *, extended=False):
        """Degenerate diffusion coefficient; vanishes at s in {0, 1}."""
        return self._diffusion(self._prep(s, extended))

    def total_mobility(self, s, *, extended=False):
        """Total mobility; bounded below by ``mobility_floor`` > 0."""
        return self._mobility(self._prep(s, extended))

    def frac_flow_primitive(self, s):
        """Primitive of the fractional flow, integrated from 0.

        Uses adaptive quadrature with absolute tolerance 1e-12 and
        raises QuadratureError if the error estimate is not met.
        """
        s_arr = _check_domain(s)
        flat = np.atleast_1d(s_arr).ravel()
        out = np.empty(flat.shape)
        for idx, upper in enumerate(flat):
            val, err = integrate.quad(
                self._frac_flow, 0.0, float(upper), epsabs=1e-12, limit=200
            )
            if err > 1e-10:
                raise QuadratureError(
                    f"primitive at s={upper!r}: error estimate {err:.3e} > 1e-10"
                )
            out[idx] = val
        if np.isscalar(s) or np.ndim(s) == 0:
            return float(out[0])
        return out.reshape(np.shape(s_arr))


def _derive_bounds(fn, n=_SCAN_POINTS):
    """Max absolute derivative and range of fn on [0,1] by dense scan."""
    s = np.linspace(0.0, 1.0, n)
    v = fn(s)
    h = s[1] - s[0]
    slopes = np.abs(v[2:] - v[:-2]) / (2.0 * h)
    edge = max(abs(v[1] - v[0]), abs(v[-1] - v[-2])) / h
    lip = max(float(slopes.max()), float(edge)) * (1.0 + 1e-9) + 1e-12
    # Guard band keeps the scanned extrema valid as true bounds.
    return lip, float(v.min()) - 1e-9, float(v.max()) + 1e-9


@functools.lru_cache(maxsize=32)
def corey(viscosity_ratio: float = 2.0) -> CoefficientSet:
    """Quadratic-mobility coefficient family for a given viscosity ratio."""
    if viscosity_ratio <= 0:
        raise ValueError("viscosity_ratio must be positive")
    m = float(viscosity_ratio)

    def mobility(s):
        return m * s * s + (1.0 - s) ** 2

    def frac(s):
        return m * s * s / mobility(s)

    def diff(s):
        return m * s * s * (1.0 - s) ** 2 / mobility(s)

    lip_f, _, _ = _derive_bounds(frac)
    lip_lam, floor, sup = _derive_bounds(mobility)
    return CoefficientSet(
        viscosity_ratio=m,
        mobility_floor=floor,
        mobility_sup=sup,
        lipschitz_frac_flow=lip_f,
        lipschitz_mobility=lip_lam,
        _frac_flow=frac,
        _diffusion=diff,
        _mobility=mobility,
    )


@functools.lru_cache(maxsize=1)
def linear() -> CoefficientSet:
    """Linear flux with unit mobility; advection becomes affine in S.

    The diffusion coefficient is identically zero, so this family only
    drives transport and the verification paths that need linearity.
    """

    def frac(s):
        return np.asarray(s, dtype=float) + 0.0

    def diff(s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def mobility(s):
        return np.ones_like(np.asarray(s, dtype=float))

    return CoefficientSet(
        viscosity_ratio=1.0,
        mobility_floor=1.0,
        mobility_sup=1.0,
        lipschitz_frac_flow=1.0 + 1e-12,
        lipschitz_mobility=1e-12,
        _frac_flow=frac,
        _diffusion=diff,
        _mobility=mobility,
    )
