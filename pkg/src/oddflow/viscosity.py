"""Density-dependent viscosity laws f(rho) and the derived potential g(rho).

``g`` is the anchored antiderivative of ``2 f'(r) / r``:

    g(rho) = integral from rho_star to rho of 2 f'(r) / r dr,

so ``g(rho_star) = 0`` and ``rho * g'(rho) = 2 f'(rho)``.  The gradient of
``g(rho)`` rotated by 90 degrees is what shifts the transport velocity in the
reduced form of the momentum equation, so ``g`` must be evaluated to high
accuracy: closed forms are used for power laws, segmented adaptive quadrature
(tolerance 1e-12) for user-supplied laws.

Densities below ``rho_star`` are treated as vacuum and rejected, never
clipped.  Non-constant laws must have nonvanishing ``f'`` on the density
range they are evaluated on (so that the change of variables behind ``g``
is a diffeomorphism); configurations violating this are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, ConvergenceError, VacuumError
from .grid import ScalarField

__all__ = [
    "ViscosityLaw",
    "power_law",
    "constant_law",
    "custom_law",
    "f_eval",
    "f_prime",
    "g_eval",
    "g_prime",
    "check_diffeomorphism",
]

_QUAD_TOL = 1e-12


@dataclass(frozen=True)
class ViscosityLaw:
    """A viscosity coefficient law with its vacuum floor ``rho_star``.

    Use the factory helpers :func:`power_law`, :func:`constant_law`, or
    :func:`custom_law` rather than constructing directly.
    """

    kind: str
    rho_star: float
    a: float = 0.0
    b: float = 0.0
    alpha: float = 1.0
    c: float = 0.0
    f: Optional[Callable] = field(default=None, compare=False)
    fp: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.rho_star > 0.0:
            raise ConfigError(f"rho_star must be positive, got {self.rho_star}")
        if self.kind not in ("power_law", "constant", "custom"):
            raise ConfigError(f"unknown viscosity law kind {self.kind!r}")
        if self.kind == "custom" and (self.f is None or self.fp is None):
            raise ConfigError("custom law needs both f and its derivative")

    @property
    def is_constant(self):
        """True when f' vanishes identically (g is then zero)."""
        if self.kind == "constant":
            return True
        if self.kind == "power_law":
            return self.a == 0.0 or self.alpha == 0.0
        return False


def power_law(a, b, alpha, rho_star):
    """f(rho) = a * rho**alpha + b."""
    return ViscosityLaw(kind="power_law", rho_star=rho_star, a=a, b=b, alpha=alpha)


def constant_law(c, rho_star):
    """f(rho) = c."""
    return ViscosityLaw(kind="constant", rho_star=rho_star, c=c)


def custom_law(f, f_prime, rho_star):
    """User-supplied law; both callables must accept numpy arrays."""
    return ViscosityLaw(kind="custom", rho_star=rho_star, f=f, fp=f_prime)


def _as_array(rho):
    if isinstance(rho, ScalarField):
        return rho.values, rho.grid
    return np.asarray(rho, dtype=np.float64), None


def _wrap(vals, grid):
    if grid is not None:
        return ScalarField(grid, vals, copy=False)
    return vals if vals.ndim else float(vals)


def _check_vacuum(law, vals):
    lo = vals.min()
    if lo < law.rho_star:
        raise VacuumError(
            f"density {lo:.6g} below admissible floor rho_star={law.rho_star:.6g}"
        )


def f_eval(law, rho):
    """Evaluate f(rho); accepts floats, arrays, or ScalarFields."""
    vals, grid = _as_array(rho)
    _check_vacuum(law, vals)
    if law.kind == "power_law":
        out = law.a * vals**law.alpha + law.b
    elif law.kind == "constant":
        out = np.full_like(vals, law.c)
    else:
        out = np.asarray(law.f(vals), dtype=np.float64)
    return _wrap(out, grid)


def f_prime(law, rho):
    """Evaluate f'(rho)."""
    vals, grid = _as_array(rho)
    _check_vacuum(law, vals)
    if law.kind == "power_law":
        out = law.a * law.alpha * vals ** (law.alpha - 1.0)
    elif law.kind == "constant":
        out = np.zeros_like(vals)
    else:
        out = np.asarray(law.fp(vals), dtype=np.float64)
    return _wrap(out, grid)


def g_prime(law, rho):
    """g'(rho) = 2 f'(rho) / rho (exact identity)."""
    vals, grid = _as_array(rho)
    _check_vacuum(law, vals)
    fp = f_prime(law, vals)
    return _wrap(2.0 * fp / vals, grid)


def g_eval(law, rho):
    """Evaluate the anchored potential g(rho)."""
    vals, grid = _as_array(rho)
    _check_vacuum(law, vals)
    if law.is_constant:
        out = np.zeros_like(vals)
    elif law.kind == "power_law":
        a, alpha, rs = law.a, law.alpha, law.rho_star
        if alpha == 1.0:
            out = 2.0 * a * np.log(vals / rs)
        else:
            out = (2.0 * a * alpha / (alpha - 1.0)) * (
                vals ** (alpha - 1.0) - rs ** (alpha - 1.0)
            )
    else:
        check_diffeomorphism(law, min(law.rho_star, vals.min()), vals.max())
        out = _g_quadrature(law, vals)
    return _wrap(out, grid)


def _g_quadrature(law, vals):
    """Cumulative adaptive quadrature of 2 f'(r)/r over sorted unique values.

    Integrating segment-by-segment between consecutive unique densities keeps
    each quad call on a short smooth interval and the accumulated error below
    the 1e-12 budget.
    """
    flat = vals.ravel()
    uniq, inverse = np.unique(flat, return_inverse=True)

    def integrand(r):
        return 2.0 * law.fp(r) / r

    nodes = np.concatenate(([law.rho_star], uniq))
    g_at = np.empty(uniq.size)
    acc = 0.0
    err = 0.0
    for i in range(uniq.size):
        lo, hi = nodes[i], nodes[i + 1]
        if hi > lo:
            val, e = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
            acc += val
            err += e
        g_at[i] = acc
    scale = max(1.0, np.abs(g_at).max())
    if err > _QUAD_TOL * scale:
        raise ConvergenceError(
            f"quadrature for g did not reach tolerance (error estimate {err:.2e})"
        )
    return g_at[inverse].reshape(vals.shape)


def check_diffeomorphism(law, lo, hi, samples=257):
    """Reject laws whose f' vanishes or changes sign on [lo, hi].

    Constant laws are exempt (g is identically zero for them); power laws
    with nonzero a*alpha cannot vanish at positive density.
    """
    if law.is_constant:
        return
    if law.kind == "power_law":
        if lo <= 0.0:
            raise ConfigError("power law requires positive density range")
        return
    pts = np.linspace(lo, hi, samples)
    fp = np.asarray(law.fp(pts), dtype=np.float64)
    scale = np.abs(fp).max()
    if scale == 0.0 or np.abs(fp).min() < 1e-13 * scale or fp.max() * fp.min() < 0.0:
        raise ConfigError(
            f"viscosity law derivative vanishes on density range [{lo:.6g}, {hi:.6g}]; "
            "the law must be strictly monotone there"
        )


def default_rho_star(rho0_min):
    """Conventional vacuum floor: 0.9 times the initial minimum density."""
    if not rho0_min > 0.0:
        raise ConfigError("initial density must be strictly positive")
    return 0.9 * rho0_min
