"""Fixed-point construction: alternate density transport with linear solves.

One outer iteration maps the velocity trajectory u^n on [0, T] to the next
iterate by

1. transporting the initial density along u^n to get rho^{n+1},
2. forming the shifted effective velocity U^n = u^n - perp_grad g(rho^{n+1}),
3. solving the linear advection--diffusion--pressure system
   (d/dt + U^n . grad) u + a^{n+1} grad(Pi) - eps a^{n+1} Lap(u) = 0,
   div u = 0, with a^{n+1} = 1/rho^{n+1},

starting from the rest iterate (mean density, zero velocity).  Trajectories
are stored densely at the inner time step; stage-midpoint coefficient values
are supplied by cubic Lagrange interpolation in time, matching the
integrator's order.  The per-iteration distance

    d_n = sup_t ||u^{n+1} - u^n||_2 + sup_t ||rho^{n+1} - rho^n||_2

is the contraction diagnostic; growth over three consecutive iterations is
reported as divergence (not raised), convergence is d_n < tol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .diagnostics import trajectory_pde_residual
from .dynamics import PressureSolver, _advect_scalar, _advect_vector, _scale_vector
from .elliptic import DEFAULT_MAX_ITER, DEFAULT_TOL, leray_project
from .errors import ConfigError, VacuumError
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    dealias,
    divergence,
    gradient,
    l2_norm,
    laplacian,
    max_abs,
    mean,
    perp_gradient,
)
from .viscosity import ViscosityLaw, check_diffeomorphism, default_rho_star, g_eval, power_law

__all__ = [
    "PicardConfig",
    "PicardResult",
    "IterationRecord",
    "transport_density",
    "linear_stokes_solve",
    "picard_run",
]


@dataclass(frozen=True)
class PicardConfig:
    eps: float = 0.01
    t_end: float = 0.1
    dt: float = 1e-3
    n_max: int = 25
    tol: float = 1e-9
    law: Optional[ViscosityLaw] = None  # default: f(rho) = rho, rho_star = 0.9 min(rho0)
    elliptic_tol: float = DEFAULT_TOL
    elliptic_max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError("eps must lie in (0, 1]")
        if self.tol <= 0.0:
            raise ConfigError("tol must be positive")
        if self.t_end <= 0.0 or self.dt <= 0.0:
            raise ConfigError("t_end and dt must be positive")
        steps = int(round(self.t_end / self.dt))
        if steps < 4 or abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigError(
                f"dt={self.dt} must divide t_end={self.t_end} into at least 4 steps"
            )
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    n: int
    d_n: float
    residual_n: float


@dataclass
class PicardResult:
    records: List[IterationRecord]
    converged: bool
    diverged: bool
    rho_traj: list
    u_traj: list
    U_traj: list
    grad_pi_traj: list
    law: ViscosityLaw
    dt: float
    times: np.ndarray


# ---------------------------------------------------------------------------
# time interpolation of stored trajectories
# ---------------------------------------------------------------------------

def _lagrange_weights(s):
    """Cubic Lagrange weights at local coordinate s over nodes {0, 1, 2, 3}."""
    nodes = (0.0, 1.0, 2.0, 3.0)
    w = []
    for i, xi in enumerate(nodes):
        num, den = 1.0, 1.0
        for j, xj in enumerate(nodes):
            if j != i:
                num *= s - xj
                den *= xi - xj
        w.append(num / den)
    return tuple(w)


def _midpoint(traj, i):
    """Trajectory value at t_{i+1/2} from the four nearest stored samples."""
    m = len(traj) - 1
    j = min(max(i - 1, 0), m - 3)
    w = _lagrange_weights((i + 0.5) - j)
    out = w[0] * traj[j]
    for k in (1, 2, 3):
        out = out + w[k] * traj[j + k]
    return out


# ---------------------------------------------------------------------------
# inner solvers
# ---------------------------------------------------------------------------

def transport_density(u_traj, rho0, dt):
    """Advect rho0 along the stored velocity trajectory; returns the density
    trajectory on the same time grid."""
    if len(u_traj) < 4:
        raise ConfigError("velocity trajectory needs at least 4 samples")
    rho = rho0
    out = [rho]
    for i in range(len(u_traj) - 1):
        u_lo, u_hi = u_traj[i], u_traj[i + 1]
        u_mid = _midpoint(u_traj, i)
        k1 = -1.0 * _advect_scalar(u_lo, rho)
        k2 = -1.0 * _advect_scalar(u_mid, rho + (0.5 * dt) * k1)
        k3 = -1.0 * _advect_scalar(u_mid, rho + (0.5 * dt) * k2)
        k4 = -1.0 * _advect_scalar(u_hi, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if rho.values.min() <= 0.0:
            raise VacuumError(
                f"density lost positivity during transport at t={(i + 1) * dt:.4f}"
            )
        out.append(rho)
    return out


def _stokes_tendency(a, U, u, eps, solver):
    adv = _advect_vector(U, u)
    diff = _scale_vector(a, VectorField(laplacian(u.x), laplacian(u.y)))
    forcing = VectorField(adv.x - eps * diff.x, adv.y - eps * diff.y)
    # A solenoidal forcing sources no pressure; skip the solve when its
    # divergence sits at roundoff level so CG never chases pure noise.
    f_scale = max(max_abs(forcing.x), max_abs(forcing.y))
    if max_abs(divergence(forcing)) <= 1e-12 * max(1.0, f_scale):
        zero_p = ScalarField(a.grid, np.zeros((a.grid.n, a.grid.n)), copy=False)
        press = VectorField(zero_p, zero_p)
        du = VectorField(
            -1.0 * adv.x + eps * diff.x,
            -1.0 * adv.y + eps * diff.y,
        )
        return du, zero_p
    res = solver.solve(a, forcing)
    press = _scale_vector(a, gradient(res.pressure))
    du = VectorField(
        -1.0 * adv.x - press.x + eps * diff.x,
        -1.0 * adv.y - press.y + eps * diff.y,
    )
    return du, res.pressure


def linear_stokes_solve(a_traj, U_traj, u0, eps, dt,
                        tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """March the linear system along frozen coefficient trajectories.

    Returns (velocity trajectory, pressure-gradient trajectory); the
    pressure gradient is recomputed at the stored nodes from the
    instantaneous fields.
    """
    if len(a_traj) != len(U_traj):
        raise ConfigError("coefficient trajectories must share the time grid")
    if len(a_traj) < 4:
        raise ConfigError("coefficient trajectories need at least 4 samples")
    solver = PressureSolver(tol=tol, max_iter=max_iter)
    u = u0
    out = [u]
    for i in range(len(a_traj) - 1):
        a_lo, a_hi = a_traj[i], a_traj[i + 1]
        U_lo, U_hi = U_traj[i], U_traj[i + 1]
        a_mid = _midpoint(a_traj, i)
        U_mid = _midpoint(U_traj, i)
        k1, _ = _stokes_tendency(a_lo, U_lo, u, eps, solver)
        k2, _ = _stokes_tendency(a_mid, U_mid, u + (0.5 * dt) * k1, eps, solver)
        k3, _ = _stokes_tendency(a_mid, U_mid, u + (0.5 * dt) * k2, eps, solver)
        k4, _ = _stokes_tendency(a_hi, U_hi, u + dt * k3, eps, solver)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if max_abs(divergence(u)) > 1e-10:
            u = leray_project(u)
        out.append(u)
    grad_pi = []
    for a, U, ui in zip(a_traj, U_traj, out):
        _, pressure = _stokes_tendency(a, U, ui, eps, solver)
        grad_pi.append(gradient(pressure))
    return out, grad_pi


# ---------------------------------------------------------------------------
# outer iteration
# ---------------------------------------------------------------------------

def _shifted_effective(law, u_traj, rho_traj):
    out = []
    for u, rho in zip(u_traj, rho_traj):
        out.append(u - perp_gradient(dealias(g_eval(law, rho))))
    return out


def _traj_distance(new, old):
    return max(l2_norm(a - b) for a, b in zip(new, old))


def _traj_arrays(rho_traj, u_traj):
    rho = np.stack([r.values for r in rho_traj])
    u = np.stack([np.stack([v.x.values, v.y.values]) for v in u_traj])
    return rho, u


def picard_run(rho0, u0, config):
    """Run the fixed-point iteration from the rest iterate.

    ``rho0``/``u0`` are the shared initial data of every iterate; iterate 0
    is the constant-density rest state (mean(rho0), 0).
    """
    grid = rho0.grid
    steps = int(round(config.t_end / config.dt))
    dt = config.dt
    if config.law is not None:
        law = config.law
    else:
        law = power_law(1.0, 0.0, 1.0, rho_star=default_rho_star(rho0.values.min()))
    check_diffeomorphism(law, law.rho_star, float(rho0.values.max()) * 1.05)

    rho_bar = mean(rho0)
    flat = ScalarField(grid, np.full((grid.n, grid.n), rho_bar))
    zero = VectorField(
        ScalarField(grid, np.zeros((grid.n, grid.n))),
        ScalarField(grid, np.zeros((grid.n, grid.n))),
    )
    rho_traj = [flat] * (steps + 1)
    u_traj = [zero] * (steps + 1)
    U_traj = [zero] * (steps + 1)
    grad_pi_traj = [zero] * (steps + 1)

    records: List[IterationRecord] = []
    converged = False
    growth_streak = 0

    for n in range(1, config.n_max + 1):
        rho_next = transport_density(u_traj, rho0, dt)
        U_prev = _shifted_effective(law, u_traj, rho_next)
        a_next = [1.0 / r for r in rho_next]
        u_next, grad_pi_next = linear_stokes_solve(
            a_next, U_prev, u0, config.eps, dt,
            tol=config.elliptic_tol, max_iter=config.elliptic_max_iter,
        )
        d_n = _traj_distance(u_next, u_traj) + _traj_distance(rho_next, rho_traj)
        rho_arr, u_arr = _traj_arrays(rho_next, u_next)
        residual_n = trajectory_pde_residual(
            law, rho_arr, u_arr, dt, config.eps, grid, samples=3
        )
        records.append(IterationRecord(n=n, d_n=d_n, residual_n=residual_n))
        rho_traj, u_traj, U_traj, grad_pi_traj = rho_next, u_next, U_prev, grad_pi_next
        if d_n < config.tol:
            converged = True
            break
        if len(records) >= 2 and records[-1].d_n > records[-2].d_n:
            growth_streak += 1
            if growth_streak >= 3:
                break
        else:
            growth_streak = 0

    return PicardResult(
        records=records,
        converged=converged,
        diverged=growth_streak >= 3,
        rho_traj=rho_traj,
        u_traj=u_traj,
        U_traj=U_traj,
        grad_pi_traj=grad_pi_traj,
        law=law,
        dt=dt,
        times=np.arange(steps + 1) * dt,
    )
