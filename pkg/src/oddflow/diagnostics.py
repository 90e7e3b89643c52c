"""Run diagnostics: conserved energies, constraint residuals, stability twins.

Nothing here feeds back into time stepping; these are measurements.  The
momentum residual helpers re-derive the pressure with a fresh, tighter
elliptic solve so they certify a state independently of the warm-started
solves used during integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .elliptic import solve_variable_poisson
from .grid import (
    ScalarField,
    VectorField,
    divergence,
    gradient,
    l2_norm,
    max_abs,
    mean,
    perp_gradient,
    random_solenoidal,
)
from .viscosity import g_eval

__all__ = [
    "DiagnosticsRecord",
    "weighted_energy",
    "elsasser_residual",
    "pde_residual",
    "trajectory_pde_residual",
    "stability_twin",
    "StabilityReport",
    "fit_growth_constant",
]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of diag.csv; all entries finite."""

    t: float
    E_u: float                 # |sqrt(rho) u|_L2, conserved by the inviscid forms
    E_U: float                 # |sqrt(rho) U|_L2 with the effective velocity
    div_u_max: float
    div_U_max: float
    elsasser_residual: float   # |U_carried - (u - perp_grad g(rho))|_L2; 0 if no carried U
    rho_min: float
    rho_max: float
    rho_mean: float
    pde_residual: float
    pressure_iters: int

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not np.isfinite(val):
                raise ValueError(f"non-finite diagnostic {name}={val}")


def weighted_energy(rho, v):
    """|sqrt(rho) v|_L2 (the materially conserved energy norm)."""
    g = rho.grid
    s = np.sum(rho.values * (v.x.values**2 + v.y.values**2))
    return float(np.sqrt(g.cell_area * s))


def elsasser_residual(law, rho, u, U_carried):
    """L2 distance between the carried U and the one derived from (rho, u)."""
    from .dynamics import effective_velocity  # local import to avoid a cycle

    derived = effective_velocity(law, rho, u)
    return l2_norm(U_carried - derived)


def pde_residual(law, state, formulation, du_dt, eps=0.0, tol=1e-12, max_iter=2000):
    """Momentum-equation residual of a state against a supplied tendency.

    The formulation's right-hand side is recomputed from scratch (cold
    pressure solve at tolerance ``tol``) and compared with ``du_dt`` in L2.
    For a tendency produced by the solver itself this collapses to the
    difference between two pressure solves and sits at the elliptic
    tolerance; for an external trajectory (e.g. a fixed-point iteration) it
    measures how well that trajectory satisfies the PDE.
    """
    from . import dynamics as dyn

    solver = dyn.PressureSolver(tol=tol, max_iter=max_iter)
    if formulation == "reduced":
        tend = dyn.rhs_reduced(law, state, solver)
    elif formulation == "original":
        tend = dyn.rhs_original(law, state, solver)
    elif formulation == "regularized":
        tend = dyn.rhs_regularized(law, state, eps, solver)
    elif formulation == "elsasser":
        tend = dyn.rhs_elsasser(law, state, solver)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    return l2_norm(du_dt - tend.du)


def trajectory_pde_residual(law, rho_traj, u_traj, dt, eps, grid,
                            formulation="regularized", samples=5):
    """Max momentum residual along a stored trajectory.

    The time derivative is taken by fourth-order central differences on the
    stored samples (interior points only), so the result reflects both how
    well the trajectory solves the PDE and the sampling resolution; compare
    like with like.
    """
    from . import dynamics as dyn

    m = rho_traj.shape[0]
    if m < 5:
        raise ValueError("need at least 5 stored samples for the residual stencil")
    idxs = np.unique(np.linspace(2, m - 3, samples).round().astype(int))
    worst = 0.0
    for i in idxs:
        du_dt = VectorField.from_arrays(
            grid,
            (-u_traj[i + 2, 0] + 8 * u_traj[i + 1, 0] - 8 * u_traj[i - 1, 0] + u_traj[i - 2, 0]) / (12 * dt),
            (-u_traj[i + 2, 1] + 8 * u_traj[i + 1, 1] - 8 * u_traj[i - 1, 1] + u_traj[i - 2, 1]) / (12 * dt),
        )
        state = dyn.State(
            rho=ScalarField(grid, rho_traj[i]),
            u=VectorField.from_arrays(grid, u_traj[i, 0], u_traj[i, 1]),
            t=i * dt,
        )
        worst = max(worst, pde_residual(law, state, formulation, du_dt, eps=eps))
    return worst


# ---------------------------------------------------------------------------
# twin-run stability probe
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    times: List[float]
    D: List[float]          # squared L2 distance between the twin runs
    I: List[float]          # gradient max-norms of the reference run
    envelope: List[float]   # fitted C * exp(C * int I) * D(0)
    C: float                # fitted growth constant (inf if no fit below cap)
    passed: bool
    delta0: float


def _grad_max(field_or_vec):
    if isinstance(field_or_vec, VectorField):
        gx = gradient(field_or_vec.x)
        gy = gradient(field_or_vec.y)
        return max(max_abs(gx), max_abs(gy))
    return max_abs(gradient(field_or_vec))


def fit_growth_constant(times, D, I, cap=1e6, iters=120):
    """Smallest C >= 1 with D(t) <= C * exp(C * int_0^t I) * D(0) at all samples.

    The slack ``max_t [log D(t) - log envelope(t)]`` is monotone decreasing
    in C, so a golden-section search on log C over [1, cap] brackets the
    zero crossing; C slightly above the crossing is returned and verified.
    Returns ``inf`` when even the cap fails.
    """
    times = np.asarray(times)
    D = np.asarray(D)
    I = np.asarray(I)
    d0 = D[0]
    if d0 <= 0.0:
        raise ValueError("stability fit needs a nonzero initial separation")
    J = np.concatenate(([0.0], np.cumsum(0.5 * (I[1:] + I[:-1]) * np.diff(times))))
    logD = np.log(np.maximum(D, 1e-300))

    def slack(c):
        return float(np.max(logD - (math.log(c) + c * J + math.log(d0))))

    if slack(1.0) <= 0.0:
        return 1.0
    if slack(cap) > 0.0:
        return math.inf

    lo, hi = 0.0, math.log(cap)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = abs(slack(math.exp(x1))), abs(slack(math.exp(x2)))
    for _ in range(iters):
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = abs(slack(math.exp(x1)))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = abs(slack(math.exp(x2)))
    c = math.exp(0.5 * (lo + hi))
    while slack(c) > 0.0 and c < cap:
        c *= 1.0 + 1e-9
    return c if slack(c) <= 0.0 else math.inf


def stability_twin(config, delta0, perturb_seed=1234, perturb_kmax=3):
    """Run a reference and a velocity-perturbed twin; fit the growth envelope.

    The perturbation is a random solenoidal field of L2 norm ``delta0`` added
    to the initial velocity.  ``D(t)`` is the squared L2 distance of
    ``(rho, u, U)`` between the runs; ``I(t)`` collects gradient max-norms of
    the reference (density, velocity, effective velocity, pressure).
    """
    from . import dynamics as dyn

    result_ref = dyn.simulate(config)
    grid = result_ref.states[0].rho.grid
    law = result_ref.law

    rng = np.random.default_rng(perturb_seed)
    bump = random_solenoidal(grid, rng, kmax=perturb_kmax, rms=1.0)
    scale = delta0 / l2_norm(bump)
    result_pert = dyn.simulate(config, velocity_offset=bump * scale)

    times, Ds, Is = [], [], []
    for s_ref, s_pert in zip(result_ref.states, result_pert.states):
        U_ref = dyn.carried_or_effective(law, s_ref)
        U_pert = dyn.carried_or_effective(law, s_pert)
        d = (
            l2_norm(s_pert.rho - s_ref.rho) ** 2
            + l2_norm(s_pert.u - s_ref.u) ** 2
            + l2_norm(U_pert - U_ref) ** 2
        )
        solver = dyn.PressureSolver(tol=config.elliptic_tol, max_iter=config.elliptic_max_iter)
        tend = dyn.formulation_rhs(law, s_ref, config.formulation, config.epsilon, solver)
        i_val = (
            _grad_max(s_ref.rho)
            + _grad_max(s_ref.u)
            + _grad_max(U_ref)
            + _grad_max(tend.pressure)
        )
        times.append(s_ref.t)
        Ds.append(d)
        Is.append(i_val)

    if all(d == 0.0 for d in Ds):
        # identical twins (e.g. zero perturbation): nothing to fit
        return StabilityReport(
            times=times, D=Ds, I=Is, envelope=[0.0] * len(times),
            C=1.0, passed=True, delta0=delta0,
        )

    C = fit_growth_constant(times, Ds, Is)
    if math.isfinite(C):
        J = np.concatenate(
            ([0.0], np.cumsum(0.5 * (np.asarray(Is)[1:] + np.asarray(Is)[:-1]) * np.diff(times)))
        )
        envelope = [C * math.exp(C * j) * Ds[0] for j in J]
        passed = all(d <= e * (1.0 + 1e-9) for d, e in zip(Ds, envelope))
    else:
        envelope = [math.inf] * len(times)
        passed = False
    return StabilityReport(
        times=times, D=Ds, I=Is, envelope=envelope, C=C, passed=passed, delta0=delta0
    )
