"""Time integration of 2D variable-density flow with odd viscosity.

Four interchangeable right-hand sides evolve the same physics:

``original``
    Momentum equation with the odd stress divergence kept explicit and the
    raw pressure ``pi``:  du/dt = -(u.grad)u - a grad(pi) - a T,  where
    ``T = div(f(rho) (grad u_perp + perp_grad u))`` and ``a = 1/rho``.
``reduced``
    Equivalent form after absorbing the gradient part of the odd stress into
    a modified pressure ``Pi = pi - f(rho) omega`` and shifting transport to
    the effective velocity ``U = u - perp_grad g(rho)``:
    du/dt = -(U.grad)u - a grad(Pi).
``elsasser``
    Same as ``reduced`` but ``U`` is carried as an independent unknown with
    its own transport equation dU/dt = -(u.grad)U - a grad(Pi) (one shared
    pressure); the distance between carried and derived U is a discretization
    diagnostic that shrinks at the order of the integrator.
``regularized``
    ``reduced`` plus a small dissipation eps * a * Laplacian(u), the form
    used to seed fixed-point constructions; eps = 0 reproduces ``reduced``
    exactly (same code path, bit for bit).

The pressure at each evaluation solves -div(a grad P) = div(RHS forcing) so
that the velocity tendency is discretely divergence-free up to the elliptic
tolerance.  Time stepping is classical RK4 under an advective CFL bound,
with optional integrating-factor RK4 for the regularized form (the
constant-coefficient part of the dissipation is then integrated exactly).

Densities are never clipped: dropping below the law's ``rho_star`` raises.
The mean of rho is conserved by construction (solenoidal transport) and
monitored, not enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .elliptic import DEFAULT_MAX_ITER, DEFAULT_TOL, leray_project, solve_variable_poisson
from .errors import CFLViolationError, ConfigError, VacuumError
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    curl,
    dealias,
    derivative,
    divergence,
    gradient,
    laplacian,
    max_abs,
    mean,
    perp,
    perp_gradient,
    random_band_limited,
)
from .viscosity import (
    ViscosityLaw,
    check_diffeomorphism,
    default_rho_star,
    f_eval,
    g_eval,
    power_law,
)

__all__ = [
    "State",
    "ExtendedState",
    "Tendency",
    "SimConfig",
    "InitialData",
    "SimResult",
    "PressureSolver",
    "odd_stress_divergence",
    "odd_stress_divergence_direct",
    "effective_velocity",
    "rhs_original",
    "rhs_reduced",
    "rhs_elsasser",
    "rhs_regularized",
    "formulation_rhs",
    "carried_or_effective",
    "rk4_step",
    "simulate",
    "build_initial",
    "recover_pressure",
]

FORMULATIONS = ("original", "reduced", "elsasser", "regularized")


@dataclass(frozen=True)
class State:
    rho: ScalarField
    u: VectorField
    t: float


@dataclass(frozen=True)
class ExtendedState:
    rho: ScalarField
    u: VectorField
    U: VectorField  # carried effective velocity
    t: float


@dataclass(frozen=True)
class Tendency:
    drho: ScalarField
    du: VectorField
    dU: Optional[VectorField]
    pressure: ScalarField
    iterations: int


class PressureSolver:
    """Pressure solves with warm starts carried between calls."""

    def __init__(self, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.tol = tol
        self.max_iter = max_iter
        self.last_pressure: Optional[ScalarField] = None
        self.last_iterations = 0

    def solve(self, a, F):
        res = solve_variable_poisson(
            a, F, tol=self.tol, max_iter=self.max_iter, initial_guess=self.last_pressure
        )
        self.last_pressure = res.pressure
        self.last_iterations = res.iterations
        return res


# ---------------------------------------------------------------------------
# spatial operators
# ---------------------------------------------------------------------------

def _advect_scalar(v, s):
    """Dealiased (v . grad) s."""
    return dealias(v.x * derivative(s, 0) + v.y * derivative(s, 1))


def _advect_vector(v, w):
    return VectorField(_advect_scalar(v, w.x), _advect_scalar(v, w.y))


def _scale_vector(s, v):
    """Dealiased pointwise product s * v."""
    return dealias(VectorField(s * v.x, s * v.y))


def effective_velocity(law, rho, u):
    """U = u - perp_grad(g(rho)); reduces to u for constant laws."""
    if law.is_constant:
        return u
    g_field = dealias(g_eval(law, rho))
    return u - perp_gradient(g_field)


def odd_stress_divergence(law, rho, u):
    """div of the odd stress f(rho)(grad u_perp + perp_grad u), expanded form.

    Uses the product-rule expansion
    (grad f . grad) u_perp + f Lap(u_perp) + (grad f . perp_grad) u,
    which avoids differentiating products; agrees with
    :func:`odd_stress_divergence_direct` to spectral accuracy on resolved
    fields.
    """
    f = f_eval(law, rho)
    gf = gradient(f)
    u_perp = perp(u)
    t1 = _advect_vector(gf, u_perp)
    t2 = VectorField(f * laplacian(u_perp.x), f * laplacian(u_perp.y))
    # (grad f . perp_grad) s = -f_1 d2 s + f_2 d1 s
    t3x = -1.0 * gf.x * derivative(u.x, 1) + gf.y * derivative(u.x, 0)
    t3y = -1.0 * gf.x * derivative(u.y, 1) + gf.y * derivative(u.y, 0)
    return VectorField(
        dealias(t1.x + t2.x + t3x),
        dealias(t1.y + t2.y + t3y),
    )


def odd_stress_divergence_direct(law, rho, u):
    """div of the odd stress computed entrywise from the stress tensor."""
    f = f_eval(law, rho)
    d1u1, d2u1 = derivative(u.x, 0), derivative(u.x, 1)
    d1u2, d2u2 = derivative(u.y, 0), derivative(u.y, 1)
    m11 = -1.0 * d1u2 - d2u1
    m12 = d1u1 - d2u2
    m22 = d2u1 + d1u2
    s11 = dealias(f * m11)
    s12 = dealias(f * m12)  # tensor is symmetric: s21 = s12
    s22 = dealias(f * m22)
    return VectorField(
        derivative(s11, 0) + derivative(s12, 1),
        derivative(s12, 0) + derivative(s22, 1),
    )


def recover_pressure(law, rho, u, modified_pressure):
    """Raw pressure pi = Pi + f(rho) * curl(u), mean-zero."""
    f_omega = dealias(f_eval(law, rho) * curl(u))
    pi = modified_pressure + f_omega
    return pi - mean(pi)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def rhs_reduced(law, state, solver=None):
    """Modified-pressure form: du/dt = -(U.grad)u - a grad(Pi)."""
    solver = solver or PressureSolver()
    rho, u = state.rho, state.u
    a = 1.0 / rho
    U = effective_velocity(law, rho, u)
    adv = _advect_vector(U, u)
    res = solver.solve(a, adv)
    press = _scale_vector(a, gradient(res.pressure))
    du = VectorField(-1.0 * adv.x - press.x, -1.0 * adv.y - press.y)
    drho = -1.0 * _advect_scalar(u, rho)
    return Tendency(drho, du, None, res.pressure, res.iterations)


def rhs_original(law, state, solver=None):
    """Raw-pressure form with the odd stress kept explicit."""
    solver = solver or PressureSolver()
    rho, u = state.rho, state.u
    a = 1.0 / rho
    stress = odd_stress_divergence(law, rho, u)
    a_stress = _scale_vector(a, stress)
    adv = _advect_vector(u, u)
    forcing = adv + a_stress
    res = solver.solve(a, forcing)
    press = _scale_vector(a, gradient(res.pressure))
    du = VectorField(
        -1.0 * adv.x - press.x - a_stress.x,
        -1.0 * adv.y - press.y - a_stress.y,
    )
    drho = -1.0 * _advect_scalar(u, rho)
    return Tendency(drho, du, None, res.pressure, res.iterations)


def rhs_elsasser(law, state, solver=None):
    """Carried-U form; one pressure serves both momentum equations."""
    solver = solver or PressureSolver()
    rho, u, U = state.rho, state.u, state.U
    a = 1.0 / rho
    adv_u = _advect_vector(U, u)
    res = solver.solve(a, adv_u)
    press = _scale_vector(a, gradient(res.pressure))
    du = VectorField(-1.0 * adv_u.x - press.x, -1.0 * adv_u.y - press.y)
    adv_U = _advect_vector(u, U)
    dU = VectorField(-1.0 * adv_U.x - press.x, -1.0 * adv_U.y - press.y)
    drho = -1.0 * _advect_scalar(u, rho)
    return Tendency(drho, du, dU, res.pressure, res.iterations)


def rhs_regularized(law, state, eps, solver=None):
    """Reduced form plus eps * a * Lap(u); eps = 0 falls through to reduced."""
    if eps == 0.0:
        return rhs_reduced(law, state, solver)
    solver = solver or PressureSolver()
    rho, u = state.rho, state.u
    a = 1.0 / rho
    U = effective_velocity(law, rho, u)
    adv = _advect_vector(U, u)
    lap_u = VectorField(laplacian(u.x), laplacian(u.y))
    diff = _scale_vector(a, lap_u)
    forcing = VectorField(adv.x - eps * diff.x, adv.y - eps * diff.y)
    res = solver.solve(a, forcing)
    press = _scale_vector(a, gradient(res.pressure))
    du = VectorField(
        -1.0 * adv.x - press.x + eps * diff.x,
        -1.0 * adv.y - press.y + eps * diff.y,
    )
    drho = -1.0 * _advect_scalar(u, rho)
    return Tendency(drho, du, None, res.pressure, res.iterations)


def formulation_rhs(law, state, formulation, eps=0.0, solver=None):
    if formulation == "reduced":
        return rhs_reduced(law, state, solver)
    if formulation == "original":
        return rhs_original(law, state, solver)
    if formulation == "elsasser":
        return rhs_elsasser(law, state, solver)
    if formulation == "regularized":
        return rhs_regularized(law, state, eps, solver)
    raise ConfigError(f"unknown formulation {formulation!r}")


def carried_or_effective(law, state):
    """The carried U for extended states, the derived one otherwise."""
    if isinstance(state, ExtendedState):
        return state.U
    return effective_velocity(law, state.rho, state.u)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def _shift(state, tend, c, dt_t):
    """state + c * tendency, with time advanced by dt_t."""
    if isinstance(state, ExtendedState):
        return ExtendedState(
            rho=state.rho + c * tend.drho,
            u=state.u + c * tend.du,
            U=state.U + c * tend.dU,
            t=state.t + dt_t,
        )
    return State(rho=state.rho + c * tend.drho, u=state.u + c * tend.du, t=state.t + dt_t)


def _combine_rk4(state, k1, k2, k3, k4, dt):
    w = dt / 6.0
    if isinstance(state, ExtendedState):
        return ExtendedState(
            rho=state.rho + w * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho),
            u=state.u + w * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du),
            U=state.U + w * (k1.dU + 2.0 * k2.dU + 2.0 * k3.dU + k4.dU),
            t=state.t + dt,
        )
    return State(
        rho=state.rho + w * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho),
        u=state.u + w * (k1.du + 2.0 * k2.du + 2.0 * k3.du + k4.du),
        t=state.t + dt,
    )


def _check_cfl(law, state, dt, cfl):
    vmax = max_abs(state.u)
    vmax = max(vmax, max_abs(carried_or_effective(law, state)))
    if vmax > 0.0:
        limit = cfl * state.rho.grid.spacing / vmax
        if dt > limit:
            raise CFLViolationError(
                f"dt={dt:.3e} exceeds CFL limit {limit:.3e} (max speed {vmax:.3f})"
            )


def _restore_invariants(law, state, reproject_threshold):
    """Divergence cleanup and vacuum guard after a completed step."""
    u = state.u
    if max_abs(divergence(u)) > reproject_threshold:
        u = leray_project(u)
    if isinstance(state, ExtendedState):
        U = state.U
        if max_abs(divergence(U)) > reproject_threshold:
            U = leray_project(U)
        out = ExtendedState(rho=state.rho, u=u, U=U, t=state.t)
    else:
        out = State(rho=state.rho, u=u, t=state.t)
    rho_min = out.rho.values.min()
    if rho_min < law.rho_star:
        raise VacuumError(
            f"density fell to {rho_min:.6g} < rho_star={law.rho_star:.6g} at t={out.t:.4f}"
        )
    if max_abs(divergence(out.u)) > 1e-9:
        raise ConfigError("velocity divergence exceeds 1e-9 after projection")
    return out


def rk4_step(rhs, law, state, dt, cfl=0.5, reproject_threshold=1e-10):
    """One classical RK4 step with CFL guard and invariant restoration."""
    _check_cfl(law, state, dt, cfl)
    k1 = rhs(state)
    k2 = rhs(_shift(state, k1, 0.5 * dt, 0.5 * dt))
    k3 = rhs(_shift(state, k2, 0.5 * dt, 0.5 * dt))
    k4 = rhs(_shift(state, k3, dt, dt))
    new = _combine_rk4(state, k1, k2, k3, k4, dt)
    return _restore_invariants(law, new, reproject_threshold)


def _if_rk4_step(law, state, dt, eps, solver, cfl=0.5, reproject_threshold=1e-10):
    """Integrating-factor RK4 for the regularized form.

    The constant-coefficient part eps*mean(a)*Lap of the dissipation is
    integrated exactly by spectral propagators; only the variable remainder
    eps*(a - mean(a))*Lap(u) stays in the explicit nonlinear part.
    """
    _check_cfl(law, state, dt, cfl)
    g = state.rho.grid
    a0 = 1.0 / state.rho
    a_bar = mean(a0)
    nu = eps * a_bar
    e_half = np.exp(nu * g.lap_mult * (0.5 * dt))
    e_full = e_half * e_half

    def prop(v, e):
        return VectorField(
            ScalarField.from_spectral(g, e * v.x.hat),
            ScalarField.from_spectral(g, e * v.y.hat),
        )

    def nonlinear(s):
        rho, u = s.rho, s.u
        a = 1.0 / rho
        U = effective_velocity(law, rho, u)
        adv = _advect_vector(U, u)
        lap_u = VectorField(laplacian(u.x), laplacian(u.y))
        diff_full = _scale_vector(a, lap_u)
        forcing = VectorField(adv.x - eps * diff_full.x, adv.y - eps * diff_full.y)
        res = solver.solve(a, forcing)
        press = _scale_vector(a, gradient(res.pressure))
        rem = _scale_vector(a - a_bar, lap_u)  # variable-coefficient remainder
        du = VectorField(
            -1.0 * adv.x - press.x + eps * rem.x,
            -1.0 * adv.y - press.y + eps * rem.y,
        )
        drho = -1.0 * _advect_scalar(u, rho)
        return Tendency(drho, du, None, res.pressure, res.iterations)

    t, h = state.t, dt
    k1 = nonlinear(state)
    s2 = State(
        rho=state.rho + 0.5 * h * k1.drho,
        u=prop(state.u + 0.5 * h * k1.du, e_half),
        t=t + 0.5 * h,
    )
    k2 = nonlinear(s2)
    s3 = State(
        rho=state.rho + 0.5 * h * k2.drho,
        u=prop(state.u, e_half) + 0.5 * h * k2.du,
        t=t + 0.5 * h,
    )
    k3 = nonlinear(s3)
    s4 = State(
        rho=state.rho + h * k3.drho,
        u=prop(state.u, e_full) + h * prop(k3.du, e_half),
        t=t + h,
    )
    k4 = nonlinear(s4)
    w = h / 6.0
    new_u = (
        prop(state.u, e_full)
        + w * (prop(k1.du, e_full) + 2.0 * prop(k2.du + k3.du, e_half) + k4.du)
    )
    new = State(
        rho=state.rho + w * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho),
        u=new_u,
        t=t + h,
    )
    return _restore_invariants(law, new, reproject_threshold)


# ---------------------------------------------------------------------------
# configuration and driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialData:
    """rho = rho_bar (1 + delta_rho cos(k1 x) cos(k2 y)); u = perp_grad(psi).

    ``psi_modes`` are (kx, ky, amplitude) triples of sin(kx x) sin(ky y)
    stream modes; ``random_amplitude > 0`` adds a seeded random band-limited
    stream contribution on top.
    """

    rho_bar: float = 1.0
    delta_rho: float = 0.2
    k1: int = 1
    k2: int = 1
    psi_modes: tuple = ((1, 1, 1.0),)
    random_amplitude: float = 0.0
    random_kmax: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.rho_bar <= 0.0:
            raise ConfigError("rho_bar must be positive")
        if abs(self.delta_rho) >= 1.0:
            raise ConfigError("delta_rho must keep the density positive (|delta_rho| < 1)")


def build_initial(grid, init):
    rho_vals = init.rho_bar * (
        1.0 + init.delta_rho * np.cos(init.k1 * grid.mesh_x * (2 * np.pi / grid.length))
        * np.cos(init.k2 * grid.mesh_y * (2 * np.pi / grid.length))
    )
    rho = ScalarField(grid, rho_vals, copy=False)
    psi_vals = np.zeros((grid.n, grid.n))
    scale = 2 * np.pi / grid.length
    for kx, ky, amp in init.psi_modes:
        psi_vals += amp * np.sin(kx * scale * grid.mesh_x) * np.sin(ky * scale * grid.mesh_y)
    psi = ScalarField(grid, psi_vals, copy=False)
    if init.random_amplitude > 0.0:
        rng = np.random.default_rng(init.seed)
        psi = psi + random_band_limited(
            grid, rng, kmax=init.random_kmax, rms=init.random_amplitude
        )
    u = perp_gradient(psi)
    return rho, u


@dataclass(frozen=True)
class SimConfig:
    n: int = 64
    length: float = 2 * np.pi
    formulation: str = "reduced"
    law: Optional[ViscosityLaw] = None   # default: f(rho) = rho with rho_star = 0.9 min(rho0)
    epsilon: float = 0.0
    dt: Optional[float] = 1e-3
    cfl: float = 0.5
    t_end: float = 1.0
    initial: InitialData = field(default_factory=InitialData)
    elliptic_tol: float = DEFAULT_TOL
    elliptic_max_iter: int = DEFAULT_MAX_ITER
    output_every: int = 10
    integrating_factor: bool = False
    reproject_threshold: float = 1e-10

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ConfigError(
                f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}"
            )
        if self.formulation == "regularized":
            if not 0.0 < self.epsilon <= 1.0:
                raise ConfigError("regularized runs need epsilon in (0, 1]")
        elif self.epsilon != 0.0:
            raise ConfigError("epsilon only applies to the regularized formulation")
        if self.t_end <= 0.0:
            raise ConfigError("t_end must be positive")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.output_every < 1:
            raise ConfigError("output_every must be >= 1")


@dataclass
class SimResult:
    times: List[float]
    states: list
    records: list
    law: ViscosityLaw
    dt: float
    steps: int


def _resolve_law(config, rho0):
    if config.law is not None:
        law = config.law
    else:
        law = power_law(1.0, 0.0, 1.0, rho_star=default_rho_star(rho0.values.min()))
    check_diffeomorphism(law, law.rho_star, float(rho0.values.max()) * 1.05)
    return law


def _resolve_dt(config, law, state):
    if config.dt is not None:
        dt = config.dt
        steps = int(round(config.t_end / dt))
        if steps < 1 or abs(steps * dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
            raise ConfigError(
                f"dt={dt} must divide t_end={config.t_end} into a whole number of steps"
            )
        return dt, steps
    vmax = max(max_abs(state.u), max_abs(carried_or_effective(law, state)), 1e-12)
    dt = config.cfl * state.rho.grid.spacing / vmax
    steps = max(1, int(math.ceil(config.t_end / dt)))
    return config.t_end / steps, steps


def simulate(config, velocity_offset=None, collect_states=True, record_residuals=True):
    """Integrate to t_end, emitting diagnostics at the configured cadence.

    ``velocity_offset`` (a solenoidal VectorField) is added to the initial
    velocity; used by the twin-run stability probe.
    """
    grid = Grid(config.n, config.length)
    rho0, u0 = build_initial(grid, config.initial)
    if velocity_offset is not None:
        u0 = u0 + velocity_offset
    law = _resolve_law(config, rho0)

    if config.formulation == "elsasser":
        state = ExtendedState(rho=rho0, u=u0, U=effective_velocity(law, rho0, u0), t=0.0)
    else:
        state = State(rho=rho0, u=u0, t=0.0)

    dt, steps = _resolve_dt(config, law, state)
    solver = PressureSolver(tol=config.elliptic_tol, max_iter=config.elliptic_max_iter)
    eps = config.epsilon

    use_if = config.integrating_factor and config.formulation == "regularized" and eps > 0.0
    if not use_if:
        def rhs(s):
            return formulation_rhs(law, s, config.formulation, eps, solver)

    times, states, records = [], [], []

    def emit(s, tend):
        times.append(s.t)
        if collect_states:
            states.append(s)
        records.append(_make_record(law, s, tend, config, record_residuals))

    tend0 = formulation_rhs(
        law, state, config.formulation, eps,
        PressureSolver(tol=config.elliptic_tol, max_iter=config.elliptic_max_iter),
    )
    emit(state, tend0)

    for k in range(steps):
        if use_if:
            state = _if_rk4_step(
                law, state, dt, eps, solver,
                cfl=config.cfl, reproject_threshold=config.reproject_threshold,
            )
        else:
            state = rk4_step(
                rhs, law, state, dt,
                cfl=config.cfl, reproject_threshold=config.reproject_threshold,
            )
        if (k + 1) % config.output_every == 0 or k == steps - 1:
            emit(state, None)

    return SimResult(times=times, states=states, records=records, law=law, dt=dt, steps=steps)


def _make_record(law, state, tend, config, record_residuals):
    from . import diagnostics as diag

    rho, u = state.rho, state.u
    U = carried_or_effective(law, state)
    if isinstance(state, ExtendedState):
        els_res = diag.elsasser_residual(law, rho, u, state.U)
    else:
        els_res = 0.0
    if record_residuals:
        if tend is None:
            solver = PressureSolver(tol=config.elliptic_tol, max_iter=config.elliptic_max_iter)
            tend = formulation_rhs(law, state, config.formulation, config.epsilon, solver)
        residual = diag.pde_residual(
            law, state, config.formulation, tend.du, eps=config.epsilon,
            tol=max(config.elliptic_tol * 1e-2, 1e-14),
        )
        iters = tend.iterations
    else:
        residual = 0.0
        iters = 0
    return diag.DiagnosticsRecord(
        t=state.t,
        E_u=diag.weighted_energy(rho, u),
        E_U=diag.weighted_energy(rho, U),
        div_u_max=max_abs(divergence(u)),
        div_U_max=max_abs(divergence(U)),
        elsasser_residual=els_res,
        rho_min=float(rho.values.min()),
        rho_max=float(rho.values.max()),
        rho_mean=mean(rho),
        pde_residual=residual,
        pressure_iters=iters,
    )
