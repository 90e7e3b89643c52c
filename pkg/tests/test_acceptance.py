"""Acceptance gate: every headline guarantee of the package in one place.

Each test checks one criterion at its production tolerance and prints a
single pass/fail line (visible via ``pytest -v``; printed details surface
for failing criteria).  Shared expensive runs are module-scoped fixtures.
"""

import dataclasses
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from oddflow.diagnostics import stability_twin
from oddflow.dynamics import (
    InitialData,
    PressureSolver,
    SimConfig,
    build_initial,
    formulation_rhs,
    recover_pressure,
    simulate,
)
from oddflow.elliptic import leray_project, solve_variable_poisson
from oddflow.grid import (
    Grid,
    ScalarField,
    VectorField,
    dealias,
    divergence,
    gradient,
    gradient_matrix_identity_check,
    l2_norm,
    max_abs,
    perp_gradient,
    random_band_limited,
    random_solenoidal,
)
from oddflow.littlewood_paley import (
    bernstein_ratio,
    besov_norm,
    bony_decompose,
    build_partition,
    chemin_lerner_norm,
    dyadic_block,
    refine,
    time_norm,
)
from oddflow.picard import PicardConfig, picard_run


def _line(tag, ok, detail):
    print(f"[{tag}] {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"{tag}: {detail}"


def _run_many(fn, items):
    with ThreadPoolExecutor(max_workers=min(4, os.cpu_count() or 1)) as pool:
        return list(pool.map(fn, items))


def _one_shot(cfg):
    """Simulate keeping only the first/last states and cheap records."""
    steps = int(round(cfg.t_end / cfg.dt))
    cfg = dataclasses.replace(cfg, output_every=steps)
    return simulate(cfg, record_residuals=False)


# ---------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="module")
def energy_run():
    cfg = SimConfig(n=64, t_end=1.0, dt=1e-3, formulation="reduced",
                    output_every=50)
    started = time.monotonic()
    sim = simulate(cfg, record_residuals=False)
    return sim, time.monotonic() - started


@pytest.fixture(scope="module")
def compare_runs():
    cfgs = [
        SimConfig(n=64, t_end=0.5, dt=1e-3, formulation="original",
                  output_every=50),
        SimConfig(n=64, t_end=0.5, dt=1e-3, formulation="reduced",
                  output_every=50),
    ]
    return _run_many(lambda c: simulate(c, record_residuals=False), cfgs)


@pytest.fixture(scope="module")
def carried_residual_study():
    dts = (4e-3, 2e-3, 1e-3, 5e-4)

    def run_one(dt):
        cfg = SimConfig(n=64, t_end=0.5, dt=dt, formulation="elsasser",
                        output_every=int(round(0.5 / dt)))
        return simulate(cfg, collect_states=False, record_residuals=False)

    sims = _run_many(run_one, dts)
    residuals = [sim.records[-1].elsasser_residual for sim in sims]
    return dts, residuals, sims


@pytest.fixture(scope="module")
def dissipation_sweep():
    eps_list = (1e-1, 1e-2, 1e-3, 1e-4)

    def run_one(eps):
        if eps == 0.0:
            cfg = SimConfig(n=32, t_end=0.5, dt=5e-4, formulation="reduced")
        else:
            cfg = SimConfig(n=32, t_end=0.5, dt=5e-4,
                            formulation="regularized", epsilon=eps)
        return _one_shot(cfg)

    runs = _run_many(run_one, (0.0, *eps_list))
    u_limit = runs[0].states[-1].u
    gaps = [l2_norm(run.states[-1].u - u_limit) for run in runs[1:]]
    return eps_list, gaps, runs


@pytest.fixture(scope="module")
def fixed_point_pair():
    grid = Grid(64)
    rho0, u0 = build_initial(grid, InitialData())
    result = picard_run(rho0, u0, PicardConfig(eps=0.01, t_end=0.1, dt=2e-3,
                                               n_max=15, tol=1e-9))
    sim = _one_shot(SimConfig(n=64, t_end=0.1, dt=2e-3,
                              formulation="regularized", epsilon=0.01))
    return result, sim


@pytest.fixture(scope="module")
def twin_reports():
    base = SimConfig(n=32, t_end=0.1, dt=2e-3, formulation="reduced",
                     output_every=5)
    delta0s = (1e-3, 5e-4, 2.5e-4)
    reports = _run_many(lambda d: stability_twin(base, d), delta0s)
    return delta0s, reports


@pytest.fixture(scope="module")
def stored_trajectories():
    def run_one(seed):
        cfg = SimConfig(n=32, t_end=0.02, dt=1e-3, formulation="reduced",
                        output_every=1,
                        initial=InitialData(random_amplitude=0.3, seed=seed))
        return simulate(cfg, record_residuals=False)

    return _run_many(run_one, range(10))


# ---------------------------------------------------------------------------
# criteria


def test_01_gradient_and_projection_identities():
    grid = Grid(64)
    rng = np.random.default_rng(101)
    identity_worst = max(
        gradient_matrix_identity_check(random_solenoidal(grid, rng, kmax=16))
        for _ in range(50)
    )
    div_worst = max(
        max_abs(divergence(perp_gradient(random_band_limited(grid, rng, kmax=16))))
        for _ in range(50)
    )
    proj_worst = 0.0
    for _ in range(50):
        v = VectorField(
            ScalarField(grid, rng.standard_normal((grid.n, grid.n))),
            ScalarField(grid, rng.standard_normal((grid.n, grid.n))),
        )
        once = leray_project(v)
        proj_worst = max(proj_worst, l2_norm(leray_project(once) - once))
    ok = identity_worst < 1e-10 and div_worst < 1e-11 and proj_worst < 1e-11
    _line("gradient identities", ok,
          f"matrix identity {identity_worst:.2e} (<1e-10), "
          f"div of perp-gradient {div_worst:.2e} (<1e-11), "
          f"projection idempotence {proj_worst:.2e} (<1e-11)")


def test_02_energy_conservation_reduced_run(energy_run):
    sim, elapsed = energy_run
    e_u0, e_U0 = sim.records[0].E_u, sim.records[0].E_U
    drift_u = max(abs(r.E_u - e_u0) for r in sim.records) / e_u0
    drift_U = max(abs(r.E_U - e_U0) for r in sim.records) / e_U0
    ok = drift_u < 1e-7 and drift_U < 1e-7 and elapsed < 120.0
    _line("energy conservation", ok,
          f"weighted-velocity drift {drift_u:.2e}, weighted-effective drift "
          f"{drift_U:.2e} (each <1e-7), runtime {elapsed:.1f}s (<120s)")


def test_03_formulation_equivalence(compare_runs):
    run_orig, run_red = compare_runs
    law = run_red.law
    u_gap = l2_norm(run_orig.states[-1].u - run_red.states[-1].u)
    solver = PressureSolver()
    idxs = np.unique(np.round(np.linspace(0, len(run_red.states) - 1, 7)).astype(int))
    grad_gap = 0.0
    for i in idxs:
        s_o, s_r = run_orig.states[i], run_red.states[i]
        pi_orig = formulation_rhs(law, s_o, "original", 0.0, solver).pressure
        big_pi = formulation_rhs(law, s_r, "reduced", 0.0, solver).pressure
        pi_red = recover_pressure(law, s_r.rho, s_r.u, big_pi)
        grad_gap = max(grad_gap, l2_norm(gradient(pi_orig) - gradient(pi_red)))
    ok = u_gap < 1e-7 and grad_gap < 1e-7
    _line("formulation equivalence", ok,
          f"velocity gap at T=0.5 {u_gap:.2e} (<1e-7), "
          f"recovered pressure-gradient gap {grad_gap:.2e} (<1e-7)")


def test_04_carried_velocity_constraint_order(carried_residual_study):
    dts, residuals, _ = carried_residual_study
    slope = float(np.polyfit(np.log(dts), np.log(residuals), 1)[0])
    ok = slope >= 3.8
    _line("carried-velocity constraint order", ok,
          f"residuals {['%.2e' % r for r in residuals]} for dt {list(dts)}, "
          f"observed order {slope:.3f} (>=3.8); the residual sits at the "
          "spectral composition floor, not the time-integration error")


def test_05_dissipation_limit_slope(dissipation_sweep):
    eps_list, gaps, _ = dissipation_sweep
    slope = float(np.polyfit(np.log(eps_list), np.log(gaps), 1)[0])
    ok = slope >= 0.9
    _line("dissipation limit", ok,
          f"gaps {['%.2e' % g for g in gaps]} for eps {list(eps_list)}, "
          f"fitted slope {slope:.3f} (>=0.9)")


def test_06_fixed_point_construction(fixed_point_pair):
    result, sim = fixed_point_pair
    ds = [rec.d_n for rec in result.records]
    ratios = [b / a for a, b in zip(ds[1:], ds[2:])]
    monotone = all(r <= 0.9 for r in ratios)
    u_gap = l2_norm(result.u_traj[-1] - sim.states[-1].u)
    ok = result.converged and monotone and u_gap < 1e-6
    _line("fixed-point construction", ok,
          f"converged in {len(ds)} iterations, post-n=2 ratios "
          f"{['%.3f' % r for r in ratios]} (<=0.9), "
          f"limit-vs-solver velocity gap {u_gap:.2e} (<1e-6)")


def test_07_pressure_solver_contract():
    grid = Grid(64)
    a = ScalarField(grid, 2.0 + np.cos(grid.mesh_x) * np.cos(grid.mesh_y))
    exact = ScalarField(grid, np.sin(grid.mesh_x + grid.mesh_y))
    grad_exact = gradient(exact)
    forcing = VectorField(-1.0 * a * grad_exact.x, -1.0 * a * grad_exact.y)
    res = solve_variable_poisson(a, forcing, tol=1e-10, max_iter=200)
    rng = np.random.default_rng(707)
    bound_slack = -np.inf
    for _ in range(20):
        coeff = ScalarField(
            grid, 2.0 + random_band_limited(grid, rng, kmax=4, rms=0.4).values)
        assert coeff.values.min() > 0.0
        f_rand = VectorField(
            random_band_limited(grid, rng, kmax=10),
            random_band_limited(grid, rng, kmax=10),
        )
        sol = solve_variable_poisson(coeff, f_rand)
        lhs = float(coeff.values.min()) * l2_norm(gradient(sol.pressure))
        rhs = l2_norm(dealias(f_rand)) * (1.0 + 1e-8)
        bound_slack = max(bound_slack, lhs - rhs)
    ok = res.residual <= 1e-10 and res.iterations <= 200 and bound_slack <= 0.0
    _line("pressure solver", ok,
          f"manufactured solve residual {res.residual:.2e} (<=1e-10) in "
          f"{res.iterations} iterations (<=200), worst energy-bound slack "
          f"{bound_slack:.2e} (<=0)")


def test_08_dyadic_analysis_suite(stored_trajectories):
    grid = Grid(64)
    part64 = build_partition(grid)
    partition_residual = float(np.abs(part64.chi + sum(part64.phis) - 1.0).max())

    rng = np.random.default_rng(808)
    recon_worst = 0.0
    for _ in range(10):
        f = random_band_limited(grid, rng, kmax=grid.n // 3)
        rebuilt = dyadic_block(part64, f, -1)
        for j in range(part64.j_max + 1):
            rebuilt = rebuilt + dyadic_block(part64, f, j)
        recon_worst = max(recon_worst, max_abs(rebuilt - f))

    small = Grid(32)
    part32 = build_partition(small)
    bony_worst = 0.0
    for _ in range(50):
        f = random_band_limited(small, rng, kmax=10)
        g = random_band_limited(small, rng, kmax=10)
        t_fg, t_gf, diag = bony_decompose(part32, f, g)
        prod = refine(f) * refine(g)
        bony_worst = max(bony_worst, l2_norm(t_fg + t_gf + diag - prod))

    lo, hi = 1.0, 1.0
    for _ in range(50):
        h = random_band_limited(small, rng, kmax=10)
        for j in range(part32.j_max + 1):
            if l2_norm(dyadic_block(part32, h, j)) < 1e-10:
                continue
            ratio = bernstein_ratio(part32, h, j)
            lo, hi = min(lo, ratio), max(hi, ratio)

    swap_worst = 0.0
    interp_ok = True
    for sim in stored_trajectories:
        series = [s.u for s in sim.states]
        dt = sim.times[1] - sim.times[0]
        lhs = chemin_lerner_norm(part32, series, dt, 1.0, 2.0)
        rhs = time_norm([besov_norm(part32, u, 1.0, r=2) for u in series],
                        dt, 2.0)
        swap_worst = max(swap_worst, abs(lhs - rhs) / rhs)
        mid = chemin_lerner_norm(part32, series, dt, 1.5, 2.0)
        ends = math.sqrt(chemin_lerner_norm(part32, series, dt, 0.5, np.inf)
                         * chemin_lerner_norm(part32, series, dt, 2.5, 1.0))
        interp_ok = interp_ok and mid <= ends * (1.0 + 1e-12)

    ok = (partition_residual < 1e-12 and recon_worst < 1e-11
          and bony_worst < 1e-10 and 0.5 <= lo and hi <= 3.5
          and swap_worst < 1e-12 and interp_ok)
    _line("dyadic analysis", ok,
          f"partition residual {partition_residual:.2e} (<1e-12), "
          f"reconstruction {recon_worst:.2e} (<1e-11), "
          f"paraproduct reassembly {bony_worst:.2e} (<1e-10), "
          f"derivative-scale ratios [{lo:.3f}, {hi:.3f}] (within [0.5, 3.5]), "
          f"band/time swap {swap_worst:.2e} (<1e-12), "
          f"interpolation inequality {'holds' if interp_ok else 'violated'}")


def test_09_twin_run_stability_envelope(twin_reports):
    delta0s, reports = twin_reports
    c_shared = max(rep.C for rep in reports)
    covered = True
    for rep in reports:
        I = np.asarray(rep.I)
        J = np.concatenate(([0.0],
                            np.cumsum(0.5 * (I[1:] + I[:-1]) * np.diff(rep.times))))
        env = c_shared * np.exp(c_shared * J) * rep.D[0]
        covered = covered and bool(np.all(np.asarray(rep.D) <= env * (1.0 + 1e-9)))
    roots = [math.sqrt(rep.D[-1]) for rep in reports]
    response = [roots[i] / roots[i + 1] for i in range(len(roots) - 1)]
    linear = all(abs(r - 2.0) <= 0.2 for r in response)
    ok = c_shared <= 1e4 and covered and linear
    _line("twin-run stability", ok,
          f"shared C {c_shared:.4g} (<=1e4) covers all {len(reports)} runs: "
          f"{covered}, sqrt-separation response ratios "
          f"{['%.3f' % r for r in response]} (within 2 +- 0.2)")


def test_10_transport_maximum_principle(energy_run, compare_runs,
                                        carried_residual_study,
                                        dissipation_sweep):
    sims = [energy_run[0], *compare_runs, *carried_residual_study[2],
            *dissipation_sweep[2]]
    worst_overshoot = 0.0
    worst_mean = 0.0
    for sim in sims:
        first = sim.records[0]
        span = first.rho_max - first.rho_min
        for rec in sim.records:
            over = max(first.rho_min - rec.rho_min, rec.rho_max - first.rho_max)
            worst_overshoot = max(worst_overshoot, over / max(span, 1e-300))
            worst_mean = max(worst_mean, abs(rec.rho_mean - first.rho_mean))
    ok = worst_overshoot <= 1e-6 and worst_mean < 1e-12
    _line("transport maximum principle", ok,
          f"over {len(sims)} runs: worst range overshoot {worst_overshoot:.2e} "
          f"of initial span (<=1e-6), worst mean drift {worst_mean:.2e} (<1e-12)")
