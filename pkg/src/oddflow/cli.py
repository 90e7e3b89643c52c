"""Command-line front end: JSON configs, run orchestration, file emission.

Configs are nested JSON documents (sections ``grid``, ``viscosity``,
``elliptic``, ``dynamics``, ``initial``, ``picard``, ``output``, ``sweep``,
``compare``, ``stability``); every key is validated before any compute and
unknown keys are reported by their dotted path.  All floating-point CSV
values are printed with ``%.17g`` so reruns of the same (config, seed)
produce byte-identical files.  ``ODDFLOW_THREADS`` caps the worker pool
used for independent runs (sweeps, twins, refinement studies).

Exit codes: 0 success, 1 run failure (divergence, vacuum, CFL), 2 config
file unreadable or malformed JSON, 3 schema violation, 4 output/snapshot
I/O error.  The column layout of every emitted CSV is listed in ``--help``
and in ``docs/output_schema.md``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diagnostics import stability_twin
from .dynamics import (
    InitialData,
    PressureSolver,
    SimConfig,
    build_initial,
    formulation_rhs,
    recover_pressure,
    simulate,
)
from .elliptic import DEFAULT_MAX_ITER, DEFAULT_TOL, leray_project, solve_variable_poisson
from .errors import (
    CFLViolationError,
    ConfigError,
    ConvergenceError,
    SnapshotFormatError,
    VacuumError,
)
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    gradient_matrix_identity_check,
    l2_norm,
    max_abs,
    perp_gradient,
    random_band_limited,
    random_solenoidal,
    read_snapshot,
    write_snapshot,
)
from .littlewood_paley import (
    bernstein_ratio,
    besov_norm,
    bony_decompose,
    build_partition,
    chemin_lerner_norm,
    dyadic_block,
    refine,
    sobolev_norm,
    time_norm,
)
from .picard import PicardConfig, picard_run
from .viscosity import default_rho_star, power_law

__all__ = ["RunConfig", "parse_config", "dispatch", "main"]

PACKAGE_VERSION = "0.1.0"

DIAG_COLUMNS = (
    "t", "E_u", "E_U", "div_u_max", "div_U_max", "elsasser_residual",
    "rho_min", "rho_max", "rho_mean", "pde_residual", "pressure_iters",
)
PICARD_COLUMNS = ("n", "d_n", "residual_n")
COMPARE_COLUMNS = ("t", "u_gap", "grad_pi_gap")
RESIDUAL_DT_COLUMNS = ("dt", "residual")
SWEEP_COLUMNS = ("epsilon", "u_gap")
STABILITY_COLUMNS = ("delta0", "t", "D", "I", "envelope")
LP_COLUMNS = ("snapshot", "t", "j", "u_block", "rho_block", "u_sobolev", "u_besov")


class ConfigFileError(ConfigError):
    """The config file cannot be read or is not valid JSON."""


# ---------------------------------------------------------------------------
# configuration schema


@dataclass(frozen=True)
class RunConfig:
    """Validated union of all per-module settings plus output plumbing."""

    n: int = 64
    length: float = 2.0 * math.pi
    viscosity_a: float = 1.0
    viscosity_b: float = 0.0
    viscosity_alpha: float = 1.0
    viscosity_rho_star: Optional[float] = None
    elliptic_tol: float = DEFAULT_TOL
    elliptic_max_iter: int = DEFAULT_MAX_ITER
    formulation: str = "reduced"
    t_end: float = 1.0
    dt: Optional[float] = 1e-3
    cfl: float = 0.5
    epsilon: float = 0.0
    integrating_factor: bool = False
    reproject_threshold: float = 1e-10
    initial: InitialData = field(default_factory=InitialData)
    picard: PicardConfig = field(default_factory=PicardConfig)
    out_dir: str = "out"
    output_every: int = 10
    snapshots: bool = False
    sweep_epsilons: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    compare_t_end: float = 0.5
    compare_dts: tuple = (4e-3, 2e-3, 1e-3, 5e-4)
    stability_delta0s: tuple = (1e-3, 5e-4, 2.5e-4)
    stability_seed: int = 1234
    stability_kmax: int = 3
    digest: str = ""

    def law(self):
        """Viscosity law from the config; None means solver default."""
        a, b, alpha = self.viscosity_a, self.viscosity_b, self.viscosity_alpha
        star = self.viscosity_rho_star
        if (a, b, alpha, star) == (1.0, 0.0, 1.0, None):
            return None
        if star is None:
            rho0, _ = build_initial(Grid(self.n, self.length), self.initial)
            star = default_rho_star(float(rho0.values.min()))
        return power_law(a, b, alpha, rho_star=star)

    def sim_config(self, **overrides):
        base = dict(
            n=self.n, length=self.length, formulation=self.formulation,
            law=self.law(), epsilon=self.epsilon, dt=self.dt, cfl=self.cfl,
            t_end=self.t_end, initial=self.initial,
            elliptic_tol=self.elliptic_tol,
            elliptic_max_iter=self.elliptic_max_iter,
            output_every=self.output_every,
            integrating_factor=self.integrating_factor,
            reproject_threshold=self.reproject_threshold,
        )
        base.update(overrides)
        return SimConfig(**base)

    def picard_config(self):
        return replace(self.picard, law=self.law(),
                       elliptic_tol=self.elliptic_tol,
                       elliptic_max_iter=self.elliptic_max_iter)


def _expect(value, kinds, path):
    if isinstance(value, bool) and bool not in kinds:
        raise ConfigError(f"config key {path} must not be a boolean")
    if not isinstance(value, kinds):
        names = "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"config key {path} must be of type {names}")
    return value


def _number(value, path):
    return float(_expect(value, (int, float), path))


def _integer(value, path):
    return int(_expect(value, (int,), path))


def _take(section, known, prefix):
    """Pop known keys from a config section; leftover keys are errors."""
    out = {}
    for key in known:
        if key in section:
            out[key] = section.pop(key)
    if section:
        bad = sorted(section)[0]
        raise ConfigError(f"unknown config key: {prefix}.{bad}")
    return out


def _parse_psi_modes(raw, path):
    modes = []
    for i, item in enumerate(_expect(raw, (list,), path)):
        entry = _expect(item, (list,), f"{path}[{i}]")
        if len(entry) != 3:
            raise ConfigError(f"config key {path}[{i}] must be [kx, ky, amplitude]")
        modes.append((_integer(entry[0], f"{path}[{i}][0]"),
                      _integer(entry[1], f"{path}[{i}][1]"),
                      _number(entry[2], f"{path}[{i}][2]")))
    return tuple(modes)


def parse_config(path):
    """Read and validate a JSON config file into a :class:`RunConfig`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return build_config(doc, digest=hashlib.sha256(text.encode()).hexdigest())


def build_config(doc, digest=""):
    """Validate a nested config dict; unknown keys are dotted-path errors."""
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    kw = {"digest": digest}

    sec = _expect(doc.pop("grid", {}), (dict,), "grid")
    vals = _take(sec, ("n", "length"), "grid")
    if "n" in vals:
        kw["n"] = _integer(vals["n"], "grid.n")
    if "length" in vals:
        kw["length"] = _number(vals["length"], "grid.length")

    sec = _expect(doc.pop("viscosity", {}), (dict,), "viscosity")
    vals = _take(sec, ("a", "b", "alpha", "rho_star"), "viscosity")
    for src, dst in (("a", "viscosity_a"), ("b", "viscosity_b"),
                     ("alpha", "viscosity_alpha")):
        if src in vals:
            kw[dst] = _number(vals[src], f"viscosity.{src}")
    if vals.get("rho_star") is not None:
        kw["viscosity_rho_star"] = _number(vals["rho_star"], "viscosity.rho_star")

    sec = _expect(doc.pop("elliptic", {}), (dict,), "elliptic")
    vals = _take(sec, ("tol", "max_iter"), "elliptic")
    if "tol" in vals:
        kw["elliptic_tol"] = _number(vals["tol"], "elliptic.tol")
    if "max_iter" in vals:
        kw["elliptic_max_iter"] = _integer(vals["max_iter"], "elliptic.max_iter")

    sec = _expect(doc.pop("dynamics", {}), (dict,), "dynamics")
    vals = _take(sec, ("formulation", "t_end", "dt", "cfl", "epsilon",
                       "integrating_factor", "reproject_threshold"), "dynamics")
    if "formulation" in vals:
        kw["formulation"] = _expect(vals["formulation"], (str,), "dynamics.formulation")
    if "t_end" in vals:
        kw["t_end"] = _number(vals["t_end"], "dynamics.t_end")
    if "dt" in vals:
        kw["dt"] = None if vals["dt"] is None else _number(vals["dt"], "dynamics.dt")
    if "cfl" in vals:
        kw["cfl"] = _number(vals["cfl"], "dynamics.cfl")
    if "epsilon" in vals:
        kw["epsilon"] = _number(vals["epsilon"], "dynamics.epsilon")
    if "integrating_factor" in vals:
        kw["integrating_factor"] = _expect(
            vals["integrating_factor"], (bool,), "dynamics.integrating_factor")
    if "reproject_threshold" in vals:
        kw["reproject_threshold"] = _number(
            vals["reproject_threshold"], "dynamics.reproject_threshold")

    sec = _expect(doc.pop("initial", {}), (dict,), "initial")
    vals = _take(sec, ("rho_bar", "delta_rho", "k1", "k2", "psi_modes",
                       "random_amplitude", "random_kmax", "seed"), "initial")
    init_kw = {}
    for key in ("rho_bar", "delta_rho", "random_amplitude"):
        if key in vals:
            init_kw[key] = _number(vals[key], f"initial.{key}")
    for key in ("k1", "k2", "random_kmax", "seed"):
        if key in vals:
            init_kw[key] = _integer(vals[key], f"initial.{key}")
    if "psi_modes" in vals:
        init_kw["psi_modes"] = _parse_psi_modes(vals["psi_modes"], "initial.psi_modes")
    kw["initial"] = InitialData(**init_kw)

    sec = _expect(doc.pop("picard", {}), (dict,), "picard")
    vals = _take(sec, ("eps", "t_end", "dt", "n_max", "tol"), "picard")
    pic_kw = {}
    for key in ("eps", "t_end", "dt", "tol"):
        if key in vals:
            pic_kw[key] = _number(vals[key], f"picard.{key}")
    if "n_max" in vals:
        pic_kw["n_max"] = _integer(vals["n_max"], "picard.n_max")
    kw["picard"] = PicardConfig(**pic_kw)

    sec = _expect(doc.pop("output", {}), (dict,), "output")
    vals = _take(sec, ("directory", "every", "snapshots"), "output")
    if "directory" in vals:
        kw["out_dir"] = _expect(vals["directory"], (str,), "output.directory")
    if "every" in vals:
        kw["output_every"] = _integer(vals["every"], "output.every")
    if "snapshots" in vals:
        kw["snapshots"] = _expect(vals["snapshots"], (bool,), "output.snapshots")

    sec = _expect(doc.pop("sweep", {}), (dict,), "sweep")
    vals = _take(sec, ("epsilons",), "sweep")
    if "epsilons" in vals:
        eps = _expect(vals["epsilons"], (list,), "sweep.epsilons")
        kw["sweep_epsilons"] = tuple(
            _number(e, f"sweep.epsilons[{i}]") for i, e in enumerate(eps))

    sec = _expect(doc.pop("compare", {}), (dict,), "compare")
    vals = _take(sec, ("t_end", "dts"), "compare")
    if "t_end" in vals:
        kw["compare_t_end"] = _number(vals["t_end"], "compare.t_end")
    if "dts" in vals:
        dts = _expect(vals["dts"], (list,), "compare.dts")
        kw["compare_dts"] = tuple(
            _number(d, f"compare.dts[{i}]") for i, d in enumerate(dts))

    sec = _expect(doc.pop("stability", {}), (dict,), "stability")
    vals = _take(sec, ("delta0s", "perturb_seed", "perturb_kmax"), "stability")
    if "delta0s" in vals:
        d0s = _expect(vals["delta0s"], (list,), "stability.delta0s")
        kw["stability_delta0s"] = tuple(
            _number(d, f"stability.delta0s[{i}]") for i, d in enumerate(d0s))
    if "perturb_seed" in vals:
        kw["stability_seed"] = _integer(vals["perturb_seed"], "stability.perturb_seed")
    if "perturb_kmax" in vals:
        kw["stability_kmax"] = _integer(vals["perturb_kmax"], "stability.perturb_kmax")

    if doc:
        bad = sorted(doc)[0]
        value = doc[bad]
        if isinstance(value, dict) and value:
            bad = f"{bad}.{sorted(value)[0]}"
        raise ConfigError(f"unknown config key: {bad}")

    config = RunConfig(**kw)
    # construct the derived configs once so every referenced key is
    # validated before any compute happens
    config.sim_config()
    config.picard_config()
    return config


# ---------------------------------------------------------------------------
# emission helpers


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _prepare_out_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from exc


def _write_meta(out_dir, subcommand, config, extras, elapsed):
    meta = {
        "subcommand": subcommand,
        "version": PACKAGE_VERSION,
        "config_sha256": config.digest,
        "n": config.n,
        "formulation": config.formulation,
        "dt": config.dt,
        "elapsed_seconds": round(elapsed, 3),
    }
    meta.update(extras)
    with open(os.path.join(out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def worker_count():
    """Worker pool size for independent runs; capped by ODDFLOW_THREADS."""
    raw = os.environ.get("ODDFLOW_THREADS", "").strip()
    if raw:
        try:
            count = int(raw)
        except ValueError:
            raise ConfigError(f"ODDFLOW_THREADS must be an integer, got {raw!r}")
        if count < 1:
            raise ConfigError("ODDFLOW_THREADS must be at least 1")
        return count
    return min(4, os.cpu_count() or 1)


def _map_runs(fn, items):
    """Run independent jobs, preserving input order in the results."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _say(quiet, message):
    if not quiet:
        print(message)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(config, out_dir, quiet):
    sim = simulate(config.sim_config())
    rows = [
        [r.t, r.E_u, r.E_U, r.div_u_max, r.div_U_max, r.elsasser_residual,
         r.rho_min, r.rho_max, r.rho_mean, r.pde_residual, r.pressure_iters]
        for r in sim.records
    ]
    _write_csv(os.path.join(out_dir, "diag.csv"), DIAG_COLUMNS, rows)
    if config.snapshots:
        for k, state in enumerate(sim.states):
            write_snapshot(
                os.path.join(out_dir, f"snap_{k:04d}.oddf"),
                state.rho, state.u, state.t, U=getattr(state, "U", None),
            )
    last = sim.records[-1]
    _say(quiet, f"simulate: {config.formulation} n={config.n} steps={sim.steps} "
                f"E_u(T)={last.E_u:.6g} pde_residual={last.pde_residual:.3e}")
    return {"steps": sim.steps, "final_E_u": last.E_u,
            "final_pde_residual": last.pde_residual,
            "snapshots": len(sim.states) if config.snapshots else 0}, 0


def _cmd_compare(config, out_dir, quiet):
    cfgs = [
        config.sim_config(formulation="original", epsilon=0.0,
                          t_end=config.compare_t_end),
        config.sim_config(formulation="reduced", epsilon=0.0,
                          t_end=config.compare_t_end),
    ]
    run_orig, run_red = _map_runs(lambda c: simulate(c, record_residuals=False), cfgs)
    law = run_red.law
    idxs = np.unique(np.round(np.linspace(0, len(run_red.states) - 1, 7)).astype(int))
    solver = PressureSolver(tol=config.elliptic_tol, max_iter=config.elliptic_max_iter)
    rows = []
    for i in idxs:
        s_o, s_r = run_orig.states[i], run_red.states[i]
        u_gap = l2_norm(s_o.u - s_r.u)
        pi_orig = formulation_rhs(law, s_o, "original", 0.0, solver).pressure
        big_pi = formulation_rhs(law, s_r, "reduced", 0.0, solver).pressure
        pi_from_red = recover_pressure(law, s_r.rho, s_r.u, big_pi)
        grad_gap = l2_norm(gradient(pi_orig) - gradient(pi_from_red))
        rows.append([s_r.t, u_gap, grad_gap])
    _write_csv(os.path.join(out_dir, "compare.csv"), COMPARE_COLUMNS, rows)

    def residual_at(dt):
        steps = int(round(config.compare_t_end / dt))
        cfg = config.sim_config(formulation="elsasser", epsilon=0.0, dt=dt,
                                t_end=config.compare_t_end, output_every=steps)
        return simulate(cfg, collect_states=False, record_residuals=False)

    runs = _map_runs(residual_at, list(config.compare_dts))
    res_rows = [[dt, run.records[-1].elsasser_residual]
                for dt, run in zip(config.compare_dts, runs)]
    _write_csv(os.path.join(out_dir, "residual_vs_dt.csv"),
               RESIDUAL_DT_COLUMNS, res_rows)
    final_gap = rows[-1][1]
    log_dt = np.log([r[0] for r in res_rows])
    log_res = np.log([max(r[1], 1e-300) for r in res_rows])
    slope = float(np.polyfit(log_dt, log_res, 1)[0])
    _say(quiet, f"compare-formulations: u_gap(T)={final_gap:.3e} "
                f"max_grad_pi_gap={max(r[2] for r in rows):.3e} "
                f"carried-residual dt-slope={slope:.3f}")
    return {"final_u_gap": final_gap,
            "max_grad_pi_gap": max(r[2] for r in rows),
            "residual_dt_slope": slope}, 0


def _cmd_picard(config, out_dir, quiet):
    grid = Grid(config.n, config.length)
    rho0, u0 = build_initial(grid, config.initial)
    result = picard_run(rho0, u0, config.picard_config())
    rows = [[rec.n, rec.d_n, rec.residual_n] for rec in result.records]
    _write_csv(os.path.join(out_dir, "picard.csv"), PICARD_COLUMNS, rows)
    for rec in result.records:
        _say(quiet, f"picard: n={rec.n} d_n={rec.d_n:.6e} residual={rec.residual_n:.3e}")
    status = "converged" if result.converged else (
        "diverged" if result.diverged else "stopped at n_max")
    _say(quiet, f"picard: {status} after {len(result.records)} iterations")
    return {"converged": result.converged, "diverged": result.diverged,
            "iterations": len(result.records),
            "final_d_n": result.records[-1].d_n}, 0


def _cmd_eps_sweep(config, out_dir, quiet):
    steps = int(round(config.t_end / (config.dt or 1e-3)))

    def run_one(eps):
        if eps == 0.0:
            cfg = config.sim_config(formulation="reduced", epsilon=0.0,
                                    output_every=steps)
        else:
            cfg = config.sim_config(formulation="regularized", epsilon=eps,
                                    output_every=steps)
        return simulate(cfg, record_residuals=False)

    runs = _map_runs(run_one, [0.0, *config.sweep_epsilons])
    u_limit = runs[0].states[-1].u
    rows = [[eps, l2_norm(run.states[-1].u - u_limit)]
            for eps, run in zip(config.sweep_epsilons, runs[1:])]
    _write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_COLUMNS, rows)
    log_eps = np.log([r[0] for r in rows])
    log_gap = np.log([max(r[1], 1e-300) for r in rows])
    slope = float(np.polyfit(log_eps, log_gap, 1)[0])
    _say(quiet, f"eps-sweep: gaps {['%.3e' % r[1] for r in rows]} slope={slope:.3f}")
    return {"slope": slope, "gaps": [r[1] for r in rows]}, 0


def _cmd_twin_stability(config, out_dir, quiet):
    base = config.sim_config()

    def run_one(delta0):
        return stability_twin(base, delta0, perturb_seed=config.stability_seed,
                              perturb_kmax=config.stability_kmax)

    reports = _map_runs(run_one, list(config.stability_delta0s))
    rows = []
    for delta0, rep in zip(config.stability_delta0s, reports):
        for t, d, i, env in zip(rep.times, rep.D, rep.I, rep.envelope):
            rows.append([delta0, t, d, i, env])
    _write_csv(os.path.join(out_dir, "stability.csv"), STABILITY_COLUMNS, rows)
    shared_c = max(rep.C for rep in reports)
    all_passed = all(rep.passed for rep in reports)
    for delta0, rep in zip(config.stability_delta0s, reports):
        _say(quiet, f"twin-stability: delta0={delta0:.3e} C={rep.C:.4g} "
                    f"sqrtD(T)={math.sqrt(rep.D[-1]):.4e} "
                    f"{'pass' if rep.passed else 'FAIL'}")
    _say(quiet, f"twin-stability: shared C={shared_c:.4g} "
                f"{'pass' if all_passed else 'FAIL'}")
    return {"C_per_delta0": [rep.C for rep in reports], "C_shared": shared_c,
            "passed": all_passed}, 0 if all_passed else 1


def _cmd_lp_analyze(config, out_dir, quiet, snap_dir, s, q):
    if not os.path.isdir(snap_dir):
        raise ConfigError(f"snapshot directory {snap_dir} does not exist")
    files = sorted(
        f for f in os.listdir(snap_dir) if f.endswith(".oddf"))
    if not files:
        raise ConfigError(f"no .oddf snapshots found in {snap_dir}")
    snaps = [read_snapshot(os.path.join(snap_dir, f)) for f in files]
    partitions = {}
    rows = []
    for name, snap in zip(files, snaps):
        key = (snap.grid.n, snap.grid.length)
        if key not in partitions:
            partitions[key] = build_partition(snap.grid)
        part = partitions[key]
        u_sob = sobolev_norm(snap.u, s)
        u_bes = besov_norm(part, snap.u, s, r=q)
        for j in range(-1, part.j_max + 1):
            rows.append([
                name, snap.t, j,
                l2_norm(dyadic_block(part, snap.u, j)),
                l2_norm(dyadic_block(part, snap.rho, j)),
                u_sob, u_bes,
            ])
    _write_csv(os.path.join(out_dir, "lp.csv"), LP_COLUMNS, rows)
    extras = {"snapshots": len(files), "s": s, "q": "inf" if q == np.inf else q}
    times = [snap.t for snap in snaps]
    grids = {(snap.grid.n, snap.grid.length) for snap in snaps}
    if len(snaps) >= 2 and len(grids) == 1:
        dts = np.diff(times)
        if np.all(dts > 0) and np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
            part = partitions[next(iter(grids))]
            cl = chemin_lerner_norm(part, [snap.u for snap in snaps],
                                    float(dts[0]), s, q)
            swapped = time_norm([besov_norm(part, snap.u, s, r=q)
                                 for snap in snaps], float(dts[0]), q)
            extras["u_chemin_lerner"] = cl
            extras["u_time_besov"] = swapped
            _say(quiet, f"lp-analyze: trajectory norms band-then-time={cl:.6g} "
                        f"time-then-band={swapped:.6g}")
    _say(quiet, f"lp-analyze: wrote {len(rows)} rows for {len(files)} snapshots")
    return extras, 0


def _verify_checks(seed):
    """Small-grid property battery; yields (name, value, bound) triples."""
    grid = Grid(32)
    rng = np.random.default_rng(seed)

    worst = 0.0
    for _ in range(10):
        v = random_solenoidal(grid, rng, kmax=8)
        worst = max(worst, gradient_matrix_identity_check(v))
    yield "gradient matrix identity (solenoidal fields)", worst, 1e-10

    worst = 0.0
    for _ in range(5):
        psi = random_band_limited(grid, rng, kmax=8)
        worst = max(worst, max_abs(divergence(perp_gradient(psi))))
    yield "div of perp-gradient", worst, 1e-11

    v = VectorField(
        ScalarField(grid, rng.standard_normal((grid.n, grid.n))),
        ScalarField(grid, rng.standard_normal((grid.n, grid.n))),
    )
    once = leray_project(v)
    twice = leray_project(once)
    yield "projection idempotence", l2_norm(twice - once), 1e-11

    a = ScalarField(grid, 2.0 + np.cos(grid.mesh_x) * np.cos(grid.mesh_y))
    exact = ScalarField(grid, np.sin(grid.mesh_x + grid.mesh_y))
    exact_grad = gradient(exact)
    forcing = VectorField(-1.0 * a * exact_grad.x, -1.0 * a * exact_grad.y)
    res = solve_variable_poisson(a, forcing, tol=1e-11, max_iter=200)
    gap = l2_norm(res.pressure - exact) / l2_norm(exact)
    yield "manufactured elliptic solution", gap, 1e-8

    lhs = float(a.values.min()) * l2_norm(gradient(res.pressure))
    rhs = l2_norm(forcing) * (1.0 + 1e-8)
    yield "elliptic energy bound slack", max(0.0, lhs - rhs), 1e-12

    part = build_partition(grid)
    mask = part.chi + sum(part.phis)
    yield "partition of unity residual", float(np.abs(mask - 1.0).max()), 1e-12

    f = random_band_limited(grid, rng, kmax=10)
    rebuilt = dyadic_block(part, f, -1)
    for j in range(part.j_max + 1):
        rebuilt = rebuilt + dyadic_block(part, f, j)
    yield "block reconstruction", max_abs(rebuilt - f), 1e-11

    g = random_band_limited(grid, rng, kmax=10)
    t_fg, t_gf, diag = bony_decompose(part, f, g)
    prod = refine(f) * refine(g)
    total = t_fg + t_gf + diag
    yield "paraproduct reconstruction", l2_norm(total - prod), 1e-10

    worst_lo, worst_hi = 1.0, 1.0
    for _ in range(5):
        h = random_band_limited(grid, rng, kmax=10)
        for j in range(part.j_max + 1):
            if l2_norm(dyadic_block(part, h, j)) < 1e-10:
                continue
            ratio = bernstein_ratio(part, h, j)
            worst_lo = min(worst_lo, ratio)
            worst_hi = max(worst_hi, ratio)
    yield "derivative-scale ratio lower edge", 0.5 - worst_lo, 1e-12
    yield "derivative-scale ratio upper edge", worst_hi - 3.5, 1e-12

    cfg = SimConfig(n=32, t_end=0.05, dt=1e-3, formulation="reduced",
                    output_every=10)
    sim = simulate(cfg)
    e0 = sim.records[0].E_u
    drift = max(abs(r.E_u - e0) for r in sim.records) / e0
    yield "weighted energy drift (short run)", drift, 1e-7

    rho0 = sim.states[0].rho.values
    lo, hi = float(rho0.min()), float(rho0.max())
    span = hi - lo
    overshoot = max(
        max(lo - r.rho_min, r.rho_max - hi, 0.0) for r in sim.records)
    yield "density range preservation", overshoot, 1e-6 * span

    mean0 = sim.records[0].rho_mean
    yield "density mean drift", max(
        abs(r.rho_mean - mean0) for r in sim.records), 1e-12

    yield "velocity divergence (short run)", max(
        r.div_u_max for r in sim.records), 1e-9


def _cmd_verify(config, out_dir, quiet, seed):
    failures = 0
    for name, value, bound in _verify_checks(seed):
        ok = value <= bound
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} "
              f"(bound {bound:.1e})")
    print(f"verify: {failures} failures")
    return {"failures": failures}, 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# argument parsing and dispatch


_EPILOG = """\
output files and columns:
  diag.csv            t, E_u, E_U, div_u_max, div_U_max, elsasser_residual,
                      rho_min, rho_max, rho_mean, pde_residual, pressure_iters
  snap_<k>.oddf       binary snapshot (see docs/output_schema.md)
  compare.csv         t, u_gap, grad_pi_gap
  residual_vs_dt.csv  dt, residual
  picard.csv          n, d_n, residual_n
  sweep.csv           epsilon, u_gap
  stability.csv       delta0, t, D, I, envelope
  lp.csv              snapshot, t, j, u_block, rho_block, u_sobolev, u_besov
  run_meta.json       provenance and headline scalars for the run

floats are printed with %.17g, so identical (config, seed) pairs produce
byte-identical CSV and snapshot files.  ODDFLOW_THREADS caps the worker
pool used for independent runs.
"""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="oddflow",
        description="Pseudo-spectral runs and verification studies for "
                    "variable-density flow with density-dependent odd viscosity.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text,
                           epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON config file (defaults apply if omitted)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int,
                       help="override initial.seed for randomized initial modes")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        return p

    add("simulate", "one run; writes diag.csv and optional snapshots")
    add("compare-formulations",
        "raw-pressure vs reduced gap, plus carried-velocity residual vs dt")
    add("picard", "fixed-point construction; writes picard.csv")
    add("eps-sweep", "velocity-regularization limit study; writes sweep.csv")
    add("twin-stability", "perturbed twin runs; writes stability.csv")
    lp = add("lp-analyze", "dyadic band norms of stored snapshots; writes lp.csv")
    lp.add_argument("--snapshots", required=True, help="directory of .oddf files")
    lp.add_argument("--s", type=float, default=1.0, help="regularity index")
    lp.add_argument("--q", choices=("1", "2", "inf"), default="2",
                    help="band summation exponent")
    add("verify", "run the property battery on small grids")
    return parser


def dispatch(args):
    """Run one subcommand; returns the process exit status."""
    config = parse_config(args.config) if args.config else build_config({})
    if args.seed is not None:
        config = replace(config, initial=replace(config.initial, seed=args.seed),
                         stability_seed=args.seed)
    out_dir = args.out or config.out_dir
    quiet = args.quiet
    started = time.monotonic()
    if args.subcommand == "verify":
        extras, status = _cmd_verify(config, out_dir, quiet,
                                     args.seed if args.seed is not None else 0)
        return status
    _prepare_out_dir(out_dir)
    if args.subcommand == "simulate":
        extras, status = _cmd_simulate(config, out_dir, quiet)
    elif args.subcommand == "compare-formulations":
        extras, status = _cmd_compare(config, out_dir, quiet)
    elif args.subcommand == "picard":
        extras, status = _cmd_picard(config, out_dir, quiet)
    elif args.subcommand == "eps-sweep":
        extras, status = _cmd_eps_sweep(config, out_dir, quiet)
    elif args.subcommand == "twin-stability":
        extras, status = _cmd_twin_stability(config, out_dir, quiet)
    elif args.subcommand == "lp-analyze":
        q = np.inf if args.q == "inf" else int(args.q)
        extras, status = _cmd_lp_analyze(config, out_dir, quiet,
                                         args.snapshots, args.s, q)
    else:  # pragma: no cover - argparse rejects unknown subcommands
        raise ConfigError(f"unknown subcommand {args.subcommand!r}")
    _write_meta(out_dir, args.subcommand, config, extras,
                time.monotonic() - started)
    return status


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except ConfigFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 3
    except (SnapshotFormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except (VacuumError, CFLViolationError, ConvergenceError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
