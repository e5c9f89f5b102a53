"""Run orchestration: build a problem from a config, step it, check invariants, write outputs."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import io
from .config import RunConfig
from .fields import element_average, global_totals, make_field
from .integrator import HydroState, LimiterOptions, Solver, SolverAbort, StepControls, initial_state
from .metrics import radial_profile, region_masses, taylor_green_error
from .problems import ProblemSpec, init_noh, init_sedov, init_taylor_green, init_triple_point, init_uniform
from .riemann import RiemannOptions

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_ABORT = 4

GCL_TOLERANCE = 1e-11
ENERGY_TOLERANCE = 1e-9
ALPHA_BINS = np.linspace(0.0, 1.0, 11)


@dataclass
class RunReport:
    """Outcome of one run; ``summary`` is what ``summary.json`` holds."""

    config: RunConfig
    status: int
    message: str
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    state: HydroState | None = None
    problem: ProblemSpec | None = None


def build_problem(cfg: RunConfig) -> ProblemSpec:
    shape = cfg.shape()
    kw = {} if cfg.t_end is None else {"t_end": cfg.t_end}
    name = cfg.problem
    if name == "taylor_green":
        prob = init_taylor_green(shape[0], beta=cfg.beta_c, **kw)
    elif name == "sedov":
        prob = init_sedov(cfg.dimension, shape[0], e0=cfg.e0, beta=cfg.beta_c, **kw)
    elif name == "noh":
        prob = init_noh(cfg.dimension, shape[0], beta=cfg.beta_c, **kw)
    elif name == "triple_point":
        prob = init_triple_point(shape[0], shape[1], beta=cfg.beta_c, **kw)
    elif name == "uniform":
        prob = init_uniform(shape[0], cfg.dimension, distort=cfg.distortion, seed=cfg.seed, **kw)
        prob.beta = cfg.beta_c
    else:
        raise ValueError(f"unknown problem {name!r}")
    if cfg.mass_quadrature != 3:
        f = prob.field
        ref = geo.reference_element(cfg.dimension, cfg.mass_quadrature)
        prob.field = make_field(prob.topo, prob.x, f.nu, f.vel, f.tau, ref=ref)
    return prob


def build_solver(cfg: RunConfig, prob: ProblemSpec) -> Solver:
    controls = StepControls(cfl=cfg.cfl, t_end=prob.t_end, max_steps=cfg.max_steps)
    limiter = LimiterOptions(fct=cfg.fct, slope=cfg.slope, beta=prob.beta, beta_mode=cfg.beta_mode)
    riemann = RiemannOptions(iterations=cfg.riemann_iterations, shock_coefficient=cfg.shock_coefficient)
    return Solver(prob.topo, prob.eos, prob.bc, controls, limiter, riemann, prob.energy_source,
                  surface_rule=cfg.surface_rule, volume_points=cfg.volume_quadrature)


def _problem_metrics(prob: ProblemSpec, state: HydroState) -> dict:
    topo, x, fld = prob.topo, state.x, state.field
    out = {}
    if prob.name == "taylor_green":
        out["taylor_green_error"] = dataclasses.asdict(taylor_green_error(topo, x, fld))
    elif prob.name in ("sedov", "noh"):
        prof = radial_profile(topo, x, fld, cylindrical=prob.name == "noh")
        out["shock_radius"] = prof.shock_radius
        out["peak_density"] = prof.peak
        out["plateau_density"] = prof.plateau
        out["bin_width"] = prof.bin_width
    if prob.region is not None:
        out["region_mass"] = region_masses(fld, prob.region).tolist()
    return out


def run_metrics(prob: ProblemSpec, solver: Solver, state: HydroState, totals0) -> dict:
    """Final metrics: diagnostics over all steps, conservation drifts and problem features."""
    diag = solver.diagnostics
    totals = global_totals(state.field)
    alpha = np.array([s.alpha_min for s in diag.steps]) if diag.steps else np.ones(1)
    hist, _ = np.histogram(alpha, bins=ALPHA_BINS)
    e0 = totals0.energy
    m = {
        "steps": state.steps,
        "time": state.t,
        "completed": bool(state.t >= solver.controls.t_end * (1 - 1e-14)),
        "min_average_nu": float(min(diag.min_avg_nu, element_average(state.field)[:, 0].min())),
        "fct_violations": diag.fct_violations,
        "rejections": len(diag.rejections),
        "rejection_times": list(diag.rejections),
        "max_gcl": diag.max_gcl,
        "mass_drift": totals.mass - totals0.mass,
        "energy_drift": (totals.energy - e0) / abs(e0) if e0 != 0.0 else totals.energy,
        "momentum": totals.momentum.tolist(),
        "alpha_min_histogram": hist.tolist(),
        "clipped_nodes": int(sum(s.clipped for s in diag.steps)),
        "riemann_fallbacks": int(sum(s.fallbacks for s in diag.steps)),
    }
    m.update(_problem_metrics(prob, state))
    return m


def check_invariants(prob: ProblemSpec, metrics: dict) -> list[str]:
    """Messages for every violated gate; empty when the run is admissible."""
    bad = []
    if not metrics["min_average_nu"] > 0.0:
        bad.append(f"positivity: min element-average nu = {metrics['min_average_nu']:.3e}")
    if metrics["fct_violations"]:
        bad.append(f"positivity: {metrics['fct_violations']} limited averages below zero")
    if metrics["max_gcl"] > GCL_TOLERANCE:
        bad.append(f"volume consistency: max relative gap {metrics['max_gcl']:.3e}")
    if metrics["mass_drift"] != 0.0:
        bad.append(f"conservation: mass drift {metrics['mass_drift']:.3e}")
    if prob.closed and abs(metrics["energy_drift"]) > ENERGY_TOLERANCE:
        bad.append(f"conservation: relative energy drift {metrics['energy_drift']:.3e}")
    return bad


def _scatter_rows(prob: ProblemSpec, state: HydroState):
    c = geo.centroids(prob.topo, state.x)
    if prob.name == "noh":
        c = c[:, :2]
    r = np.linalg.norm(c, axis=1)
    rho = 1.0 / element_average(state.field)[:, 0]
    order = np.argsort(r, kind="stable")
    return zip(r[order], rho[order])


def _series_rows(solver: Solver):
    t = 0.0
    for k, s in enumerate(solver.diagnostics.steps, start=1):
        t += s.dt
        yield k, t, s.dt, s.min_avg_nu, s.alpha_min, s.clipped, s.gcl


def run(cfg: RunConfig, write: bool = True) -> RunReport:
    """Run one configuration to ``t_end`` (or ``max_steps``) and write its outputs.

    Snapshots are written at ``0, cadence, 2 cadence, ..., t_end``; a zero
    cadence writes only the summary.  The report ``status`` is one of the
    ``EXIT_*`` codes.
    """
    try:
        prob = build_problem(cfg)
        solver = build_solver(cfg, prob)
        state = initial_state(prob.topo, prob.x, prob.field)
    except ValueError as exc:
        return RunReport(cfg, EXIT_CONFIG, f"cannot set up {cfg.problem}: {exc}")
    out = io.ensure_dir(cfg.output_dir) if write else None
    totals0 = global_totals(state.field)
    times = io.snapshot_times(prob.t_end, cfg.cadence)
    report = RunReport(cfg, EXIT_OK, "ok", problem=prob)

    def snapshot(st: HydroState):
        report.times.append(st.t)
        if write and cfg.vtk:
            path = out / f"snapshot_{len(report.snapshots):04d}.vtk"
            io.write_vtk(path, prob.topo, st.x, st.field, prob.eos, cfg.subcells, st.t)
            report.snapshots.append(str(path))

    accepted = [state]
    try:
        for target in times or [prob.t_end]:
            if target > state.t:
                solver.controls.t_end = target
                state = solver.run(state, callback=accepted.append)
                accepted[:] = [state]
            if times:
                snapshot(state)
            if state.steps >= cfg.max_steps:
                break
    except SolverAbort as exc:
        # report the last accepted step, not the start of the aborted segment
        state = accepted[-1]
        report.status = EXIT_ABORT
        report.message = f"solver abort: {exc}"
        log.error(report.message)
    solver.controls.t_end = prob.t_end
    report.state = state
    report.metrics = run_metrics(prob, solver, state, totals0)
    if report.status == EXIT_OK and cfg.gates:
        bad = check_invariants(prob, report.metrics)
        if bad:
            report.status = EXIT_INVARIANT
            report.message = "; ".join(bad)
    report.summary = {
        "config": dataclasses.asdict(cfg),
        "status": report.status,
        "message": report.message,
        "snapshot_times": report.times,
        "metrics": report.metrics,
    }
    if write:
        io.write_json(out / "summary.json", report.summary)
        io.write_csv(out / "series.csv", ["step", "t", "dt", "min_average_nu", "alpha_min", "clipped", "gcl"],
                     _series_rows(solver))
        if prob.name in ("sedov", "noh"):
            io.write_csv(out / "scatter.csv", ["radius", "density"], _scatter_rows(prob, state))
    return report


def apply_overrides(cfg: RunConfig, output_dir=None, seed=None, max_steps=None) -> RunConfig:
    """Copy of ``cfg`` with command-line overrides applied."""
    changes = {}
    if output_dir is not None:
        changes["output_dir"] = str(Path(output_dir))
    if seed is not None:
        changes["seed"] = seed
    if max_steps is not None:
        changes["max_steps"] = max_steps
    return dataclasses.replace(cfg, **changes)
