"""Time stepping: CFL control, the limited RK2 step, node motion and the GCL ledger.

One step from ``t^n`` to ``t^n + dt``:

1. Riemann solve at ``(U^n, x^n)``, first stage ``U^(1) = U^n + dt M^-1 R^n``
   with the mesh moved by the nodal velocities ``u^n``; slope limiting.
2. Riemann solve at the first stage; the unlimited high-order nodal update
   ``U^H = (U^n + U^(1) + dt M^-1 R^(1)) / 2``.
3. Element averages: a low-order update using the fluxes at ``t^n`` is
   corrected towards the time-averaged high-order fluxes with Zalesak
   factors on ``nu``.  The mesh moves with the limited node velocity.
4. ``U^H`` is shifted onto the corrected averages, slope limited and
   contracted by ``beta``.

The algebraic volumes are advanced with the limited velocities and corner
vectors averaged exactly over the straight-line node motion, so they
match the geometric volumes to round-off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .fields import ElementField, EosParams, corner_thermo, element_average
from .limiters import apply_fct, beta_scale, clip_and_scale, limited_node_velocity, local_bounds, shift_to_averages, zalesak_factors
from .mesh import MeshTopology
from .residual import Residual, assemble_rhs, surface_weights
from .riemann import BoundaryCondition, CornerStates, NodalRiemannResult, RiemannOptions, solve_riemann

log = logging.getLogger(__name__)


class SolverAbort(RuntimeError):
    """The time step collapsed or the state became inadmissible."""


class StepRejected(Exception):
    pass


@dataclass
class StepControls:
    cfl: float = 0.25
    dt_init: float | None = None
    growth: float = 1.05
    t_end: float = 1.0
    max_steps: int = 1_000_000
    volume_guard: float = 0.1
    max_retries: int = 5

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("CFL number must lie in (0, 1)")
        if self.dt_init is not None and not self.dt_init > 0.0:
            raise ValueError("initial time step must be positive")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")


@dataclass
class LimiterOptions:
    fct: bool = True
    slope: bool = True
    beta: float = 1.0
    beta_mode: str = "conservative"

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.beta_mode not in ("conservative", "literal"):
            raise ValueError("beta_mode must be 'conservative' or 'literal'")


@dataclass
class HydroState:
    x: np.ndarray
    field: ElementField
    volume: np.ndarray  # algebraic (GCL) volumes
    t: float = 0.0
    dt_prev: float | None = None
    steps: int = 0


@dataclass
class StepDiagnostics:
    dt: float
    retries: int
    min_avg_nu: float
    fct_violations: int
    alpha_min: float
    alpha_active: float  # fraction of nodes with alpha < 1
    clipped: int
    fallbacks: int
    force_residual: float
    gcl: float


@dataclass
class Snapshot:
    """Quantities evaluated at one geometry and state."""

    vectors: np.ndarray
    riemann: NodalRiemannResult
    residual: Residual
    qd: geo.QuadratureData


@dataclass
class Diagnostics:
    steps: list = field(default_factory=list)
    rejections: list = field(default_factory=list)  # times of rejected attempts

    @property
    def min_avg_nu(self) -> float:
        return min((s.min_avg_nu for s in self.steps), default=np.inf)

    @property
    def max_gcl(self) -> float:
        return max((s.gcl for s in self.steps), default=0.0)

    @property
    def fct_violations(self) -> int:
        return sum(s.fct_violations for s in self.steps)


class Solver:
    """Lagrangian DG solver on a fixed topology.

    Parameters
    ----------
    topo : MeshTopology
    eos : EosParams
    bc : BoundaryCondition or None
        ``None`` treats all boundary nodes as free with zero exterior pressure.
    controls, limiter, riemann : option dataclasses
    energy_source : callable, optional
        ``(qd, ref) -> (C, Np)`` energy-row source integrals.
    surface_rule : str
        Face trace rule, see ``residual.surface_weights``.
    scheme : str
        ``"rk2"`` (default) or ``"euler"``, an unlimited forward Euler step
        kept only to exhibit its volume-consistency error.
    volume_points : int
        Gauss points per axis for the volume integrals.
    """

    def __init__(
        self,
        topo: MeshTopology,
        eos: EosParams,
        bc: BoundaryCondition | None = None,
        controls: StepControls | None = None,
        limiter: LimiterOptions | None = None,
        riemann: RiemannOptions | None = None,
        energy_source=None,
        surface_rule: str = "galerkin",
        scheme: str = "rk2",
        volume_points: int = 2,
    ):
        if scheme not in ("rk2", "euler"):
            raise ValueError("scheme must be 'rk2' or 'euler'")
        self.topo = topo
        self.eos = eos
        self.bc = bc
        self.controls = controls or StepControls()
        self.limiter = limiter or LimiterOptions()
        self.riemann_opts = riemann or RiemannOptions()
        self.energy_source = energy_source
        self.scheme = scheme
        self.ref = geo.reference_element(topo.dim, volume_points)
        self.surface_rule = surface_rule
        self.weights = surface_weights(topo, surface_rule)
        self.diagnostics = Diagnostics()

    # -- evaluation ------------------------------------------------------

    def corner_states(self, fld: ElementField) -> CornerStates:
        th = corner_thermo(fld, self.eos)
        avg = element_average(fld)
        rho = th.rho
        if self.riemann_opts.density == "average":
            rho = np.repeat((1.0 / np.maximum(avg[:, 0], self.eos.nu_floor))[:, None], fld.U.shape[1], axis=1)
        return CornerStates(
            velocity=fld.vel,
            pressure=th.p,
            density=rho,
            sound_speed=th.c,
            mean_velocity=avg[:, 1:-1],
            gamma=self.eos.gamma,
        )

    def evaluate(self, fld: ElementField, x) -> Snapshot:
        qd = geo.quadrature_data(self.ref, self.topo, x, check=False)
        if not np.all(qd.detj > 0.0):
            raise StepRejected("non-positive Jacobian")
        blocks = geo.face_mass_blocks(self.topo, x) if self.surface_rule == "galerkin" else None
        vectors = geo.corner_vectors(self.topo, x, blocks)
        fvec = geo.force_vectors(self.topo, x) if self.surface_rule == "centroid" else vectors
        states = self.corner_states(fld)
        rs = solve_riemann(self.topo, states, fvec, self.bc, self.riemann_opts)
        if self.surface_rule == "galerkin":
            res = assemble_rhs(self.topo, fld, self.eos, qd, self.ref, rs, fvec, self.weights, self.energy_source,
                               blocks=blocks, pressure=states.pressure)
        else:
            res = assemble_rhs(self.topo, fld, self.eos, qd, self.ref, rs, fvec, self.weights, self.energy_source)
        return Snapshot(vectors=vectors, riemann=rs, residual=res, qd=qd)

    def cfl_timestep(self, state: HydroState, snap: Snapshot) -> float:
        """Acoustic CFL limit, growth cap and volume-change guard."""
        return cfl_timestep(self.topo, state, snap, self.controls, self.eos)

    # -- stepping --------------------------------------------------------

    def _update(self, fld: ElementField, rhs, dt: float) -> np.ndarray:
        return fld.U + dt * np.einsum("cij,cjk->cik", fld.mass_inv, rhs)

    def _slope_and_beta(self, fld: ElementField, U) -> tuple[np.ndarray, int]:
        clipped = 0
        if self.limiter.slope:
            # stencil from the stage-start values, widened by the new averages
            avg_nu = np.einsum("cj,cj->c", fld.node_mass, U[..., 0]) / fld.elem_mass
            lo, hi = local_bounds(self.topo, fld.U[..., 0], avg_nu)
            res = clip_and_scale(U, fld.node_mass, fld.elem_mass, lo, hi)
            U, clipped = res.U, res.clipped
        if self.limiter.beta != 1.0:
            U = beta_scale(U, fld.node_mass, fld.elem_mass, self.limiter.beta, self.limiter.beta_mode)
        return U, clipped

    def _check_geometry(self, x, fld: ElementField, U):
        vol = geo.element_volumes(self.topo, x)
        if not np.all(vol > 0.0):
            raise StepRejected(f"non-positive volume in element {int(np.argmin(vol))}")
        qd = geo.quadrature_data(self.ref, self.topo, x, check=False)
        if not np.all(qd.detj > 0.0):
            raise StepRejected("non-positive Jacobian")
        avg_nu = np.einsum("cj,cj->c", fld.node_mass, U[..., 0]) / fld.elem_mass
        if not np.all(avg_nu > 0.0):
            raise StepRejected(f"non-positive average specific volume in element {int(np.argmin(avg_nu))}")
        if not np.all(np.isfinite(U)):
            raise StepRejected("non-finite state")

    def _attempt(self, state: HydroState, snap0: Snapshot, dt: float):
        fld = state.field
        topo = self.topo
        u0 = snap0.riemann.u_star
        R0 = snap0.residual
        if self.scheme == "euler":
            U = self._update(fld, R0.rhs, dt)
            x1 = geo.move_nodes(state.x, u0, dt)
            self._check_geometry(x1, fld, U)
            vol = geo.gcl_volume_update(state.volume, topo, snap0.vectors, u0, dt)
            return HydroState(x1, fld.with_state(U), vol, state.t + dt, dt, state.steps + 1), dict(
                alpha=np.ones(topo.n_nodes), violations=0, clipped=0
            )

        # first stage: forward Euler with the t^n Riemann data
        U1 = self._update(fld, R0.rhs, dt)
        x1 = geo.move_nodes(state.x, u0, dt)
        self._check_geometry(x1, fld, U1)
        U1, _ = self._slope_and_beta(fld, U1)
        fld1 = fld.with_state(U1)
        snap1 = self.evaluate(fld1, x1)
        u1 = snap1.riemann.u_star
        R1 = snap1.residual

        U_high = 0.5 * fld.U + 0.5 * self._update(fld1, R1.rhs, dt)
        u_high = 0.5 * (u0 + u1)

        mc = fld.elem_mass
        avg_n = element_average(fld)
        src = 0.5 * (R0.source.sum(axis=1) + R1.source.sum(axis=1))
        phi_low = R0.corner_flux
        avg_low = avg_n + dt * (phi_low.sum(axis=1) + src) / mc[:, None]

        if self.limiter.fct:
            x_pred = geo.move_nodes(state.x, u_high, dt)
            A_high = geo.time_centered_vectors(topo, state.x, x_pred)
            phi_high = np.empty_like(phi_low)
            phi_high[..., 0] = np.einsum("ckjd,ckd->ck", A_high, u_high[topo.elem_to_nodes])
            phi_high[..., 1:] = 0.5 * (R0.corner_flux[..., 1:] + R1.corner_flux[..., 1:])
            hb = phi_high - phi_low
            cf = zalesak_factors(topo, hb[..., 0], avg_low[:, 0], mc, dt)
            alpha = cf.node
            avg_new = apply_fct(topo, avg_low, hb, alpha, mc, dt)
            u_lim = limited_node_velocity(u0, u_high, alpha)
            U = shift_to_averages(U_high, fld.node_mass, mc, avg_new)
        else:
            alpha = np.ones(topo.n_nodes)
            u_lim = u_high
            U = U_high
        violations = int(np.count_nonzero(element_average(fld.with_state(U))[:, 0] < 0.0))

        x_new = geo.move_nodes(state.x, u_lim, dt)
        U, clipped = self._slope_and_beta(fld, U)
        self._check_geometry(x_new, fld, U)
        A_tc = geo.time_centered_vectors(topo, state.x, x_new)
        vol = geo.gcl_volume_update(state.volume, topo, A_tc, u_lim, dt)
        new = HydroState(x_new, fld.with_state(U), vol, state.t + dt, dt, state.steps + 1)
        return new, dict(alpha=alpha, violations=violations, clipped=clipped)

    def step(self, state: HydroState) -> HydroState:
        """Advance one accepted step, halving ``dt`` on inadmissible results."""
        try:
            snap0 = self.evaluate(state.field, state.x)
        except StepRejected as exc:
            raise SolverAbort(f"step {state.steps}: inadmissible state at t={state.t:.6g}: {exc}") from exc
        dt = min(self.cfl_timestep(state, snap0), self.controls.t_end - state.t)
        floor = 1e-14 * self.controls.t_end
        for retry in range(self.controls.max_retries + 1):
            if dt < floor:
                raise SolverAbort(f"step {state.steps}: time step {dt:.3e} below floor at t={state.t:.6g}")
            try:
                new, info = self._attempt(state, snap0, dt)
                break
            except StepRejected as exc:
                self.diagnostics.rejections.append(state.t)
                log.debug("step %d rejected at dt=%.3e: %s", state.steps, dt, exc)
                dt *= 0.5
        else:
            raise SolverAbort(f"step {state.steps}: rejected {self.controls.max_retries + 1} times at t={state.t:.6g}")
        vgeo = geo.element_volumes(self.topo, new.x)
        alpha = info["alpha"]
        avg = element_average(new.field)
        self.diagnostics.steps.append(
            StepDiagnostics(
                dt=dt,
                retries=retry,
                min_avg_nu=float(avg[:, 0].min()),
                fct_violations=info["violations"],
                alpha_min=float(alpha.min()),
                alpha_active=float(np.mean(alpha < 1.0)),
                clipped=info["clipped"],
                fallbacks=snap0.riemann.fallbacks,
                force_residual=snap0.riemann.force_residual,
                gcl=float(np.max(np.abs(vgeo - new.volume) / vgeo)),
            )
        )
        return new

    def run(self, state: HydroState, callback=None) -> HydroState:
        """Step until ``t_end`` or ``max_steps``; ``callback(state)`` after each step."""
        t_end = self.controls.t_end
        while state.t < t_end * (1 - 1e-14) and state.steps < self.controls.max_steps:
            state = self.step(state)
            if callback is not None:
                callback(state)
        return state


def cfl_timestep(topo: MeshTopology, state: HydroState, snap: Snapshot, controls: StepControls, eos: EosParams) -> float:
    fld = state.field
    th = corner_thermo(fld, eos)
    c = np.maximum(th.c.max(axis=1), eos.c_floor)
    lc = geo.min_edge_length(topo, state.x)
    dt = controls.cfl * float(np.min(lc / c))
    rate = geo.volume_rate(topo, snap.vectors, snap.riemann.u_star)
    vol = geo.element_volumes(topo, state.x)
    with np.errstate(divide="ignore"):
        guard = np.where(np.abs(rate) > 0.0, controls.volume_guard * vol / np.abs(rate), np.inf)
    dt = min(dt, float(np.min(guard)))
    if state.dt_prev is not None:
        dt = min(dt, controls.growth * state.dt_prev)
    elif controls.dt_init is not None:
        dt = min(dt, controls.dt_init)
    return dt


def initial_state(topo: MeshTopology, x, fld: ElementField) -> HydroState:
    x = np.asarray(x, dtype=float)
    geo.check_orientation(topo, x)
    return HydroState(x=x.copy(), field=fld, volume=geo.element_volumes(topo, x))


@dataclass
class GclReport:
    max_relative: float
    per_element: np.ndarray
    predicted: np.ndarray | None = None
    prediction_error: float | None = None


def gcl_audit(topo: MeshTopology, state: HydroState, predicted=None) -> GclReport:
    """Geometric against algebraic volumes, optionally against a predicted defect."""
    vgeo = geo.element_volumes(topo, state.x)
    diff = vgeo - state.volume
    rep = GclReport(max_relative=float(np.max(np.abs(diff) / vgeo)), per_element=diff)
    if predicted is not None:
        rep.predicted = np.asarray(predicted)
        rep.prediction_error = float(np.max(np.abs(diff - rep.predicted)))
    return rep


def euler_gcl_prediction(topo: MeshTopology, x, u, dt: float) -> np.ndarray:
    """Per-element volume defect that one forward Euler move with ``u`` must leave."""
    xe = np.asarray(x)[topo.elem_to_nodes]
    ue = np.asarray(u)[topo.elem_to_nodes]
    return np.array([geo.forward_euler_gcl_defect(xe[c], ue[c], dt) for c in range(topo.n_elems)])
