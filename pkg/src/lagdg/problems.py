"""Benchmark setups: Taylor-Green vortex, Sedov blast, Noh implosion, triple point."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ElementField, EosParams, energy_from_pressure, make_field
from .geometry import element_volumes
from .mesh import MeshError, MeshTopology, build_topology, perturb_interior, structured_mesh
from .residual import source_term_taylor_green
from .riemann import BoundaryCondition, box_boundary
from .sedov import blast_energy_constant

TG_GAMMA = 5.0 / 3.0
SEDOV_GAMMA = 1.4
NOH_GAMMA = 5.0 / 3.0
COLD_PRESSURE = 1e-6
SEDOV_E0_LITERAL = 0.493390


@dataclass
class ProblemSpec:
    """Initial data, boundary data and run parameters of one benchmark."""

    name: str
    topo: MeshTopology
    x: np.ndarray
    field: ElementField
    eos: EosParams
    bc: BoundaryCondition | None
    t_end: float
    beta: float = 1.0
    energy_source: object = None
    region: np.ndarray | None = None
    info: dict = field(default_factory=dict)
    closed: bool = True  # no sources and no work by exterior pressure

    @property
    def dim(self) -> int:
        return self.topo.dim


def _nodal_state(topo, x, rho, vel, p, gamma):
    """Element-node arrays from nodal/element data; ``gamma`` per element."""
    rho = np.broadcast_to(rho, topo.elem_to_nodes.shape)
    p = np.broadcast_to(p, topo.elem_to_nodes.shape)
    g = np.asarray(gamma)[:, None]
    e = energy_from_pressure(rho, p, g)
    tau = e + 0.5 * np.sum(vel * vel, axis=-1)
    return 1.0 / rho, vel, tau


def _box(lower, upper, shape, distort: float = 0.0, seed: int = 0):
    x, elems = structured_mesh(lower, upper, shape)
    topo = build_topology(elems, len(x), coords=x)
    if distort > 0.0:
        h = np.min((np.asarray(upper) - np.asarray(lower)) / np.asarray(shape))
        x = perturb_interior(x, topo, distort * h, np.random.default_rng(seed))
        build_topology(elems, len(x), coords=x)
    return topo, x


def taylor_green_velocity(x, y):
    pi = np.pi
    return np.stack([np.sin(pi * x) * np.cos(pi * y), -np.cos(pi * x) * np.sin(pi * y)], axis=-1)


def taylor_green_pressure(x, y):
    return 0.25 * (np.cos(2 * np.pi * x) + np.cos(2 * np.pi * y)) + 1.0


def init_taylor_green(n: int, t_end: float = 0.3, beta: float = 1.0) -> ProblemSpec:
    """Taylor-Green vortex on ``(0, 1)^2`` with the steadying energy source."""
    topo, x = _box([0, 0], [1, 1], (n, n))
    xe = x[topo.elem_to_nodes]
    gamma = np.full(topo.n_elems, TG_GAMMA)
    vel = taylor_green_velocity(xe[..., 0], xe[..., 1])
    nu, vel, tau = _nodal_state(topo, x, 1.0, vel, taylor_green_pressure(xe[..., 0], xe[..., 1]), gamma)
    fld = make_field(topo, x, nu, vel, tau)
    bc = box_boundary(x, topo, {s: "wall" for s in ("x0", "x1", "y0", "y1")})

    def source(qd, ref):
        return source_term_taylor_green(qd, ref, TG_GAMMA)

    return ProblemSpec("taylor_green", topo, x, fld, EosParams(gamma), bc, t_end, beta, source, closed=False)


def sedov_energy(dim: int, radius: float = 1.0, time: float = 1.0) -> float:
    """Blast energy in the positive orthant placing the shock at ``radius`` at ``time``."""
    alpha = blast_energy_constant(SEDOV_GAMMA, dim)
    return alpha * radius ** (dim + 2) / time**2 / 2**dim


def init_sedov(dim: int, n: int, e0: float | None = None, t_end: float = 1.0, beta: float = 1.0) -> ProblemSpec:
    """Point blast in the corner of ``(0, 1.2)^dim`` with symmetry walls on the coordinate planes.

    ``e0`` is the energy deposited in the origin element; by default the
    value that puts the shock at radius 1 at ``t = 1`` in the positive
    orthant of full-space symmetry.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if e0 is None:
        e0 = sedov_energy(dim)
    topo, x = _box([0.0] * dim, [1.2] * dim, (n,) * dim)
    gamma = np.full(topo.n_elems, SEDOV_GAMMA)
    vol = element_volumes(topo, x)
    origin = int(np.flatnonzero(np.all(np.isclose(x[topo.elem_to_nodes].min(axis=1), 0.0), axis=1))[0])
    p = np.full(topo.n_elems, COLD_PRESSURE)
    p[origin] = (SEDOV_GAMMA - 1.0) * 1.0 * e0 / vol[origin]
    vel = np.zeros(topo.elem_to_nodes.shape + (dim,))
    nu, vel, tau = _nodal_state(topo, x, 1.0, vel, p[:, None], gamma)
    fld = make_field(topo, x, nu, vel, tau)
    sides = {s: "wall" for s in ("x0", "y0", "z0")[:dim]}
    bc = box_boundary(x, topo, sides)
    info = {"e0": e0, "origin_element": origin, "origin_pressure": float(p[origin]), "exact_radius": 1.0}
    return ProblemSpec("sedov", topo, x, fld, EosParams(gamma), bc, t_end, beta, info=info)


def noh_velocity(x):
    """Inward unit radial velocity in the x-y plane (zero on the axis)."""
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1])
    out = np.zeros(x.shape)
    safe = np.where(r > 0, r, 1.0)
    out[..., 0] = np.where(r > 0, -x[..., 0] / safe, 0.0)
    out[..., 1] = np.where(r > 0, -x[..., 1] / safe, 0.0)
    return out


def init_noh(dim: int, n: int, t_end: float = 0.6, beta: float = 0.8) -> ProblemSpec:
    """Cylindrical implosion on ``(0, 1)^dim``, walls on x = 0 and y = 0 (and the z faces)."""
    topo, x = _box([0.0] * dim, [1.0] * dim, (n,) * dim)
    gamma = np.full(topo.n_elems, NOH_GAMMA)
    vel = noh_velocity(x[topo.elem_to_nodes])
    nu, vel, tau = _nodal_state(topo, x, 1.0, vel, COLD_PRESSURE, gamma)
    fld = make_field(topo, x, nu, vel, tau)
    sides = {"x0": "wall", "y0": "wall"}
    if dim == 3:
        sides.update(z0="wall", z1="wall")
    bc = box_boundary(x, topo, sides)
    info = {"shock_speed": 1.0 / 3.0, "plateau": 16.0, "exact_radius": t_end / 3.0}
    return ProblemSpec("noh", topo, x, fld, EosParams(gamma), bc, t_end, beta, info=info)


def init_triple_point(nx: int = 140, ny: int = 80, t_end: float = 4.0, beta: float = 0.8) -> ProblemSpec:
    """Three-state Riemann problem on ``(0, 7) x (0, 3)`` with walls on all sides."""
    if nx % 7 or ny % 2:
        raise MeshError("triple point mesh must align with x = 1 and y = 1.5 (nx multiple of 7, ny even)")
    topo, x = _box([0.0, 0.0], [7.0, 3.0], (nx, ny))
    c = x[topo.elem_to_nodes].mean(axis=1)
    left = c[:, 0] < 1.0
    upper = ~left & (c[:, 1] > 1.5)
    region = np.where(left, 0, np.where(upper, 1, 2))
    rho = np.array([1.0, 0.1, 1.0])[region]
    p = np.array([1.0, 0.1, 0.1])[region]
    gamma = np.array([1.5, 1.5, 1.4])[region]
    vel = np.zeros(topo.elem_to_nodes.shape + (2,))
    nu, vel, tau = _nodal_state(topo, x, rho[:, None], vel, p[:, None], gamma)
    fld = make_field(topo, x, nu, vel, tau)
    bc = box_boundary(x, topo, {s: "wall" for s in ("x0", "x1", "y0", "y1")})
    return ProblemSpec("triple_point", topo, x, fld, EosParams(gamma), bc, t_end, beta, region=region)


def init_uniform(n: int, dim: int = 2, velocity=(1.0, 0.0), rho: float = 1.0, p: float = 1.0,
                 gamma: float = 1.4, distort: float = 0.0, seed: int = 0, t_end: float = 1.0) -> ProblemSpec:
    """Uniform flow on a (possibly distorted) unit box with free boundaries at ``p_ext = p``."""
    topo, x = _box([0.0] * dim, [1.0] * dim, (n,) * dim, distort, seed)
    g = np.full(topo.n_elems, gamma)
    vel = np.broadcast_to(np.asarray(velocity, dtype=float)[:dim], topo.elem_to_nodes.shape + (dim,)).copy()
    nu, vel, tau = _nodal_state(topo, x, rho, vel, p, g)
    fld = make_field(topo, x, nu, vel, tau)
    bc = BoundaryCondition.free(topo.n_nodes, dim, topo.boundary_nodes, p_ext=p)
    return ProblemSpec("uniform", topo, x, fld, EosParams(g), bc, t_end, closed=False)


PROBLEMS = ("taylor_green", "sedov", "noh", "triple_point", "uniform")
