"""Multidirectional nodal Riemann solver.

At each node ``p`` the velocity ``u*`` balances the corner forces

    F*_s = -p_s A_s + mu_s a_s (u* - u_s),     A_s = a_s n_s,

over all corner subfaces ``s`` around the node, giving

    u* = sum(mu_s a_s u_s + p_s A_s) / sum(mu_s a_s).

The impedance ``mu = rho c+ |e . n|`` depends on the direction ``e`` of
``u* - ubar_c``, so the solve is a short fixed-point iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, MeshTopology

INTERIOR, FREE, WALL, VELOCITY = 0, 1, 2, 3

_SIDES = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass
class BoundaryCondition:
    """Per-node boundary data.

    ``kind`` is INTERIOR, FREE, WALL or VELOCITY.  ``projector`` holds the
    tangential projection ``I - N (N^T N)^+ N^T`` of wall nodes (identity
    elsewhere); ``u_bc`` the prescribed velocities; ``p_ext`` the exterior
    pressure acting on free boundaries.
    """

    kind: np.ndarray
    projector: np.ndarray
    u_bc: np.ndarray
    p_ext: float = 0.0

    @classmethod
    def free(cls, n_nodes: int, dim: int, boundary_nodes=None, p_ext: float = 0.0) -> "BoundaryCondition":
        kind = np.zeros(n_nodes, dtype=np.int64)
        if boundary_nodes is not None:
            kind[np.asarray(boundary_nodes, dtype=bool)] = FREE
        proj = np.broadcast_to(np.eye(dim), (n_nodes, dim, dim)).copy()
        return cls(kind, proj, np.zeros((n_nodes, dim)), p_ext)

    def set_walls(self, nodes, normals) -> None:
        """Add a wall with unit normal ``normals`` (one per node or shared) at ``nodes``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        normals = np.broadcast_to(np.asarray(normals, dtype=float), (nodes.size, self.projector.shape[1]))
        nrm = np.linalg.norm(normals, axis=1)
        if not np.allclose(nrm, 1.0, rtol=0, atol=1e-12):
            raise ValueError("wall normals must be unit vectors")
        for node, n in zip(nodes, normals):
            if self.kind[node] == VELOCITY:
                continue
            P = self.projector[node] if self.kind[node] == WALL else np.eye(n.size)
            # stack the new constraint onto the existing ones
            t = P @ n
            if np.linalg.norm(t) > 1e-12:
                t /= np.linalg.norm(t)
                P = P - np.outer(t, t)
            self.projector[node] = P
            self.kind[node] = WALL

    def set_velocity(self, nodes, velocity) -> None:
        nodes = np.asarray(nodes, dtype=np.int64)
        self.u_bc[nodes] = velocity
        self.kind[nodes] = VELOCITY
        self.projector[nodes] = np.eye(self.projector.shape[1])


def box_boundary(coords, topo: MeshTopology, sides: dict, p_ext: float = 0.0, tol: float = 1e-10) -> BoundaryCondition:
    """Boundary data for an axis-aligned box.

    ``sides`` maps ``"x0", "x1", "y0", ...`` to ``"wall"``, ``"free"`` or a
    velocity vector; unspecified sides are free.  Nodes on several walls get
    the intersection of the constraints.
    """
    coords = np.asarray(coords)
    dim = topo.dim
    bc = BoundaryCondition.free(topo.n_nodes, dim, topo.boundary_nodes, p_ext)
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    scale = tol * max(float(np.max(hi - lo)), 1.0)
    for side, what in sides.items():
        if side not in _SIDES[: 2 * dim]:
            raise MeshError(f"unknown boundary side {side!r}")
        axis = _SIDES.index(side) // 2
        upper = side.endswith("1")
        plane = hi[axis] if upper else lo[axis]
        on = np.flatnonzero(np.abs(coords[:, axis] - plane) <= scale)
        if isinstance(what, str):
            if what == "free":
                continue
            if what != "wall":
                raise MeshError(f"unknown boundary kind {what!r} for side {side}")
            n = np.zeros(dim)
            n[axis] = 1.0 if upper else -1.0
            bc.set_walls(on, n)
        else:
            bc.set_velocity(on, np.asarray(what, dtype=float))
    return bc


@dataclass
class RiemannOptions:
    iterations: int = 2
    shock_coefficient: float | None = None  # None -> (gamma + 1) / 2
    degenerate_tol: float = 1e-12
    density: str = "corner"  # or "average"


@dataclass
class CornerStates:
    """Inputs of the nodal solve for every element corner, arrays (C, Np, ...)."""

    velocity: np.ndarray
    pressure: np.ndarray
    density: np.ndarray
    sound_speed: np.ndarray
    mean_velocity: np.ndarray  # element average velocity (C, D)
    gamma: np.ndarray  # (C,)


@dataclass
class NodalRiemannResult:
    u_star: np.ndarray  # (N, D)
    forces: np.ndarray  # (C, Np, nfc, D)
    impedance: np.ndarray  # (C, Np, nfc), mu * a
    fallbacks: int
    force_residual: float


def corner_impedances(states: CornerStates, vectors, u_star_corner, opts: RiemannOptions | None = None):
    """``mu a`` per corner subface for a provisional node velocity (C, Np, D)."""
    opts = opts or RiemannOptions()
    area = np.linalg.norm(vectors, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = np.where(area[..., None] > 0, vectors / area[..., None], 0.0)
    d = u_star_corner - states.mean_velocity[:, None, :]
    dn = np.linalg.norm(d, axis=-1)
    vscale = max(float(np.max(np.abs(states.velocity), initial=0.0)), float(np.max(states.sound_speed, initial=0.0)), 1e-300)
    degenerate = dn <= opts.degenerate_tol * vscale
    safe = np.where(degenerate, 1.0, dn)
    e = d / safe[..., None]
    cosine = np.abs(np.einsum("ckd,ckjd->ckj", e, normal))
    cosine = np.where(degenerate[..., None], 1.0, cosine)
    q2 = (states.gamma + 1.0) / 2.0 if opts.shock_coefficient is None else np.full_like(states.gamma, opts.shock_coefficient)
    cplus = states.sound_speed + q2[:, None] * dn
    mu = states.density * cplus
    return mu[..., None] * cosine * area


def _node_velocity(topo, states, vectors, mua, bc, S_bnd, ref_u, ref_p, mean_u):
    nodes = topo.elem_to_nodes
    pc = states.pressure
    # offsets from one reference corner per node keep uniform states exact
    du = states.velocity - ref_u[nodes]
    dp = pc - ref_p[nodes]
    num_c = np.einsum("ckj,ckd->ckd", mua, du) + dp[..., None] * vectors.sum(axis=2)
    num = topo.scatter(num_c)
    den = topo.scatter(mua.sum(axis=2))
    p_out = np.where(bc.kind == FREE, bc.p_ext, 0.0) if bc is not None else np.zeros(topo.n_nodes)
    num += (ref_p - p_out)[:, None] * S_bnd
    ok = den > 0.0
    u_star = np.where(ok[:, None], ref_u + num / np.where(ok, den, 1.0)[:, None], mean_u)
    if bc is not None:
        walls = bc.kind == WALL
        if walls.any():
            rel = u_star[walls]
            u_star[walls] = np.einsum("nab,nb->na", bc.projector[walls], rel)
        vel = bc.kind == VELOCITY
        u_star[vel] = bc.u_bc[vel]
    return u_star, int(np.count_nonzero(~ok))


def solve_riemann(
    topo: MeshTopology,
    states: CornerStates,
    vectors,
    bc: BoundaryCondition | None = None,
    opts: RiemannOptions | None = None,
) -> NodalRiemannResult:
    """Nodal velocities and corner forces for the whole mesh."""
    opts = opts or RiemannOptions()
    nodes = topo.elem_to_nodes
    counts = np.bincount(nodes.ravel(), minlength=topo.n_nodes).astype(float)
    mean_u = topo.scatter(states.velocity) / counts[:, None]
    # reference state: the corner of the first element listed at each node
    first = topo.node_elem_ptr[:-1]
    ref_e, ref_k = topo.node_elem_ids[first], topo.node_elem_corner[first]
    ref_u = states.velocity[ref_e, ref_k]
    ref_p = states.pressure[ref_e, ref_k]
    bnd = topo.boundary_faces[:, topo.corner_faces]  # (C, Np, nfc)
    S_bnd = topo.scatter(np.where(bnd[..., None], vectors, 0.0).sum(axis=2))

    u_star = mean_u.copy()
    if bc is not None:
        vel = bc.kind == VELOCITY
        u_star[vel] = bc.u_bc[vel]
    fallbacks = 0
    for _ in range(max(1, opts.iterations)):
        mua = corner_impedances(states, vectors, u_star[nodes], opts)
        u_star, fallbacks = _node_velocity(topo, states, vectors, mua, bc, S_bnd, ref_u, ref_p, mean_u)
    F = corner_forces(u_star, states, mua, vectors, topo)
    net = topo.scatter(F.sum(axis=2))
    interior = ~topo.boundary_nodes
    scale = max(float(np.max(np.abs(F), initial=0.0)), 1e-300)
    resid = float(np.max(np.abs(net[interior]), initial=0.0)) / scale
    return NodalRiemannResult(u_star=u_star, forces=F, impedance=mua, fallbacks=fallbacks, force_residual=resid)


def corner_forces(u_star, states: CornerStates, mua, vectors, topo: MeshTopology) -> np.ndarray:
    """``F* = -p A + mu a (u* - u_corner)`` for every corner subface."""
    du = u_star[topo.elem_to_nodes] - states.velocity
    return -states.pressure[..., None, None] * vectors + mua[..., None] * du[:, :, None, :]


def solve_node(velocities, pressures, densities, sound_speeds, mean_velocities, gammas, vectors,
               iterations: int = 2, shock_coefficient: float | None = None, projector=None):
    """Direct single-node solve, written as the plain closed-form sums.

    Each argument lists the corners around the node: ``vectors[i]`` holds the
    subface vectors (nfc, D) of corner ``i``.  Returns ``(u_star, forces)``.
    Used as an independent check of the vectorized solver.
    """
    velocities = np.asarray(velocities, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    u = velocities.mean(axis=0)
    vscale = max(np.abs(velocities).max(), np.max(sound_speeds))
    for _ in range(max(1, iterations)):
        num = np.zeros(velocities.shape[1])
        den = 0.0
        mua_all = []
        for i in range(len(velocities)):
            d = u - mean_velocities[i]
            dn = np.linalg.norm(d)
            q2 = (gammas[i] + 1) / 2 if shock_coefficient is None else shock_coefficient
            mu = densities[i] * (sound_speeds[i] + q2 * dn)
            row = []
            for A in vectors[i]:
                a = np.linalg.norm(A)
                factor = 1.0 if dn <= 1e-12 * vscale else abs(np.dot(d / dn, A / a))
                w = mu * factor * a
                num += w * velocities[i] + pressures[i] * A
                den += w
                row.append(w)
            mua_all.append(row)
        u = num / den
        if projector is not None:
            u = projector @ u
    forces = [[-pressures[i] * A + w * (u - velocities[i]) for A, w in zip(vectors[i], mua_all[i])]
              for i in range(len(velocities))]
    return u, np.asarray(forces)
