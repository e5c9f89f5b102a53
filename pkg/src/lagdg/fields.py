"""DG solution storage, mass matrices and the ideal-gas equation of state.

The state vector per element node is ``U = (nu, u_1..u_D, tau)`` with
specific volume ``nu``, velocity ``u`` and specific total energy ``tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ReferenceElement, quadrature_data, reference_element
from .mesh import MeshError, MeshTopology


@dataclass
class FloorCounter:
    """Number of point evaluations where a thermodynamic floor was active."""

    nu: int = 0
    pressure: int = 0
    sound_speed: int = 0

    def total(self) -> int:
        return self.nu + self.pressure + self.sound_speed


@dataclass
class EosParams:
    gamma: np.ndarray  # per element
    nu_floor: float = 1e-14
    p_floor: float = 0.0
    c_floor: float = 1e-14
    counter: FloorCounter = field(default_factory=FloorCounter)

    def __post_init__(self):
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if not np.all(self.gamma > 1.0):
            raise ValueError("gamma must exceed 1")


@dataclass
class PointThermo:
    rho: np.ndarray
    e: np.ndarray
    p: np.ndarray
    c: np.ndarray


def eval_thermo(nu, u, tau, gamma, eos: EosParams | None = None) -> PointThermo:
    """Density, internal energy, pressure and sound speed with floors applied.

    ``u`` carries the velocity components on its last axis; ``gamma`` must
    broadcast against ``nu``.
    """
    nu_floor, p_floor, c_floor = (1e-14, 0.0, 1e-14) if eos is None else (eos.nu_floor, eos.p_floor, eos.c_floor)
    nu = np.asarray(nu, dtype=float)
    u = np.asarray(u, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    nu_c = np.maximum(nu, nu_floor)
    rho = 1.0 / nu_c
    e = np.asarray(tau, dtype=float) - 0.5 * np.sum(u * u, axis=-1)
    p_raw = (gamma - 1.0) * rho * e
    p = np.maximum(p_raw, p_floor)
    c = np.sqrt(np.maximum(gamma * p / rho, 0.0))
    c_f = np.maximum(c, c_floor)
    if eos is not None:
        eos.counter.nu += int(np.count_nonzero(nu < nu_floor))
        eos.counter.pressure += int(np.count_nonzero(p_raw < p_floor))
        eos.counter.sound_speed += int(np.count_nonzero(c < c_floor))
    return PointThermo(rho=rho, e=e, p=p, c=c_f)


def energy_from_pressure(rho, p, gamma):
    """Specific internal energy of an ideal gas, ``e = p / ((gamma - 1) rho)``."""
    return np.asarray(p) / ((np.asarray(gamma) - 1.0) * np.asarray(rho))


@dataclass
class ElementField:
    """Nodal DG coefficients and the constant mass data of every element.

    ``U`` has shape (C, Np, D + 2) with components (nu, u, tau).
    """

    U: np.ndarray
    mass: np.ndarray  # (C, Np, Np) consistent
    mass_inv: np.ndarray
    node_mass: np.ndarray  # (C, Np) lumped row sums
    elem_mass: np.ndarray  # (C,)

    @property
    def dim(self) -> int:
        return self.U.shape[2] - 2

    @property
    def nu(self) -> np.ndarray:
        return self.U[..., 0]

    @property
    def vel(self) -> np.ndarray:
        return self.U[..., 1:-1]

    @property
    def tau(self) -> np.ndarray:
        return self.U[..., -1]

    def copy(self) -> "ElementField":
        return ElementField(self.U.copy(), self.mass, self.mass_inv, self.node_mass, self.elem_mass)

    def with_state(self, U) -> "ElementField":
        return ElementField(np.asarray(U), self.mass, self.mass_inv, self.node_mass, self.elem_mass)


def assemble_mass_matrices(topo: MeshTopology, x0, rho0, ref: ReferenceElement | None = None):
    """Consistent mass matrices ``m_ij = int rho0 psi_i psi_j`` on the initial mesh.

    ``rho0`` may be a per-element constant (C,) or nodal values (C, Np)
    interpolated with the element basis.

    Returns ``(mass, mass_inv, node_mass, elem_mass)``.
    """
    if ref is None:
        ref = reference_element(topo.dim, 3)
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.ndim == 1:
        rho0 = np.repeat(rho0[:, None], topo.nodes_per_elem, axis=1)
    if rho0.shape != topo.elem_to_nodes.shape:
        raise MeshError("initial density must be per element or per element node")
    if not np.all(rho0 > 0.0):
        raise ValueError("initial density must be positive")
    qd = quadrature_data(ref, topo, x0)
    rho_q = rho0 @ ref.basis.T  # (C, nq)
    w = qd.jxw * rho_q
    mass = np.einsum("cq,qi,qj->cij", w, ref.basis, ref.basis)
    det = np.linalg.det(mass)
    if not np.all(det > 0.0):
        raise MeshError(f"singular mass matrix in element {int(np.flatnonzero(~(det > 0.0))[0])}")
    mass_inv = np.linalg.inv(mass)
    node_mass = mass.sum(axis=2)
    elem_mass = node_mass.sum(axis=1)
    return mass, mass_inv, node_mass, elem_mass


def make_field(topo: MeshTopology, x0, nu, vel, tau, rho0=None, ref=None) -> ElementField:
    """Build an ``ElementField`` from nodal ``nu`` (C, Np), ``vel`` (C, Np, D), ``tau``.

    The mass matrices use ``rho0 = 1 / nu`` unless given explicitly.
    """
    nu = np.asarray(nu, dtype=float)
    U = np.concatenate([nu[..., None], np.asarray(vel, dtype=float), np.asarray(tau, dtype=float)[..., None]], axis=2)
    if rho0 is None:
        rho0 = 1.0 / nu
    mass, minv, mj, mc = assemble_mass_matrices(topo, x0, rho0, ref)
    return ElementField(U=U, mass=mass, mass_inv=minv, node_mass=mj, elem_mass=mc)


def element_average(fld: ElementField, elem: int | None = None) -> np.ndarray:
    """Mass-weighted nodal average ``(1/m_c) sum_j m_cj U_j``."""
    avg = np.einsum("cj,cjk->ck", fld.node_mass, fld.U) / fld.elem_mass[:, None]
    return avg if elem is None else avg[elem]


def corner_state(fld: ElementField, elem: int, corner: int, gamma, eos: EosParams | None = None):
    """Velocity and stress tensor ``-p I`` at one element corner (its own nodal value)."""
    Uj = fld.U[elem, corner]
    th = eval_thermo(Uj[0], Uj[1:-1], Uj[-1], np.asarray(gamma).reshape(-1)[elem % np.size(gamma)], eos)
    return Uj[1:-1].copy(), -float(th.p) * np.eye(fld.dim)


def corner_thermo(fld: ElementField, eos: EosParams) -> PointThermo:
    """Thermodynamic state at every element node, arrays (C, Np)."""
    return eval_thermo(fld.nu, fld.vel, fld.tau, eos.gamma[:, None], eos)


@dataclass
class Totals:
    mass: float
    momentum: np.ndarray
    energy: float
    momentum_consistent: np.ndarray
    energy_consistent: float


def global_totals(fld: ElementField) -> Totals:
    """Totals with lumped weights, plus the consistent-mass variants."""
    mj = fld.node_mass
    mom = np.einsum("cj,cjd->d", mj, fld.vel)
    en = float(np.sum(mj * fld.tau))
    MU = np.einsum("cij,cjk->cik", fld.mass, fld.U)
    return Totals(
        mass=float(np.sum(fld.elem_mass)),
        momentum=mom,
        energy=en,
        momentum_consistent=MU[..., 1:-1].sum(axis=(0, 1)),
        energy_consistent=float(MU[..., -1].sum()),
    )
