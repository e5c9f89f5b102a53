"""Error norms and feature extraction for the benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ElementField, element_average
from .geometry import centroids, element_volumes
from .mesh import MeshTopology
from .problems import taylor_green_velocity


@dataclass
class TaylorGreenError:
    l1_nu: float
    l2_nu: float
    l1_vel: float
    l2_vel: float


def taylor_green_error(topo: MeshTopology, x, fld: ElementField) -> TaylorGreenError:
    """Mass-weighted L1/L2 errors of element averages against the steady exact solution.

    The exact fields are sampled at the element centers of the moved mesh.
    """
    avg = element_average(fld)
    c = centroids(topo, x)
    w = fld.elem_mass / fld.elem_mass.sum()
    e_nu = avg[:, 0] - 1.0
    e_u = np.linalg.norm(avg[:, 1:3] - taylor_green_velocity(c[:, 0], c[:, 1]), axis=1)
    return TaylorGreenError(
        l1_nu=float(np.sum(w * np.abs(e_nu))),
        l2_nu=float(np.sqrt(np.sum(w * e_nu**2))),
        l1_vel=float(np.sum(w * e_u)),
        l2_vel=float(np.sqrt(np.sum(w * e_u**2))),
    )


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    return float(np.log(coarse / fine) / np.log(ratio))


@dataclass
class RadialProfile:
    radius: np.ndarray  # sorted element radii
    density: np.ndarray  # element-average densities in the same order
    shock_radius: float
    peak: float
    plateau: float
    bin_width: float


def shock_features(radius, density, mass=None, bins: int = 50, cylindrical: bool = False,
                   r_max: float | None = None) -> RadialProfile:
    """Shock radius, peak and plateau density from a radius-density scatter.

    The shock sits where the bin-averaged density drops most steeply
    outward (the front faces undisturbed gas at larger radius); the plateau
    is the mass-weighted mean density inside ``0.75`` of that radius.
    """
    radius = np.asarray(radius, dtype=float)
    density = np.asarray(density, dtype=float)
    mass = np.ones_like(radius) if mass is None else np.asarray(mass, dtype=float)
    order = np.argsort(radius, kind="stable")
    radius, density, mass = radius[order], density[order], mass[order]
    r_max = float(radius.max()) if r_max is None else r_max
    edges = np.linspace(0.0, r_max, bins + 1)
    idx = np.clip(np.searchsorted(edges, radius, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    sums = np.bincount(idx, weights=density, minlength=bins)
    with np.errstate(invalid="ignore"):
        prof = sums / counts
    filled = np.flatnonzero(counts > 0)
    peak = float(density.max())
    width = r_max / bins
    if filled.size < 2 or np.allclose(density, density[0]):
        return RadialProfile(radius, density, float("nan"), peak, float(np.average(density, weights=mass)), width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    drop = prof[filled[:-1]] - prof[filled[1:]]
    k = int(np.argmax(drop))
    shock = 0.5 * (centers[filled[k]] + centers[filled[k + 1]])
    inside = radius < 0.75 * shock
    plateau = float(np.average(density[inside], weights=mass[inside])) if inside.any() else float("nan")
    return RadialProfile(radius, density, float(shock), peak, plateau, width)


def radial_profile(topo: MeshTopology, x, fld: ElementField, cylindrical: bool = False, bins: int = 50,
                   r_max: float | None = None) -> RadialProfile:
    """Radius-density scatter of element averages; ``cylindrical`` ignores z."""
    c = centroids(topo, x)
    if cylindrical:
        c = c[:, :2]
    r = np.linalg.norm(c, axis=1)
    rho = 1.0 / element_average(fld)[:, 0]
    return shock_features(r, rho, fld.elem_mass, bins, cylindrical, r_max)


def region_masses(fld: ElementField, region) -> np.ndarray:
    region = np.asarray(region)
    return np.bincount(region, weights=fld.elem_mass)


def geometric_density(topo: MeshTopology, x, fld: ElementField) -> np.ndarray:
    """``m_c / v_c`` from the current geometry, for comparison with ``1 / nu``."""
    return fld.elem_mass / element_volumes(topo, x)
