"""Flux limiting of element averages and conservative slope limiting.

Averages: a positivity-preserving low-order update is blended with the
high-order one through antidiffusive corner fluxes ``H^B`` whose
correction factors come from Zalesak's algorithm applied to ``nu``.

Slopes: nodal deviations from the element average are clipped to local
bounds on ``nu`` and rescaled so that they still sum to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import MeshTopology


@dataclass
class CorrectionFactors:
    corner: np.ndarray  # alpha_cp, (C, Np)
    node: np.ndarray  # alpha_p, (N,)
    p_plus: np.ndarray
    p_minus: np.ndarray
    r_minus: np.ndarray


def zalesak_factors(topo: MeshTopology, hb_nu, nu_low, elem_mass, dt: float) -> CorrectionFactors:
    """Correction factors keeping the limited average ``nu`` non-negative.

    ``hb_nu`` (C, Np) are the ``nu`` components of the antidiffusive corner
    fluxes, ``nu_low`` (C,) the low-order averages.  The upper bound on
    ``nu`` is infinite, so only negative fluxes are ever limited.
    """
    hb_nu = np.asarray(hb_nu, dtype=float)
    p_plus = np.sum(np.maximum(hb_nu, 0.0), axis=1)
    p_minus = np.sum(np.minimum(hb_nu, 0.0), axis=1)
    q_minus = (np.asarray(elem_mass) / dt) * (0.0 - np.asarray(nu_low))
    # shrink the headroom by a rounding bound so the limited sum cannot dip below zero
    guard = 4 * (hb_nu.shape[1] + 2) * np.finfo(float).eps * (np.abs(q_minus) + p_plus - p_minus)
    q_minus = np.minimum(q_minus + guard, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_minus = np.where(p_minus < 0.0, np.minimum(1.0, q_minus / p_minus), 1.0)
    r_minus = np.clip(r_minus, 0.0, 1.0)
    alpha_cp = np.where(hb_nu >= 0.0, 1.0, r_minus[:, None])
    alpha_p = topo.node_min(alpha_cp)
    return CorrectionFactors(corner=alpha_cp, node=alpha_p, p_plus=p_plus, p_minus=p_minus, r_minus=r_minus)


def apply_fct(topo: MeshTopology, avg_low, hb, alpha_node, elem_mass, dt: float) -> np.ndarray:
    """``m_c U^FCT = m_c U^L + dt sum_p alpha_p H^B_cp`` for all components."""
    a = np.asarray(alpha_node)[topo.elem_to_nodes]  # (C, Np)
    corr = np.einsum("ck,ckm->cm", a, hb)
    return np.asarray(avg_low) + dt * corr / np.asarray(elem_mass)[:, None]


def shift_to_averages(U, node_mass, elem_mass, target) -> np.ndarray:
    """Add a per-element constant so the mass-weighted averages equal ``target``."""
    avg = np.einsum("cj,cjk->ck", node_mass, U) / elem_mass[:, None]
    return U + (np.asarray(target) - avg)[:, None, :]


def limited_node_velocity(u_low, u_high, alpha) -> np.ndarray:
    """``alpha u^H + (1 - alpha) u^L`` per node."""
    a = np.asarray(alpha, dtype=float)[:, None]
    return a * np.asarray(u_high) + (1.0 - a) * np.asarray(u_low)


def local_bounds(topo: MeshTopology, nu_nodes, avg_nu=None):
    """Min and max of nodal ``nu`` over all elements sharing each vertex.

    ``nu_nodes`` (C, Np) are the stencil values; optional element averages
    ``avg_nu`` (C,) are folded in so each element's own average is always
    admissible.  Returns per-(element, node) arrays (C, Np).
    """
    nu_nodes = np.asarray(nu_nodes, dtype=float)
    lo_e = nu_nodes.min(axis=1)
    hi_e = nu_nodes.max(axis=1)
    if avg_nu is not None:
        lo_e = np.minimum(lo_e, avg_nu)
        hi_e = np.maximum(hi_e, avg_nu)
    npe = topo.nodes_per_elem
    lo = topo.node_min(np.repeat(lo_e[:, None], npe, axis=1))
    hi = topo.node_max(np.repeat(hi_e[:, None], npe, axis=1))
    return lo[topo.elem_to_nodes], hi[topo.elem_to_nodes]


def _rebalance(flux):
    """Three-branch rescaling of signed fluxes (..., Np) to a zero sum."""
    pp = np.sum(np.maximum(flux, 0.0), axis=-1, keepdims=True)
    pm = np.sum(np.minimum(flux, 0.0), axis=-1, keepdims=True)
    total = pp + pm
    with np.errstate(divide="ignore", invalid="ignore"):
        scale_pos = np.where(total > 0.0, -pm / pp, 1.0)
        scale_neg = np.where(total < 0.0, -pp / pm, 1.0)
    return np.where(flux > 0.0, flux * scale_pos, flux * scale_neg)


@dataclass
class SlopeResult:
    U: np.ndarray
    ratio: np.ndarray  # per node scaling of the deviations, (C, Np)
    clipped: int


def clip_and_scale(U, node_mass, elem_mass, nu_min, nu_max) -> SlopeResult:
    """Limit nodal deviations so nodal ``nu`` stays within ``[nu_min, nu_max]``.

    The deviation fluxes ``H_j = m_j (nu_j - nu_avg)`` are clipped to the
    bounds and rescaled to sum to zero.  The resulting per-node ratio
    ``H*_j / H_j`` multiplies the deviations of every component; each
    component is then rebalanced to a zero sum so averages are untouched.
    """
    U = np.asarray(U, dtype=float)
    mj = np.asarray(node_mass)
    avg = np.einsum("cj,cjk->ck", mj, U) / np.asarray(elem_mass)[:, None]
    dev = U - avg[:, None, :]
    H = mj * dev[..., 0]
    hmin = mj * (nu_min - avg[:, 0:1])
    hmax = mj * (nu_max - avg[:, 0:1])
    Hc = np.clip(H, np.minimum(hmin, 0.0), np.maximum(hmax, 0.0))
    clipped = int(np.count_nonzero(Hc != H))
    Hs = _rebalance(Hc)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(H != 0.0, Hs / H, 1.0)
    ratio = np.clip(ratio, 0.0, 1.0)
    G = mj[..., None] * ratio[..., None] * dev  # (C, Np, m)
    G = np.moveaxis(_rebalance(np.moveaxis(G, 1, -1)), -1, 1)
    G[..., 0] = Hs
    out = avg[:, None, :] + G / mj[..., None]
    return SlopeResult(U=out, ratio=ratio, clipped=clipped)


def beta_scale(U, node_mass, elem_mass, beta, mode: str = "conservative") -> np.ndarray:
    """Contract nodal values towards the element average by ``beta``.

    ``mode="literal"`` multiplies the nodal values themselves by ``beta``,
    which changes the averages and is only offered for comparison.
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0.0) or np.any(beta > 1.0):
        raise ValueError("beta must lie in (0, 1]")
    U = np.asarray(U, dtype=float)
    b = np.broadcast_to(beta, (U.shape[0],))[:, None, None]
    if mode == "literal":
        if np.any(beta != 1.0):
            warnings.warn("literal beta scaling does not conserve element averages", RuntimeWarning, stacklevel=2)
        return b * U
    if mode != "conservative":
        raise ValueError(f"unknown beta mode {mode!r}")
    avg = np.einsum("cj,cjk->ck", node_mass, U) / np.asarray(elem_mass)[:, None]
    return avg[:, None, :] + b * (U - avg[:, None, :])
