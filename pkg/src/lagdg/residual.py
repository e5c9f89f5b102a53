"""Semi-discrete DG right-hand side ``M dU/dt = R``.

With the flux ``H = (-u, p I, p u)`` the residual of test function ``i`` is

    R_i = int grad(psi_i) . H(U_h) dw  -  int_{boundary} psi_i H* . n ds  +  sources,

where the surface flux comes from the nodal Riemann solution: per corner
subface the ``nu`` row receives ``A . u*``, the momentum rows the corner force
``F*`` and the energy row its power ``F* . u*``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ElementField, EosParams, eval_thermo
from .geometry import QuadratureData, ReferenceElement
from .mesh import MeshTopology
from .riemann import NodalRiemannResult


def surface_weights(topo: MeshTopology, rule: str = "galerkin") -> np.ndarray:
    """Subface distribution weights ``W[k, j, i]``: share of subface ``j`` of corner ``k`` given to node ``i``.

    ``"galerkin"`` uses the face mass ratios ``int b_i b_k / int b_k``
    (2/3 and 1/3 on an edge; 4/9, 2/9, 2/9, 1/9 on a face); it spreads the
    dissipative part of the corner forces while the pressure and velocity
    traces are integrated exactly (see ``assemble_rhs``).  ``"centroid"``
    samples the subface centroid (3/4, 1/4 and 9/16, 3/16, 3/16, 1/16) and
    is free-stream exact with ``geometry.force_vectors``.  ``"vertex"``
    samples the corner node and is exact with ``geometry.corner_vectors``.
    """
    if rule not in ("galerkin", "vertex", "centroid"):
        raise ValueError(f"unknown surface rule {rule!r}")
    return _weights(topo, rule)


_RULE_WEIGHTS = {
    "centroid": {2: (0.75, 0.25, 0.0), 3: (9.0 / 16.0, 3.0 / 16.0, 1.0 / 16.0)},
    "galerkin": {2: (2.0 / 3.0, 1.0 / 3.0, 0.0), 3: (4.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0)},
}


def _weights(topo: MeshTopology, rule: str) -> np.ndarray:
    npe = topo.nodes_per_elem
    nfc = topo.corner_faces.shape[1]
    faces = topo.faces
    nfn = faces.shape[1]
    W = np.zeros((npe, nfc, npe))
    for k in range(npe):
        for j in range(nfc):
            if rule == "vertex":
                W[k, j, k] = 1.0
                continue
            f = topo.corner_faces[k, j]
            s = topo.corner_face_slot[k, j]
            own, side, far = _RULE_WEIGHTS[rule][topo.dim]
            if topo.dim == 2:
                W[k, j, k] = own
                W[k, j, faces[f][1 - s]] = side
            else:
                W[k, j, k] = own
                W[k, j, faces[f][(s + 1) % nfn]] = side
                W[k, j, faces[f][(s - 1) % nfn]] = side
                W[k, j, faces[f][(s + 2) % nfn]] = far
    return W


def volume_integral(fld: ElementField, qd: QuadratureData, ref: ReferenceElement, eos: EosParams) -> np.ndarray:
    """``int grad(psi_i) . H(U_h)`` for all elements, (C, Np, D + 2)."""
    Uq = np.einsum("qj,cjk->cqk", ref.basis, fld.U)
    vq = Uq[..., 1:-1]
    th = eval_thermo(Uq[..., 0], vq, Uq[..., -1], eos.gamma[:, None], eos)
    gw = qd.grad * qd.jxw[..., None, None]  # (C, nq, Np, D)
    out = np.empty(fld.U.shape)
    out[..., 0] = -np.einsum("cqid,cqd->ci", gw, vq)
    out[..., 1:-1] = np.einsum("cqid,cq->cid", gw, th.p)
    out[..., -1] = np.einsum("cqid,cqd->ci", gw, th.p[..., None] * vq)
    return out


def corner_fluxes(topo: MeshTopology, riemann: NodalRiemannResult, vectors):
    """Per-subface surface fluxes ``(A . u*, F*, F* . u*)``, (C, Np, nfc, D + 2).

    ``vectors`` must be the subface vectors used in the nodal solve.
    """
    us = riemann.u_star[topo.elem_to_nodes][:, :, None, :]
    F = riemann.forces
    return np.concatenate(
        [np.sum(vectors * us, axis=-1, keepdims=True), F, np.sum(F * us, axis=-1, keepdims=True)], axis=-1
    )


def surface_integral(sub_flux, weights) -> np.ndarray:
    """Distribute subface fluxes to the element's test functions, (C, Np, D + 2)."""
    return spread(weights, sub_flux)


def taylor_green_source(x, y, rho0: float = 1.0, gamma: float = 5.0 / 3.0):
    """Energy source that keeps the Taylor-Green vortex a steady solution."""
    pi = np.pi
    bracket = np.cos(3 * pi * x) * np.cos(pi * y) - np.cos(pi * x) * np.cos(3 * pi * y)
    return (pi / 4.0) * rho0**3 / (gamma - 1.0) * bracket


def source_term_taylor_green(qd: QuadratureData, ref: ReferenceElement, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """``int psi_i S_E dw`` at the current quadrature points, (C, Np)."""
    s = taylor_green_source(qd.xq[..., 0], qd.xq[..., 1], 1.0, gamma)
    return np.einsum("cq,qi->ci", s * qd.jxw, ref.basis)


@dataclass
class Residual:
    rhs: np.ndarray  # (C, Np, D + 2)
    corner_flux: np.ndarray  # (C, Np, D + 2): subface fluxes summed per corner
    source: np.ndarray  # (C, Np, D + 2)

    @property
    def average_rate(self) -> np.ndarray:
        """``sum_i R_i`` per element: the element-average update times ``m_c``."""
        return self.corner_flux.sum(axis=1) + self.source.sum(axis=1)


def _face_scatter(topo: MeshTopology) -> np.ndarray:
    """One-hot map (nf, nfn, Np) from face slots to element nodes."""
    faces = topo.faces
    S = np.zeros(faces.shape + (topo.nodes_per_elem,))
    for f, nodes in enumerate(faces):
        S[f, np.arange(nodes.size), nodes] = 1.0
    return S


def spread(weights, sub) -> np.ndarray:
    """``out[c, i] = sum_kj W[k, j, i] sub[c, k, j]`` for (C, Np, nfc, ...) subface data."""
    C, npe, nfc = sub.shape[:3]
    flat = sub.reshape(C, npe * nfc, -1)
    out = weights.reshape(npe * nfc, npe).T[None] @ flat
    return out.reshape((C, npe) + sub.shape[3:])


def galerkin_surface(topo: MeshTopology, riemann: NodalRiemannResult, pressure, vectors, blocks, weights):
    """Surface terms with exactly integrated traces, (C, Np, D + 2).

    The ``nu`` row integrates the bilinear trace of ``u*``, the momentum
    and energy rows the element's own pressure trace and ``p u*``; only the
    dissipative remainder ``F* + p A`` of each corner force is spread with
    ``weights``.  ``blocks`` are the face integrals of
    ``geometry.face_mass_blocks``; element sums equal the corner fluxes
    exactly because the blocks sum to the corner vectors.
    """
    faces = topo.faces
    us = riemann.u_star[topo.elem_to_nodes]
    us_f = us[:, faces]  # (C, nf, nfn, D)
    p_f = pressure[:, faces]
    diss = riemann.forces + pressure[..., None, None] * vectors
    C, nf, nfn, dim = us_f.shape
    flat = blocks.reshape(C, nf, nfn, nfn * dim)
    face = np.empty((C, nf, nfn, dim + 2))
    face[..., 0] = (flat @ us_f.reshape(C, nf, nfn * dim, 1))[..., 0]
    face[..., 1:-1] = -(np.swapaxes(blocks, 3, 4) @ p_f[:, :, None, :, None])[..., 0]
    face[..., -1] = -(flat @ (p_f[..., None] * us_f).reshape(C, nf, nfn * dim, 1))[..., 0]
    out = face.reshape(C, nf * nfn, dim + 2).swapaxes(1, 2) @ _face_scatter(topo).reshape(nf * nfn, -1)
    out = out.swapaxes(1, 2)
    out[..., 1:-1] += spread(weights, diss)
    out[..., -1] += spread(weights, np.einsum("ckjd,ckd->ckj", diss, us))
    return out


def assemble_rhs(
    topo: MeshTopology,
    fld: ElementField,
    eos: EosParams,
    qd: QuadratureData,
    ref: ReferenceElement,
    riemann: NodalRiemannResult,
    vectors,
    weights,
    energy_source=None,
    blocks=None,
    pressure=None,
) -> Residual:
    """Volume plus surface plus source residual and the per-corner average fluxes.

    With face ``blocks`` (and the corner ``pressure`` used in the nodal
    solve) the surface terms come from ``galerkin_surface``; otherwise the
    whole subface flux is spread with ``weights``, and ``vectors`` and
    ``weights`` must be a free-stream exact pair (see ``surface_weights``).
    ``energy_source`` is an optional callable ``(qd, ref) -> (C, Np)``.
    """
    sub = corner_fluxes(topo, riemann, vectors)
    src = np.zeros(fld.U.shape)
    if energy_source is not None:
        src[..., -1] = energy_source(qd, ref)
    if blocks is not None:
        surf = galerkin_surface(topo, riemann, pressure, vectors, blocks, weights)
    else:
        surf = surface_integral(sub, weights)
    rhs = volume_integral(fld, qd, ref, eos) + surf + src
    return Residual(rhs=rhs, corner_flux=sub.sum(axis=2), source=src)
