"""Reference elements, isoparametric maps, corner (subcell) surfaces and volumes.

Corner surface vectors ``A[c, k, j]`` are the weighted area normals
``a_cpsf * n_cpsf`` of the subface ``j`` of corner ``k`` of element ``c``.
They are defined as the face integral of the corner's shape function,
``A = int_f b_k n dS``, which in 2D is exactly the outward half-edge normal
and in 3D is the basis-weighted share of a (possibly non-planar) bilinear
face.  Summed over a corner they give ``dV/dx_p`` of the element volume, so
the discrete volume rate is exact for every element shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import DegenerateGeometryError, MeshTopology, TangledElementError, local_edges, local_faces

QUAD_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
HEX_REF = np.array(
    [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ]
)


def reference_nodes(dim: int) -> np.ndarray:
    return QUAD_REF if dim == 2 else HEX_REF


def shape_functions(dim: int, xi) -> np.ndarray:
    """Bilinear/trilinear Lagrange basis at points ``xi`` (..., dim) -> (..., Np)."""
    xi = np.asarray(xi, dtype=float)
    ref = reference_nodes(dim)
    terms = 1.0 + xi[..., None, :] * ref
    return np.prod(terms, axis=-1) / 2.0**dim


def shape_gradients(dim: int, xi) -> np.ndarray:
    """Reference gradients of the basis: (..., dim) -> (..., Np, dim)."""
    xi = np.asarray(xi, dtype=float)
    ref = reference_nodes(dim)
    terms = 1.0 + xi[..., None, :] * ref
    out = np.empty(terms.shape)
    for d in range(dim):
        others = np.prod(np.delete(terms, d, axis=-1), axis=-1)
        out[..., d] = ref[:, d] * others
    return out / 2.0**dim


def gauss_rule(dim: int, n: int):
    pts, wts = np.polynomial.legendre.leggauss(n)
    grids = np.meshgrid(*([pts] * dim), indexing="ij")
    wgrid = np.meshgrid(*([wts] * dim), indexing="ij")
    xi = np.stack([g.ravel() for g in grids[::-1]], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return xi, w


@dataclass(frozen=True)
class ReferenceElement:
    dim: int
    nodes: np.ndarray
    qpoints: np.ndarray
    qweights: np.ndarray
    basis: np.ndarray  # (nq, Np)
    dbasis: np.ndarray  # (nq, Np, dim)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def reference_element(dim: int, n_points: int = 2) -> ReferenceElement:
    """Reference square/cube ``[-1, 1]^dim`` with an ``n_points``-per-axis Gauss rule."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    xi, w = gauss_rule(dim, n_points)
    return ReferenceElement(
        dim=dim,
        nodes=reference_nodes(dim),
        qpoints=xi,
        qweights=w,
        basis=shape_functions(dim, xi),
        dbasis=shape_gradients(dim, xi),
    )


@dataclass
class MappingEval:
    jacobian: np.ndarray
    det: np.ndarray
    inverse: np.ndarray


def evaluate_mapping(ref: ReferenceElement, topo: MeshTopology, x, elem: int, xi) -> MappingEval:
    """Jacobian ``J = sum_p x_p (grad_xi b_p)^T`` of one element at reference point ``xi``."""
    xe = np.asarray(x)[topo.elem_to_nodes[elem]]
    dB = shape_gradients(ref.dim, xi)
    J = np.einsum("pa,pb->ab", xe, dB)
    det = float(np.linalg.det(J))
    if not det > 0.0:
        raise TangledElementError(f"element {elem}: det J = {det:.3e} at xi = {np.asarray(xi).tolist()}")
    return MappingEval(jacobian=J, det=det, inverse=np.linalg.inv(J))


def map_coordinates(ref: ReferenceElement, topo: MeshTopology, x) -> np.ndarray:
    """Physical positions of the quadrature points, (C, nq, D)."""
    xe = np.asarray(x)[topo.elem_to_nodes]
    return np.einsum("qp,cpa->cqa", ref.basis, xe)


@dataclass
class QuadratureData:
    """Per-element quadrature data on the current geometry."""

    xq: np.ndarray  # (C, nq, D)
    detj: np.ndarray  # (C, nq)
    grad: np.ndarray  # (C, nq, Np, D) physical basis gradients
    weights: np.ndarray  # (nq,)

    @property
    def jxw(self) -> np.ndarray:
        return self.detj * self.weights


def _jacobians(xe, dbasis):
    """``J[c, q] = dx/dxi`` from element node coordinates (C, Np, D)."""
    return np.swapaxes(xe, 1, 2)[:, None] @ dbasis[None]


def quadrature_data(ref: ReferenceElement, topo: MeshTopology, x, check: bool = True) -> QuadratureData:
    xe = np.asarray(x)[topo.elem_to_nodes]
    J = _jacobians(xe, ref.dbasis)
    if ref.dim == 2:
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 1, 1] = J[..., 0, 0]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv /= det[..., None, None]
    else:
        # rows of the inverse are cross products of the Jacobian columns
        c0, c1, c2 = J[..., 0], J[..., 1], J[..., 2]
        adj = np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-2)
        det = np.einsum("...a,...a->...", c0, adj[..., 0, :])
        inv = adj / det[..., None, None]
    if check and not np.all(det > 0.0):
        c, q = np.argwhere(~(det > 0.0))[0]
        raise TangledElementError(
            f"element {int(c)}: det J = {det[c, q]:.3e} at xi = {ref.qpoints[q].tolist()}"
        )
    grad = ref.dbasis[None] @ inv
    xq = ref.basis[None] @ xe
    return QuadratureData(xq=xq, detj=det, grad=grad, weights=ref.qweights)


# ---------------------------------------------------------------------------
# corner surfaces

_FACE_QP, _FACE_QW = gauss_rule(2, 2)
_FACE_REF = QUAD_REF
_FACE_PHI = shape_functions(2, _FACE_QP)  # (4 qp, 4 slots)
_FACE_DPHI = shape_gradients(2, _FACE_QP)  # (4 qp, 4 slots, 2)
_FACE_MASS_QW = np.einsum("g,gs,gt->gst", _FACE_QW, _FACE_PHI, _FACE_PHI)


def face_vectors(topo: MeshTopology, x) -> np.ndarray:
    """Basis-weighted face vectors ``int_f b_s n dS`` per (element, face, slot)."""
    x = np.asarray(x)
    fx = x[topo.elem_to_nodes][:, local_faces(topo.dim)]  # (C, nf, nfn, D)
    if topo.dim == 2:
        edge = fx[:, :, 1] - fx[:, :, 0]
        half = 0.5 * np.stack([edge[..., 1], -edge[..., 0]], axis=-1)
        return np.repeat(half[:, :, None, :], 2, axis=2)
    xs = np.einsum("gs,cfsa->cfga", _FACE_DPHI[..., 0], fx)
    xt = np.einsum("gs,cfsa->cfga", _FACE_DPHI[..., 1], fx)
    N = np.cross(xs, xt)
    return np.einsum("gs,cfga->cfsa", _FACE_QW[:, None] * _FACE_PHI, N, optimize=True)


def corner_vectors(topo: MeshTopology, x, blocks=None) -> np.ndarray:
    """Weighted area normals ``a n`` per corner subface, shape (C, Np, nfc, D).

    ``blocks`` from ``face_mass_blocks`` may be passed to reuse the face integrals.
    """
    fv = face_vectors(topo, x) if blocks is None else blocks.sum(axis=2)
    return fv[:, topo.corner_faces, topo.corner_face_slot]


def face_mass_blocks(topo: MeshTopology, x) -> np.ndarray:
    """Face integrals ``int_f b_s b_t n dS`` per (element, face, slot s, slot t), (C, nf, nfn, nfn, D)."""
    x = np.asarray(x)
    fx = x[topo.elem_to_nodes][:, local_faces(topo.dim)]  # (C, nf, nfn, D)
    if topo.dim == 2:
        edge = fx[:, :, 1] - fx[:, :, 0]
        normal = np.stack([edge[..., 1], -edge[..., 0]], axis=-1)
        return np.einsum("st,cfa->cfsta", _EDGE_MASS, normal)
    xs = np.einsum("gs,cfsa->cfga", _FACE_DPHI[..., 0], fx)
    xt = np.einsum("gs,cfsa->cfga", _FACE_DPHI[..., 1], fx)
    N = np.cross(xs, xt)
    return np.einsum("gst,cfga->cfsta", _FACE_MASS_QW, N, optimize=True)


def face_mass_vectors(topo: MeshTopology, x, blocks=None) -> np.ndarray:
    """Element surface mass vectors ``G[c, i, p] = int_{boundary} b_i b_p n dS``, (C, Np, Np, D).

    Contracting ``G`` with nodal values ``q_p`` integrates ``b_i q_h . n``
    exactly for the bilinear trace ``q_h``; ``G.sum(axis=1)`` gives the
    corner vectors summed over each corner's faces.
    """
    gf = face_mass_blocks(topo, x) if blocks is None else blocks
    faces = local_faces(topo.dim)
    npe = topo.nodes_per_elem
    G = np.zeros((topo.n_elems, npe * npe, topo.dim))
    nfn = faces.shape[1]
    for f, nodes in enumerate(faces):
        G[:, (nodes[:, None] * npe + nodes[None, :]).ravel()] += gf[:, f].reshape(-1, nfn * nfn, topo.dim)
    return G.reshape(topo.n_elems, npe, npe, topo.dim)


_EDGE_MASS = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])


# bilinear face basis at the quadrant centroids: own corner, edge neighbours, opposite
_QUADRANT_WEIGHTS = np.array(
    [[9.0, 3.0, 1.0, 3.0], [3.0, 9.0, 3.0, 1.0], [1.0, 3.0, 9.0, 3.0], [3.0, 1.0, 3.0, 9.0]]
) / 16.0
_QUADRANT_INV = np.linalg.inv(_QUADRANT_WEIGHTS)


def force_vectors(topo: MeshTopology, x) -> np.ndarray:
    """Subface vectors used by the nodal solver, shape (C, Np, nfc, D).

    In 2D they equal the corner vectors.  In 3D the four vectors ``B`` of a
    face solve ``W B = A`` with ``W`` the quadrant-centroid values of the
    face basis, so that one-point centroid quadrature of a constant flux
    reproduces the exact basis-weighted integrals ``A``.  For parallelogram
    faces ``B`` is the vector area of each quarter face.
    """
    if topo.dim == 2:
        return corner_vectors(topo, x)
    fv = face_vectors(topo, x)
    fb = np.einsum("st,cfta->cfsa", _QUADRANT_INV, fv)
    return fb[:, topo.corner_faces, topo.corner_face_slot]


def time_centered_vectors(topo: MeshTopology, x0, x1) -> np.ndarray:
    """Corner vectors averaged over straight-line node motion from ``x0`` to ``x1``.

    In 2D the vectors are linear in the coordinates and the two-level average
    is exact; in 3D they are quadratic and Simpson's rule is used.
    """
    if topo.dim == 2:
        return 0.5 * (corner_vectors(topo, x0) + corner_vectors(topo, x1))
    xm = 0.5 * (np.asarray(x0) + np.asarray(x1))
    return (corner_vectors(topo, x0) + 4.0 * corner_vectors(topo, xm) + corner_vectors(topo, x1)) / 6.0


@dataclass
class CornerSurface:
    vectors: np.ndarray  # (C, Np, nfc, D) = a * n
    area: np.ndarray  # (C, Np, nfc)
    normal: np.ndarray  # (C, Np, nfc, D)
    centroid: np.ndarray  # (C, Np, nfc, D)
    boundary: np.ndarray  # (C, Np, nfc) bool, subface lies on the domain boundary


def compute_corner_surfaces(topo: MeshTopology, x, check: bool = True) -> CornerSurface:
    x = np.asarray(x)
    vec = corner_vectors(topo, x)
    area = np.linalg.norm(vec, axis=-1)
    if check and not np.all(area > 0.0):
        c, k, j = np.argwhere(~(area > 0.0))[0]
        raise DegenerateGeometryError(
            f"zero-area subface: element {int(c)}, node {int(topo.elem_to_nodes[c, k])}, subface {int(j)}"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = vec / area[..., None]
    faces = local_faces(topo.dim)
    xe = x[topo.elem_to_nodes]
    fx = xe[:, faces]  # (C, nf, nfn, D)
    fcent = fx.mean(axis=2)
    cent = np.empty(vec.shape)
    for k in range(topo.nodes_per_elem):
        for j, f in enumerate(topo.corner_faces[k]):
            s = topo.corner_face_slot[k, j]
            nfn = faces.shape[1]
            xp = fx[:, f, s]
            if topo.dim == 2:
                xq = fx[:, f, (s + 1) % nfn]
                cent[:, k, j] = xp + 0.25 * (xq - xp)
            else:
                m1 = 0.5 * (xp + fx[:, f, (s + 1) % nfn])
                m2 = 0.5 * (xp + fx[:, f, (s - 1) % nfn])
                cent[:, k, j] = 0.25 * (xp + m1 + m2 + fcent[:, f])
    boundary = topo.boundary_faces[:, topo.corner_faces]
    return CornerSurface(vectors=vec, area=area, normal=normal, centroid=cent, boundary=boundary)


# ---------------------------------------------------------------------------
# volumes


def element_volumes(topo: MeshTopology, x, ref: ReferenceElement | None = None) -> np.ndarray:
    """Signed geometric volumes of all elements.

    2D: shoelace formula. 3D: exact volume of the trilinear map, the
    integral of det J (2-point Gauss per axis is exact for it).
    """
    xe = np.asarray(x)[topo.elem_to_nodes]
    if topo.dim == 2:
        xs, ys = xe[..., 0], xe[..., 1]
        return 0.5 * np.sum(xs * np.roll(ys, -1, axis=1) - np.roll(xs, -1, axis=1) * ys, axis=1)
    if ref is None or ref.dim != 3 or ref.qweights.size < 8:
        ref = reference_element(3, 2)
    J = _jacobians(xe, ref.dbasis)
    return np.linalg.det(J) @ ref.qweights


def element_volume_geometric(topo: MeshTopology, x, elem: int) -> float:
    v = float(element_volumes(topo, np.asarray(x), None)[elem])
    if not v > 0.0:
        raise TangledElementError(f"element {elem}: non-positive volume {v:.3e}")
    return v


def check_orientation(topo: MeshTopology, x) -> None:
    vol = element_volumes(topo, x)
    bad = np.flatnonzero(~(vol > 0.0))
    if bad.size:
        raise TangledElementError(
            f"element {int(bad[0])}: non-positive signed volume {vol[bad[0]]:.3e} (check node ordering)"
        )
    if topo.dim == 3:
        quadrature_data(reference_element(3, 2), topo, x, check=True)


def min_edge_length(topo: MeshTopology, x) -> np.ndarray:
    xe = np.asarray(x)[topo.elem_to_nodes]
    edges = local_edges(topo.dim)
    lengths = np.linalg.norm(xe[:, edges[:, 1]] - xe[:, edges[:, 0]], axis=-1)
    return lengths.min(axis=1)


def centroids(topo: MeshTopology, x) -> np.ndarray:
    """Vertex-average element centers (the image of the reference center)."""
    return np.asarray(x)[topo.elem_to_nodes].mean(axis=1)


# ---------------------------------------------------------------------------
# node motion and the discrete GCL


def move_nodes(x, velocities, dt: float) -> np.ndarray:
    return np.asarray(x) + dt * np.asarray(velocities)


def volume_rate(topo: MeshTopology, vectors, velocities) -> np.ndarray:
    """``sum_p sum_sf a n . u_p`` per element."""
    u = np.asarray(velocities)[topo.elem_to_nodes]  # (C, Np, D)
    return np.einsum("ckja,cka->c", vectors, u)


def gcl_volume_update(volumes, topo: MeshTopology, vectors, velocities, dt: float) -> np.ndarray:
    """Advance algebraic volumes by the discrete GCL with the given corner vectors."""
    new = np.asarray(volumes) + dt * volume_rate(topo, vectors, velocities)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite algebraic volume")
    return new


def forward_euler_gcl_defect(xe, ue, dt: float) -> float:
    """Predicted ``v(x + dt u) - [v(x) + dt sum u . A(x)]`` for one 2D polygon.

    Sum over nodes of the quarter-dt^2 neighbour velocity-difference terms
    that a forward Euler step leaves out of the time integral of the
    coordinate differences.
    """
    ue = np.asarray(ue, dtype=float)
    ux, uy = ue[:, 0], ue[:, 1]
    nxt = np.roll(np.arange(len(ux)), -1)
    prv = np.roll(np.arange(len(ux)), 1)
    q = 0.25 * dt * dt
    return float(np.sum(ux * q * (uy[nxt] - uy[prv]) + uy * q * (ux[prv] - ux[nxt])))
