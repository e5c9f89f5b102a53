"""Mesh topology, structured generators and the plain-text mesh format.

Elements are linear quadrilaterals (2D, counterclockwise node order) or
trilinear hexahedra (3D, bottom face counterclockwise seen from +z, then the
top face in the same order).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Invalid mesh input or inadmissible geometry."""


class DegenerateGeometryError(MeshError):
    pass


class TangledElementError(MeshError):
    pass


# Local faces with outward orientation (right-hand rule on the node cycle).
QUAD_FACES = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
HEX_FACES = np.array(
    [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [1, 2, 6, 5],
        [2, 3, 7, 6],
        [3, 0, 4, 7],
    ]
)
QUAD_EDGES = QUAD_FACES
HEX_EDGES = np.array(
    [[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4], [0, 4], [1, 5], [2, 6], [3, 7]]
)


def local_faces(dim: int) -> np.ndarray:
    return QUAD_FACES if dim == 2 else HEX_FACES


def local_edges(dim: int) -> np.ndarray:
    return QUAD_EDGES if dim == 2 else HEX_EDGES


def _corner_face_table(faces: np.ndarray, n_corners: int):
    """For each local corner, the faces touching it and the corner's slot in each."""
    face_ids = [[] for _ in range(n_corners)]
    slots = [[] for _ in range(n_corners)]
    for f, nodes in enumerate(faces):
        for s, k in enumerate(nodes):
            face_ids[k].append(f)
            slots[k].append(s)
    return np.array(face_ids), np.array(slots)


@dataclass(frozen=True)
class MeshTopology:
    """Immutable element/node adjacency of a conforming quad or hex mesh.

    ``corner_faces[k]`` lists the local faces F(c, p) touching local corner k;
    it is the same for every element since all elements share one type.
    Node-to-element adjacency C(p) is stored in CSR form.
    """

    elem_to_nodes: np.ndarray
    n_nodes: int
    dim: int
    node_elem_ptr: np.ndarray
    node_elem_ids: np.ndarray
    node_elem_corner: np.ndarray
    corner_faces: np.ndarray
    corner_face_slot: np.ndarray
    face_neighbor: np.ndarray
    boundary_nodes: np.ndarray

    @property
    def n_elems(self) -> int:
        return self.elem_to_nodes.shape[0]

    @property
    def nodes_per_elem(self) -> int:
        return self.elem_to_nodes.shape[1]

    @property
    def dofs_per_elem(self) -> int:
        # linear nodal DG: one unknown per vertex
        return self.elem_to_nodes.shape[1]

    @property
    def faces(self) -> np.ndarray:
        return local_faces(self.dim)

    @property
    def boundary_faces(self) -> np.ndarray:
        return self.face_neighbor < 0

    def elems_of(self, node: int) -> np.ndarray:
        lo, hi = self.node_elem_ptr[node], self.node_elem_ptr[node + 1]
        return self.node_elem_ids[lo:hi]

    def corners_of(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        """(element ids, local corner index) pairs of all corners at ``node``."""
        lo, hi = self.node_elem_ptr[node], self.node_elem_ptr[node + 1]
        return self.node_elem_ids[lo:hi], self.node_elem_corner[lo:hi]

    def corner_face_ids(self, elem: int, node: int) -> np.ndarray:
        k = int(np.flatnonzero(self.elem_to_nodes[elem] == node)[0])
        return self.corner_faces[k]

    def scatter(self, corner_values: np.ndarray) -> np.ndarray:
        """Sum per-corner values (C, Np, ...) onto nodes -> (N, ...)."""
        flat_nodes = self.elem_to_nodes.ravel()
        vals = corner_values.reshape(flat_nodes.size, -1)
        out = np.empty((self.n_nodes, vals.shape[1]))
        for j in range(vals.shape[1]):
            out[:, j] = np.bincount(flat_nodes, weights=vals[:, j], minlength=self.n_nodes)
        return out.reshape((self.n_nodes,) + corner_values.shape[2:])

    def node_min(self, corner_values: np.ndarray) -> np.ndarray:
        out = np.full(self.n_nodes, np.inf)
        np.minimum.at(out, self.elem_to_nodes.ravel(), corner_values.ravel())
        return out

    def node_max(self, corner_values: np.ndarray) -> np.ndarray:
        out = np.full(self.n_nodes, -np.inf)
        np.maximum.at(out, self.elem_to_nodes.ravel(), corner_values.ravel())
        return out


def build_topology(elem_node_lists, n_nodes: int | None = None, coords=None) -> MeshTopology:
    """Build adjacency from element node lists.

    If ``coords`` is given, every element's orientation is validated (positive
    signed volume); no reordering is attempted.
    """
    elems = np.asarray(elem_node_lists, dtype=np.int64)
    if elems.ndim != 2 or elems.shape[1] not in (4, 8):
        raise MeshError("elements must be quads (4 nodes) or hexes (8 nodes)")
    dim = 2 if elems.shape[1] == 4 else 3
    if n_nodes is None:
        n_nodes = int(elems.max()) + 1 if elems.size else 0
    if elems.size and (elems.min() < 0 or elems.max() >= n_nodes):
        raise MeshError("node index out of range")
    srt = np.sort(elems, axis=1)
    dup = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
    if dup.any():
        raise MeshError(f"duplicate node in element {int(np.flatnonzero(dup)[0])}")

    n_elems, npe = elems.shape
    flat = elems.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n_nodes)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    node_elem_ids = order // npe
    node_elem_corner = order % npe

    faces = local_faces(dim)
    corner_faces, corner_slot = _corner_face_table(faces, npe)

    nf = faces.shape[0]
    face_keys = np.sort(elems[:, faces], axis=2).reshape(n_elems * nf, -1)
    _, inverse, fcount = np.unique(face_keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if np.any(fcount > 2):
        raise MeshError("non-manifold mesh: face shared by more than two elements")
    face_neighbor = np.full(n_elems * nf, -1, dtype=np.int64)
    by_key = np.argsort(inverse, kind="stable")
    keys_sorted = inverse[by_key]
    same = np.flatnonzero(keys_sorted[1:] == keys_sorted[:-1])
    a, b = by_key[same], by_key[same + 1]
    face_neighbor[a] = b // nf
    face_neighbor[b] = a // nf
    face_neighbor = face_neighbor.reshape(n_elems, nf)

    boundary_nodes = np.zeros(n_nodes, dtype=bool)
    boundary_nodes[elems[:, faces][face_neighbor < 0].ravel()] = True

    topo = MeshTopology(
        elem_to_nodes=elems,
        n_nodes=n_nodes,
        dim=dim,
        node_elem_ptr=ptr,
        node_elem_ids=node_elem_ids,
        node_elem_corner=node_elem_corner,
        corner_faces=corner_faces,
        corner_face_slot=corner_slot,
        face_neighbor=face_neighbor,
        boundary_nodes=boundary_nodes,
    )
    if coords is not None:
        from .geometry import check_orientation

        check_orientation(topo, np.asarray(coords, dtype=float))
    return topo


def structured_mesh(lower, upper, shape):
    """Uniform Cartesian quad/hex mesh of the box ``[lower, upper]``.

    Returns ``(coords, elems)``; node index runs fastest in x.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    shape = tuple(int(s) for s in shape)
    dim = len(shape)
    if dim not in (2, 3) or lower.size != dim or upper.size != dim:
        raise MeshError("structured_mesh needs matching 2D or 3D extents and shape")
    if any(s < 1 for s in shape):
        raise MeshError("resolution must be positive")
    axes = [np.linspace(lower[d], upper[d], shape[d] + 1) for d in range(dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    # x fastest: transpose so that ravel in C order walks x first
    coords = np.stack([g.transpose(tuple(range(dim))[::-1]).ravel() for g in grids], axis=1)
    npts = [s + 1 for s in shape]

    def nid(i, j, k=0):
        return i + npts[0] * (j + npts[1] * k)

    if dim == 2:
        i, j = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="xy")
        i, j = i.ravel(), j.ravel()
        elems = np.stack([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)], axis=1)
    else:
        k, j, i = np.meshgrid(np.arange(shape[2]), np.arange(shape[1]), np.arange(shape[0]), indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
        elems = np.stack(
            [
                nid(i, j, k),
                nid(i + 1, j, k),
                nid(i + 1, j + 1, k),
                nid(i, j + 1, k),
                nid(i, j, k + 1),
                nid(i + 1, j, k + 1),
                nid(i + 1, j + 1, k + 1),
                nid(i, j + 1, k + 1),
            ],
            axis=1,
        )
    return coords, elems.astype(np.int64)


def perturb_interior(coords, topo: MeshTopology, amplitude: float, rng) -> np.ndarray:
    """Randomly displace interior nodes by up to ``amplitude`` per coordinate."""
    out = np.array(coords, dtype=float)
    inner = ~topo.boundary_nodes
    out[inner] += rng.uniform(-amplitude, amplitude, size=(int(inner.sum()), topo.dim))
    return out


def read_mesh(path):
    """Read the plain-text format: ``dim n_nodes n_elems``, node lines, element lines."""
    path = Path(path)
    lines = [ln.split("#", 1)[0].strip() for ln in path.read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MeshError(f"{path}: empty mesh file")
    try:
        dim, n_nodes, n_elems = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise MeshError(f"{path}: bad header {lines[0]!r}") from exc
    if dim not in (2, 3):
        raise MeshError(f"{path}: dimension must be 2 or 3")
    if len(lines) != 1 + n_nodes + n_elems:
        raise MeshError(f"{path}: expected {n_nodes} node and {n_elems} element lines")
    coords = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + n_nodes]])
    if coords.shape != (n_nodes, dim):
        raise MeshError(f"{path}: node lines must have {dim} coordinates")
    elems = np.array([[int(v) for v in ln.split()] for ln in lines[1 + n_nodes :]], dtype=np.int64)
    if elems.shape != (n_elems, 4 if dim == 2 else 8):
        raise MeshError(f"{path}: element lines must list {4 if dim == 2 else 8} nodes")
    return coords, elems


def write_mesh(path, coords, elems) -> None:
    coords = np.asarray(coords)
    elems = np.asarray(elems)
    out = [f"{coords.shape[1]} {coords.shape[0]} {elems.shape[0]}"]
    out += [" ".join(repr(float(v)) for v in row) for row in coords]
    out += [" ".join(str(int(v)) for v in row) for row in elems]
    Path(path).write_text("\n".join(out) + "\n")
