"""Snapshot and summary writers: legacy ASCII VTK, CSV and JSON."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .fields import ElementField, EosParams, element_average, eval_thermo
from .geometry import QUAD_REF, HEX_REF, shape_functions
from .mesh import MeshTopology

VTK_QUAD = 9
VTK_HEXAHEDRON = 12


def subcell_reference_points(dim: int) -> np.ndarray:
    """Reference coordinates of the corner subcells, (Np, Np, D).

    Subcell ``k`` spans the box between reference corner ``k`` and the
    element center; its vertices follow the parent's node ordering.
    """
    ref = QUAD_REF if dim == 2 else HEX_REF
    unit = 0.5 * (ref + 1.0)  # vertex positions in [0, 1]^D
    lo = np.minimum(ref, 0.0)
    hi = np.maximum(ref, 0.0)
    return lo[:, None, :] + unit[None, :, :] * (hi - lo)[:, None, :]


def subcell_mesh(topo: MeshTopology, x):
    """Points (C * Np * Np, D) and cells (C * Np, Np) of the corner subcells."""
    dim = topo.dim
    npe = topo.nodes_per_elem
    xi = subcell_reference_points(dim).reshape(-1, dim)
    phi = shape_functions(dim, xi)  # (Np * Np, Np)
    pts = np.einsum("sp,cpa->csa", phi, np.asarray(x)[topo.elem_to_nodes]).reshape(-1, dim)
    cells = np.arange(topo.n_elems * npe * npe).reshape(topo.n_elems * npe, npe)
    return pts, cells


def cell_fields(fld: ElementField, eos: EosParams) -> dict:
    """Element-average density, velocity, pressure, internal energy and ``nu``."""
    avg = element_average(fld)
    th = eval_thermo(avg[:, 0], avg[:, 1:-1], avg[:, -1], eos.gamma, eos)
    return {
        "density": th.rho,
        "specific_volume": avg[:, 0],
        "pressure": th.p,
        "internal_energy": th.e,
        "gamma": np.broadcast_to(eos.gamma, avg[:, 0].shape),
        "velocity": avg[:, 1:-1],
    }


def corner_fields(fld: ElementField, eos: EosParams) -> dict:
    """The same quantities at element nodes, flattened to one value per subcell."""
    g = np.broadcast_to(eos.gamma[:, None], fld.nu.shape)
    th = eval_thermo(fld.nu, fld.vel, fld.tau, g, eos)
    d = fld.dim
    return {
        "density": th.rho.ravel(),
        "specific_volume": fld.nu.ravel(),
        "pressure": th.p.ravel(),
        "internal_energy": th.e.ravel(),
        "gamma": g.ravel(),
        "velocity": fld.vel.reshape(-1, d),
    }


def _pad3(v):
    v = np.asarray(v, dtype=float)
    if v.shape[1] == 3:
        return v
    return np.hstack([v, np.zeros((v.shape[0], 3 - v.shape[1]))])


def write_vtk(path, topo: MeshTopology, x, fld: ElementField, eos: EosParams, subcells: bool = False,
              time: float | None = None) -> Path:
    """Write an unstructured-grid snapshot in legacy ASCII VTK format.

    With ``subcells`` every element is split into its corner subcells, each
    carrying the nodal values of that corner; otherwise cells carry the
    element averages.
    """
    path = Path(path)
    if subcells:
        pts, cells = subcell_mesh(topo, x)
        data = corner_fields(fld, eos)
    else:
        pts, cells = np.asarray(x), topo.elem_to_nodes
        data = cell_fields(fld, eos)
    ctype = VTK_QUAD if topo.dim == 2 else VTK_HEXAHEDRON
    n_cells, npe = cells.shape
    lines = ["# vtk DataFile Version 3.0"]
    lines.append("lagdg snapshot" + ("" if time is None else f" t={time:.17g}"))
    lines += ["ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {len(pts)} double"]
    lines += [" ".join(f"{v:.17g}" for v in p) for p in _pad3(pts)]
    lines.append(f"CELLS {n_cells} {n_cells * (npe + 1)}")
    lines += [f"{npe} " + " ".join(str(int(i)) for i in c) for c in cells]
    lines.append(f"CELL_TYPES {n_cells}")
    lines += [str(ctype)] * n_cells
    lines.append(f"CELL_DATA {n_cells}")
    for name, values in data.items():
        if name == "velocity":
            continue
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in np.asarray(values, dtype=float)]
    lines.append("VECTORS velocity double")
    lines += [" ".join(f"{v:.17g}" for v in row) for row in _pad3(data["velocity"])]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_plain(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _plain(v):
    """JSON/CSV friendly scalars and lists from numpy values."""
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    obj = _plain(obj)
    if isinstance(obj, list):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, summary: dict) -> Path:
    """Summary with sorted keys so identical runs give identical bytes."""
    path = Path(path)
    text = json.dumps(_jsonable(summary), sort_keys=True, indent=2) + "\n"
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def snapshot_times(t_end: float, cadence: float) -> list[float]:
    """Output times ``0, cadence, 2 cadence, ...`` up to and including ``t_end``."""
    if cadence <= 0.0:
        return []
    n = int(np.floor(t_end / cadence + 1e-9))
    times = [round(k * cadence, 12) for k in range(n + 1)]
    if abs(t_end - times[-1]) <= 1e-9 * t_end:
        times[-1] = t_end
    else:
        times.append(t_end)
    return times


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror}") from exc
    return path
