import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagdg.config import ConfigError, RunConfig, format_config, load_config, parse_config, validate
from lagdg.io import snapshot_times, subcell_mesh, write_csv, write_json, write_vtk
from lagdg.problems import init_noh, init_sedov
from lagdg.runner import run


def test_defaults_applied():
    cfg = parse_config("[problem]\nproblem = noh\ndimension = 2\nresolution = 30\n")
    assert cfg.problem == "noh" and cfg.shape() == (30, 30)
    assert cfg.cfl == 0.25 and cfg.beta_c == 1.0 and cfg.fct and cfg.slope


def test_beta_out_of_range_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("[problem]\nproblem = noh\n\n[limiter]\nbeta_c = 1.2\n")
    assert info.value.line == 5
    assert "beta_c" in str(info.value)


def test_literal_beta_sets_warning_flag():
    cfg = parse_config("[limiter]\nbeta_mode = literal\nbeta_c = 0.8\n")
    assert cfg.literal_beta_warning
    assert not parse_config("[limiter]\nbeta_mode = literal\n").literal_beta_warning


@pytest.mark.parametrize(
    "text, line",
    [
        ("[problem]\nproblemo = noh\n", 2),
        ("[solver]\nproblem = noh\n", 2),
        ("[problem]\ndimension = two\n", 2),
        ("[weird]\nx = 1\n", 1),
        ("problem = noh\n", 1),
        ("[problem]\nproblem = noh\nproblem = sedov\n", 3),
        ("[solver]\ncfl = 0\n", 2),
        ("[limiter]\nfct = maybe\n", 2),
    ],
)
def test_rejections_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line


@pytest.mark.parametrize(
    "text",
    [
        "[problem]\nproblem = taylor_green\ndimension = 3\n",
        "[problem]\nproblem = noh\nresolution = 8x9\n",
        "[problem]\nproblem = noh\ne0 = 0.3\n",
        "[problem]\nproblem = noh\ndistortion = 0.1\n",
        "[problem]\nproblem = triple_point\nresolution = 15x8\n",
        "[problem]\nproblem = sedov\ndimension = 2\nresolution = 4x4x4\n",
    ],
)
def test_cross_field_rejections(text):
    with pytest.raises(ConfigError):
        parse_config(text)


configs = st.builds(
    RunConfig,
    problem=st.sampled_from(["sedov", "noh", "uniform"]),
    dimension=st.sampled_from([2, 3]),
    resolution=st.integers(1, 64).map(lambda n: (n,)),
    t_end=st.one_of(st.none(), st.floats(1e-3, 10.0)),
    cfl=st.floats(0.01, 0.99),
    riemann_iterations=st.integers(1, 10),
    shock_coefficient=st.one_of(st.none(), st.floats(0.0, 5.0)),
    surface_rule=st.sampled_from(["galerkin", "centroid", "vertex"]),
    fct=st.booleans(),
    slope=st.booleans(),
    beta_c=st.floats(0.05, 1.0),
    beta_mode=st.sampled_from(["conservative", "literal"]),
    output_dir=st.text("abcxyz_/", min_size=1, max_size=12),
    cadence=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**40),
)


@settings(max_examples=150, deadline=None)
@given(configs)
def test_format_parse_round_trip(cfg):
    validate(cfg)
    assert parse_config(format_config(cfg)) == cfg


def test_shipped_configs_parse():
    from pathlib import Path

    paths = sorted(Path(__file__).resolve().parents[1].joinpath("configs").glob("*.cfg"))
    assert paths
    for p in paths:
        validate(load_config(p))


@pytest.mark.parametrize(
    "t_end, cadence, expect",
    [(0.3, 0.1, [0.0, 0.1, 0.2, 0.3]), (1.0, 0.3, [0.0, 0.3, 0.6, 0.9, 1.0]), (1.0, 0.0, []), (0.5, 2.0, [0.0, 0.5])],
)
def test_snapshot_times(t_end, cadence, expect):
    assert snapshot_times(t_end, cadence) == pytest.approx(expect)


@pytest.mark.parametrize("dim", [2, 3])
def test_subcells_tile_the_element(dim):
    prob = init_sedov(dim, 2)
    pts, cells = subcell_mesh(prob.topo, prob.x)
    npe = prob.topo.nodes_per_elem
    assert cells.shape == (prob.topo.n_elems * npe, npe)
    # subcells of a uniform mesh all have the same volume
    h = 1.2 / 2
    corners = pts[cells]
    extent = corners.max(axis=1) - corners.min(axis=1)
    np.testing.assert_allclose(np.prod(extent, axis=1), (h / 2) ** dim)


def test_unit_square_has_four_subcells():
    from lagdg.mesh import build_topology

    x = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pts, cells = subcell_mesh(build_topology([[0, 1, 2, 3]], 4, coords=x), x)
    assert cells.shape == (4, 4)
    np.testing.assert_allclose(pts[cells[0]], [[0, 0], [0.5, 0], [0.5, 0.5], [0, 0.5]])


def test_vtk_layout(tmp_path):
    prob = init_noh(2, 3)
    path = write_vtk(tmp_path / "a.vtk", prob.topo, prob.x, prob.field, prob.eos, time=0.25)
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[1].endswith("t=0.25")
    assert "POINTS 16 double" in lines
    assert "CELLS 9 45" in lines
    i = lines.index("CELL_TYPES 9")
    assert lines[i + 1:i + 10] == ["9"] * 9
    assert "SCALARS density double 1" in lines and "VECTORS velocity double" in lines
    sub = write_vtk(tmp_path / "b.vtk", prob.topo, prob.x, prob.field, prob.eos, subcells=True).read_text()
    assert "CELLS 36 180" in sub
    hexes = init_sedov(3, 2)
    txt = write_vtk(tmp_path / "c.vtk", hexes.topo, hexes.x, hexes.field, hexes.eos).read_text()
    assert "CELL_TYPES 8\n12\n" in txt


def test_write_errors_name_the_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        write_json(tmp_path / "missing" / "s.json", {})
    with pytest.raises(OSError, match="missing"):
        write_csv(tmp_path / "missing" / "s.csv", ["a"], [])


def test_csv_and_json_writers(tmp_path):
    write_csv(tmp_path / "s.csv", ["a", "b"], [(np.float64(1.5), 2), (np.int64(3), float("nan"))])
    assert (tmp_path / "s.csv").read_text().splitlines() == ["a,b", "1.5,2", "3,"]
    write_json(tmp_path / "s.json", {"b": np.arange(2), "a": {"z": np.float64(0.5), "y": float("inf")}})
    data = json.loads((tmp_path / "s.json").read_text())
    assert data == {"a": {"y": None, "z": 0.5}, "b": [0, 1]}
    assert list(data) == ["a", "b"]


def test_run_summaries_are_byte_identical(tmp_path):
    cfg = RunConfig(problem="taylor_green", resolution=(4,), t_end=0.05, cadence=0.025, output_dir=str(tmp_path))
    names = ("summary.json", "snapshot_0000.vtk", "snapshot_0002.vtk", "series.csv")
    first = {}
    for attempt in range(2):
        assert run(cfg).status == 0
        current = {n: (tmp_path / n).read_bytes() for n in names}
        if attempt == 0:
            first = current
    assert current == first
    summary = json.loads(first["summary.json"])
    assert summary["snapshot_times"] == pytest.approx([0.0, 0.025, 0.05])
    assert "taylor_green_error" in summary["metrics"]


def test_empty_schedule_writes_only_summary(tmp_path):
    cfg = RunConfig(problem="noh", resolution=(4,), t_end=0.02, output_dir=str(tmp_path))
    report = run(cfg)
    assert report.status == 0 and report.snapshots == []
    assert sorted(p.name for p in tmp_path.iterdir()) == ["scatter.csv", "series.csv", "summary.json"]
    rows = (tmp_path / "scatter.csv").read_text().splitlines()
    assert rows[0] == "radius,density" and len(rows) == 17
    radii = [float(r.split(",")[0]) for r in rows[1:]]
    assert radii == sorted(radii)
