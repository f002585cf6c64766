import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfhom.errors import ArgumentError, DeformationError, GeometryError
from perfhom.mesh import (DOMAIN, DeformationField, StarShape, Tag, build_cell_mesh, build_plain_mesh, deform_mesh,
                          integrate, read_trimesh, tile_perforated, write_trimesh)


def test_cell_mesh_disk_counts_and_area():
    m = build_cell_mesh(StarShape.disk(1.0, 64), 0.25, 64, 16)
    m.validate()
    assert m.tagged_edges(Tag.PARTICLE).shape[0] == 64
    assert m.area == pytest.approx(1 - math.pi * 0.25 ** 2, abs=2e-3)
    assert set(np.unique(m.tags)) == {Tag.PARTICLE, Tag.OUTER}


def test_cell_mesh_hole_must_fit():
    with pytest.raises(GeometryError):
        build_cell_mesh(StarShape.square(1.0), 0.49)


def test_star_shape_rejects_bad_sampling():
    with pytest.raises(ArgumentError):
        StarShape(np.ones(12))
    with pytest.raises(ArgumentError):
        StarShape(np.r_[np.ones(7), -1.0])


def test_outer_nodes_mirror_symmetric():
    m = build_cell_mesh(StarShape.disk(1.0), 0.1, 64, 8)
    X = m.nodes[m.tag_nodes(Tag.OUTER)]
    for axis in (0, 1):
        other = 1 - axis
        lo = np.sort(X[np.abs(X[:, axis] + 0.5) < 1e-14][:, other])
        hi = np.sort(X[np.abs(X[:, axis] - 0.5) < 1e-14][:, other])
        assert lo.size == hi.size > 0
        assert np.max(np.abs(lo - hi)) <= 1e-12
        # dihedral: reflection of the side onto itself
        assert np.max(np.abs(np.sort(-lo) - lo)) <= 1e-12


@given(st.lists(st.floats(0.6, 1.0), min_size=8, max_size=8), st.floats(0.05, 0.4))
def test_random_star_shapes_give_valid_meshes(r8, a):
    radii = np.repeat(np.asarray(r8), 4)
    m = build_cell_mesh(StarShape(radii), a, 32, 6)
    m.validate()
    assert np.all(m.areas > 0)
    assert abs(m.lumped.sum() - m.area) <= 1e-12 * m.area


def test_tile_single_cell_keeps_topology():
    c = build_cell_mesh(StarShape.disk(1.0), 0.2, 32, 6)
    t = tile_perforated(c, 1)
    t.validate()
    assert t.n_nodes == c.n_nodes and t.n_tris == c.n_tris
    assert not t.has_tag(Tag.OUTER)
    assert t.tagged_edges(Tag.DIRICHLET).shape[0] == c.tagged_edges(Tag.OUTER).shape[0]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_tile_merge_count_against_bruteforce(n):
    c = build_cell_mesh(StarShape.disk(1.0), 0.2, 32, 6)
    t = tile_perforated(c, n)
    t.validate()
    eps = 1.0 / n
    pts = np.concatenate([(c.nodes + 0.5 + [i, j]) * eps for i in range(n) for j in range(n)])
    uniq = np.unique(np.round(pts / eps * 1e9).astype(np.int64), axis=0)
    assert t.n_nodes == uniq.shape[0]
    assert t.tagged_edges(Tag.PARTICLE).shape[0] == n * n * c.tagged_edges(Tag.PARTICLE).shape[0]
    hole = 1.0 - c.area
    assert t.area == pytest.approx(1.0 - n * n * hole * eps ** 2, rel=1e-10)
    assert t.euler_characteristic() == 1 - n * n
    per = integrate(t, 1.0, Tag.PARTICLE)
    assert per == pytest.approx(n * n * eps * c.boundary_length(Tag.PARTICLE), rel=1e-10)


def test_plain_meshes():
    r = build_plain_mesh(("rect", 1.0, 1.0), 8)
    assert (r.n_nodes, r.n_tris) == (81, 128)
    assert set(np.unique(r.tags)) == {Tag.DIRICHLET}
    errs = []
    for res in (8, 16, 32):
        d = build_plain_mesh(("disk", 1.0), res)
        d.validate()
        errs.append(abs(d.area - math.pi))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3
    with pytest.raises(ArgumentError):
        build_plain_mesh(("rect", 0.0, 1.0), 8)


def test_deformations():
    d = build_plain_mesh(("disk", 1.0), 16)
    rad = DeformationField.radial_stretch(d)
    assert np.array_equal(deform_mesh(d, rad, 0.0).nodes, d.nodes)
    assert deform_mesh(d, rad, 0.1).area == pytest.approx(1.21 * d.area, rel=1e-12)
    tr = DeformationField.translation(d, (1.0, 0.0))
    m = deform_mesh(d, tr, 0.3)
    assert np.max(np.abs(m.areas - d.areas)) <= 1e-14
    two = deform_mesh(deform_mesh(d, tr, 0.1), DeformationField.translation(m, (1.0, 0.0)), 0.2)
    assert np.allclose(two.nodes, m.nodes, atol=1e-14, rtol=0)
    rot = DeformationField.rotation(d, (0.2, -0.1), 0.7)
    assert np.max(np.abs(rot.at(d.nodes) - rot.values)) <= 1e-14
    with pytest.raises(DeformationError) as exc:
        deform_mesh(d, rad, -1.0)
    assert exc.value.worst_triangle is not None


def test_integrate():
    m = build_plain_mesh(("rect", 1.0, 1.0), 16)
    assert integrate(m, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert integrate(m, m.nodes[:, 0]) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(ArgumentError):
        integrate(m, 1.0, Tag.PARTICLE)


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2 ** 31))
def test_integrate_linear(a, b, seed):
    m = build_cell_mesh(StarShape.disk(1.0), 0.2, 16, 4)
    r = np.random.default_rng(seed)
    f, g = r.normal(size=m.n_nodes), r.normal(size=m.n_nodes)
    for region in (DOMAIN, Tag.PARTICLE, Tag.OUTER):
        lhs = integrate(m, a * f + b * g, region)
        rhs = a * integrate(m, f, region) + b * integrate(m, g, region)
        assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(a) + abs(b)) * 10


def test_trimesh_text_roundtrip(tmp_path):
    m = build_cell_mesh(StarShape.square(1.0), 0.2, 32, 5)
    p = tmp_path / "m.txt"
    write_trimesh(m, p)
    assert p.read_text().splitlines()[0] == "TRIMESH v1"
    r = read_trimesh(p)
    assert np.array_equal(r.nodes, m.nodes) and np.array_equal(r.tris, m.tris)
    assert np.array_equal(r.edges, m.edges) and np.array_equal(r.tags, m.tags)
