from __future__ import annotations

import numpy as np
import pytest

from viewplan.mesh import (
    MeshError,
    TriangleMesh,
    bounding_sphere,
    box,
    cylinder,
    icosphere,
    load_mesh,
    load_obj,
    load_ply,
    sample_surface,
    save_obj,
    save_ply,
    wedge,
)


def test_icosphere_vertices_on_sphere():
    m = icosphere(0.05, subdivisions=3)
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.allclose(r, 0.05, atol=1e-12)
    assert len(m.faces) == 20 * 4**3


def test_box_extents_and_area():
    m = box((0.06, 0.04, 0.02))
    assert np.allclose(m.vertices.min(axis=0), [-0.03, -0.02, -0.01])
    assert np.allclose(m.vertices.max(axis=0), [0.03, 0.02, 0.01])
    expect = 2 * (0.06 * 0.04 + 0.06 * 0.02 + 0.04 * 0.02)
    assert m.face_areas().sum() == pytest.approx(expect, rel=1e-12)


def test_cylinder_dimensions():
    m = cylinder(0.03, 0.09, segments=64)
    r = np.hypot(m.vertices[:-2, 0], m.vertices[:-2, 1])
    assert np.allclose(r, 0.03, atol=1e-12)
    assert m.vertices[:, 2].min() == pytest.approx(-0.045)
    assert m.vertices[:, 2].max() == pytest.approx(0.045)


def test_bounding_sphere_encloses_and_is_tight():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pts = rng.normal(size=(200, 3)) * rng.uniform(0.1, 2.0)
        center, radius = bounding_sphere(pts)
        dist = np.linalg.norm(pts - center, axis=1)
        assert dist.max() <= radius * (1 + 1e-9)
        # No worse than the naive centroid sphere.
        naive = np.linalg.norm(pts - pts.mean(axis=0), axis=1).max()
        assert radius <= naive * 1.5


def test_bounding_sphere_of_sphere_mesh():
    m = icosphere(0.07, subdivisions=3)
    center, radius = bounding_sphere(m.vertices)
    assert np.allclose(center, 0, atol=1e-6)
    assert radius == pytest.approx(0.07, rel=1e-6)


def test_sample_surface_area_weighted():
    m = box((0.1, 0.1, 0.1))
    pts = sample_surface(m, 60_000, seed=3)
    assert len(pts) >= 60_000
    # Samples lie on the box surface.
    on_face = np.isclose(np.abs(pts), 0.05, atol=1e-9).any(axis=1)
    assert on_face.all()
    # Each face receives roughly one sixth of the samples.
    top = np.isclose(pts[:, 2], 0.05, atol=1e-9).sum()
    assert 0.13 < top / len(pts) < 0.21


def test_sample_surface_deterministic():
    m = icosphere(0.05, subdivisions=2)
    a = sample_surface(m, 10_000, seed=9)
    b = sample_surface(m, 10_000, seed=9)
    assert np.array_equal(a, b)


def test_rotation_preserves_geometry():
    m = wedge((0.06, 0.04, 0.05))
    rot = m.rotated_z(np.pi / 2)
    assert np.allclose(rot.face_areas(), m.face_areas(), atol=1e-15)
    assert np.allclose(rot.vertices[:, 2], m.vertices[:, 2], atol=1e-15)


def test_ply_round_trip(tmp_path):
    m = icosphere(0.05, subdivisions=1)
    path = tmp_path / "sphere.ply"
    save_ply(m, path)
    loaded = load_ply(path)
    assert np.allclose(loaded.vertices, m.vertices, atol=1e-7)
    assert np.array_equal(loaded.faces, m.faces)
    assert np.allclose(load_mesh(path).vertices, loaded.vertices)


def test_obj_round_trip(tmp_path):
    m = box((0.05, 0.06, 0.07))
    path = tmp_path / "box.obj"
    save_obj(m, path)
    loaded = load_obj(path)
    assert np.allclose(loaded.vertices, m.vertices, atol=1e-7)
    assert np.array_equal(loaded.faces, m.faces)


def test_obj_polygon_triangulation(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    m = load_obj(path)
    assert len(m.faces) == 2


def test_rejects_empty_and_degenerate(tmp_path):
    with pytest.raises(MeshError):
        TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    flat = TriangleMesh(np.zeros((3, 3)), np.array([[0, 1, 2]]))
    with pytest.raises(MeshError):
        sample_surface(flat, 100)
    bad = tmp_path / "bad.obj"
    bad.write_text("# nothing here\n")
    with pytest.raises(MeshError):
        load_obj(bad)
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "model.stl")
