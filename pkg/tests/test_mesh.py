import numpy as np
import pytest

from hho_wave.mesh import SimplicialMesh, build_structured, refine_uniform


def test_structured_counts():
    for n in (1, 2, 5):
        m = build_structured(n)
        assert m.vertices.shape == ((n + 1) ** 2, 2)
        assert m.n_cells == 2 * n * n
        assert m.n_faces == 3 * n * n + 2 * n
        assert len(m.boundary_faces) == 4 * n
        assert len(m.interior_faces) == 3 * n * n - 2 * n


def test_positive_orientation_and_area():
    m = build_structured(3)
    assert np.all(m.cell_volumes > 0)
    assert np.isclose(m.cell_volumes.sum(), 1.0)
    assert np.isclose(m.face_lengths[m.boundary_faces].sum(), 4.0)


def test_negative_orientation_rejected():
    m = build_structured(1)
    bad = m.cells[:, ::-1].copy()
    with pytest.raises(ValueError):
        SimplicialMesh(
            vertices=m.vertices,
            cells=bad,
            faces=m.faces,
            face_cells=m.face_cells,
            cell_faces=m.cell_faces,
            domain=m.domain,
        )


def test_outward_normals():
    m = build_structured(2)
    for t in range(m.n_cells):
        c = m.cell_centroids[t]
        for local in range(3):
            f = m.cell_faces[t, local]
            mid = m.face_vertices(f).mean(axis=0)
            n = m.cell_face_normal(t, local)
            assert (mid - c) @ n > 0  # outward
            assert np.isclose(np.linalg.norm(n), 1.0)


def test_face_normals_fixed_minus_to_plus():
    m = build_structured(2)
    for f in m.interior_faces:
        tm, tp = m.face_cells[f]
        assert m.face_orientation(f, tm) == 1
        assert m.face_orientation(f, tp) == -1


def test_local_face_opposite_vertex():
    m = build_structured(2)
    for t in range(m.n_cells):
        for local in range(3):
            f = m.cell_faces[t, local]
            assert m.cells[t, local] not in m.faces[f]


def test_uniform_refinement():
    m = build_structured(2)
    r = refine_uniform(m)
    assert r.n_cells == 4 * m.n_cells
    assert np.isclose(r.h, 0.5 * m.h)
    assert np.isclose(r.shape_regularity, m.shape_regularity)
    assert np.isclose(r.cell_volumes.sum(), 1.0)


def test_json_roundtrip():
    m = build_structured(3)
    r = SimplicialMesh.from_json(m.to_json())
    assert np.array_equal(r.vertices, m.vertices)
    assert np.array_equal(r.cells, m.cells)
    assert np.array_equal(r.faces, m.faces)
    assert np.array_equal(r.face_cells, m.face_cells)
    assert np.allclose(r.face_normals, m.face_normals)


def test_json_version_gate():
    m = build_structured(1)
    doc = m.to_json().replace('"version": 1', '"version": 99')
    with pytest.raises(ValueError):
        SimplicialMesh.from_json(doc)
