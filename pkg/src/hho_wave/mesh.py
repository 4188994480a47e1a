"""Conforming triangular meshes of rectangles: topology, geometry, refinement.

Cells are stored with positive (counterclockwise) orientation.  Every face
carries a fixed unit normal pointing from its first adjacent cell to the
second one (outward for boundary faces); the orientation is chosen at
construction time and never changes afterwards, including through
serialization round-trips.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MESH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SimplicialMesh:
    """Immutable 2D triangle mesh with full cell/face connectivity.

    Attributes
    ----------
    vertices : (nv, 2) float array
    cells : (nc, 3) int array, counterclockwise vertex triples
    faces : (nf, 2) int array; vertex order as seen from the first
        adjacent cell, so the fixed face normal is ``(dy, -dx)/|F|``
    face_cells : (nf, 2) int array, ``(T_minus, T_plus)``; ``T_plus == -1``
        on boundary faces
    cell_faces : (nc, 3) int array; local face ``i`` is opposite vertex ``i``
    domain : (xmin, ymin, xmax, ymax) of the meshed rectangle
    """

    vertices: np.ndarray
    cells: np.ndarray
    faces: np.ndarray
    face_cells: np.ndarray
    cell_faces: np.ndarray
    domain: tuple[float, float, float, float]

    # geometry, filled in __post_init__
    cell_volumes: np.ndarray = field(default=None, repr=False)
    cell_diameters: np.ndarray = field(default=None, repr=False)
    cell_centroids: np.ndarray = field(default=None, repr=False)
    cell_inradii: np.ndarray = field(default=None, repr=False)
    face_normals: np.ndarray = field(default=None, repr=False)
    face_lengths: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        v = self.vertices
        c = self.cells
        e1 = v[c[:, 1]] - v[c[:, 0]]
        e2 = v[c[:, 2]] - v[c[:, 0]]
        vol = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(vol <= 0.0):
            raise ValueError("negatively oriented or degenerate cell")
        d01 = np.linalg.norm(v[c[:, 0]] - v[c[:, 1]], axis=1)
        d12 = np.linalg.norm(v[c[:, 1]] - v[c[:, 2]], axis=1)
        d20 = np.linalg.norm(v[c[:, 2]] - v[c[:, 0]], axis=1)
        diam = np.maximum(d01, np.maximum(d12, d20))
        perim = d01 + d12 + d20
        tv = v[self.faces[:, 1]] - v[self.faces[:, 0]]
        flen = np.linalg.norm(tv, axis=1)
        normals = np.stack([tv[:, 1], -tv[:, 0]], axis=1) / flen[:, None]
        object.__setattr__(self, "cell_volumes", vol)
        object.__setattr__(self, "cell_diameters", diam)
        object.__setattr__(self, "cell_centroids", v[c].mean(axis=1))
        object.__setattr__(self, "cell_inradii", 2.0 * vol / perim)
        object.__setattr__(self, "face_normals", normals)
        object.__setattr__(self, "face_lengths", flen)

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def h(self) -> float:
        return float(self.cell_diameters.max())

    @property
    def domain_diameter(self) -> float:
        x0, y0, x1, y1 = self.domain
        return float(np.hypot(x1 - x0, y1 - y0))

    @property
    def domain_area(self) -> float:
        x0, y0, x1, y1 = self.domain
        return float((x1 - x0) * (y1 - y0))

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.nonzero(self.face_cells[:, 1] < 0)[0]

    @property
    def interior_faces(self) -> np.ndarray:
        return np.nonzero(self.face_cells[:, 1] >= 0)[0]

    @property
    def shape_regularity(self) -> float:
        """Max ratio cell diameter / inradius (constant under uniform refinement)."""
        return float((self.cell_diameters / self.cell_inradii).max())

    def face_vertices(self, f: int) -> np.ndarray:
        return self.vertices[self.faces[f]]

    def cell_face_normal(self, t: int, local: int) -> np.ndarray:
        """Outward unit normal of cell ``t`` on its ``local``-th face."""
        f = self.cell_faces[t, local]
        return self.face_normals[f] * self.face_orientation(f, t)

    def face_orientation(self, f: int, t: int) -> int:
        """+1 if the fixed normal of face ``f`` is outward for cell ``t``, else -1."""
        tm, tp = self.face_cells[f]
        if t == tm:
            return 1
        if t == tp:
            return -1
        raise ValueError(f"face {f} does not belong to cell {t}")

    def to_json(self) -> str:
        doc = {
            "version": MESH_FORMAT_VERSION,
            "domain": list(self.domain),
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "SimplicialMesh":
        doc = json.loads(text)
        if doc.get("version") != MESH_FORMAT_VERSION:
            raise ValueError(f"unsupported mesh format version {doc.get('version')!r}")
        return _from_cells(
            np.asarray(doc["vertices"], dtype=float),
            np.asarray(doc["cells"], dtype=np.int64),
            tuple(doc["domain"]),
        )


def _from_cells(vertices, cells, domain) -> SimplicialMesh:
    """Build face connectivity from vertices + oriented cells.

    Local face i of a cell is the edge opposite to local vertex i; a face is
    tagged with the first cell that registers it (the T_minus side), which
    fixes its normal once and for all.
    """
    face_index: dict[tuple[int, int], int] = {}
    faces: list[tuple[int, int]] = []
    face_cells: list[list[int]] = []
    cell_faces = np.empty((cells.shape[0], 3), dtype=np.int64)
    for t, (a, b, c) in enumerate(cells):
        for local, (p, q) in enumerate(((b, c), (c, a), (a, b))):
            key = (p, q) if p < q else (q, p)
            f = face_index.get(key)
            if f is None:
                f = len(faces)
                face_index[key] = f
                faces.append((p, q))  # CCW order in cell t -> normal outward of t
                face_cells.append([t, -1])
            else:
                if face_cells[f][1] != -1:
                    raise ValueError("face shared by more than two cells")
                face_cells[f][1] = t
            cell_faces[t, local] = f
    return SimplicialMesh(
        vertices=vertices,
        cells=cells,
        faces=np.asarray(faces, dtype=np.int64),
        face_cells=np.asarray(face_cells, dtype=np.int64),
        cell_faces=cell_faces,
        domain=tuple(float(x) for x in domain),
    )


def build_structured(n: int, domain=(0.0, 0.0, 1.0, 1.0)) -> SimplicialMesh:
    """n-by-n grid of squares, each split along the lower-left/upper-right diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, y0, x1, y1 = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (n + 1) + j

    cells = []
    for i in range(n):
        for j in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return _from_cells(vertices, np.asarray(cells, dtype=np.int64), domain)


def refine_uniform(mesh: SimplicialMesh) -> SimplicialMesh:
    """Split every triangle into 4 congruent children via edge midpoints."""
    nv = mesh.vertices.shape[0]
    midpoints = 0.5 * (mesh.vertices[mesh.faces[:, 0]] + mesh.vertices[mesh.faces[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    cells = []
    for t, (a, b, c) in enumerate(mesh.cells):
        m0 = nv + mesh.cell_faces[t, 0]  # mid(b, c)
        m1 = nv + mesh.cell_faces[t, 1]  # mid(c, a)
        m2 = nv + mesh.cell_faces[t, 2]  # mid(a, b)
        cells.extend([(a, m2, m1), (m2, b, m0), (m1, m0, c), (m0, m1, m2)])
    return _from_cells(vertices, np.asarray(cells, dtype=np.int64), mesh.domain)
