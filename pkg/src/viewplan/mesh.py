"""Triangle mesh loading, surface sampling, and primitive test shapes.

Supported inputs are ASCII PLY (vertex x/y/z properties plus face
vertex_indices) and Wavefront OBJ (v/f records only).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for unreadable, empty, or degenerate meshes."""


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if len(v) == 0 or len(f) == 0:
            raise MeshError("mesh has no vertices or no faces")
        if f.min() < 0 or f.max() >= len(v):
            raise MeshError("face indices out of range")

    def face_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def rotated_z(self, angle_rad: float) -> "TriangleMesh":
        ca, sa = np.cos(angle_rad), np.sin(angle_rad)
        rot = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
        return TriangleMesh(self.vertices @ rot.T, self.faces)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, float), self.faces)


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ply":
        return load_ply(path)
    if suffix == ".obj":
        return load_obj(path)
    raise MeshError(f"unsupported mesh format: {path.name}")


def load_ply(path) -> TriangleMesh:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshError(f"{path}: not a PLY file")
    n_vertex = n_face = 0
    vertex_props: list[str] = []
    current = None
    body_at = None
    for i, raw in enumerate(lines[1:], start=1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise MeshError(f"{path}: only ASCII PLY is supported")
        elif parts[0] == "element":
            current = parts[1]
            if current == "vertex":
                n_vertex = int(parts[2])
            elif current == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and current == "vertex":
            vertex_props.append(parts[-1])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if body_at is None:
        raise MeshError(f"{path}: missing end_header")
    try:
        ix, iy, iz = (vertex_props.index(k) for k in ("x", "y", "z"))
    except ValueError:
        raise MeshError(f"{path}: vertex element lacks x/y/z properties") from None

    body = [ln.split() for ln in lines[body_at:] if ln.strip()]
    if len(body) < n_vertex + n_face:
        raise MeshError(f"{path}: truncated body")
    verts = np.array(
        [[float(row[ix]), float(row[iy]), float(row[iz])] for row in body[:n_vertex]]
    )
    faces = []
    for row in body[n_vertex : n_vertex + n_face]:
        count = int(row[0])
        idx = [int(x) for x in row[1 : 1 + count]]
        for k in range(1, count - 1):  # fan-triangulate polygons
            faces.append((idx[0], idx[k], idx[k + 1]))
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def load_obj(path) -> TriangleMesh:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    for raw in Path(path).read_text().splitlines():
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(tok.split("/")[0]) for tok in parts[1:]]
            idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    if not verts or not faces:
        raise MeshError(f"{path}: no v/f records found")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))


def save_ply(mesh: TriangleMesh, path) -> None:
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property float x",
        "property float y",
        "property float z",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    out += [f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in mesh.vertices]
    out += [f"3 {f[0]} {f[1]} {f[2]}" for f in mesh.faces]
    Path(path).write_text("\n".join(out) + "\n")


def save_obj(mesh: TriangleMesh, path) -> None:
    out = [f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in mesh.vertices]
    out += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in mesh.faces]
    Path(path).write_text("\n".join(out) + "\n")


def bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Ritter-style enclosing sphere of a point set (center, radius)."""
    pts = np.asarray(points, float)
    p0 = pts[0]
    p1 = pts[np.argmax(np.linalg.norm(pts - p0, axis=1))]
    p2 = pts[np.argmax(np.linalg.norm(pts - p1, axis=1))]
    center = 0.5 * (p1 + p2)
    radius = 0.5 * float(np.linalg.norm(p2 - p1))
    for _ in range(3):
        dist = np.linalg.norm(pts - center, axis=1)
        worst = int(np.argmax(dist))
        d = float(dist[worst])
        if d <= radius * (1 + 1e-12):
            break
        # Grow the sphere just enough to absorb the farthest point.
        new_radius = 0.5 * (radius + d)
        center = center + (d - new_radius) / d * (pts[worst] - center)
        radius = new_radius
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return center, radius


def sample_surface(
    mesh: TriangleMesh, n_samples: int, seed: int = 0
) -> np.ndarray:
    """Area-weighted surface samples with at least one sample per triangle."""
    areas = mesh.face_areas()
    total = float(areas.sum())
    if total <= 0:
        raise MeshError("mesh has zero surface area")
    per_face = np.ceil(areas / total * n_samples).astype(np.int64)
    per_face = np.maximum(per_face, 1)

    rng = np.random.default_rng(seed)
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    face_ids = np.repeat(np.arange(len(mesh.faces)), per_face)
    r1 = np.sqrt(rng.random(len(face_ids)))
    r2 = rng.random(len(face_ids))
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    return (
        w0[:, None] * a[face_ids]
        + w1[:, None] * b[face_ids]
        + w2[:, None] * c[face_ids]
    )


def icosphere(radius: float, subdivisions: int = 4) -> TriangleMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.array(verts[i]) + np.array(verts[j])
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        new_faces = []
        for i, j, k in faces:
            ij, jk, ki = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [(i, ij, ki), (j, jk, ij), (k, ki, jk), (ij, jk, ki)]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, np.array(faces, dtype=np.int64))


def box(extents) -> TriangleMesh:
    """Axis-aligned box with the given full extents, centered at the origin."""
    ex, ey, ez = (float(x) / 2 for x in extents)
    corners = np.array(
        [
            (-ex, -ey, -ez), (ex, -ey, -ez), (ex, ey, -ez), (-ex, ey, -ez),
            (-ex, -ey, ez), (ex, -ey, ez), (ex, ey, ez), (-ex, ey, ez),
        ]
    )
    quads = [
        (0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4),
        (2, 3, 7, 6), (1, 2, 6, 5), (3, 0, 4, 7),
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.array(faces, dtype=np.int64))


def cylinder(radius: float, height: float, segments: int = 48) -> TriangleMesh:
    angles = np.linspace(0, 2 * np.pi, segments, endpoint=False)
    ring = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, -height / 2)])
    top = np.column_stack([ring, np.full(segments, height / 2)])
    verts = np.vstack([bottom, top, [[0, 0, -height / 2]], [[0, 0, height / 2]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i)]
        faces.append((cb, j, i))
        faces.append((ct, segments + i, segments + j))
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def wedge(extents) -> TriangleMesh:
    """Right triangular prism; asymmetric under 180-degree Z rotation."""
    ex, ey, ez = (float(x) for x in extents)
    verts = np.array(
        [
            (0, 0, 0), (ex, 0, 0), (0, ey, 0),
            (0, 0, ez), (ex, 0, ez), (0, ey, ez),
        ]
    )
    verts -= verts.mean(axis=0)
    faces = np.array(
        [
            (0, 2, 1), (3, 4, 5),
            (0, 1, 4), (0, 4, 3),
            (0, 3, 5), (0, 5, 2),
            (1, 2, 5), (1, 5, 4),
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, faces)
