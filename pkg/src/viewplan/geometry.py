"""Candidate view space, view pose matrices, and local/global view path planning.

Positions are numpy arrays of shape (3,) in meters. View poses are 4x4
world-to-camera matrices whose camera Z+ axis points at the object center.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

VIEW_COUNT = 32

_EPS = 1e-9


class DegenerateAxisError(ValueError):
    """Raised when no valid camera frame exists for a view configuration."""


class ObstacleCollisionError(ValueError):
    """Raised when a path endpoint lies on or inside the obstacle sphere."""


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite coordinates: {p!r}")
    return v


@dataclass(frozen=True)
class View:
    """A candidate camera placement: integer id, position, world-to-camera pose."""

    id: int
    position: np.ndarray
    pose: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        pose = np.asarray(self.pose, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "pose", pose)
        rot = pose[:3, :3]
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9:
            raise ValueError("pose rotation block is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("pose rotation block must have determinant +1")

    @property
    def forward(self) -> np.ndarray:
        """Camera Z+ axis expressed in world coordinates."""
        return self.pose[2, :3].copy()


@dataclass(frozen=True)
class ViewSpace:
    """32 candidate views on the upper hemisphere around an object center."""

    center: np.ndarray
    radius: float
    views: tuple[View, ...]

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        object.__setattr__(self, "views", tuple(self.views))
        if len(self.views) != VIEW_COUNT:
            raise ValueError(f"expected {VIEW_COUNT} views, got {len(self.views)}")
        for i, v in enumerate(self.views):
            if v.id != i:
                raise ValueError("views must be ordered by id 0..31")
            r = float(np.linalg.norm(v.position - self.center))
            if abs(r - self.radius) > 1e-9 * max(1.0, self.radius):
                raise ValueError(f"view {i} is off the sphere: |p-c|={r}")

    def positions(self) -> np.ndarray:
        return np.stack([v.position for v in self.views])

    def __iter__(self):
        return iter(self.views)

    def __getitem__(self, i: int) -> View:
        return self.views[i]


@dataclass(frozen=True)
class ObstacleSphere:
    """Bounding sphere kept clear by local paths (center + object size radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class PathGraph:
    """Complete undirected graph of views weighted by local path lengths."""

    views: tuple[View, ...]
    weights: np.ndarray
    start: int

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        n = len(self.views)
        if w.shape != (n, n):
            raise ValueError("weight matrix shape must match view count")
        if not (0 <= self.start < n):
            raise ValueError(f"start index {self.start} out of range")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("weight diagonal must be zero")
        if np.max(np.abs(w - w.T)) != 0:
            raise ValueError("weight matrix must be symmetric")
        pos = np.stack([v.position for v in self.views])
        eucl = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        if np.any(w < eucl - 1e-12):
            raise ValueError("weights must dominate Euclidean distances")

    @property
    def n(self) -> int:
        return len(self.views)


def view_pose(object_center, view_position, world_origin) -> np.ndarray:
    """World-to-camera matrix with Z+ from the view toward the object center.

    Y+ is the unit cross product of the view-to-object direction with the
    origin-to-view vector; when those are parallel, Y+ falls back to world
    up projected orthogonal to the viewing direction.
    """
    o = _as_vec3(object_center)
    v = _as_vec3(view_position)
    w = _as_vec3(world_origin)

    vo = o - v
    dist = np.linalg.norm(vo)
    if dist <= _EPS:
        raise DegenerateAxisError("view position coincides with object center")
    if np.linalg.norm(o - w) <= _EPS:
        # vo == -wv for every view: the frame construction collapses globally.
        raise DegenerateAxisError("object center coincides with world origin")
    r_z = vo / dist

    wv = v - w
    y_raw = np.cross(vo, wv)
    y_norm = np.linalg.norm(y_raw)
    if y_norm > _EPS:
        r_y = y_raw / y_norm
    else:
        up = np.array([0.0, 0.0, 1.0])
        y_raw = up - np.dot(up, r_z) * r_z
        y_norm = np.linalg.norm(y_raw)
        if y_norm <= _EPS:
            raise DegenerateAxisError(
                "viewing direction parallel to both the origin ray and world up"
            )
        r_y = y_raw / y_norm
    r_x = np.cross(r_y, r_z)

    pose = np.eye(4)
    pose[0, :3] = r_x
    pose[1, :3] = r_y
    pose[2, :3] = r_z
    pose[:3, 3] = -pose[:3, :3] @ wv
    return pose


def build_view_space(center, radius: float, tabletop_z: float, seed: int) -> ViewSpace:
    """Place 32 views on the upper hemisphere by seeded point repulsion.

    Points repel each other on the unit hemisphere (inverse-square forces,
    decaying step size, several restarts) and the best-separated
    configuration wins. Deterministic for a fixed seed.
    """
    c = _as_vec3(center)
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not tabletop_z < c[2]:
        raise ValueError("object center must lie above the tabletop")

    best = None
    best_sep = -1.0
    root = np.random.default_rng(seed)
    for restart in range(4):
        rng = np.random.default_rng(root.integers(0, 2**63))
        pts = _repel_hemisphere(rng, n=VIEW_COUNT, iterations=1500)
        sep = _min_pairwise_angle(pts)
        if sep > best_sep:
            best_sep = sep
            best = pts

    # Canonical ordering: by z descending, then x, then y.
    order = np.lexsort((best[:, 1], best[:, 0], -best[:, 2]))
    best = best[order]

    views = []
    for i, u in enumerate(best):
        p = c + radius * u
        views.append(View(id=i, position=p, pose=view_pose(c, p, np.zeros(3))))
    return ViewSpace(center=c, radius=float(radius), views=tuple(views))


def _repel_hemisphere(rng: np.random.Generator, n: int, iterations: int) -> np.ndarray:
    pts = rng.normal(size=(n, 3))
    pts[:, 2] = np.abs(pts[:, 2])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    for t in range(iterations):
        step = 0.12 / (1.0 + 0.01 * t)
        diff = pts[:, None, :] - pts[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        np.fill_diagonal(d2, 1.0)
        force = np.sum(diff / np.maximum(d2[:, :, None] ** 1.5, 1e-12), axis=1)
        # Move along the tangent plane only, then re-project to the sphere.
        force -= np.sum(force * pts, axis=1, keepdims=True) * pts
        top = np.max(np.linalg.norm(force, axis=1))
        if top > 0:
            pts = pts + (step / top) * force
        pts[:, 2] = np.maximum(pts[:, 2], 0.0)
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def _min_pairwise_angle(pts: np.ndarray) -> float:
    dots = np.clip(pts @ pts.T, -1.0, 1.0)
    np.fill_diagonal(dots, -1.0)
    return float(np.arccos(np.max(dots)))


def min_pairwise_angle(space: ViewSpace) -> float:
    """Smallest angular distance between any two views, in radians."""
    unit = (space.positions() - space.center) / space.radius
    return _min_pairwise_angle(unit)


def local_path_length(v_i, v_j, obstacle: ObstacleSphere) -> float:
    """Length of the collision-free local path between two view positions.

    Straight-line distance when the segment misses the obstacle sphere;
    otherwise the two outside legs to the sphere intersection points plus
    the great-circle arc between them. Always at least the straight-line
    distance; symmetric in its endpoints.
    """
    a = _as_vec3(v_i)
    b = _as_vec3(v_j)
    # Canonical endpoint order makes path(a, b) bit-identical to path(b, a).
    if tuple(b) < tuple(a):
        a, b = b, a

    c = obstacle.center
    r = obstacle.radius
    for p, name in ((a, "v_i"), (b, "v_j")):
        if np.linalg.norm(p - c) <= r:
            raise ObstacleCollisionError(f"{name} lies inside the obstacle sphere")

    d = b - a
    seg = float(np.linalg.norm(d))
    if seg == 0.0:
        return 0.0

    # Solve |a + t d - c|^2 = r^2 on t in (0, 1).
    ac = a - c
    qa = float(np.dot(d, d))
    qb = 2.0 * float(np.dot(d, ac))
    qc = float(np.dot(ac, ac)) - r * r
    disc = qb * qb - 4.0 * qa * qc
    if disc <= 0.0:
        return seg
    sq = np.sqrt(disc)
    t1 = (-qb - sq) / (2.0 * qa)
    t2 = (-qb + sq) / (2.0 * qa)
    if t2 <= 0.0 or t1 >= 1.0:
        return seg

    rt1 = a + t1 * d
    rt2 = a + t2 * d
    u1 = (rt1 - c) / r
    u2 = (rt2 - c) / r
    theta = float(np.arccos(np.clip(np.dot(u1, u2), -1.0, 1.0)))
    length = (
        float(np.linalg.norm(a - rt1)) + r * theta + float(np.linalg.norm(rt2 - b))
    )
    # Guard the path >= straight-line invariant against rounding on grazers.
    return max(length, seg)


def build_path_graph(views, obstacle: ObstacleSphere, start: int) -> PathGraph:
    """Complete graph over the given views with local path lengths as weights."""
    views = tuple(views)
    n = len(views)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            w[i, j] = w[j, i] = local_path_length(
                views[i].position, views[j].position, obstacle
            )
    return PathGraph(views=views, weights=w, start=start)


MAX_HAMILTONIAN_VERTICES = 24

_CHUNK = 1 << 14


def shortest_hamiltonian_path(graph: PathGraph) -> tuple[list[int], float]:
    """Minimum-length path from the start vertex visiting every vertex once.

    Held-Karp dynamic programming over visited-set bitmasks, O(n^2 2^n).
    Among equal-length optima the lexicographically smallest vertex
    sequence is returned. Vertices in the result are indices into
    ``graph.views``.
    """
    n = graph.n
    if n > MAX_HAMILTONIAN_VERTICES:
        raise ValueError(
            f"{n} vertices exceeds the supported maximum of "
            f"{MAX_HAMILTONIAN_VERTICES}"
        )
    start = graph.start
    if n == 1:
        return [start], 0.0
    w = graph.weights
    full = (1 << n) - 1
    start_bit = 1 << start

    # h[mask, last] = best cost to visit every vertex outside `mask`,
    # starting from `last` (which is inside `mask`).
    h = np.full((1 << n, n), np.inf)
    h[full, :] = 0.0

    masks_by_pop: list[list[int]] = [[] for _ in range(n + 1)]
    for mask in range(1 << n):
        if mask & start_bit:
            masks_by_pop[mask.bit_count()].append(mask)

    bits = 1 << np.arange(n)
    for pop in range(n - 1, 0, -1):
        level = np.asarray(masks_by_pop[pop], dtype=np.int64)
        for lo in range(0, len(level), _CHUNK):
            masks = level[lo : lo + _CHUNK]
            # succ[m, j] = h[mask | bit_j, j]; entries with j already in the
            # mask would read this same level and are masked out below.
            succ = h[masks[:, None] | bits[None, :], np.arange(n)[None, :]]
            outside = (masks[:, None] & bits[None, :]) == 0
            succ = np.where(outside, succ, np.inf)
            h[masks] = (succ[:, None, :] + w[None, :, :]).min(axis=2)

    total = float(h[start_bit, start])

    order = [start]
    mask = start_bit
    cur = start
    while mask != full:
        target = h[mask, cur]
        for j in range(n):
            bit = 1 << j
            if mask & bit:
                continue
            if w[cur, j] + h[mask | bit, j] == target:
                order.append(j)
                mask |= bit
                cur = j
                break
        else:  # pragma: no cover - DP guarantees an extension exists
            raise RuntimeError("path reconstruction failed")
    return order, total


def brute_force_hamiltonian(graph: PathGraph) -> tuple[list[int], float]:
    """Exhaustive reference solver for small graphs (testing aid)."""
    n = graph.n
    w = graph.weights
    start = graph.start
    rest = [i for i in range(n) if i != start]
    best_order = [start]
    best_cost = 0.0 if not rest else np.inf
    for perm in itertools.permutations(rest):
        # Accumulate back-to-front so float association matches the DP.
        cost = 0.0
        seq = (start,) + perm
        for i in range(len(seq) - 2, -1, -1):
            cost = w[seq[i], seq[i + 1]] + cost
        if cost < best_cost or (cost == best_cost and list(seq) < best_order):
            best_cost = cost
            best_order = list(seq)
    return best_order, float(best_cost)


def export_view_space(space: ViewSpace) -> str:
    """One text line per view: id, position, then the 16 pose entries row-major."""
    lines = []
    for v in space.views:
        fields = [str(v.id)]
        fields += [f"{x:.9g}" for x in v.position]
        fields += [f"{x:.9g}" for x in v.pose.reshape(-1)]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"
