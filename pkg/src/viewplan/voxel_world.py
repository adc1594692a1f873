"""Ground-truth voxel worlds, virtual depth imaging, and the network input grid.

The world is a dense three-state occupancy grid (unknown/free/occupied) at a
fixed imaging resolution (default 0.002 m). Objects rest on a tabletop plane
at z=0 with the tabletop slab occupying the grid layer immediately below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _raycast
from .geometry import View, ViewSpace
from .mesh import TriangleMesh, bounding_sphere, sample_surface

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

DEFAULT_RESOLUTION = 0.002
MAX_OBJECT_SIZE = 0.15
INPUT_GRID_SIZE = 32

VoxelKey = tuple[int, int, int]

# A voxel counts as directly visible when the segment from the view to any
# of these sample points inside the cell is unobstructed: the center plus
# the eight corners, pulled slightly inward off the cell boundary.
_CORNER_INSET = 0.02
VOXEL_SAMPLE_OFFSETS = np.array(
    [[0.5, 0.5, 0.5]]
    + [
        [i, j, k]
        for i in (_CORNER_INSET, 1.0 - _CORNER_INSET)
        for j in (_CORNER_INSET, 1.0 - _CORNER_INSET)
        for k in (_CORNER_INSET, 1.0 - _CORNER_INSET)
    ]
)


@dataclass
class CameraIntrinsics:
    """Pinhole depth camera; defaults approximate a 1280x720 RGB-D sensor."""

    width: int = 1280
    height: int = 720
    fx: float = 920.0
    fy: float = 920.0
    cx: float = 640.0
    cy: float = 360.0

    def __post_init__(self):
        if min(self.width, self.height) <= 0 or min(self.fx, self.fy) <= 0:
            raise ValueError("image size and focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass
class OccupancyGrid:
    """Dense voxel grid; cells[ix, iy, iz] over x/y/z at a fixed resolution."""

    origin: np.ndarray
    resolution: float
    cells: np.ndarray
    tabletop_layer: int | None = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 3:
            raise ValueError("cells must be a 3-d array")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.cells.shape

    def in_bounds(self, key: VoxelKey) -> bool:
        return all(0 <= key[a] < self.cells.shape[a] for a in range(3))

    def world_to_key(self, p) -> VoxelKey:
        idx = np.floor((np.asarray(p, float) - self.origin) / self.resolution)
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def key_to_center(self, key: VoxelKey) -> np.ndarray:
        return self.origin + (np.asarray(key, float) + 0.5) * self.resolution

    def occupied_keys(self) -> frozenset[VoxelKey]:
        idx = np.argwhere(self.cells == OCCUPIED)
        return frozenset((int(i), int(j), int(k)) for i, j, k in idx)

    def count(self, state: int) -> int:
        return int(np.count_nonzero(self.cells == state))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            origin=self.origin.copy(),
            resolution=self.resolution,
            cells=self.cells.copy(),
            tabletop_layer=self.tabletop_layer,
        )

    def dump(self, path) -> None:
        """Debug dump: ASCII header, then one byte per cell, x-fastest."""
        nx, ny, nz = self.dims
        header = (
            f"{nx} {ny} {nz} {self.resolution:.9g} "
            f"{self.origin[0]:.9g} {self.origin[1]:.9g} {self.origin[2]:.9g}\n"
        )
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(self.cells.tobytes(order="F"))

    @classmethod
    def load_dump(cls, path) -> "OccupancyGrid":
        with open(path, "rb") as fh:
            header = fh.readline().decode("ascii").split()
            nx, ny, nz = (int(x) for x in header[:3])
            res = float(header[3])
            origin = [float(x) for x in header[4:7]]
            raw = fh.read(nx * ny * nz)
        if len(raw) != nx * ny * nz:
            raise ValueError("truncated grid dump")
        cells = np.frombuffer(raw, dtype=np.uint8).reshape((nx, ny, nz), order="F")
        return cls(origin=origin, resolution=res, cells=cells.copy())


@dataclass(frozen=True)
class InputGrid:
    """32^3 occupancy snapshot fed to learned planners; tabletop at layer 0."""

    cells: np.ndarray
    resolution: float
    origin: np.ndarray

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(
            self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3)
        )
        if cells.shape != (INPUT_GRID_SIZE,) * 3:
            raise ValueError("input grid must be 32x32x32")
        if not np.any(cells[:, :, 0] == OCCUPIED):
            raise ValueError("input grid bottom layer must contain the tabletop")


@dataclass(frozen=True)
class VisibilityTable:
    """Per-view sets of observable object voxels plus their union."""

    sets: tuple[frozenset[VoxelKey], ...]
    universe: frozenset[VoxelKey]

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(frozenset(s) for s in self.sets))
        union: set[VoxelKey] = set()
        for s in self.sets:
            union |= s
        if union != set(self.universe):
            raise ValueError("universe must equal the union of the view sets")

    @classmethod
    def from_sets(cls, sets) -> "VisibilityTable":
        sets = tuple(frozenset(s) for s in sets)
        universe = frozenset().union(*sets) if sets else frozenset()
        return cls(sets=sets, universe=universe)

    def __len__(self) -> int:
        return len(self.sets)


@dataclass(frozen=True)
class Scene:
    """An ingested object on its tabletop, ready for virtual imaging."""

    world: OccupancyGrid
    object_center: np.ndarray
    o_size: float
    tabletop_z: float
    object_keys: frozenset[VoxelKey]

    def fresh_partial_map(self, tabletop_radius: float | None = None) -> OccupancyGrid:
        """All-unknown map with the tabletop prior inserted below the object."""
        grid = OccupancyGrid(
            origin=self.world.origin.copy(),
            resolution=self.world.resolution,
            cells=np.zeros(self.world.dims, dtype=np.uint8),
            tabletop_layer=self.world.tabletop_layer,
        )
        if tabletop_radius is None:
            tabletop_radius = 2.0 * self.o_size
        nx, ny, _ = grid.dims
        xs = grid.origin[0] + (np.arange(nx) + 0.5) * grid.resolution
        ys = grid.origin[1] + (np.arange(ny) + 0.5) * grid.resolution
        cx, cy = self.object_center[0], self.object_center[1]
        disk = (xs[:, None] - cx) ** 2 + (ys[None, :] - cy) ** 2 <= tabletop_radius**2
        grid.cells[:, :, grid.tabletop_layer][disk] = OCCUPIED
        return grid


def _canonicalize(mesh: TriangleMesh, rotation_index: int) -> TriangleMesh:
    if not (0 <= rotation_index < 8):
        raise ValueError("rotation index must be in [0, 8)")
    rotated = mesh.rotated_z(rotation_index * np.pi / 4.0)
    center, _ = bounding_sphere(rotated.vertices)
    min_z = rotated.vertices[:, 2].min()
    return rotated.translated((-center[0], -center[1], -min_z))


def ingest_object(
    mesh: TriangleMesh,
    rotation_index: int,
    resolution: float = DEFAULT_RESOLUTION,
    n_samples: int = 200_000,
    seed: int = 0,
) -> OccupancyGrid:
    """Voxelize a rotated mesh by dense area-weighted surface sampling.

    The object is placed laterally centered at the origin and resting on the
    z=0 plane. Occupied cells are exactly the cells containing at least one
    surface sample; everything else is free ground truth.
    """
    canon = _canonicalize(mesh, rotation_index)
    center, o_size = bounding_sphere(canon.vertices)
    if o_size > MAX_OBJECT_SIZE + 1e-12:
        raise ValueError(
            f"object bounding sphere radius {o_size:.4f} m exceeds "
            f"{MAX_OBJECT_SIZE} m"
        )
    samples = sample_surface(canon, n_samples, seed=seed)

    half = 2.0 * o_size + 0.02
    below_layers = 2
    nx = ny = int(np.ceil(2 * half / resolution))
    nz = below_layers + int(np.ceil((2 * o_size + 0.02) / resolution))
    origin = np.array([-half, -half, -below_layers * resolution])

    grid = OccupancyGrid(
        origin=origin,
        resolution=resolution,
        cells=np.full((nx, ny, nz), FREE, dtype=np.uint8),
    )
    idx = np.floor((samples - origin) / resolution).astype(np.int64)
    ok = np.all((idx >= 0) & (idx < np.array([nx, ny, nz])), axis=1)
    idx = idx[ok]
    grid.cells[idx[:, 0], idx[:, 1], idx[:, 2]] = OCCUPIED
    return grid


def build_scene(
    mesh: TriangleMesh,
    rotation_index: int,
    resolution: float = DEFAULT_RESOLUTION,
    n_samples: int = 200_000,
    seed: int = 0,
) -> Scene:
    """Ingest an object and insert the tabletop slab immediately below it."""
    world = ingest_object(mesh, rotation_index, resolution, n_samples, seed)
    object_keys = world.occupied_keys()
    table_layer = 1  # one layer below the object's lowest cells at z=0
    world.cells[:, :, table_layer] = OCCUPIED
    world.tabletop_layer = table_layer

    canon = _canonicalize(mesh, rotation_index)
    center, o_size = bounding_sphere(canon.vertices)
    return Scene(
        world=world,
        object_center=np.array([0.0, 0.0, center[2]]),
        o_size=float(o_size),
        tabletop_z=0.0,
        object_keys=object_keys,
    )


def pixel_ray_directions(
    view: View, cam: CameraIntrinsics, stride: int = 2
) -> np.ndarray:
    """World-space unit directions for the (strided) pixel grid of a view."""
    us = np.arange(0, cam.width, stride, dtype=np.float64) + 0.5
    vs = np.arange(0, cam.height, stride, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(us, vs, indexing="xy")
    cam_dirs = np.stack(
        [(uu - cam.cx) / cam.fx, (vv - cam.cy) / cam.fy, np.ones_like(uu)], axis=-1
    ).reshape(-1, 3)
    rot_c2w = view.pose[:3, :3].T
    world = cam_dirs @ rot_c2w.T
    world /= np.linalg.norm(world, axis=1, keepdims=True)
    return np.ascontiguousarray(world)


def virtual_imaging(
    world: OccupancyGrid,
    view: View,
    cam: CameraIntrinsics,
    stride: int = 2,
    max_range: float = 0.8,
) -> frozenset[VoxelKey]:
    """Object-surface voxels observed by one simulated depth image.

    Pixel rays stop at their first occupied cell. Tabletop hits terminate
    rays but are excluded from the result, and every returned voxel also has
    an unobstructed straight line from the view to one of its sample points
    (center or corners).
    """
    pos_key = world.world_to_key(view.position)
    if world.in_bounds(pos_key) and world.cells[pos_key] == OCCUPIED:
        raise ValueError("view position lies inside an occupied cell")

    dirs = pixel_ray_directions(view, cam, stride)
    hits = np.empty((len(dirs), 3), dtype=np.int64)
    _raycast.first_hit(
        world.cells, view.position, dirs, world.origin,
        world.resolution, max_range, hits,
    )
    hits = hits[hits[:, 0] >= 0]
    if len(hits) == 0:
        return frozenset()
    hits = np.unique(hits, axis=0)
    if world.tabletop_layer is not None:
        hits = hits[hits[:, 2] != world.tabletop_layer]
    if len(hits) == 0:
        return frozenset()

    visible = np.empty(len(hits), dtype=np.bool_)
    _raycast.los_visible(
        world.cells, view.position, hits, world.origin, world.resolution,
        VOXEL_SAMPLE_OFFSETS, visible,
    )
    hits = hits[visible]
    return frozenset((int(i), int(j), int(k)) for i, j, k in hits)


def compute_visibility(
    scene: Scene,
    views: ViewSpace,
    cam: CameraIntrinsics,
    stride: int = 2,
    max_range: float | None = None,
) -> VisibilityTable:
    """Per-view observable object voxels for all candidate views."""
    if max_range is None:
        max_range = 2.0 * views.radius
    sets = []
    for view in views:
        observed = virtual_imaging(scene.world, view, cam, stride, max_range)
        if not observed <= scene.object_keys:
            raise RuntimeError("imaging returned non-object voxels")
        sets.append(observed)
    return VisibilityTable.from_sets(sets)


def insert_observation(
    map_grid: OccupancyGrid, observed, view: View
) -> OccupancyGrid:
    """Accumulate one observation: observed cells become occupied and the
    space traversed by their rays becomes free. Mutates and returns the map.
    Occupied cells are never downgraded."""
    keys = sorted(set(observed))
    if not keys:
        return map_grid
    arr = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    dims = np.asarray(map_grid.dims)
    if np.any(arr < 0) or np.any(arr >= dims):
        bad = arr[(np.any(arr < 0, axis=1)) | (np.any(arr >= dims, axis=1))]
        raise ValueError(f"observed keys out of bounds: {bad[:4].tolist()}")
    map_grid.cells[arr[:, 0], arr[:, 1], arr[:, 2]] = OCCUPIED
    _raycast.carve_free(
        map_grid.cells, view.position, arr, map_grid.origin, map_grid.resolution
    )
    return map_grid


def extract_input_grid(
    map_grid: OccupancyGrid,
    o_size: float,
    object_center,
    tabletop_z: float,
) -> InputGrid:
    """Resample the map into the 32^3 input grid at dynamic resolution.

    The grid edge is twice the object size, laterally centered on the object
    and vertically anchored so the tabletop plane fills the bottom layer.
    Output cells take the dominant state of the source cells they cover
    (ties favor occupied, then unknown, then free); regions outside the map
    are unknown.
    """
    if not (0 < o_size <= MAX_OBJECT_SIZE):
        raise ValueError(f"object size {o_size} outside (0, {MAX_OBJECT_SIZE}]")
    center = np.asarray(object_center, float)
    m_res = 2.0 * o_size / INPUT_GRID_SIZE
    origin = np.array(
        [center[0] - o_size, center[1] - o_size, tabletop_z - m_res]
    )

    out = np.zeros((INPUT_GRID_SIZE,) * 3, dtype=np.uint8)
    out[:, :, 0] = OCCUPIED  # tabletop anchors the bottom layer

    res = map_grid.resolution
    nx, ny, nz = map_grid.dims
    lo = np.maximum(
        np.floor((origin - map_grid.origin) / res).astype(int), 0
    )
    hi_world = origin + INPUT_GRID_SIZE * m_res
    hi = np.minimum(
        np.ceil((hi_world - map_grid.origin) / res).astype(int), [nx, ny, nz]
    )
    if np.any(lo >= hi):
        return InputGrid(cells=out, resolution=m_res, origin=origin)

    sub = map_grid.cells[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
    axes = [
        map_grid.origin[a] + (np.arange(lo[a], hi[a]) + 0.5) * res for a in range(3)
    ]
    bins = [np.floor((axes[a] - origin[a]) / m_res).astype(int) for a in range(3)]
    valid = [(bins[a] >= 0) & (bins[a] < INPUT_GRID_SIZE) for a in range(3)]

    counts = np.zeros((INPUT_GRID_SIZE,) * 3 + (3,), dtype=np.int64)
    bx, by, bz = np.meshgrid(bins[0], bins[1], bins[2], indexing="ij")
    ok = (
        valid[0][:, None, None] & valid[1][None, :, None] & valid[2][None, None, :]
    )
    np.add.at(counts, (bx[ok], by[ok], bz[ok], sub[ok].astype(int)), 1)

    total = counts.sum(axis=3)
    occ, unk, free = counts[..., OCCUPIED], counts[..., UNKNOWN], counts[..., FREE]
    dominant = np.where(
        occ >= np.maximum(unk, free),
        OCCUPIED,
        np.where(unk >= free, UNKNOWN, FREE),
    ).astype(np.uint8)
    dominant[total == 0] = UNKNOWN
    out[:, :, 1:] = dominant[:, :, 1:]
    return InputGrid(cells=out, resolution=m_res, origin=origin)


def dump_instance_keys(keys) -> list[VoxelKey]:
    """Stable sort order for reporting voxel keys in diagnostics."""
    return sorted(keys)
