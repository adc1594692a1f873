from __future__ import annotations

import numpy as np
import pytest

from viewplan.geometry import build_view_space
from viewplan.mesh import box, cylinder, icosphere
from viewplan.voxel_world import CameraIntrinsics, build_scene, compute_visibility

DESK_MESHES = {
    "icosphere": lambda: icosphere(0.05, subdivisions=4),
    "box": lambda: box((0.07, 0.05, 0.06)),
    "cylinder": lambda: cylinder(0.03, 0.09),
}


@pytest.fixture(scope="session")
def cam():
    return CameraIntrinsics()


@pytest.fixture(scope="session")
def view_space():
    # Matches the desk scenes: object centers are canonicalized near z≈0.05.
    return build_view_space((0.0, 0.0, 0.05), 0.4, tabletop_z=0.0, seed=11)


def _scene_views(mesh, rotation, cam):
    scene = build_scene(mesh, rotation)
    views = build_view_space(scene.object_center, 0.4, scene.tabletop_z, seed=11)
    visibility = compute_visibility(scene, views, cam)
    return scene, views, visibility


@pytest.fixture(scope="session")
def icosphere_case(cam):
    return _scene_views(DESK_MESHES["icosphere"](), 0, cam)


@pytest.fixture(scope="session")
def desk_corpus(cam):
    """(name, rotation) -> (scene, views, visibility) for 3 primitives x 2 rotations."""
    cases = {}
    for name, make in DESK_MESHES.items():
        for rotation in (0, 3):
            cases[(name, rotation)] = _scene_views(make(), rotation, cam)
    return cases


# The oracle treats a voxel as its region: it is visible from a view when
# the straight segment to any of these sample points (center plus inset
# corners) meets no other occupied cell first.
ORACLE_POINT_OFFSETS = np.array(
    [[0.5, 0.5, 0.5]]
    + [[i, j, k] for i in (0.02, 0.98) for j in (0.02, 0.98) for k in (0.02, 0.98)]
)


def _march_point_visible(world, vpos, key, offset, step_frac):
    target = world.origin + (np.asarray(key, float) + offset) * world.resolution
    d = target - vpos
    dist = float(np.linalg.norm(d))
    n = max(int(np.ceil(dist / (world.resolution * step_frac))), 2)
    ts = np.linspace(0.0, 1.0, n)
    pts = vpos + ts[:, None] * d
    idx = np.floor((pts - world.origin) / world.resolution).astype(int)
    dims = np.array(world.dims)
    inb = np.all((idx >= 0) & (idx < dims), axis=1)
    idx = idx[inb]
    states = world.cells[idx[:, 0], idx[:, 1], idx[:, 2]]
    for (i, j, k), state in zip(idx, states):
        if (int(i), int(j), int(k)) == tuple(key):
            return True
        if state == 2:  # occupied
            return False
    return False


def straight_line_visible(world, view_position, key, step_frac=0.25):
    """Independent occlusion oracle: march at step <= res/4 from the view
    toward the voxel's sample points; visible iff some segment reaches the
    voxel with no occupied cell first."""
    vpos = np.asarray(view_position, float)
    return any(
        _march_point_visible(world, vpos, key, offset, step_frac)
        for offset in ORACLE_POINT_OFFSETS
    )


def _batch_march(world, vpos, keys_arr, offset, step_frac):
    targets = world.origin + (keys_arr + offset) * world.resolution
    deltas = targets - vpos
    dists = np.linalg.norm(deltas, axis=1)
    n = max(int(np.ceil(dists.max() / (world.resolution * step_frac))), 2)
    ts = np.linspace(0.0, 1.0, n)
    # March all segments in lockstep; row i samples view -> target_i.
    pts = vpos + ts[None, :, None] * deltas[:, None, :]
    idx = np.floor((pts - world.origin) / world.resolution).astype(np.int64)
    dims = np.array(world.dims)
    inb = np.all((idx >= 0) & (idx < dims), axis=2)
    idxc = np.clip(idx, 0, dims - 1)
    states = world.cells[idxc[:, :, 0], idxc[:, :, 1], idxc[:, :, 2]]
    states = np.where(inb, states, 0)
    at_target = np.all(idx == keys_arr[:, None, :], axis=2)
    blocked = (states == 2) & ~at_target
    first_block = np.where(blocked.any(axis=1), blocked.argmax(axis=1), n)
    first_target = np.where(at_target.any(axis=1), at_target.argmax(axis=1), n)
    return first_target < first_block


def batch_straight_line_visible(world, view_position, keys, step_frac=0.25):
    """Vectorized oracle for large key batches; chunked to bound memory."""
    if not keys:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=bool)
    keys_arr = np.asarray(sorted(keys), dtype=np.int64)
    vpos = np.asarray(view_position, float)
    visible = np.zeros(len(keys_arr), dtype=bool)
    chunk = 512
    for lo in range(0, len(keys_arr), chunk):
        block = keys_arr[lo : lo + chunk]
        seen = np.zeros(len(block), dtype=bool)
        for offset in ORACLE_POINT_OFFSETS:
            todo = ~seen
            if not todo.any():
                break
            seen[todo] |= _batch_march(world, vpos, block[todo], offset, step_frac)
        visible[lo : lo + chunk] = seen
    return keys_arr, visible
