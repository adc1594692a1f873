"""Grid traversal kernels: integer-stepping DDA ray casts over dense voxel grids.

All kernels take the occupancy array as uint8 with 0=unknown, 1=free,
2=occupied, a world-space grid origin, and a cell resolution in meters.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OCCUPIED = 2
FREE = 1
UNKNOWN = 0

_NUDGE = 1e-9


@njit(cache=True, nogil=True)
def _setup_axis(o, d, lo, hi):
    # Slab intersection bounds for one axis; returns (t_enter, t_exit).
    if d != 0.0:
        t0 = (lo - o) / d
        t1 = (hi - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        return t0, t1
    if o < lo or o > hi:
        return np.inf, -np.inf
    return -np.inf, np.inf


@njit(cache=True, nogil=True)
def first_hit(cells, origin, dirs, grid_origin, res, max_range, out):
    """First occupied cell along each ray; out[i] = (-1,-1,-1) on a miss."""
    nx, ny, nz = cells.shape
    gx, gy, gz = grid_origin[0], grid_origin[1], grid_origin[2]
    hx, hy, hz = gx + nx * res, gy + ny * res, gz + nz * res
    ox, oy, oz = origin[0], origin[1], origin[2]

    for r in range(dirs.shape[0]):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        out[r, 0] = -1
        out[r, 1] = -1
        out[r, 2] = -1

        ex0, ex1 = _setup_axis(ox, dx, gx, hx)
        ey0, ey1 = _setup_axis(oy, dy, gy, hy)
        ez0, ez1 = _setup_axis(oz, dz, gz, hz)
        t_enter = max(ex0, ey0, ez0, 0.0)
        t_exit = min(ex1, ey1, ez1, max_range)
        if t_enter >= t_exit:
            continue

        t = t_enter + _NUDGE
        px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
        ix = int(np.floor((px - gx) / res))
        iy = int(np.floor((py - gy) / res))
        iz = int(np.floor((pz - gz) / res))
        if ix < 0:
            ix = 0
        if iy < 0:
            iy = 0
        if iz < 0:
            iz = 0
        if ix >= nx:
            ix = nx - 1
        if iy >= ny:
            iy = ny - 1
        if iz >= nz:
            iz = nz - 1

        step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
        step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
        step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)

        if dx != 0.0:
            nxt = gx + (ix + (1 if dx > 0 else 0)) * res
            t_max_x = (nxt - ox) / dx
            t_del_x = res / abs(dx)
        else:
            t_max_x = np.inf
            t_del_x = np.inf
        if dy != 0.0:
            nxt = gy + (iy + (1 if dy > 0 else 0)) * res
            t_max_y = (nxt - oy) / dy
            t_del_y = res / abs(dy)
        else:
            t_max_y = np.inf
            t_del_y = np.inf
        if dz != 0.0:
            nxt = gz + (iz + (1 if dz > 0 else 0)) * res
            t_max_z = (nxt - oz) / dz
            t_del_z = res / abs(dz)
        else:
            t_max_z = np.inf
            t_del_z = np.inf

        while True:
            if cells[ix, iy, iz] == OCCUPIED:
                out[r, 0] = ix
                out[r, 1] = iy
                out[r, 2] = iz
                break
            if t_max_x <= t_max_y and t_max_x <= t_max_z:
                t = t_max_x
                t_max_x += t_del_x
                ix += step_x
                if ix < 0 or ix >= nx:
                    break
            elif t_max_y <= t_max_z:
                t = t_max_y
                t_max_y += t_del_y
                iy += step_y
                if iy < 0 or iy >= ny:
                    break
            else:
                t = t_max_z
                t_max_z += t_del_z
                iz += step_z
                if iz < 0 or iz >= nz:
                    break
            if t > t_exit:
                break


@njit(cache=True, nogil=True)
def _walk_to_target(cells, origin, tx, ty, tz, fx, fy, fz, grid_origin, res):
    """True when the segment from origin to the point at fractional offset
    (fx, fy, fz) inside the target cell meets no other occupied cell first."""
    nx, ny, nz = cells.shape
    gx, gy, gz = grid_origin[0], grid_origin[1], grid_origin[2]
    ox, oy, oz = origin[0], origin[1], origin[2]
    cx = gx + (tx + fx) * res
    cy = gy + (ty + fy) * res
    cz = gz + (tz + fz) * res
    dx, dy, dz = cx - ox, cy - oy, cz - oz
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        return True
    dx, dy, dz = dx / dist, dy / dist, dz / dist

    hx, hy, hz = gx + nx * res, gy + ny * res, gz + nz * res
    ex0, ex1 = _setup_axis(ox, dx, gx, hx)
    ey0, ey1 = _setup_axis(oy, dy, gy, hy)
    ez0, ez1 = _setup_axis(oz, dz, gz, hz)
    t_enter = max(ex0, ey0, ez0, 0.0)
    t_exit = min(ex1, ey1, ez1, dist + 2.0 * res)
    if t_enter >= t_exit:
        return False

    t = t_enter + _NUDGE
    px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
    ix = int(np.floor((px - gx) / res))
    iy = int(np.floor((py - gy) / res))
    iz = int(np.floor((pz - gz) / res))
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    if ix >= nx:
        ix = nx - 1
    if iy >= ny:
        iy = ny - 1
    if iz >= nz:
        iz = nz - 1

    step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
    step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)
    if dx != 0.0:
        t_max_x = (gx + (ix + (1 if dx > 0 else 0)) * res - ox) / dx
        t_del_x = res / abs(dx)
    else:
        t_max_x, t_del_x = np.inf, np.inf
    if dy != 0.0:
        t_max_y = (gy + (iy + (1 if dy > 0 else 0)) * res - oy) / dy
        t_del_y = res / abs(dy)
    else:
        t_max_y, t_del_y = np.inf, np.inf
    if dz != 0.0:
        t_max_z = (gz + (iz + (1 if dz > 0 else 0)) * res - oz) / dz
        t_del_z = res / abs(dz)
    else:
        t_max_z, t_del_z = np.inf, np.inf

    while True:
        if ix == tx and iy == ty and iz == tz:
            return True
        if cells[ix, iy, iz] == OCCUPIED:
            return False
        if t_max_x <= t_max_y and t_max_x <= t_max_z:
            t = t_max_x
            t_max_x += t_del_x
            ix += step_x
            if ix < 0 or ix >= nx:
                return False
        elif t_max_y <= t_max_z:
            t = t_max_y
            t_max_y += t_del_y
            iy += step_y
            if iy < 0 or iy >= ny:
                return False
        else:
            t = t_max_z
            t_max_z += t_del_z
            iz += step_z
            if iz < 0 or iz >= nz:
                return False
        if t > t_exit:
            return False


@njit(cache=True, nogil=True)
def los_visible(cells, origin, targets, grid_origin, res, offsets, out):
    """A target is visible when any of its sample points (fractional offsets
    within the cell) has an unobstructed segment from the origin."""
    for i in range(targets.shape[0]):
        seen = False
        for j in range(offsets.shape[0]):
            if _walk_to_target(
                cells, origin,
                targets[i, 0], targets[i, 1], targets[i, 2],
                offsets[j, 0], offsets[j, 1], offsets[j, 2],
                grid_origin, res,
            ):
                seen = True
                break
        out[i] = seen


@njit(cache=True, nogil=True)
def carve_free(cells, origin, targets, grid_origin, res):
    """Mark unknown cells free along segments from origin to each target
    cell center. Occupied cells are never modified."""
    nx, ny, nz = cells.shape
    gx, gy, gz = grid_origin[0], grid_origin[1], grid_origin[2]
    ox, oy, oz = origin[0], origin[1], origin[2]
    for i in range(targets.shape[0]):
        tx, ty, tz = targets[i, 0], targets[i, 1], targets[i, 2]
        cx = gx + (tx + 0.5) * res
        cy = gy + (ty + 0.5) * res
        cz = gz + (tz + 0.5) * res
        dx, dy, dz = cx - ox, cy - oy, cz - oz
        dist = np.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            continue
        dx, dy, dz = dx / dist, dy / dist, dz / dist

        hx, hy, hz = gx + nx * res, gy + ny * res, gz + nz * res
        ex0, ex1 = _setup_axis(ox, dx, gx, hx)
        ey0, ey1 = _setup_axis(oy, dy, gy, hy)
        ez0, ez1 = _setup_axis(oz, dz, gz, hz)
        t_enter = max(ex0, ey0, ez0, 0.0)
        t_exit = min(ex1, ey1, ez1, dist + 2.0 * res)
        if t_enter >= t_exit:
            continue

        t = t_enter + _NUDGE
        px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
        ix = int(np.floor((px - gx) / res))
        iy = int(np.floor((py - gy) / res))
        iz = int(np.floor((pz - gz) / res))
        if ix < 0:
            ix = 0
        if iy < 0:
            iy = 0
        if iz < 0:
            iz = 0
        if ix >= nx:
            ix = nx - 1
        if iy >= ny:
            iy = ny - 1
        if iz >= nz:
            iz = nz - 1

        step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
        step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
        step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)
        if dx != 0.0:
            t_max_x = (gx + (ix + (1 if dx > 0 else 0)) * res - ox) / dx
            t_del_x = res / abs(dx)
        else:
            t_max_x, t_del_x = np.inf, np.inf
        if dy != 0.0:
            t_max_y = (gy + (iy + (1 if dy > 0 else 0)) * res - oy) / dy
            t_del_y = res / abs(dy)
        else:
            t_max_y, t_del_y = np.inf, np.inf
        if dz != 0.0:
            t_max_z = (gz + (iz + (1 if dz > 0 else 0)) * res - oz) / dz
            t_del_z = res / abs(dz)
        else:
            t_max_z, t_del_z = np.inf, np.inf

        while True:
            if ix == tx and iy == ty and iz == tz:
                break
            if cells[ix, iy, iz] == UNKNOWN:
                cells[ix, iy, iz] = FREE
            if t_max_x <= t_max_y and t_max_x <= t_max_z:
                t = t_max_x
                t_max_x += t_del_x
                ix += step_x
                if ix < 0 or ix >= nx:
                    break
            elif t_max_y <= t_max_z:
                t = t_max_y
                t_max_y += t_del_y
                iy += step_y
                if iy < 0 or iy >= ny:
                    break
            else:
                t = t_max_z
                t_max_z += t_del_z
                iz += step_z
                if iz < 0 or iz >= nz:
                    break
            if t > t_exit:
                break


@njit(cache=True, nogil=True)
def count_unknown(cells, origin, dirs, grid_origin, res, max_range, marks):
    """Distinct unknown cells crossed by any ray before its first occupied
    cell. `marks` is caller-provided scratch of the grid's shape."""
    nx, ny, nz = cells.shape
    gx, gy, gz = grid_origin[0], grid_origin[1], grid_origin[2]
    hx, hy, hz = gx + nx * res, gy + ny * res, gz + nz * res
    ox, oy, oz = origin[0], origin[1], origin[2]
    total = 0

    for r in range(dirs.shape[0]):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ex0, ex1 = _setup_axis(ox, dx, gx, hx)
        ey0, ey1 = _setup_axis(oy, dy, gy, hy)
        ez0, ez1 = _setup_axis(oz, dz, gz, hz)
        t_enter = max(ex0, ey0, ez0, 0.0)
        t_exit = min(ex1, ey1, ez1, max_range)
        if t_enter >= t_exit:
            continue

        t = t_enter + _NUDGE
        px, py, pz = ox + t * dx, oy + t * dy, oz + t * dz
        ix = int(np.floor((px - gx) / res))
        iy = int(np.floor((py - gy) / res))
        iz = int(np.floor((pz - gz) / res))
        if ix < 0:
            ix = 0
        if iy < 0:
            iy = 0
        if iz < 0:
            iz = 0
        if ix >= nx:
            ix = nx - 1
        if iy >= ny:
            iy = ny - 1
        if iz >= nz:
            iz = nz - 1

        step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
        step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
        step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)
        if dx != 0.0:
            t_max_x = (gx + (ix + (1 if dx > 0 else 0)) * res - ox) / dx
            t_del_x = res / abs(dx)
        else:
            t_max_x, t_del_x = np.inf, np.inf
        if dy != 0.0:
            t_max_y = (gy + (iy + (1 if dy > 0 else 0)) * res - oy) / dy
            t_del_y = res / abs(dy)
        else:
            t_max_y, t_del_y = np.inf, np.inf
        if dz != 0.0:
            t_max_z = (gz + (iz + (1 if dz > 0 else 0)) * res - oz) / dz
            t_del_z = res / abs(dz)
        else:
            t_max_z, t_del_z = np.inf, np.inf

        while True:
            state = cells[ix, iy, iz]
            if state == OCCUPIED:
                break
            if state == UNKNOWN and marks[ix, iy, iz] == 0:
                marks[ix, iy, iz] = 1
                total += 1
            if t_max_x <= t_max_y and t_max_x <= t_max_z:
                t = t_max_x
                t_max_x += t_del_x
                ix += step_x
                if ix < 0 or ix >= nx:
                    break
            elif t_max_y <= t_max_z:
                t = t_max_y
                t_max_y += t_del_y
                iy += step_y
                if iy < 0 or iy >= ny:
                    break
            else:
                t = t_max_z
                t_max_z += t_del_z
                iz += step_z
                if iz < 0 or iz >= nz:
                    break
            if t > t_exit:
                break
    return total
