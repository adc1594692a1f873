"""NBV and one-shot planners behind a single planning interface.

Planner operations are pure functions of their inputs. A plan result is
either a single next-best-view id or an unordered set of view ids covering
the remaining surface; no planner ever returns an already-visited view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import _raycast
from .geometry import ViewSpace
from .set_cover import CoverInstance, CoverSolution, solve_exact
from .voxel_world import (
    CameraIntrinsics,
    OccupancyGrid,
    VisibilityTable,
    VoxelKey,
    pixel_ray_directions,
)

logger = logging.getLogger(__name__)

VIEW_COUNT = 32
FULL_MASK = (1 << VIEW_COUNT) - 1

PlanResult = Union[int, frozenset[int]]


class AllViewsVisitedError(ValueError):
    """Raised when a planner is asked to plan with no unvisited view left."""


@dataclass(frozen=True)
class ViewState:
    """Visited flags for the 32 candidate views, packed as a 32-bit mask."""

    c_view: int

    def __post_init__(self):
        if not (0 <= self.c_view <= FULL_MASK):
            raise ValueError("view mask must fit in 32 bits")

    @classmethod
    def from_ids(cls, ids) -> "ViewState":
        mask = 0
        for i in ids:
            if not (0 <= i < VIEW_COUNT):
                raise ValueError(f"view id {i} out of range")
            mask |= 1 << i
        return cls(mask)

    @classmethod
    def from_bits(cls, bits: str) -> "ViewState":
        if len(bits) != VIEW_COUNT or set(bits) - {"0", "1"}:
            raise ValueError("expected exactly 32 characters of 0/1")
        mask = 0
        for i, ch in enumerate(bits):
            if ch == "1":
                mask |= 1 << i
        return cls(mask)

    def to_bits(self) -> str:
        return "".join("1" if self.is_visited(i) else "0" for i in range(VIEW_COUNT))

    def flags(self) -> tuple[bool, ...]:
        return tuple(self.is_visited(i) for i in range(VIEW_COUNT))

    def is_visited(self, view_id: int) -> bool:
        return bool(self.c_view >> view_id & 1)

    def visited_ids(self) -> tuple[int, ...]:
        return tuple(i for i in range(VIEW_COUNT) if self.is_visited(i))

    def unvisited_ids(self) -> tuple[int, ...]:
        return tuple(i for i in range(VIEW_COUNT) if not self.is_visited(i))

    def with_visited(self, view_id: int) -> "ViewState":
        if not (0 <= view_id < VIEW_COUNT):
            raise ValueError(f"view id {view_id} out of range")
        return ViewState(self.c_view | 1 << view_id)

    @property
    def n_selected(self) -> int:
        return self.c_view.bit_count()


def nbv_oracle(
    visibility: VisibilityTable, covered: frozenset[VoxelKey], state: ViewState
) -> int:
    """Unvisited view with the most still-uncovered surface voxels.

    Ties break toward the lowest view id; with all gains zero the lowest
    unvisited id is returned.
    """
    unvisited = state.unvisited_ids()
    if not unvisited:
        raise AllViewsVisitedError("no unvisited view to plan")
    best_id = unvisited[0]
    best_gain = -1
    for vid in unvisited:
        gain = len(visibility.sets[vid] - covered)
        if gain > best_gain:
            best_gain = gain
            best_id = vid
    return best_id


def nbv_unknown_gain(
    map_grid: OccupancyGrid,
    views: ViewSpace,
    cam: CameraIntrinsics,
    state: ViewState,
    stride: int = 2,
    max_range: float | None = None,
) -> int:
    """Ground-truth-free baseline: the unvisited view whose pixel rays cross
    the most distinct unknown cells before hitting an occupied cell."""
    unvisited = state.unvisited_ids()
    if not unvisited:
        raise AllViewsVisitedError("no unvisited view to plan")
    if max_range is None:
        max_range = 2.0 * views.radius
    best_id = unvisited[0]
    best_gain = -1
    marks = np.zeros(map_grid.dims, dtype=np.uint8)
    for vid in unvisited:
        dirs = pixel_ray_directions(views[vid], cam, stride)
        marks[:] = 0
        gain = _raycast.count_unknown(
            map_grid.cells,
            views[vid].position,
            dirs,
            map_grid.origin,
            map_grid.resolution,
            max_range,
            marks,
        )
        if gain > best_gain:
            best_gain = gain
            best_id = vid
    return best_id


def nbv_random(state: ViewState, seed: int) -> int:
    """Seeded uniform choice over the unvisited views."""
    unvisited = state.unvisited_ids()
    if not unvisited:
        raise AllViewsVisitedError("no unvisited view to plan")
    rng = np.random.default_rng(seed)
    return int(unvisited[rng.integers(0, len(unvisited))])


def movement_weighted_utility(gains, costs) -> np.ndarray:
    """Utility per view: its share of total gain minus its share of total cost."""
    gains = np.asarray(gains, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    if gains.shape != costs.shape:
        raise ValueError("gains and costs must have matching shapes")
    gain_sum = gains.sum()
    cost_sum = costs.sum()
    if gain_sum <= 0:
        raise ValueError("all gains are zero")
    if cost_sum <= 0:
        raise ValueError("all costs are zero")
    return gains / gain_sum - costs / cost_sum


def oneshot_oracle(
    visibility: VisibilityTable, covered: frozenset[VoxelKey], state: ViewState
) -> frozenset[int]:
    """Exact minimum set of views covering every remaining surface voxel.

    Builds the rest universe and per-view rest sets by subtracting covered
    voxels, then solves the covering problem exactly. Views contributing no
    uncovered voxel (all visited views among them) are never returned.
    """
    u_rest = frozenset(visibility.universe) - covered
    if not u_rest:
        return frozenset()
    rest_sets = [frozenset(s) - covered for s in visibility.sets]
    instance, id_to_key = CoverInstance.from_keys(u_rest, rest_sets)
    solution = solve_exact(instance)
    if not solution.optimal:
        logger.warning("one-shot cover solve returned a non-optimal incumbent")
    chosen = frozenset(int(v) for v in solution.chosen)
    assert all(not state.is_visited(v) for v in chosen)
    return chosen


def oneshot_oracle_solution(
    visibility: VisibilityTable,
    covered: frozenset[VoxelKey],
    state: ViewState,
    node_budget: int | None = None,
) -> CoverSolution:
    """As oneshot_oracle but returning the full solver result."""
    u_rest = frozenset(visibility.universe) - covered
    if not u_rest:
        return CoverSolution(chosen=(), objective=0, optimal=True)
    rest_sets = [frozenset(s) - covered for s in visibility.sets]
    instance, _ = CoverInstance.from_keys(u_rest, rest_sets)
    if node_budget is None:
        return solve_exact(instance)
    return solve_exact(instance, node_budget=node_budget)


@dataclass(frozen=True)
class ExternalPlan:
    ids: frozenset[int]
    excluded_visited: int


def oneshot_external(prediction_file, state: ViewState) -> ExternalPlan:
    """Read a 32-bit prediction file; bit i selects view id i.

    Already-visited views are dropped from the result; the number of
    exclusions is reported and logged.
    """
    text = Path(prediction_file).read_text().strip()
    try:
        predicted = ViewState.from_bits(text)
    except ValueError as err:
        raise ValueError(f"{prediction_file}: {err}") from None
    ids = set(predicted.visited_ids())
    excluded = {i for i in ids if state.is_visited(i)}
    if excluded:
        logger.warning(
            "external prediction includes %d visited views: %s",
            len(excluded),
            sorted(excluded),
        )
    return ExternalPlan(ids=frozenset(ids - excluded), excluded_visited=len(excluded))
