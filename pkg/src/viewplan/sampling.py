"""Whole sampling-space generation and long-tail input-case sampling.

A rollout greedily adds the view with the largest marginal surface gain
until every observable voxel is covered, recording one input case per
visited-state prefix. The per-depth averaged marginal coverage drives the
long-tail case limits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .planner import VIEW_COUNT, ViewState
from .voxel_world import VisibilityTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class ObjectCase:
    """An object id paired with one of eight 45-degree Z rotations."""

    object_id: int
    rotation: int

    def __post_init__(self):
        if not (0 <= self.rotation < 8):
            raise ValueError("rotation index must be in [0, 8)")
        if self.object_id < 0:
            raise ValueError("object id must be nonnegative")


@dataclass(frozen=True)
class InputCase:
    """An object case observed from the selected views of a 32-bit mask."""

    object_case: ObjectCase
    c_view: int

    def __post_init__(self):
        if not (0 < self.c_view < 2**VIEW_COUNT):
            raise ValueError("view mask must select at least one view")

    @property
    def n_select(self) -> int:
        return self.c_view.bit_count()

    @property
    def state(self) -> ViewState:
        return ViewState(self.c_view)


@dataclass
class NSTable:
    """Running mean of newly observed coverage per (object case, depth)."""

    sums: dict[tuple[ObjectCase, int], float] = field(default_factory=dict)
    counts: dict[tuple[ObjectCase, int], int] = field(default_factory=dict)

    def update(self, case: ObjectCase, n_select: int, gain: float) -> None:
        if n_select < 1:
            raise ValueError("n_select must be at least 1")
        if not (0 < gain <= 1):
            raise ValueError("coverage gain must lie in (0, 1]")
        key = (case, n_select)
        self.sums[key] = self.sums.get(key, 0.0) + gain
        self.counts[key] = self.counts.get(key, 0) + 1

    def mean(self, case: ObjectCase, n_select: int) -> float | None:
        key = (case, n_select)
        if key not in self.counts:
            return None
        return self.sums[key] / self.counts[key]

    def merge(self, other: "NSTable") -> "NSTable":
        merged = NSTable(sums=dict(self.sums), counts=dict(self.counts))
        for key, s in other.sums.items():
            merged.sums[key] = merged.sums.get(key, 0.0) + s
            merged.counts[key] = merged.counts.get(key, 0) + other.counts[key]
        return merged

    def depths(self, case: ObjectCase) -> list[int]:
        return sorted(d for c, d in self.counts if c == case)


WorldBuilder = Callable[[ObjectCase], VisibilityTable]


def greedy_rollout(
    visibility: VisibilityTable, initial_view: int
) -> list[tuple[int, float]]:
    """Visit order and per-step coverage fractions of one greedy rollout."""
    universe = visibility.universe
    if not universe:
        raise ValueError("empty universe: nothing to reconstruct")
    covered = set(visibility.sets[initial_view])
    state = ViewState.from_ids([initial_view])
    steps = [(initial_view, len(covered) / len(universe))]
    while len(covered) < len(universe):
        best_vid, best_gain = -1, -1
        for vid in state.unvisited_ids():
            gain = len(visibility.sets[vid] - covered)
            if gain > best_gain:
                best_gain = gain
                best_vid = vid
        covered |= visibility.sets[best_vid]
        state = state.with_visited(best_vid)
        steps.append((best_vid, len(covered) / len(universe)))
    return steps


def _record_rollout(
    case: ObjectCase,
    visibility: VisibilityTable,
    initial_view: int,
    cases: list[InputCase],
    ns: NSTable,
) -> None:
    universe_size = len(visibility.universe)
    covered = set(visibility.sets[initial_view])
    state = ViewState.from_ids([initial_view])
    cases.append(InputCase(object_case=case, c_view=state.c_view))
    vsc = len(covered) / universe_size
    while vsc < 1.0:
        best_vid, best_gain = -1, -1
        for vid in state.unvisited_ids():
            gain = len(visibility.sets[vid] - covered)
            if gain > best_gain:
                best_gain = gain
                best_vid = vid
        covered |= visibility.sets[best_vid]
        new_vsc = len(covered) / universe_size
        ns.update(case, state.n_selected, new_vsc - vsc)
        state = state.with_visited(best_vid)
        cases.append(InputCase(object_case=case, c_view=state.c_view))
        vsc = new_vsc


def generate_whole_space(
    objects: Iterable[ObjectCase],
    world_builder: WorldBuilder,
    initial_views: Iterable[int] | None = None,
) -> tuple[list[InputCase], NSTable]:
    """All greedy-rollout prefix cases over every object case and initial view.

    One rollout is run per (object case, initial view); every prefix of
    visited views contributes one input case and every marginal gain updates
    the running means. Object cases that fail to build are logged and
    skipped.
    """
    if initial_views is None:
        initial_views = range(VIEW_COUNT)
    initial_views = list(initial_views)
    cases: list[InputCase] = []
    ns = NSTable()
    initial_coverages: list[float] = []
    for case in objects:
        try:
            visibility = world_builder(case)
        except Exception:
            logger.exception("world build failed for %s; skipping", case)
            continue
        size = len(visibility.universe)
        initial_coverages += [len(visibility.sets[v]) / size for v in initial_views]
        for v0 in initial_views:
            _record_rollout(case, visibility, v0, cases, ns)
    if initial_coverages:
        # Corpus-dependent; informational only.
        logger.info(
            "mean initial-view coverage %.2f%% over %d rollouts",
            100.0 * float(np.mean(initial_coverages)),
            len(initial_coverages),
        )
    return cases, ns


def long_tail_limit(
    ns: NSTable, case: ObjectCase, n_select: int, n_single: int
) -> int:
    """Max cases kept for a (object case, depth) bucket.

    Depth one keeps ``n_single`` cases; deeper buckets shrink with the ratio
    of their averaged marginal coverage to the depth-one average, rounded up
    so populated depths keep at least one case. Depths no rollout reached
    have limit zero.
    """
    if not (1 <= n_single <= VIEW_COUNT):
        raise ValueError("n_single must be in [1, 32]")
    if n_select == 1:
        return n_single
    ratio_num = ns.mean(case, n_select)
    ratio_den = ns.mean(case, 1)
    if ratio_num is None or ratio_den is None:
        return 0
    return math.ceil(n_single * ratio_num / ratio_den)


def sample_longtail(
    whole: list[InputCase], ns: NSTable, n_single: int, seed: int
) -> list[InputCase]:
    """Long-tail subsample: seeded shuffle, then per-bucket caps.

    Buckets are keyed by (object case, number of selected views); each keeps
    at most its long-tail limit of cases in shuffle order. The result is the
    bucket union ordered by object case and depth.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(whole))
    buckets: dict[tuple[ObjectCase, int], list[InputCase]] = {}
    for idx in order:
        case = whole[int(idx)]
        key = (case.object_case, case.n_select)
        kept = buckets.setdefault(key, [])
        if len(kept) < long_tail_limit(ns, case.object_case, case.n_select, n_single):
            kept.append(case)
    out: list[InputCase] = []
    for key in sorted(buckets, key=lambda k: (k[0], k[1])):
        out.extend(buckets[key])
    return out


def sample_nbvr(
    objects: Iterable[ObjectCase],
    world_builder: WorldBuilder,
    initial_view_subset_size: int,
    seed: int,
) -> list[InputCase]:
    """Reconstruction-based baseline sampler: rollouts from a seeded random
    subset of initial views per object case, keeping all prefix cases."""
    if not (1 <= initial_view_subset_size <= VIEW_COUNT):
        raise ValueError("subset size must be in [1, 32]")
    rng = np.random.default_rng(seed)
    cases: list[InputCase] = []
    ns = NSTable()
    for case in objects:
        try:
            visibility = world_builder(case)
        except Exception:
            logger.exception("world build failed for %s; skipping", case)
            continue
        subset = sorted(
            rng.choice(VIEW_COUNT, size=initial_view_subset_size, replace=False)
        )
        for v0 in subset:
            _record_rollout(case, visibility, int(v0), cases, ns)
    return cases


def write_cases(cases: Iterable[InputCase], path) -> None:
    """Case list file: `object_id rotation_index c_view_hex` per line."""
    lines = [
        f"{c.object_case.object_id} {c.object_case.rotation} {c.c_view:08x}"
        for c in cases
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_cases(path) -> list[InputCase]:
    cases = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj, rot, hexmask = line.split()
        cases.append(
            InputCase(
                object_case=ObjectCase(object_id=int(obj), rotation=int(rot)),
                c_view=int(hexmask, 16),
            )
        )
    return cases
