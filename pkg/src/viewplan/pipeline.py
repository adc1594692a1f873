"""The combined one-shot reconstruction loop in simulation, with metrics.

A run starts at an initial view, performs up to ``k`` next-best-view
iterations with map updates, asks a one-shot planner for the remaining view
set, sequences that set with an optimal global path from the current view,
and images the path views in one batch. Required views (RV), visible surface
coverage (VSC), and movement cost (MC) summarize the run.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (
    ObstacleSphere,
    ViewSpace,
    build_path_graph,
    local_path_length,
    shortest_hamiltonian_path,
)
from .planner import (
    ViewState,
    movement_weighted_utility,
    nbv_oracle,
    nbv_random,
    nbv_unknown_gain,
    oneshot_external,
    oneshot_oracle,
)
from .voxel_world import (
    CameraIntrinsics,
    OccupancyGrid,
    Scene,
    VisibilityTable,
    VoxelKey,
    compute_visibility,
    insert_observation,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metrics:
    vsc: float
    rv: int
    mc: float

    def __post_init__(self):
        if not (0.0 <= self.vsc <= 1.0):
            raise ValueError("coverage fraction must lie in [0, 1]")
        if self.rv < 1:
            raise ValueError("required views counts the initial view")
        if self.mc < 0:
            raise ValueError("movement cost is nonnegative")


@dataclass
class ReconstructionTrace:
    visited: list[int]
    coverage: list[float]
    legs: list[float]
    planners: list[str]
    nbv_iterations: int
    path_views: list[int]
    covered: frozenset[VoxelKey]
    metrics: Metrics | None = None

    def validate(self) -> None:
        if len(self.legs) != len(self.visited) - 1:
            raise ValueError("one leg per consecutive view pair required")
        if len(self.coverage) != len(self.visited):
            raise ValueError("one coverage fraction per visited view required")
        if any(b < a - 1e-12 for a, b in zip(self.coverage, self.coverage[1:])):
            raise ValueError("coverage must be non-decreasing")


class PipelineError(RuntimeError):
    """Planner failure; carries the partial trace for diagnosis."""

    def __init__(self, message: str, trace: ReconstructionTrace):
        super().__init__(message)
        self.trace = trace


@dataclass
class PlanContext:
    """Everything a planner callable may consult for one decision."""

    visibility: VisibilityTable
    views: ViewSpace
    cam: CameraIntrinsics
    state: ViewState
    covered: frozenset[VoxelKey]
    current_view: int
    partial_map: OccupancyGrid
    obstacle: ObstacleSphere
    seed: int
    step: int


NbvPlanner = Callable[[PlanContext], int]
OneshotPlanner = Callable[[PlanContext], frozenset[int]]


def _step_seed(root_seed: int, init_view: int, step: int) -> int:
    seq = np.random.SeedSequence(entropy=(root_seed, init_view, step))
    return int(seq.generate_state(1)[0])


def make_nbv_planner(name: str, stride: int = 2) -> NbvPlanner:
    if name == "oracle":
        return lambda ctx: nbv_oracle(ctx.visibility, ctx.covered, ctx.state)
    if name == "random":
        return lambda ctx: nbv_random(ctx.state, ctx.seed)
    if name == "unknown":
        return lambda ctx: nbv_unknown_gain(
            ctx.partial_map, ctx.views, ctx.cam, ctx.state, stride=stride
        )
    if name == "oracle-mov":
        return _movement_weighted_oracle
    raise ValueError(f"unknown NBV planner {name!r}")


def _movement_weighted_oracle(ctx: PlanContext) -> int:
    unvisited = ctx.state.unvisited_ids()
    gains = np.array(
        [len(ctx.visibility.sets[v] - ctx.covered) for v in unvisited], float
    )
    if gains.sum() <= 0:
        return unvisited[0]
    cur = ctx.views[ctx.current_view].position
    costs = np.array(
        [
            local_path_length(cur, ctx.views[v].position, ctx.obstacle)
            for v in unvisited
        ]
    )
    utilities = movement_weighted_utility(gains, costs)
    return unvisited[int(np.argmax(utilities))]


def make_oneshot_planner(name: str) -> OneshotPlanner:
    if name == "oracle":
        return lambda ctx: oneshot_oracle(ctx.visibility, ctx.covered, ctx.state)
    if name == "none":
        return lambda ctx: frozenset()
    if name.startswith("external:"):
        path = name.split(":", 1)[1]
        return lambda ctx: oneshot_external(path, ctx.state).ids
    raise ValueError(f"unknown one-shot planner {name!r}")


def run_combined(
    scene: Scene,
    views: ViewSpace,
    cam: CameraIntrinsics,
    k: int,
    nbv_planner: NbvPlanner,
    oneshot_planner: OneshotPlanner,
    v0: int,
    visibility: VisibilityTable | None = None,
    obstacle: ObstacleSphere | None = None,
    seed: int = 0,
    stop_when_complete: bool = True,
) -> ReconstructionTrace:
    """Execute the combined pipeline from initial view ``v0``.

    The map is updated after every NBV observation; during the one-shot leg
    no planner consults it and observations accumulate in one batch at the
    end. The required-view count always equals 1 + executed NBV iterations +
    the global path length.
    """
    if not (0 <= v0 < len(views.views)):
        raise ValueError(f"initial view {v0} out of range")
    if not (0 <= k <= 31):
        raise ValueError("k must lie in [0, 31]")
    if visibility is None:
        visibility = compute_visibility(scene, views, cam)
    if obstacle is None:
        obstacle = ObstacleSphere(center=scene.object_center, radius=scene.o_size)

    universe = visibility.universe
    partial = scene.fresh_partial_map()
    state = ViewState.from_ids([v0])
    covered = frozenset(visibility.sets[v0])
    insert_observation(partial, visibility.sets[v0], views[v0])

    trace = ReconstructionTrace(
        visited=[v0],
        coverage=[len(covered) / len(universe)],
        legs=[],
        planners=["initial"],
        nbv_iterations=0,
        path_views=[],
        covered=covered,
    )
    current = v0

    for step in range(1, k + 1):
        if stop_when_complete and covered == universe:
            break
        ctx = PlanContext(
            visibility=visibility, views=views, cam=cam, state=state,
            covered=covered, current_view=current, partial_map=partial,
            obstacle=obstacle, seed=_step_seed(seed, v0, step), step=step,
        )
        try:
            vid = nbv_planner(ctx)
        except Exception as err:
            trace.covered = covered
            raise PipelineError(f"NBV planner failed at step {step}: {err}", trace)
        if state.is_visited(vid):
            trace.covered = covered
            raise PipelineError(f"planner returned visited view {vid}", trace)
        trace.legs.append(
            local_path_length(
                views[current].position, views[vid].position, obstacle
            )
        )
        state = state.with_visited(vid)
        covered = covered | visibility.sets[vid]
        insert_observation(partial, visibility.sets[vid], views[vid])
        trace.visited.append(vid)
        trace.coverage.append(len(covered) / len(universe))
        trace.planners.append("nbv")
        trace.nbv_iterations += 1
        current = vid

    ctx = PlanContext(
        visibility=visibility, views=views, cam=cam, state=state,
        covered=covered, current_view=current, partial_map=partial,
        obstacle=obstacle, seed=_step_seed(seed, v0, 32), step=k + 1,
    )
    try:
        cover_ids = frozenset(oneshot_planner(ctx))
    except Exception as err:
        trace.covered = covered
        raise PipelineError(f"one-shot planner failed: {err}", trace)
    if any(state.is_visited(v) for v in cover_ids):
        trace.covered = covered
        raise PipelineError("one-shot planner returned visited views", trace)

    if cover_ids:
        ordered_ids = [current] + sorted(cover_ids)
        graph = build_path_graph(
            [views[v] for v in ordered_ids], obstacle, start=0
        )
        order, _total = shortest_hamiltonian_path(graph)
        batch: list[frozenset[VoxelKey]] = []
        prev = 0
        for local in order[1:]:
            vid = ordered_ids[local]
            trace.legs.append(float(graph.weights[prev, local]))
            state = state.with_visited(vid)
            covered = covered | visibility.sets[vid]
            batch.append(visibility.sets[vid])
            trace.visited.append(vid)
            trace.path_views.append(vid)
            trace.coverage.append(len(covered) / len(universe))
            trace.planners.append("oneshot")
            prev = local
        # Single batched scene update once every path view is imaged.
        for vid, observed in zip(trace.path_views, batch):
            insert_observation(partial, observed, views[vid])

    trace.covered = covered
    trace.metrics = Metrics(
        vsc=len(covered) / len(universe),
        rv=len(trace.visited),
        mc=float(sum(trace.legs)),
    )
    trace.validate()
    assert trace.metrics.rv == 1 + trace.nbv_iterations + len(trace.path_views)
    return trace


def compute_metrics(
    trace: ReconstructionTrace, visibility: VisibilityTable
) -> Metrics:
    """Metrics recomputed from the trace contents."""
    return Metrics(
        vsc=len(trace.covered) / len(visibility.universe),
        rv=len(trace.visited),
        mc=float(sum(trace.legs)),
    )


@dataclass(frozen=True)
class BenchCase:
    """One corpus entry prepared for benchmarking."""

    object_name: str
    rotation: int
    scene: Scene
    views: ViewSpace
    visibility: VisibilityTable
    cam: CameraIntrinsics


@dataclass(frozen=True)
class PlannerSpec:
    """Parsed planner column: kind plus NBV/one-shot configuration."""

    label: str
    nbv: str
    oneshot: str
    k: int | None  # None: run NBVs to the pure-NBV cap
    stochastic: bool

    _ALIASES = {
        "oracle": "nbv-oracle",
        "random": "nbv-random",
        "unknown": "nbv-unknown",
        "combined": "combined-oracle",
    }

    @classmethod
    def parse(cls, spec: str, default_k: int) -> "PlannerSpec":
        name, _, argtext = spec.partition(":")
        name = cls._ALIASES.get(name, name)
        args = {}
        if argtext and not name.startswith("oneshot-external"):
            for item in argtext.split(","):
                key, _, value = item.partition("=")
                args[key] = value
        k = int(args["k"]) if "k" in args else None

        if name == "combined-oracle":
            return cls(spec, "oracle", "oracle", default_k if k is None else k, False)
        if name == "combined-random":
            return cls(spec, "random", "oracle", default_k if k is None else k, True)
        if name == "combined-unknown":
            return cls(spec, "unknown", "oracle", default_k if k is None else k, False)
        if name == "oneshot-oracle":
            return cls(spec, "oracle", "oracle", 0, False)
        if name == "oneshot-external":
            return cls(spec, "oracle", f"external:{argtext}", 0, False)
        if name == "nbv-oracle":
            return cls(spec, "oracle", "none", k, False)
        if name == "nbv-oracle-mov":
            return cls(spec, "oracle-mov", "none", k, False)
        if name == "nbv-random":
            return cls(spec, "random", "none", k, True)
        if name == "nbv-unknown":
            return cls(spec, "unknown", "none", k, False)
        raise ValueError(f"unknown planner spec {spec!r}")


def run_benchmark(
    corpus: list[BenchCase],
    planner_matrix: list[str],
    seeds: list[int],
    init_views: list[int] | None = None,
    default_k: int = 1,
) -> tuple[list[dict], list[dict]]:
    """Run every (case, initial view, planner[, seed]) cell.

    Pure-NBV planners with no explicit iteration count are capped at the RV
    the cell's first combined planner needed, mirroring an auto-stopped
    comparison. Returns (result rows, per-iteration curve rows); failures are
    logged and skipped.
    """
    if init_views is None:
        init_views = [0, 6, 12, 19, 25]
    specs = [PlannerSpec.parse(s, default_k) for s in planner_matrix]
    rows: list[dict] = []
    curves: list[dict] = []

    for case in corpus:
        for v0 in init_views:
            cell_traces: list[tuple[PlannerSpec, int, ReconstructionTrace, float]] = []
            combined_rv: int | None = None
            for spec in specs:
                run_seeds = seeds if spec.stochastic else seeds[:1]
                for seed in run_seeds:
                    if spec.k is not None:
                        k = spec.k
                    elif combined_rv is not None:
                        k = max(combined_rv - 1, 0)
                    else:
                        k = 31
                    started = time.perf_counter()
                    try:
                        trace = run_combined(
                            case.scene, case.views, case.cam, k,
                            make_nbv_planner(spec.nbv),
                            make_oneshot_planner(spec.oneshot),
                            v0,
                            visibility=case.visibility,
                            seed=seed,
                        )
                    except PipelineError:
                        logger.exception(
                            "cell failed: %s rot=%d v0=%d planner=%s",
                            case.object_name, case.rotation, v0, spec.label,
                        )
                        continue
                    elapsed = time.perf_counter() - started
                    if spec.oneshot != "none" and combined_rv is None:
                        combined_rv = trace.metrics.rv
                    cell_traces.append((spec, seed, trace, elapsed))

            max_iter = max(
                (t.metrics.rv for _, _, t, _ in cell_traces), default=0
            )
            for spec, seed, trace, elapsed in cell_traces:
                label = (
                    f"{spec.label}:seed={seed}" if spec.stochastic else spec.label
                )
                rows.append(
                    {
                        "object": case.object_name,
                        "rotation": case.rotation,
                        "init_view": v0,
                        "planner": label,
                        "k": trace.nbv_iterations,
                        "rv": trace.metrics.rv,
                        "vsc": trace.metrics.vsc,
                        "mc": trace.metrics.mc,
                        "wallclock_s": elapsed,
                    }
                )
                mc_running = 0.0
                for it in range(max_iter):
                    if it < len(trace.visited):
                        vsc = trace.coverage[it]
                        if it > 0:
                            mc_running += trace.legs[it - 1]
                    else:
                        vsc = trace.coverage[-1]  # carry final metrics forward
                    curves.append(
                        {
                            "object": case.object_name,
                            "rotation": case.rotation,
                            "init_view": v0,
                            "planner": label,
                            "iter": it,
                            "vsc": vsc,
                            "mc": mc_running,
                        }
                    )
    return rows, curves


def summarize(rows: list[dict]) -> list[dict]:
    """Mean metrics per planner over all benchmark rows."""
    by_planner: dict[str, list[dict]] = {}
    for row in rows:
        by_planner.setdefault(row["planner"], []).append(row)
    summary = []
    for planner in sorted(by_planner):
        group = by_planner[planner]
        summary.append(
            {
                "planner": planner,
                "cells": len(group),
                "mean_rv": float(np.mean([r["rv"] for r in group])),
                "mean_vsc": float(np.mean([r["vsc"] for r in group])),
                "mean_mc": float(np.mean([r["mc"] for r in group])),
            }
        )
    return summary
