"""Command-line entry points wiring the modules into reproducible runs.

Commands: views, reconstruct, dataset, bench, solve-scop. Every command is
deterministic given its flags (wallclock columns aside) and writes a config
echo next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import dataset as ds
from . import pipeline as pl
from .geometry import build_view_space, export_view_space
from .mesh import load_mesh
from .sampling import (
    InputCase,
    ObjectCase,
    generate_whole_space,
    sample_longtail,
    sample_nbvr,
)
from .set_cover import DEFAULT_NODE_BUDGET, CoverInstance, solve_exact
from .voxel_world import CameraIntrinsics, build_scene, compute_visibility

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION_M = 0.002
DEFAULT_RADIUS_M = 0.4


def _echo_config(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    payload = {"command": command}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        payload[key] = str(value) if isinstance(value, Path) else value
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{command}.config.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )


def _write_csv(path: Path, rows: list[dict], header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x != ""]


def cmd_views(args: argparse.Namespace) -> int:
    space = build_view_space(
        tuple(args.center), args.radius_m, args.tabletop_z_m, args.seed
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(export_view_space(space))
    _echo_config(out.parent, "views", args)
    print(f"wrote {len(space.views)} views to {out}")
    return 0


def _prepare_case(mesh_path: Path, rotation: int, args) -> pl.BenchCase:
    mesh = load_mesh(mesh_path)
    scene = build_scene(
        mesh, rotation, resolution=args.resolution_m, seed=args.seed
    )
    views = build_view_space(
        scene.object_center, args.radius_m, scene.tabletop_z, seed=args.seed
    )
    cam = CameraIntrinsics()
    visibility = compute_visibility(scene, views, cam, stride=args.stride)
    return pl.BenchCase(
        object_name=mesh_path.stem, rotation=rotation, scene=scene,
        views=views, visibility=visibility, cam=cam,
    )


def cmd_reconstruct(args: argparse.Namespace) -> int:
    mesh_path = Path(args.mesh)
    if not mesh_path.exists():
        logger.error("mesh not found: %s", mesh_path)
        return 2
    case = _prepare_case(mesh_path, args.rotation, args)
    try:
        trace = pl.run_combined(
            case.scene, case.views, case.cam, args.k,
            pl.make_nbv_planner(args.nbv, stride=args.stride),
            pl.make_oneshot_planner(args.oneshot),
            args.init_view,
            visibility=case.visibility,
            seed=args.seed,
        )
    except pl.PipelineError as err:
        logger.error("reconstruction failed: %s", err)
        return 3

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    step_rows = []
    mc_running = 0.0
    for i, vid in enumerate(trace.visited):
        if i > 0:
            mc_running += trace.legs[i - 1]
        step_rows.append(
            {
                "step": i,
                "view": vid,
                "planner": trace.planners[i],
                "vsc": f"{trace.coverage[i]:.9g}",
                "leg_m": f"{trace.legs[i - 1]:.9g}" if i > 0 else "0",
                "mc_m": f"{mc_running:.9g}",
            }
        )
    _write_csv(
        out_dir / "trace.csv", step_rows,
        ["step", "view", "planner", "vsc", "leg_m", "mc_m"],
    )
    metrics = trace.metrics
    _write_csv(
        out_dir / "summary.csv",
        [
            {
                "object": case.object_name,
                "rotation": case.rotation,
                "init_view": args.init_view,
                "k": trace.nbv_iterations,
                "rv": metrics.rv,
                "vsc": f"{metrics.vsc:.9g}",
                "mc": f"{metrics.mc:.9g}",
            }
        ],
        ["object", "rotation", "init_view", "k", "rv", "vsc", "mc"],
    )
    _echo_config(out_dir, "reconstruct", args)
    print(
        f"reconstructed {case.object_name}: RV={metrics.rv} "
        f"VSC={metrics.vsc:.4f} MC={metrics.mc:.4f} m"
    )
    return 0


def cmd_dataset(args: argparse.Namespace) -> int:
    mesh_paths = [Path(p) for p in args.corpus.split(",")]
    for p in mesh_paths:
        if not p.exists():
            logger.error("mesh not found: %s", p)
            return 2
    rotations = _parse_int_list(args.rotations)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    cases_by_key: dict[tuple[int, int], pl.BenchCase] = {}
    for oid, mesh_path in enumerate(mesh_paths):
        for rot in rotations:
            cases_by_key[(oid, rot)] = _prepare_case(mesh_path, rot, args)

    objects = [
        ObjectCase(object_id=oid, rotation=rot)
        for oid in range(len(mesh_paths))
        for rot in rotations
    ]

    def builder(case: ObjectCase):
        return cases_by_key[(case.object_id, case.rotation)].visibility

    whole, ns = generate_whole_space(objects, builder)
    if args.sampler == "longtail":
        sampled = sample_longtail(whole, ns, args.n_single, seed=args.seed)
    elif args.sampler == "nbvr":
        # n-single doubles as the per-object count of random initial views.
        sampled = sample_nbvr(objects, builder, args.n_single, seed=args.seed)
    else:
        sampled = whole

    done: set[tuple[int, int, int]] = set()
    salvaged: list[ds.SupervisionPair] = []
    if args.resume and out.exists():
        salvaged = ds.scan_records(out)
        done = {
            (p.object_id, p.rotation, p.state.c_view) for p in salvaged
        }
        logger.info("resume: %d records already present", len(salvaged))

    def make_pair(case: InputCase) -> ds.SupervisionPair | None:
        bench = cases_by_key[(case.object_case.object_id, case.object_case.rotation)]
        try:
            if args.label == "nbv":
                return ds.generate_nbv_pair(
                    case, bench.scene, bench.views, bench.cam,
                    visibility=bench.visibility,
                )
            return ds.generate_pair(
                case, bench.scene, bench.views, bench.cam,
                visibility=bench.visibility, node_budget=args.node_budget,
            )
        except ValueError as err:
            logger.warning("skipping case %s: %s", case, err)
            return None

    todo = [
        c for c in sampled
        if (c.object_case.object_id, c.object_case.rotation, c.c_view) not in done
    ]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fresh = list(pool.map(make_pair, todo))
    else:
        fresh = [make_pair(c) for c in todo]

    with ds.DatasetWriter(out) as writer:
        for pair in salvaged:
            writer.append(pair)
        for pair in fresh:
            if pair is not None:
                writer.append(pair)
        total = writer._count

    ds.write_manifest(
        out.with_suffix(".manifest.json"),
        {
            "objects": [str(p) for p in mesh_paths],
            "rotations": rotations,
            "sampler": args.sampler,
            "label": args.label,
            "n_single": args.n_single,
            "seed": args.seed,
            "node_budget": args.node_budget,
            "resolution_m": args.resolution_m,
            "radius_m": args.radius_m,
            "records": total,
            "cover_tie_break": "lexicographic-smallest-id-set",
        },
    )
    _echo_config(out.parent, "dataset", args)
    print(f"wrote {total} supervision pairs to {out}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    mesh_paths = [Path(p) for p in args.corpus.split(",")]
    for p in mesh_paths:
        if not p.exists():
            logger.error("mesh not found: %s", p)
            return 2
    rotations = _parse_int_list(args.rotations)
    corpus = [
        _prepare_case(p, rot, args) for p in mesh_paths for rot in rotations
    ]
    rows, curves = pl.run_benchmark(
        corpus,
        args.planners.split(","),
        seeds=_parse_int_list(args.seeds),
        init_views=_parse_int_list(args.init_views),
        default_k=args.k,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for row in rows:
        row["vsc"] = f"{row['vsc']:.9g}"
        row["mc"] = f"{row['mc']:.9g}"
        row["wallclock_s"] = f"{row['wallclock_s']:.4f}"
    _write_csv(
        out_dir / "results.csv", rows,
        ["object", "rotation", "init_view", "planner", "k", "rv", "vsc", "mc",
         "wallclock_s"],
    )
    for row in curves:
        row["vsc"] = f"{row['vsc']:.9g}"
        row["mc"] = f"{row['mc']:.9g}"
    _write_csv(
        out_dir / "curves.csv", curves,
        ["object", "rotation", "init_view", "planner", "iter", "vsc", "mc"],
    )
    summary = pl.summarize(
        [
            {**r, "vsc": float(r["vsc"]), "mc": float(r["mc"])}
            for r in rows
        ]
    )
    for row in summary:
        row["mean_rv"] = f"{row['mean_rv']:.9g}"
        row["mean_vsc"] = f"{row['mean_vsc']:.9g}"
        row["mean_mc"] = f"{row['mean_mc']:.9g}"
    _write_csv(
        out_dir / "summary.csv", summary,
        ["planner", "cells", "mean_rv", "mean_vsc", "mean_mc"],
    )
    _echo_config(out_dir, "bench", args)
    print(f"wrote {len(rows)} benchmark rows to {out_dir}")
    return 0


def cmd_solve_scop(args: argparse.Namespace) -> int:
    path = Path(args.instance)
    if not path.exists():
        logger.error("instance file not found: %s", path)
        return 2
    instance = CoverInstance.parse(path.read_text())
    started = time.perf_counter()
    solution = solve_exact(instance, node_budget=args.node_budget)
    elapsed = time.perf_counter() - started
    print(f"objective {solution.objective}")
    print(f"chosen {' '.join(str(v) for v in solution.chosen)}")
    print(f"optimal {'yes' if solution.optimal else 'no'}")
    print(f"seconds {elapsed:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewplan",
        description="View planning engine and simulation harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--resolution-m", type=float, default=DEFAULT_RESOLUTION_M,
                       help="imaging world resolution in meters")
        p.add_argument("--radius-m", type=float, default=DEFAULT_RADIUS_M,
                       help="view sphere radius in meters")
        p.add_argument("--seed", type=int, default=0, help="root random seed")
        p.add_argument("--stride", type=int, default=2,
                       help="pixel stride for virtual imaging")

    p = sub.add_parser("views", help="export the candidate view space")
    p.add_argument("--out", required=True)
    p.add_argument("--center", type=float, nargs=3, default=[0.0, 0.0, 0.05])
    p.add_argument("--radius-m", type=float, default=DEFAULT_RADIUS_M)
    p.add_argument("--tabletop-z-m", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_views)

    p = sub.add_parser("reconstruct", help="run the combined pipeline once")
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rotation", type=int, default=0)
    p.add_argument("--k", type=int, default=1, help="NBV iterations")
    p.add_argument("--nbv", default="oracle",
                   choices=["oracle", "random", "unknown", "oracle-mov"])
    p.add_argument("--oneshot", default="oracle",
                   help="oracle, none, or external:PATH")
    p.add_argument("--init-view", type=int, default=0)
    add_common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("dataset", help="generate a supervision-pair dataset")
    p.add_argument("--corpus", required=True, help="comma-separated mesh paths")
    p.add_argument("--out", required=True, help="output .vpsp path")
    p.add_argument("--rotations", default="0,4")
    p.add_argument("--n-single", type=int, default=8)
    p.add_argument("--label", default="sc", choices=["sc", "nbv"])
    p.add_argument("--sampler", default="longtail",
                   choices=["longtail", "nbvr", "whole"])
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--workers", type=int, default=0,
                   help="0 = available parallelism")
    p.add_argument("--resume", action="store_true",
                   help="keep valid records already in the output file")
    add_common(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("bench", help="run the planner comparison benchmark")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rotations", default="0,4")
    p.add_argument("--planners", default="combined-oracle,nbv-oracle")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seeds", default="1")
    p.add_argument("--init-views", default="0,6,12,19,25")
    add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("solve-scop", help="solve a covering instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.set_defaults(func=cmd_solve_scop)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
