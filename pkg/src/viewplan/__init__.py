"""View planning engine and simulation harness for tabletop reconstruction."""

from .geometry import (
    ObstacleSphere,
    PathGraph,
    View,
    ViewSpace,
    build_path_graph,
    build_view_space,
    local_path_length,
    shortest_hamiltonian_path,
    view_pose,
)
from .mesh import TriangleMesh, load_mesh
from .planner import (
    ViewState,
    movement_weighted_utility,
    nbv_oracle,
    nbv_random,
    nbv_unknown_gain,
    oneshot_external,
    oneshot_oracle,
)
from .pipeline import (
    BenchCase,
    Metrics,
    ReconstructionTrace,
    compute_metrics,
    run_benchmark,
    run_combined,
)
from .sampling import (
    InputCase,
    NSTable,
    ObjectCase,
    generate_whole_space,
    long_tail_limit,
    sample_longtail,
    sample_nbvr,
)
from .set_cover import CoverInstance, CoverSolution, solve_exact, solve_greedy
from .voxel_world import (
    CameraIntrinsics,
    InputGrid,
    OccupancyGrid,
    Scene,
    VisibilityTable,
    build_scene,
    compute_visibility,
    extract_input_grid,
    ingest_object,
    insert_observation,
    virtual_imaging,
)
from .dataset import (
    SupervisionPair,
    generate_nbv_pair,
    generate_pair,
    read_dataset,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BenchCase",
    "CameraIntrinsics",
    "CoverInstance",
    "CoverSolution",
    "InputCase",
    "InputGrid",
    "Metrics",
    "NSTable",
    "ObjectCase",
    "ObstacleSphere",
    "OccupancyGrid",
    "PathGraph",
    "ReconstructionTrace",
    "Scene",
    "SupervisionPair",
    "TriangleMesh",
    "View",
    "ViewSpace",
    "ViewState",
    "VisibilityTable",
    "build_path_graph",
    "build_scene",
    "build_view_space",
    "compute_metrics",
    "compute_visibility",
    "extract_input_grid",
    "generate_nbv_pair",
    "generate_pair",
    "generate_whole_space",
    "ingest_object",
    "insert_observation",
    "load_mesh",
    "local_path_length",
    "long_tail_limit",
    "movement_weighted_utility",
    "nbv_oracle",
    "nbv_random",
    "nbv_unknown_gain",
    "oneshot_external",
    "oneshot_oracle",
    "read_dataset",
    "run_benchmark",
    "run_combined",
    "sample_longtail",
    "sample_nbvr",
    "shortest_hamiltonian_path",
    "solve_exact",
    "solve_greedy",
    "view_pose",
    "virtual_imaging",
    "write_dataset",
]
