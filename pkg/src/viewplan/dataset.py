"""Supervision-pair generation and the VPSP on-disk record format.

Each pair holds the 32^3 input grid, the 32-bit visited-view state, a 32-bit
label (either a minimum cover or a one-hot next view), and case metadata.
Records are fixed-size and CRC-checked so any prefix of a file is
recoverable.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ViewSpace
from .planner import VIEW_COUNT, ViewState, nbv_oracle, oneshot_oracle_solution
from .sampling import InputCase
from .set_cover import DEFAULT_NODE_BUDGET
from .voxel_world import (
    CameraIntrinsics,
    InputGrid,
    Scene,
    VisibilityTable,
    compute_visibility,
    extract_input_grid,
    insert_observation,
)

logger = logging.getLogger(__name__)

MAGIC = b"VPSP"
FORMAT_VERSION = 1
GRID_BYTES = 32 * 32 * 32
_HEADER = struct.Struct("<4sIQ")
_META = struct.Struct("<HBBB3x")
_CRC = struct.Struct("<I")
RECORD_BYTES = GRID_BYTES + 32 + 32 + _META.size + _CRC.size


class DatasetFormatError(ValueError):
    """Structural problem in a VPSP file."""


class DatasetVersionError(DatasetFormatError):
    """File declares an unsupported format version."""


class DatasetChecksumError(DatasetFormatError):
    """A record's CRC does not match its payload."""


@dataclass(frozen=True)
class SupervisionPair:
    grid: np.ndarray
    v_state: np.ndarray
    label: np.ndarray
    object_id: int
    rotation: int
    n_select: int
    optimal: bool

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=np.uint8)
        state = np.ascontiguousarray(self.v_state, dtype=np.uint8).reshape(VIEW_COUNT)
        label = np.ascontiguousarray(self.label, dtype=np.uint8).reshape(VIEW_COUNT)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "v_state", state)
        object.__setattr__(self, "label", label)
        if grid.shape != (32, 32, 32):
            raise ValueError("grid must be 32x32x32")
        if state.max(initial=0) > 1 or label.max(initial=0) > 1:
            raise ValueError("state and label must be 0/1 vectors")
        if np.any(state & label):
            raise ValueError("label must not include visited views")
        if not (0 <= self.object_id < 2**16 and 0 <= self.rotation < 8):
            raise ValueError("metadata out of range")
        if self.n_select != int(state.sum()):
            raise ValueError("n_select must match the state popcount")

    @property
    def state(self) -> ViewState:
        return ViewState.from_ids(np.flatnonzero(self.v_state).tolist())

    @property
    def label_ids(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.label))

    def record_bytes(self) -> bytes:
        payload = (
            self.grid.tobytes(order="F")
            + self.v_state.tobytes()
            + self.label.tobytes()
            + _META.pack(
                self.object_id,
                self.rotation,
                self.n_select,
                1 if self.optimal else 0,
            )
        )
        return payload + _CRC.pack(zlib.crc32(payload))

    @classmethod
    def from_record(cls, record: bytes) -> "SupervisionPair":
        if len(record) != RECORD_BYTES:
            raise DatasetFormatError("record has wrong size")
        payload, crc_raw = record[: -_CRC.size], record[-_CRC.size :]
        if zlib.crc32(payload) != _CRC.unpack(crc_raw)[0]:
            raise DatasetChecksumError("record checksum mismatch")
        grid = np.frombuffer(payload[:GRID_BYTES], dtype=np.uint8)
        grid = grid.reshape((32, 32, 32), order="F").copy()
        state = np.frombuffer(payload[GRID_BYTES : GRID_BYTES + 32], np.uint8).copy()
        label = np.frombuffer(
            payload[GRID_BYTES + 32 : GRID_BYTES + 64], np.uint8
        ).copy()
        object_id, rotation, n_select, flags = _META.unpack(
            payload[GRID_BYTES + 64 :]
        )
        return cls(
            grid=grid,
            v_state=state,
            label=label,
            object_id=object_id,
            rotation=rotation,
            n_select=n_select,
            optimal=bool(flags & 1),
        )


def _accumulate_case(
    case: InputCase,
    scene: Scene,
    views: ViewSpace,
    visibility: VisibilityTable,
) -> tuple[InputGrid, frozenset]:
    """Insert the case's selected observations into a fresh map and extract
    the input grid; returns (input grid, covered voxel set)."""
    partial = scene.fresh_partial_map()
    covered: set = set()
    for vid in sorted(case.state.visited_ids()):
        insert_observation(partial, visibility.sets[vid], views[vid])
        covered |= visibility.sets[vid]
    grid = extract_input_grid(
        partial, scene.o_size, scene.object_center, scene.tabletop_z
    )
    return grid, frozenset(covered)


def generate_pair(
    case: InputCase,
    scene: Scene,
    views: ViewSpace,
    cam: CameraIntrinsics,
    visibility: VisibilityTable | None = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> SupervisionPair:
    """One set-covering supervision pair for an input case.

    Observations from the selected views accumulate into a tabletop-primed
    map, the remaining universe is covered exactly, and the label marks the
    chosen views. Budget-exhausted solves are kept but flagged non-optimal.
    """
    if visibility is None:
        visibility = compute_visibility(scene, views, cam)
    grid, covered = _accumulate_case(case, scene, views, visibility)
    state = case.state
    solution = oneshot_oracle_solution(
        visibility, covered, state, node_budget=node_budget
    )
    label = np.zeros(VIEW_COUNT, dtype=np.uint8)
    for vid in solution.chosen:
        label[vid] = 1
    return SupervisionPair(
        grid=grid.cells,
        v_state=np.array(state.flags(), dtype=np.uint8),
        label=label,
        object_id=case.object_case.object_id,
        rotation=case.object_case.rotation,
        n_select=case.n_select,
        optimal=solution.optimal,
    )


def generate_nbv_pair(
    case: InputCase,
    scene: Scene,
    views: ViewSpace,
    cam: CameraIntrinsics,
    visibility: VisibilityTable | None = None,
) -> SupervisionPair:
    """One next-best-view pair: the label is one-hot at the view with the
    largest marginal surface gain. Fails when nothing remains uncovered or
    when the remaining surface is unreachable (zero gains)."""
    if visibility is None:
        visibility = compute_visibility(scene, views, cam)
    grid, covered = _accumulate_case(case, scene, views, visibility)
    u_rest = frozenset(visibility.universe) - covered
    if not u_rest:
        raise ValueError("case already covers the universe; no next view exists")
    state = case.state
    best = nbv_oracle(visibility, covered, state)
    if not visibility.sets[best] - covered:
        raise ValueError(
            "uncovered voxels remain but every unvisited view gains nothing"
        )
    label = np.zeros(VIEW_COUNT, dtype=np.uint8)
    label[best] = 1
    return SupervisionPair(
        grid=grid.cells,
        v_state=np.array(state.flags(), dtype=np.uint8),
        label=label,
        object_id=case.object_case.object_id,
        rotation=case.object_case.rotation,
        n_select=case.n_select,
        optimal=True,
    )


class DatasetWriter:
    """Single-writer append; the header count is patched on close so any
    completed prefix of records stays readable."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "wb")
        self._count = 0
        self._fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, 0))

    def append(self, pair: SupervisionPair) -> None:
        self._fh.write(pair.record_bytes())
        self._count += 1

    def close(self) -> None:
        if self._fh.closed:
            return
        self._fh.flush()
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, self._count))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_dataset(pairs, path) -> int:
    with DatasetWriter(path) as writer:
        for pair in pairs:
            writer.append(pair)
        return writer._count


def _read_header(fh, path) -> int:
    head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise DatasetFormatError(f"{path}: missing header")
    magic, version, count = _HEADER.unpack(head)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetVersionError(
            f"{path}: format version {version} unsupported (expected "
            f"{FORMAT_VERSION})"
        )
    return count


def read_dataset(path) -> list[SupervisionPair]:
    """Strict read: count must match and every record checksum must hold."""
    path = Path(path)
    with open(path, "rb") as fh:
        count = _read_header(fh, path)
        pairs = []
        for i in range(count):
            record = fh.read(RECORD_BYTES)
            if len(record) < RECORD_BYTES:
                raise DatasetFormatError(
                    f"{path}: truncated at record {i} of {count}"
                )
            pairs.append(SupervisionPair.from_record(record))
        if fh.read(1):
            raise DatasetFormatError(f"{path}: trailing bytes after {count} records")
    return pairs


def scan_records(path) -> list[SupervisionPair]:
    """Salvage read for resume: returns every whole, checksum-valid record
    prefix regardless of the declared count."""
    path = Path(path)
    pairs = []
    with open(path, "rb") as fh:
        _read_header(fh, path)
        while True:
            record = fh.read(RECORD_BYTES)
            if len(record) < RECORD_BYTES:
                break
            try:
                pairs.append(SupervisionPair.from_record(record))
            except DatasetChecksumError:
                break
    return pairs


def write_manifest(path, settings: dict) -> None:
    Path(path).write_text(json.dumps(settings, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
