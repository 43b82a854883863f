"""Voxelized swept volumes on a shared planar grid.

A voxel set is a 1-D ``int64`` array of strictly increasing linear cell
indices (row-major, last axis fastest).  A cell belongs to a capsule's
voxelization when its center lies within ``radius + d_voxel*sqrt(2)/2`` of
the capsule axis; this over-approximates every cell the capsule touches.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .geom import RobotModel, interpolate, link_segments_batch
from .roadmap import Roadmap

VOLUME_MAGIC = b"FDVX"
VOLUME_FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sI2dd2I2Id")  # magic, version, origin, d_voxel, dims, n_nodes, n_edges, delta

EMPTY = np.zeros(0, dtype=np.int64)


class OutOfGridError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class VoxelGrid:
    origin: tuple
    d_voxel: float
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))
        object.__setattr__(self, "d_voxel", float(self.d_voxel))
        if not self.d_voxel > 0:
            raise ValueError("d_voxel must be positive")
        if len(self.dims) != 2 or min(self.dims) < 1:
            raise ValueError("dims must be two positive counts")

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1]

    @property
    def upper(self) -> tuple:
        return tuple(o + n * self.d_voxel for o, n in zip(self.origin, self.dims))

    def covers(self, lo, hi) -> bool:
        up = self.upper
        return all(self.origin[k] <= lo[k] and hi[k] <= up[k] for k in range(2))

    def cell_center(self, index: int) -> np.ndarray:
        ix, iy = divmod(int(index), self.dims[1])
        return np.array([self.origin[0] + (ix + 0.5) * self.d_voxel, self.origin[1] + (iy + 0.5) * self.d_voxel])

    def cell_bounds(self, index: int):
        ix, iy = divmod(int(index), self.dims[1])
        lo = np.array([self.origin[0] + ix * self.d_voxel, self.origin[1] + iy * self.d_voxel])
        return lo, lo + self.d_voxel

    def cell_of(self, p) -> int:
        ix = int(math.floor((p[0] - self.origin[0]) / self.d_voxel))
        iy = int(math.floor((p[1] - self.origin[1]) / self.d_voxel))
        if not (0 <= ix < self.dims[0] and 0 <= iy < self.dims[1]):
            raise OutOfGridError(f"point {tuple(p)} outside grid")
        return ix * self.dims[1] + iy

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "d_voxel": self.d_voxel, "dims": list(self.dims)}

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelGrid":
        return cls(tuple(d["origin"]), d["d_voxel"], tuple(d["dims"]))


def reachable_bounding_box(robot: RobotModel):
    half = robot.reach + robot.link_radius
    base = robot.base_position
    return base - half, base + half


def grid_covering(robots, d_voxel: float, lower=None, upper=None) -> VoxelGrid:
    """Smallest grid (snapped to whole cells) covering every robot's reachable box and optional explicit bounds."""
    boxes = [reachable_bounding_box(r) for r in robots]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    if lower is not None:
        lo = np.minimum(lo, np.asarray(lower, dtype=float))
    if upper is not None:
        hi = np.maximum(hi, np.asarray(upper, dtype=float))
    origin = np.floor(lo / d_voxel) * d_voxel
    dims = np.ceil((hi - origin) / d_voxel - 1e-9).astype(int)
    grid = VoxelGrid(tuple(origin), d_voxel, tuple(int(max(1, n)) for n in dims))
    while not grid.covers(lo, hi):  # floating slack
        grid = VoxelGrid(grid.origin, d_voxel, (grid.dims[0] + 1, grid.dims[1] + 1))
    return grid


# ---------------------------------------------------------------------------
# voxelization


def voxelize_segments(grid: VoxelGrid, A, B, radius: float, chunk: int = 256) -> np.ndarray:
    """Cells whose center is within ``radius + half cell diagonal`` of any segment A[k]-B[k]."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if len(A) == 0:
        return EMPTY.copy()
    d = grid.d_voxel
    reach = radius + d * math.sqrt(2.0) / 2.0
    geo_lo = np.minimum(A.min(axis=0), B.min(axis=0)) - radius
    geo_hi = np.maximum(A.max(axis=0), B.max(axis=0)) + radius
    if not grid.covers(geo_lo, geo_hi):
        raise OutOfGridError("geometry leaves the voxel grid")
    origin = np.asarray(grid.origin)
    dims = np.asarray(grid.dims)
    i_lo = np.maximum(np.floor((geo_lo - (reach - radius) - origin) / d).astype(int) - 1, 0)
    i_hi = np.minimum(np.ceil((geo_hi + (reach - radius) - origin) / d).astype(int) + 1, dims - 1)
    ix = np.arange(i_lo[0], i_hi[0] + 1)
    iy = np.arange(i_lo[1], i_hi[1] + 1)
    gx, gy = np.meshgrid(ix, iy, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    cx = origin[0] + (gx + 0.5) * d
    cy = origin[1] + (gy + 0.5) * d
    r2 = reach * reach
    hit = np.zeros(len(cx), dtype=bool)
    for s in range(0, len(A), chunk):
        a = A[s : s + chunk]
        b = B[s : s + chunk]
        abx = (b[:, 0] - a[:, 0])[None, :]
        aby = (b[:, 1] - a[:, 1])[None, :]
        denom = abx * abx + aby * aby
        px = cx[:, None] - a[None, :, 0]
        py = cy[:, None] - a[None, :, 1]
        safe = np.where(denom > 0, denom, 1.0)
        t = np.clip(np.where(denom > 0, (px * abx + py * aby) / safe, 0.0), 0.0, 1.0)
        dx = px - t * abx
        dy = py - t * aby
        hit |= np.any(dx * dx + dy * dy <= r2, axis=1)
    idx = gx[hit].astype(np.int64) * grid.dims[1] + gy[hit]
    return np.unique(idx)


def voxelize_capsules(grid: VoxelGrid, capsules) -> np.ndarray:
    out = [voxelize_segments(grid, c.endpoint_a, c.endpoint_b, c.radius) for c in capsules]
    return np.unique(np.concatenate(out)) if out else EMPTY.copy()


def voxelize_config(robot: RobotModel, q, grid: VoxelGrid) -> np.ndarray:
    A, B = link_segments_batch(robot, np.asarray(q, dtype=float)[None])
    return voxelize_segments(grid, A, B, robot.link_radius)


def voxelize_edge(robot: RobotModel, q_a, q_b, grid: VoxelGrid, delta: float) -> np.ndarray:
    """Union of the configuration voxelizations along q_a -> q_b, samples spaced <= delta."""
    Q = interpolate(q_a, q_b, delta)
    A, B = link_segments_batch(robot, Q)
    return voxelize_segments(grid, A, B, robot.link_radius)


def default_delta(robot: RobotModel, d_voxel: float, fraction: float = 0.5) -> float:
    """Largest joint-space step whose workspace displacement stays within ``fraction * d_voxel``.

    Displacement of any link point is bounded by sum_j |dq_j| * distal_j <=
    |dq|_2 * sqrt(sum_j distal_j^2).
    """
    lever = float(np.sqrt(np.sum(robot.distal_lengths() ** 2)))
    return fraction * d_voxel / lever


@njit(cache=True)
def _merge_intersect(a, b):
    i = 0
    j = 0
    na = a.shape[0]
    nb = b.shape[0]
    while i < na and j < nb:
        x = a[i]
        y = b[j]
        if x == y:
            return True
        if x < y:
            i += 1
        else:
            j += 1
    return False


def voxelsets_intersect(a, b) -> bool:
    """Linear merge-scan over two sorted index arrays."""
    if len(a) == 0 or len(b) == 0 or a[-1] < b[0] or b[-1] < a[0]:
        return False
    return bool(_merge_intersect(a, b))


def warm_up():
    """Trigger JIT compilation so the first timed intersection does not pay for it."""
    a = np.array([0, 2], dtype=np.int64)
    _merge_intersect(a, a + 1)


def is_voxelset(v, grid: VoxelGrid | None = None) -> bool:
    v = np.asarray(v)
    if v.ndim != 1 or (len(v) and (v[0] < 0 or np.any(np.diff(v) <= 0))):
        return False
    return grid is None or len(v) == 0 or int(v[-1]) < grid.n_cells


# ---------------------------------------------------------------------------
# annotated roadmaps


@dataclass
class AnnotatedRoadmap:
    roadmap: Roadmap
    grid: VoxelGrid
    node_volumes: list
    edge_volumes: list
    delta: float = math.nan    # edge sampling step used to build the edge volumes

    def __post_init__(self):
        # cell-space bounding boxes per volume for a cheap disjointness pre-test
        self.node_boxes = np.array([_cell_box(v, self.grid) for v in self.node_volumes]).reshape(-1, 4)
        self.edge_boxes = np.array([_cell_box(v, self.grid) for v in self.edge_volumes]).reshape(-1, 4)

    def edge_volume(self, u: int, v: int) -> np.ndarray:
        return self.edge_volumes[self.roadmap.edge_index(u, v)]


def _cell_box(v, grid):
    if len(v) == 0:
        return (1, 0, 1, 0)  # empty box, never overlaps
    ix = v // grid.dims[1]
    iy = v % grid.dims[1]
    return (int(ix.min()), int(ix.max()), int(iy.min()), int(iy.max()))


def annotate_roadmap(robot: RobotModel, roadmap: Roadmap, grid: VoxelGrid, delta: float) -> AnnotatedRoadmap:
    lo, hi = reachable_bounding_box(robot)
    if not grid.covers(lo, hi):
        raise OutOfGridError("grid does not cover the robot's reachable bounding box")
    nodes = [voxelize_config(robot, q, grid) for q in roadmap.nodes]
    edges = [voxelize_edge(robot, roadmap.nodes[u], roadmap.nodes[v], grid, delta) for u, v in roadmap.edges]
    return AnnotatedRoadmap(roadmap, grid, nodes, edges, float(delta))


# ---------------------------------------------------------------------------
# persistence


def save_volumes(path, ann: AnnotatedRoadmap):
    g = ann.grid
    vols = ann.node_volumes + ann.edge_volumes
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(VOLUME_MAGIC, VOLUME_FORMAT_VERSION, *g.origin, g.d_voxel, *g.dims,
                              len(ann.node_volumes), len(ann.edge_volumes), ann.delta))
        fh.write(np.array([len(v) for v in vols], dtype="<u8").tobytes())
        for v in vols:
            fh.write(np.asarray(v, dtype="<i8").tobytes())


def read_grid_header(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        magic, version, ox, oy, d, nx, ny, _, _, _ = _HEADER.unpack(fh.read(_HEADER.size))
    if magic != VOLUME_MAGIC or version != VOLUME_FORMAT_VERSION:
        raise ValueError(f"{path}: not a version-{VOLUME_FORMAT_VERSION} volume file")
    return VoxelGrid((ox, oy), d, (nx, ny))


def load_volumes(path, roadmap: Roadmap, grid: VoxelGrid | None = None) -> AnnotatedRoadmap:
    data = Path(path).read_bytes()
    magic, version, ox, oy, d, nx, ny, n_nodes, n_edges, delta = _HEADER.unpack_from(data, 0)
    if magic != VOLUME_MAGIC or version != VOLUME_FORMAT_VERSION:
        raise ValueError(f"{path}: not a version-{VOLUME_FORMAT_VERSION} volume file")
    file_grid = VoxelGrid((ox, oy), d, (nx, ny))
    if grid is not None and file_grid != grid:
        raise GridMismatchError(f"{path}: grid {file_grid} does not match expected {grid}")
    if n_nodes != roadmap.n_nodes or n_edges != roadmap.n_edges:
        raise ValueError(f"{path}: volume counts do not match the roadmap")
    off = _HEADER.size
    counts = np.frombuffer(data, dtype="<u8", count=n_nodes + n_edges, offset=off)
    off += 8 * len(counts)
    vols = []
    for c in counts:
        vols.append(np.frombuffer(data, dtype="<i8", count=int(c), offset=off).astype(np.int64))
        off += 8 * int(c)
    return AnnotatedRoadmap(roadmap, file_grid, vols[:n_nodes], vols[n_nodes:], delta)


__all__ = [
    "VoxelGrid", "OutOfGridError", "GridMismatchError", "reachable_bounding_box", "grid_covering",
    "voxelize_segments", "voxelize_capsules", "voxelize_config", "voxelize_edge", "default_delta",
    "voxelsets_intersect", "warm_up", "is_voxelset", "AnnotatedRoadmap", "annotate_roadmap",
    "save_volumes", "load_volumes", "read_grid_header",
]
