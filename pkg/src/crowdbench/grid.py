"""Uniform-grid neighbor search over agent centers."""

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit

INTERACTION_RANGE = 5.0
DEFAULT_CELL_SIZE = INTERACTION_RANGE / 2.0


@njit
def _cell_coord(v, cell_size, n):
    c = int(math.floor(v / cell_size))
    if c < 0:
        return 0
    if c >= n:
        return n - 1
    return c


@njit
def build_grid(pos, cell_size, nx, ny):
    """Counting-sort entity ids into cells. Returns (cell_start, items)."""
    n = pos.shape[0]
    counts = np.zeros(nx * ny + 1, np.int64)
    cell_of = np.empty(n, np.int64)
    for i in range(n):
        cx = _cell_coord(pos[i, 0], cell_size, nx)
        cy = _cell_coord(pos[i, 1], cell_size, ny)
        c = cy * nx + cx
        cell_of[i] = c
        counts[c + 1] += 1
    for c in range(nx * ny):
        counts[c + 1] += counts[c]
    cursor = counts[:-1].copy()
    items = np.empty(n, np.int64)
    for i in range(n):
        c = cell_of[i]
        items[cursor[c]] = i
        cursor[c] += 1
    return counts, items


@njit
def query_grid(pos, cell_start, items, cell_size, nx, ny, qx, qy, rng, exclude, out):
    """Write ids within ``rng`` of (qx, qy) into ``out`` in ascending order; return count."""
    x0 = _cell_coord(qx - rng, cell_size, nx)
    x1 = _cell_coord(qx + rng, cell_size, nx)
    y0 = _cell_coord(qy - rng, cell_size, ny)
    y1 = _cell_coord(qy + rng, cell_size, ny)
    r2 = rng * rng
    k = 0
    for cy in range(y0, y1 + 1):
        for cx in range(x0, x1 + 1):
            c = cy * nx + cx
            for s in range(cell_start[c], cell_start[c + 1]):
                j = items[s]
                if j == exclude:
                    continue
                dx = pos[j, 0] - qx
                dy = pos[j, 1] - qy
                if dx * dx + dy * dy <= r2:
                    out[k] = j
                    k += 1
    out[:k].sort()
    return k


@dataclass
class NeighborGrid:
    """Bucketed agent ids for one simulation step."""

    pos: np.ndarray
    cell_size: float
    nx: int
    ny: int
    cell_start: np.ndarray
    items: np.ndarray

    @classmethod
    def build(cls, pos, length, width, cell_size=DEFAULT_CELL_SIZE):
        pos = np.ascontiguousarray(pos, dtype=np.float64).reshape(-1, 2)
        nx = max(1, int(math.ceil(length / cell_size)))
        ny = max(1, int(math.ceil(width / cell_size)))
        start, items = build_grid(pos, float(cell_size), nx, ny)
        return cls(pos, float(cell_size), nx, ny, start, items)

    def query(self, position, rng, exclude=-1):
        out = np.empty(self.pos.shape[0], np.int64)
        k = query_grid(self.pos, self.cell_start, self.items, self.cell_size, self.nx, self.ny,
                       float(position[0]), float(position[1]), float(rng), int(exclude), out)
        return out[:k]


def neighbors_within(grid, position, rng, exclude=-1, robot_position=None, reactive_to_robot=False):
    """Ids of entities whose centers lie within ``rng`` (inclusive) of ``position``.

    ``exclude`` drops the querying agent itself. The robot is reported as id
    ``-1`` (listed first) and only when ``reactive_to_robot`` is set.
    """
    ids = grid.query(position, rng, exclude)
    if reactive_to_robot and robot_position is not None:
        d = math.hypot(robot_position[0] - position[0], robot_position[1] - position[1])
        if d <= rng:
            ids = np.concatenate([np.array([-1], np.int64), ids])
    return ids
