"""Hexagonal cell layout: BS positions, tier neighborhoods and distances.

Cells are pointy-top hexagons indexed by axial coordinates ``(q, r)``.
Ring membership uses the integer hex distance, so neighborhoods never depend
on floating point ties.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# axial direction vectors, counter-clockwise starting east
_HEX_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


def hex_count(tiers: int) -> int:
    """Number of cells in a hexagonal patch of ``tiers`` rings around a center."""
    return 1 + 3 * tiers * (tiers + 1)


def hex_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def _ring(k: int) -> list[tuple[int, int]]:
    if k == 0:
        return [(0, 0)]
    cells = []
    q, r = _HEX_DIRECTIONS[4][0] * k, _HEX_DIRECTIONS[4][1] * k
    for d in range(6):
        for _ in range(k):
            cells.append((q, r))
            q += _HEX_DIRECTIONS[d][0]
            r += _HEX_DIRECTIONS[d][1]
    return cells


@dataclass(frozen=True)
class HexGrid:
    """Immutable BS layout over ``tiers`` hexagonal rings.

    Attributes
    ----------
    cell_radius : float
        Hexagon circumradius in meters. Adjacent BSs are ``sqrt(3) * cell_radius`` apart.
    tiers : int
        Number of rings around the center cell.
    bs_positions : ndarray, shape (J, 3)
        BS coordinates in meters, ring-major then counter-clockwise by angle.
    bs_height : float
        Common BS antenna height in meters.
    axial : tuple of (int, int)
        Axial hex coordinates of every BS, aligned with ``bs_positions``.
    """

    cell_radius: float
    tiers: int
    bs_positions: np.ndarray = field(repr=False)
    bs_height: float
    axial: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def num_bs(self) -> int:
        return len(self.axial)

    def ring_of(self, j: int) -> int:
        return hex_distance(self.axial[self._check(j)], (0, 0))

    def _check(self, j: int) -> int:
        if not (0 <= int(j) < self.num_bs) or int(j) != j:
            raise InvalidArgumentError(f"BS index {j!r} outside 0..{self.num_bs - 1}")
        return int(j)

    def contains(self, j: int, point_xy) -> bool:
        """Whether a horizontal point lies inside (or on) cell ``j``'s hexagon."""
        center = self.bs_positions[self._check(j), :2]
        return point_in_hexagon(np.asarray(point_xy, dtype=float) - center, self.cell_radius)


def _axial_to_xy(q: int, r: int, radius: float) -> tuple[float, float]:
    x = math.sqrt(3.0) * radius * (q + r / 2.0)
    y = 1.5 * radius * r
    return x, y


def point_in_hexagon(offset_xy, radius: float, eps: float = 1e-9) -> bool:
    """Pointy-top hexagon membership for an offset from the cell center."""
    x, y = abs(float(offset_xy[0])), abs(float(offset_xy[1]))
    half_width = math.sqrt(3.0) / 2.0 * radius
    if x > half_width + eps * radius:
        return False
    # slanted edge: y <= radius - x / sqrt(3)
    return y <= radius - x / math.sqrt(3.0) + eps * radius


def sample_in_hexagon(rng: np.random.Generator, radius: float) -> np.ndarray:
    """Uniform point in a pointy-top hexagon centered at the origin."""
    half_width = math.sqrt(3.0) / 2.0 * radius
    while True:
        p = rng.uniform((-half_width, -radius), (half_width, radius))
        if point_in_hexagon(p, radius):
            return p


def build_grid(tiers: int, cell_radius: float, bs_height: float = 25.0) -> HexGrid:
    """Build a hexagonal grid with the center cell's BS at the origin.

    >>> build_grid(3, 800.0, 25.0).num_bs
    37
    """
    if int(tiers) != tiers or tiers < 0:
        raise InvalidArgumentError(f"tiers must be a nonnegative integer, got {tiers!r}")
    if not cell_radius > 0:
        raise InvalidArgumentError(f"cell_radius must be positive, got {cell_radius!r}")
    tiers = int(tiers)
    cells = []
    for k in range(tiers + 1):
        ring = []
        for q, r in _ring(k):
            x, y = _axial_to_xy(q, r, cell_radius)
            angle = math.atan2(y, x) % (2.0 * math.pi)
            ring.append((round(angle, 12), (q, r), (x, y)))
        ring.sort(key=lambda item: item[0])
        cells.extend(ring)
    axial = tuple(c[1] for c in cells)
    pos = np.array([[c[2][0], c[2][1], bs_height] for c in cells], dtype=float)
    pos.setflags(write=False)
    return HexGrid(float(cell_radius), tiers, pos, float(bs_height), axial)


def neighbors(grid: HexGrid, j: int, q: int) -> frozenset[int]:
    """All BSs within ``q`` rings of BS ``j``, including ``j`` itself."""
    j = grid._check(j)
    if int(q) != q or q < 0:
        raise InvalidArgumentError(f"q must be a nonnegative integer, got {q!r}")
    return _neighbor_table(grid.axial, int(q))[j]


@functools.lru_cache(maxsize=64)
def _neighbor_table(axial: tuple, q: int) -> tuple[frozenset[int], ...]:
    return tuple(frozenset(k for k, a in enumerate(axial) if hex_distance(a, center) <= q)
                 for center in axial)


@dataclass(frozen=True)
class Placement:
    """UAV position and the terrestrial UE served by each occupied BS."""

    uav_position: tuple[float, float, float]
    ue_positions: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.uav_position[2] > 0:
            raise InvalidArgumentError("UAV altitude must be positive")


def distance_3d(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
