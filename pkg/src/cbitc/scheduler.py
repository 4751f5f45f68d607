"""Terrestrial ICIC occupation and UAV serving-BS eligibility."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NoServerError, PackingInfeasibleError
from .topology import HexGrid, neighbors, sample_in_hexagon

MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass(frozen=True)
class RbAssignment:
    """Occupied set ``J_o`` and available set ``Omega`` for the UAV's RB."""

    occupied: frozenset[int]
    available: frozenset[int]
    icic_tier: int

    @property
    def K(self) -> int:
        return len(self.occupied)

    @property
    def N(self) -> int:
        return len(self.available)


def _conflict_sets(grid: HexGrid, q: int) -> list[frozenset[int]]:
    return [neighbors(grid, j, q) for j in range(grid.num_bs)]


def place_ues(rng: np.random.Generator, grid: HexGrid, k: int, q: int):
    """Drop ``k`` terrestrial UEs obeying the q-tier occupation rule.

    UEs are dropped one at a time into a uniformly chosen cell (uniformly
    inside its hexagon). A drop into a cell within ``q`` tiers of an occupied
    BS is rejected. When no eligible cell remains the layout is discarded and
    restarted. Every drop counts toward ``MAX_PLACEMENT_ATTEMPTS``.

    Returns
    -------
    ue_positions : dict
        Occupied BS index -> UE horizontal position (meters).
    occupied : tuple of int
        Occupied BS indices in placement order. Any prefix is itself a valid
        layout, which the harness uses for nested K sweeps.
    """
    if int(k) != k or k < 0:
        raise InvalidArgumentError(f"k must be a nonnegative integer, got {k!r}")
    if k > grid.num_bs:
        raise PackingInfeasibleError(f"cannot place {k} UEs in {grid.num_bs} cells")
    conflicts = _conflict_sets(grid, q)
    attempts = 0
    while True:
        ue_positions: dict[int, tuple[float, float]] = {}
        order: list[int] = []
        blocked: set[int] = set()
        while len(order) < k:
            if len(blocked) == grid.num_bs:
                break
            if attempts >= MAX_PLACEMENT_ATTEMPTS:
                raise PackingInfeasibleError(
                    f"placed {len(order)} of {k} UEs after {attempts} attempts (q={q})")
            attempts += 1
            cell = int(rng.integers(grid.num_bs))
            offset = sample_in_hexagon(rng, grid.cell_radius)
            if cell in blocked:
                continue
            order.append(cell)
            xy = grid.bs_positions[cell, :2] + offset
            ue_positions[cell] = (float(xy[0]), float(xy[1]))
            blocked |= conflicts[cell]
        if len(order) == k:
            return ue_positions, tuple(order)


def available_bss(grid: HexGrid, occupied, q: int) -> frozenset[int]:
    """BSs with no occupied BS in their q-tier neighborhood."""
    occ = frozenset(int(j) for j in occupied)
    for j in occ:
        grid._check(j)
    return frozenset(n for n in range(grid.num_bs)
                     if n not in occ and not (neighbors(grid, n, q) & occ))


def rb_assignment(grid: HexGrid, occupied, q: int) -> RbAssignment:
    occ = frozenset(int(j) for j in occupied)
    return RbAssignment(occ, available_bss(grid, occ, q), int(q))


def best_single_server(available, channels) -> int:
    """Available BS with the largest channel power gain; ties go to the lowest index.

    ``channels`` is indexable by BS index and yields complex gains or
    ChannelCoefficient objects.
    """
    avail = sorted(int(n) for n in available)
    if not avail:
        raise NoServerError("no available BS can serve the UAV")

    def gain(n):
        c = channels[n]
        return c.gain if hasattr(c, "gain") else abs(c) ** 2

    best = avail[0]
    best_gain = gain(best)
    for n in avail[1:]:
        g = gain(n)
        if g > best_gain:
            best, best_gain = n, g
    return best
