"""Orientation-aware occupancy bitmap.

One cell per grid point; the state array tracks free space, component
footprints, committed waveguide cells with their axis, bend cells and
crossing footprints.  Reservations (soft port corridors, soft group
boxes, hard bend regions) live in separate layers consulted only for
free cells, so ripping a net restores them automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import geometry as geo
from .._kernels import COMPONENT, CROSS, FREE, TURN, WG_H, WG_V
from ..config import PnrConfig
from ..errors import InconsistentLayoutError
from ..netlist import Netlist
from .moves import MoveTable


@dataclass
class SiteRecord:
    """A committed crossing: the record belongs to the net that inserted
    it (net_a); net_b is the waveguide it crosses."""

    cell: tuple[int, int]
    net_a: int
    net_b: int
    axis_a: int        # 2 = horizontal, 3 = vertical (bitmap state codes)


class OccupancyBitmap:
    def __init__(self, nl: Netlist, config: PnrConfig):
        self.config = config
        self.pitch = config.pitch
        self.nx = int(math.floor(nl.die_width_um / config.pitch + 1e-9)) + 1
        self.ny = int(math.floor(nl.die_height_um / config.pitch + 1e-9)) + 1
        shape = (self.nx, self.ny)
        self.state = np.zeros(shape, dtype=np.int8)
        self.owner = np.full(shape, -1, dtype=np.int64)
        self.soft_net = np.full(shape, -1, dtype=np.int64)
        self.soft_group = np.full(shape, -1, dtype=np.int64)
        self.hard_net = np.full(shape, -1, dtype=np.int64)
        self.comp_index: dict[str, int] = {}
        self._component_cells: list[tuple[slice, slice, int]] = []
        for idx, comp in enumerate(sorted(nl.components, key=lambda c: c.id)):
            self.comp_index[comp.id] = idx
            if comp.x_um is None or comp.y_um is None:
                raise InconsistentLayoutError(
                    f"component {comp.id!r} has no position")
            i0 = int(math.ceil(comp.x_um / self.pitch - 1e-9))
            i1 = int(math.floor((comp.x_um + comp.width_um) / self.pitch + 1e-9))
            j0 = int(math.ceil(comp.y_um / self.pitch - 1e-9))
            j1 = int(math.floor((comp.y_um + comp.height_um) / self.pitch + 1e-9))
            i0, j0 = max(i0, 0), max(j0, 0)
            i1, j1 = min(i1, self.nx - 1), min(j1, self.ny - 1)
            if i1 < i0 or j1 < j0:
                continue
            block = self.state[i0:i1 + 1, j0:j1 + 1]
            clash = (block == COMPONENT) \
                & (self.owner[i0:i1 + 1, j0:j1 + 1] != idx)
            if np.any(clash):
                other = int(self.owner[i0:i1 + 1, j0:j1 + 1][clash].flat[0])
                names = {v: k for k, v in self.comp_index.items()}
                raise InconsistentLayoutError(
                    f"component footprints overlap: {comp.id!r} and "
                    f"{names.get(other, other)!r}")
            block[:] = COMPONENT
            self.owner[i0:i1 + 1, j0:j1 + 1] = idx
            self._component_cells.append((slice(i0, i1 + 1),
                                          slice(j0, j1 + 1), idx))

    def component_cell_count(self) -> int:
        return int(np.sum(self.state == COMPONENT))

    def reset_routing_state(self):
        """Clear everything routing has committed, keep components and
        reservations."""
        routed = self.state >= WG_H
        self.state[routed] = FREE
        self.owner[routed] = -1

    def cell_of(self, x_um: float, y_um: float) -> tuple[int, int]:
        return (int(round(x_um / self.pitch)), int(round(y_um / self.pitch)))

    def on_grid(self, x_um: float, y_um: float) -> bool:
        i, j = self.cell_of(x_um, y_um)
        return (abs(x_um - i * self.pitch) < 1e-6
                and abs(y_um - j * self.pitch) < 1e-6
                and 0 <= i < self.nx and 0 <= j < self.ny)

    # -- committed geometry ------------------------------------------------

    def commit_path(self, net_idx: int, path: geo.PathGeometry,
                    table: MoveTable):
        """Mark the path raster: straights first, bends override, and
        component cells at the port stubs stay component."""
        prims = geo.path_primitives(path)
        straights = [p for p in prims if p[0] == "seg"
                     and (abs(p[1] - p[3]) < 1e-9 or abs(p[2] - p[4]) < 1e-9)]
        bends = [p for p in prims if p not in straights]
        for prim in straights:
            horizontal = abs(prim[2] - prim[4]) < 1e-9
            code = WG_H if horizontal else WG_V
            for (ci, cj) in geo.rasterize_primitives([prim], self.pitch,
                                                     table.r_commit):
                self._mark(ci, cj, code, net_idx)
        for prim in bends:
            for (ci, cj) in geo.rasterize_primitives([prim], self.pitch,
                                                     table.r_commit):
                self._mark(ci, cj, TURN, net_idx)

    def _mark(self, ci, cj, code, net_idx):
        if not (0 <= ci < self.nx and 0 <= cj < self.ny):
            return
        s = self.state[ci, cj]
        if s == COMPONENT or s == CROSS:
            return
        if s != FREE and self.owner[ci, cj] != net_idx:
            # overlap with a foreign raster is only legal inside crossing
            # windows, which become CROSS cells right after commit
            return
        if s == TURN and code != TURN:
            return
        self.state[ci, cj] = code
        self.owner[ci, cj] = net_idx

    def mark_site(self, site_idx: int, cell: tuple[int, int], members):
        k = self.config.crossing_halfspan_cells
        ci, cj = cell
        for di in range(-k, k + 1):
            for dj in range(-k, k + 1):
                ii, jj = ci + di, cj + dj
                if not (0 <= ii < self.nx and 0 <= jj < self.ny):
                    continue
                s = self.state[ii, jj]
                if s == COMPONENT:
                    continue
                if s == FREE or (s in (WG_H, WG_V, TURN)
                                 and self.owner[ii, jj] in members):
                    self.state[ii, jj] = CROSS
                    self.owner[ii, jj] = site_idx
