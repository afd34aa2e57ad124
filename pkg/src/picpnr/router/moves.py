"""Per-heading move tables for the curvy-aware search.

Six moves per axis heading: a one-cell straight, quarter arcs left and
right at the minimum bend radius, two S-shaped lateral offsets built
from opposite 45-degree arcs, and the atomic crossing straight that
traverses a perpendicular waveguide in one step.  Each move carries its
swept-cell footprint at the query halo so legality is one array scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import geometry as geo
from ..config import PnrConfig

N_MOVES = 6
STRAIGHT, ARC_L, ARC_R, OFFSET_L, OFFSET_R, CROSSING = range(N_MOVES)

# cell-centre sampling guard: any point in the plane is within
# sqrt(2)/2 of a cell centre, so widening the tubes by this much makes
# the discrete scan a sound over-approximation of the true clearance
COVER_RADIUS = math.sqrt(0.5) + 1e-6


def query_radius(config: PnrConfig) -> float:
    """Outer swept-tube radius: centreline separation w+s plus the grid
    guard; only committed-bend cells are tested this far out."""
    return (config.wg_width + config.min_spacing
            + COVER_RADIUS * config.pitch)


def inner_radius(config: PnrConfig) -> float:
    """Inner tube radius at which every cell obeys the full rules.

    Straight waveguides mark cells exactly on their centerline, so a
    separation violation D = w+s is always witnessed by a cell within
    sqrt(D^2 + (pitch/2)^2) of the probing centerline; components and
    reservations are area-marked and need even less.
    """
    d = config.wg_width + config.min_spacing
    return math.sqrt(d * d + (config.pitch / 2.0) ** 2) + 1e-6


def commit_radius(config: PnrConfig) -> float:
    """Marking radius for committed rasters (covers every curve point)."""
    return max(config.half_width, COVER_RADIUS * config.pitch)


def offset_geometry(config: PnrConfig):
    """Forward/lateral cell displacement and the stitch lengths of the
    S-offset move (two opposite 45-degree arcs snapped back on-grid)."""
    r = config.r_min_cells * config.pitch
    sin45 = math.sin(math.pi / 4)
    cos45 = math.cos(math.pi / 4)
    lat_raw = 2.0 * r * (1.0 - cos45)
    lat_cells = int(math.ceil(lat_raw / config.pitch - 1e-9))
    diag = (lat_cells * config.pitch - lat_raw) / sin45
    fwd_raw = 2.0 * r * sin45 + diag * cos45
    fwd_cells = int(math.ceil(fwd_raw / config.pitch - 1e-9))
    tail = fwd_cells * config.pitch - fwd_raw
    return fwd_cells, lat_cells, diag, tail


def move_elements(heading: int, move: int, config: PnrConfig):
    """Canonical element list of one move starting at heading ``heading``."""
    r = config.r_min_cells * config.pitch
    pitch = config.pitch
    if move == STRAIGHT:
        return [geo.Straight(pitch, heading)]
    if move == ARC_L:
        return [geo.Arc(r, geo.LEFT, 90)]
    if move == ARC_R:
        return [geo.Arc(r, geo.RIGHT, 90)]
    if move in (OFFSET_L, OFFSET_R):
        turn = geo.LEFT if move == OFFSET_L else geo.RIGHT
        _, _, diag, tail = offset_geometry(config)
        els: list[geo.PathElement] = [geo.Arc(r, turn, 45)]
        if diag > 1e-12:
            els.append(geo.Straight(diag, geo.rotate(heading, turn)))
        els.append(geo.Arc(r, -turn, 45))
        if tail > 1e-12:
            els.append(geo.Straight(tail, heading))
        return els
    if move == CROSSING:
        k = config.crossing_halfspan_cells
        return [geo.Straight(2 * k * pitch, heading)]
    raise ValueError(f"unknown move {move}")


def move_base_cost(move: int, config: PnrConfig) -> float:
    r = config.r_min_cells * config.pitch
    if move == STRAIGHT:
        return config.w_len * config.pitch
    if move in (ARC_L, ARC_R):
        return config.w_len * (math.pi / 2.0) * r + config.w_bend
    if move in (OFFSET_L, OFFSET_R):
        _, _, diag, tail = offset_geometry(config)
        length = 2.0 * (math.pi / 4.0) * r + diag + tail
        return config.w_len * length + config.w_bend
    if move == CROSSING:
        k = config.crossing_halfspan_cells
        return (config.w_len * 2.0 * k * config.pitch + config.w_cross)
    raise ValueError(f"unknown move {move}")


@dataclass
class MoveTable:
    """All per-(heading, move) data in kernel-ready arrays.

    Headings are axis indices 0..3 (E, N, W, S); ``move_end[h, m]``
    holds (di, dj, new heading index).
    """

    move_end: np.ndarray
    move_cost: np.ndarray
    sweep_cells: np.ndarray
    sweep_start: np.ndarray
    sweep_inner: np.ndarray   # cells within the inner radius (full rules)
    sweep_len: np.ndarray     # total cells incl. the bend-only outer ring
    cross_k: int
    clear_scan: int
    clear2: float
    r_query: float
    r_commit: float
    elements: dict    # (heading_idx, move) -> element list
    off_f: int = 0            # offset-move forward cells
    off_l: int = 0            # offset-move lateral cells
    off_len_cells: float = 0.0
    arc_speed: float = 0.6366197723675814  # 2/pi: quarter-arc chord/arc ratio

    @classmethod
    def build(cls, config: PnrConfig) -> "MoveTable":
        r_q = query_radius(config)
        r_in = inner_radius(config)
        move_end = np.full((4, N_MOVES, 3), -1, dtype=np.int64)
        move_cost = np.zeros((4, N_MOVES), dtype=np.float64)
        sweep_start = np.zeros((4, N_MOVES), dtype=np.int64)
        sweep_inner = np.zeros((4, N_MOVES), dtype=np.int64)
        sweep_len = np.zeros((4, N_MOVES), dtype=np.int64)
        chunks = []
        elements = {}
        total = 0
        for hidx in range(4):
            heading = hidx * 2
            for move in range(N_MOVES):
                els = move_elements(heading, move, config)
                elements[(hidx, move)] = els
                prims = geo.elements_primitives(0.0, 0.0, heading, els)
                inner = sorted(geo.rasterize_primitives(prims, config.pitch,
                                                        r_in))
                outer = sorted(geo.rasterize_primitives(prims, config.pitch,
                                                        r_q) - set(inner))
                arr = np.array(inner + outer, dtype=np.int64).reshape(-1, 2)
                chunks.append(arr)
                sweep_start[hidx, move] = total
                sweep_inner[hidx, move] = len(inner)
                sweep_len[hidx, move] = len(arr)
                total += len(arr)
                ex, ey, eh = _end_of(heading, els)
                di = round(ex / config.pitch)
                dj = round(ey / config.pitch)
                if abs(ex - di * config.pitch) > 1e-6 \
                        or abs(ey - dj * config.pitch) > 1e-6:
                    raise AssertionError(
                        f"move {move} endpoint off-grid: ({ex}, {ey})")
                move_end[hidx, move] = (di, dj, eh // 2)
                move_cost[hidx, move] = move_base_cost(move, config)
        k = config.crossing_halfspan_cells
        clear_scan = int(math.ceil(config.crossing_clearance / config.pitch))
        clear2 = (config.crossing_clearance / config.pitch) ** 2
        fwd_cells, lat_cells, diag, tail = offset_geometry(config)
        r = config.r_min_cells * config.pitch
        off_len = 2.0 * (math.pi / 4.0) * r + diag + tail
        return cls(
            move_end=move_end, move_cost=move_cost,
            sweep_cells=np.vstack(chunks).astype(np.int64),
            sweep_start=sweep_start, sweep_inner=sweep_inner,
            sweep_len=sweep_len,
            cross_k=k, clear_scan=max(clear_scan, k), clear2=clear2,
            r_query=r_q, r_commit=commit_radius(config), elements=elements,
            off_f=fwd_cells, off_l=lat_cells,
            off_len_cells=off_len / config.pitch)


def _end_of(heading: int, elements) -> tuple[float, float, int]:
    x, y, h = 0.0, 0.0, heading
    for el in elements:
        if isinstance(el, geo.Straight):
            vx, vy = geo.heading_vector(el.heading)
            x, y = x + el.length_um * vx, y + el.length_um * vy
            h = el.heading
        else:
            x, y, h = geo.arc_endpoint(x, y, h, el.turn, el.sweep_deg,
                                       el.radius_um)
    return x, y, h
