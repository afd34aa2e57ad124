"""Legalization: pitch snapping plus inflated-footprint overlap removal.

A constraint-graph sweep (x first, then y) shifts movable components
apart while preserving the relative order chosen by global placement;
a final pairwise relaxation catches anything the sweeps could not
express, including collisions with fixed components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import PnrConfig
from .errors import CapacityError
from .netlist import Netlist
from .placer import EdgeMargins, estimate_congestion, spacing_inflation
from . import geometry as geo


@dataclass
class _Item:
    comp_id: str
    x: float          # lower-left of the raw footprint
    y: float
    w: float
    h: float
    m: EdgeMargins
    fixed: bool

    @property
    def ix0(self):
        return self.x - self.m.west

    @property
    def ix1(self):
        return self.x + self.w + self.m.east

    @property
    def iy0(self):
        return self.y - self.m.south

    @property
    def iy1(self):
        return self.y + self.h + self.m.north


def _overlap(a: _Item, b: _Item) -> tuple[float, float]:
    ox = min(a.ix1, b.ix1) - max(a.ix0, b.ix0)
    oy = min(a.iy1, b.iy1) - max(a.iy0, b.iy0)
    return ox, oy


def compute_margins(nl: Netlist, config: PnrConfig,
                    with_congestion: bool = True) -> dict[str, EdgeMargins]:
    """Inflation margins for legalization.

    On top of the spacing model, edges that carry connected optical
    ports get an escape-headroom floor so the router's swept tube can
    always leave the port (3 cells covers the tube radius plus one)."""
    congestion = estimate_congestion(nl) if with_congestion else {}
    floor = 3.0 * config.pitch
    used: dict[str, set] = {}
    for net in nl.optical_nets():
        for cid, pid in (net.src, net.dst):
            used.setdefault(cid, set()).add(pid)
    out = {}
    for c in nl.components:
        m = spacing_inflation(c, nl.nets, congestion.get(c.id), config)
        edges = {p.orientation for p in c.ports if p.id in used.get(c.id, ())}
        if edges:
            vals = dict(west=m.west, east=m.east, south=m.south, north=m.north)
            names = {geo.W: "west", geo.E: "east", geo.S: "south",
                     geo.N: "north"}
            for h in edges:
                vals[names[h]] = max(vals[names[h]], floor)
            m = EdgeMargins(**vals)
        out[c.id] = m
    return out


def _snap(v: float, pitch: float) -> float:
    return round(v / pitch) * pitch


def _sweep(items: list[_Item], axis: int, die: tuple[float, float],
           pitch: float):
    """Longest-path shift along one axis for pairs overlapping crosswise."""
    if axis == 0:
        items.sort(key=lambda it: (it.x + it.w / 2.0, it.comp_id))
    else:
        items.sort(key=lambda it: (it.y + it.h / 2.0, it.comp_id))
    for vi, v in enumerate(items):
        if v.fixed:
            continue
        need = None
        for u in items[:vi]:
            ox, oy = _overlap(u, v)
            if ox <= 1e-9 or oy <= 1e-9:
                continue
            if axis == 0:
                bound = u.ix1 + v.m.west
                need = bound if need is None else max(need, bound)
            else:
                bound = u.iy1 + v.m.south
                need = bound if need is None else max(need, bound)
        if need is None:
            continue
        if axis == 0:
            v.x = max(v.x, math.ceil((need - 1e-9) / pitch) * pitch)
        else:
            v.y = max(v.y, math.ceil((need - 1e-9) / pitch) * pitch)


def _clamp_into_die(it: _Item, die, pitch):
    if it.fixed:
        return
    max_x = math.floor((die[0] - it.m.east - it.w) / pitch) * pitch
    max_y = math.floor((die[1] - it.m.north - it.h) / pitch) * pitch
    min_x = math.ceil(it.m.west / pitch - 1e-9) * pitch
    min_y = math.ceil(it.m.south / pitch - 1e-9) * pitch
    it.x = min(max(it.x, min_x), max_x)
    it.y = min(max(it.y, min_y), max_y)


def _separation_candidates(mover: _Item, other: _Item, pitch):
    """Displacements that clear the pair, one per direction."""
    out = []
    for di, (dx, dy, dist) in enumerate((
            (1.0, 0.0, other.ix1 - mover.ix0),    # move right
            (-1.0, 0.0, mover.ix1 - other.ix0),   # move left
            (0.0, 1.0, other.iy1 - mover.iy0),    # move up
            (0.0, -1.0, mover.iy1 - other.iy0),   # move down
    )):
        d = math.ceil((dist - 1e-9) / pitch) * pitch
        if d > 0:
            out.append((d, di, dx * d, dy * d))
    return out


def _relax(items: list[_Item], die, pitch, rounds: int = 400) -> bool:
    """Deterministic pairwise separation for residual overlaps.

    For each overlapping pair, try the cheapest single-axis shift of a
    movable member that clears the pair without creating new overlaps;
    if none exists, take the cheapest pair-clearing shift anyway.
    """
    order = sorted(range(len(items)), key=lambda i: items[i].comp_id)
    history: dict[str, list] = {it.comp_id: [] for it in items}

    def conflicts(it: _Item, skip: _Item):
        n = 0
        for other in items:
            if other is it or other is skip:
                continue
            ox, oy = _overlap(it, other)
            if ox > 1e-9 and oy > 1e-9:
                n += 1
        return n

    for _ in range(rounds):
        dirty = False
        for ai in order:
            for bi in order:
                if bi <= ai:
                    continue
                a, b = items[ai], items[bi]
                ox, oy = _overlap(a, b)
                if ox <= 1e-9 or oy <= 1e-9:
                    continue
                dirty = True
                best = None       # key -> (key, mover, pos)
                for mover, other in ((a, b), (b, a)):
                    if mover.fixed:
                        continue
                    old = (mover.x, mover.y)
                    base_conflicts = conflicts(mover, other)
                    for cost, di, dx, dy in _separation_candidates(
                            mover, other, pitch):
                        mover.x, mover.y = old[0] + dx, old[1] + dy
                        _clamp_into_die(mover, die, pitch)
                        nx, ny = mover.x, mover.y
                        ox2, oy2 = _overlap(mover, other)
                        resolved = ox2 <= 1e-9 or oy2 <= 1e-9
                        extra = conflicts(mover, other) - base_conflicts
                        moved = abs(nx - old[0]) + abs(ny - old[1])
                        mover.x, mover.y = old
                        if not resolved or moved <= 0:
                            continue
                        # refuse moves that revisit a recent position
                        if (nx, ny) in history[mover.comp_id]:
                            continue
                        strict = 0 if extra <= 0 else 1
                        key = (strict, moved, di, mover.comp_id)
                        if best is None or key < best[0]:
                            best = (key, mover, (nx, ny))
                if best is not None:
                    _, mover, pos = best
                    past = history[mover.comp_id]
                    past.append((mover.x, mover.y))
                    if len(past) > 6:
                        past.pop(0)
                    mover.x, mover.y = pos
        if not dirty:
            return True
    return not any(
        _overlap(items[i], items[j])[0] > 1e-9
        and _overlap(items[i], items[j])[1] > 1e-9
        for i in range(len(items)) for j in range(i + 1, len(items)))


def legalize(nl: Netlist, config: PnrConfig,
             margins: dict[str, EdgeMargins] | None = None
             ) -> dict[str, EdgeMargins]:
    """Snap to pitch and remove inflated-footprint overlaps, in place.

    Returns the margins used (they depend on pre-snap congestion).
    Raises CapacityError when the die simply cannot hold the inflated
    area or when relaxation fails to clear the residual overlaps.
    """
    if margins is None:
        margins = compute_margins(nl, config)
    die = (nl.die_width_um, nl.die_height_um)
    items = []
    for c in nl.components:
        if c.x_um is None or c.y_um is None:
            raise CapacityError(f"component {c.id!r} has no position to legalize")
        items.append(_Item(c.id, c.x_um, c.y_um, c.width_um, c.height_um,
                           margins[c.id], c.fixed))

    total = sum((it.ix1 - it.ix0) * (it.iy1 - it.iy0) for it in items)
    die_area = die[0] * die[1]
    if total > die_area:
        raise CapacityError(
            f"total inflated area {total:.0f} um^2 exceeds die area "
            f"{die_area:.0f} um^2")

    pitch = config.pitch
    for it in items:
        if not it.fixed:
            it.x = _snap(it.x, pitch)
            it.y = _snap(it.y, pitch)
            _clamp_into_die(it, die, pitch)

    _sweep(items, 0, die, pitch)
    for it in items:
        _clamp_into_die(it, die, pitch)
    _sweep(items, 1, die, pitch)
    for it in items:
        _clamp_into_die(it, die, pitch)

    if not _relax(items, die, pitch):
        raise CapacityError(
            "legalization could not remove all inflated-footprint overlaps; "
            f"total inflated area {total:.0f} um^2 vs die {die_area:.0f} um^2")

    by_id = {it.comp_id: it for it in items}
    for c in nl.components:
        it = by_id[c.id]
        c.x_um, c.y_um = float(it.x), float(it.y)
    return margins


def overlap_pairs(nl: Netlist, margins: dict[str, EdgeMargins]):
    """Brute-force O(n^2) inflated-overlap scan (verification helper)."""
    items = [
        _Item(c.id, c.x_um, c.y_um, c.width_um, c.height_um, margins[c.id],
              c.fixed)
        for c in nl.components
    ]
    bad = []
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            ox, oy = _overlap(items[i], items[j])
            if ox > 1e-9 and oy > 1e-9:
                bad.append((items[i].comp_id, items[j].comp_id, ox, oy))
    return bad
