"""Exact curvilinear path geometry shared by placer, router and checker.

Paths are alternating straight segments and circular arcs.  Headings are
the eight compass directions; committed paths use the four axis
directions except between the paired 45-degree arcs of an S-shaped
offset move.  All lengths are in micrometres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import ValidationError

# Headings are eighths of a turn counter-clockwise from east.
E, NE, N, NW, W, SW, S, SE = range(8)
AXIS_HEADINGS = (E, N, W, S)

_COS45 = math.sqrt(0.5)
_HEADING_VEC = (
    (1.0, 0.0), (_COS45, _COS45), (0.0, 1.0), (-_COS45, _COS45),
    (-1.0, 0.0), (-_COS45, -_COS45), (0.0, -1.0), (_COS45, -_COS45),
)
HEADING_NAMES = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")
_NAME_TO_HEADING = {name: i for i, name in enumerate(HEADING_NAMES)}

LEFT, RIGHT = 1, -1  # turn directions


def heading_vector(h: int) -> tuple[float, float]:
    return _HEADING_VEC[h % 8]


def heading_name(h: int) -> str:
    return HEADING_NAMES[h % 8]


def heading_from_name(name: str) -> int:
    try:
        return _NAME_TO_HEADING[name]
    except KeyError:
        raise ValidationError(f"unknown heading {name!r}") from None


def rotate(h: int, steps45: int) -> int:
    """Rotate a heading by multiples of 45 degrees (positive = left)."""
    return (h + steps45) % 8

def left90(h: int) -> int:
    return (h + 2) % 8

def right90(h: int) -> int:
    return (h - 2) % 8

def opposite(h: int) -> int:
    return (h + 4) % 8

def is_axis(h: int) -> bool:
    return h % 2 == 0


@dataclass(frozen=True)
class Node:
    """A routing-search state: integer grid cell plus heading."""

    i: int
    j: int
    heading: int

    def position(self, pitch: float) -> tuple[float, float]:
        return self.i * pitch, self.j * pitch


@dataclass(frozen=True)
class Straight:
    length_um: float
    heading: int

    kind = "straight"


@dataclass(frozen=True)
class Arc:
    radius_um: float
    turn: int            # LEFT or RIGHT
    sweep_deg: int       # 45 or 90

    kind = "arc"

    @property
    def arc_length(self) -> float:
        return self.radius_um * math.radians(self.sweep_deg)

    @property
    def bend_units(self) -> float:
        """A 90-degree arc counts as one bend, a 45-degree arc as half."""
        return self.sweep_deg / 90.0


PathElement = Straight | Arc


@dataclass(frozen=True)
class PathEndpoint:
    """A resolved port: absolute position, outward orientation, reference id."""

    x_um: float
    y_um: float
    orientation: int     # axis heading pointing out of the owning component
    ref: str = ""


@dataclass
class PathGeometry:
    """One routed connection: endpoints, ordered elements, crossings.

    The path starts at the source port travelling along the port
    orientation and must arrive at the destination port heading opposite
    to that port's orientation (face-to-face rule).
    """

    net: str
    src: PathEndpoint
    dst: PathEndpoint
    elements: list[PathElement] = field(default_factory=list)
    crossings: list[tuple[tuple[int, int], str]] = field(default_factory=list)

    @property
    def start_pose(self) -> tuple[float, float, int]:
        return self.src.x_um, self.src.y_um, self.src.orientation


@dataclass(frozen=True)
class CrossingSite:
    """A 90-degree waveguide crossing occupying a square footprint."""

    id: str
    cell: tuple[int, int]       # grid cell of the intersection point
    side_um: float              # footprint square side
    net_a: str
    net_b: str
    heading_a: int              # axis of net_a through the site
    heading_b: int

    def validate(self, min_side: float) -> list[str]:
        problems = []
        if (self.heading_a - self.heading_b) % 4 != 2:
            problems.append("crossing headings are not orthogonal")
        if self.net_a == self.net_b:
            problems.append("crossing must join two distinct nets")
        if self.side_um < min_side - 1e-9:
            problems.append(
                f"crossing footprint {self.side_um} below minimum {min_side}")
        return problems

    def net_axis(self, net: str) -> int:
        if net == self.net_a:
            return self.heading_a
        if net == self.net_b:
            return self.heading_b
        raise ValidationError(f"net {net!r} does not use crossing {self.id!r}")


@dataclass(frozen=True)
class GeometryFault:
    kind: str            # radius | facing | endpoint | discontinuity | element
    detail: str
    x_um: float = 0.0
    y_um: float = 0.0


def arc_endpoint(x: float, y: float, heading: int, turn: int, sweep_deg: int,
                 radius: float, min_radius: float = 0.0):
    """Endpoint pose of a circular arc starting at (x, y, heading).

    For sweep angle t the displacement is R*sin(t) along the heading plus
    R*(1-cos(t)) toward the turn side; the heading rotates by t toward
    the turn.  Exact for the 45/90-degree sweeps used here.
    """
    if radius < min_radius - 1e-9:
        raise ValidationError(
            f"invalid-radius: arc radius {radius} below minimum {min_radius}")
    if turn not in (LEFT, RIGHT):
        raise ValidationError(f"turn must be {LEFT} (left) or {RIGHT} (right)")
    if sweep_deg not in (45, 90):
        raise ValidationError(f"sweep must be 45 or 90 degrees, got {sweep_deg}")
    t = math.radians(sweep_deg)
    fx, fy = heading_vector(heading)
    nx_, ny_ = heading_vector(rotate(heading, 2 * turn))
    sin_t, cos_t = math.sin(t), math.cos(t)
    ex = x + radius * sin_t * fx + radius * (1.0 - cos_t) * nx_
    ey = y + radius * sin_t * fy + radius * (1.0 - cos_t) * ny_
    return ex, ey, rotate(heading, turn if sweep_deg == 45 else 2 * turn)


def walk_path(path: PathGeometry) -> list[tuple[float, float, int]]:
    """Pose before each element plus the final pose."""
    poses = [path.start_pose]
    x, y, h = path.start_pose
    for el in path.elements:
        if isinstance(el, Straight):
            vx, vy = heading_vector(el.heading)
            x, y = x + el.length_um * vx, y + el.length_um * vy
            h = el.heading
        else:
            x, y, h = arc_endpoint(x, y, h, el.turn, el.sweep_deg, el.radius_um)
        poses.append((x, y, h))
    return poses


def path_end(path: PathGeometry) -> tuple[float, float, int]:
    return walk_path(path)[-1]


def path_stats(path: PathGeometry) -> tuple[float, float]:
    """(total centerline length, bend count with 45-degree arcs as 0.5)."""
    length = 0.0
    bends = 0.0
    for el in path.elements:
        if isinstance(el, Straight):
            length += el.length_um
        else:
            length += el.arc_length
            bends += el.bend_units
    return length, bends


# ---------------------------------------------------------------------------
# analytic primitives: ('seg', x0, y0, x1, y1) and ('arc', cx, cy, r, a0, da)
# where da is the signed sweep in radians (positive = counter-clockwise)
# ---------------------------------------------------------------------------

def path_primitives(path: PathGeometry) -> list[tuple]:
    return elements_primitives(*path.start_pose, path.elements)


def elements_primitives(x: float, y: float, h: int,
                        elements: list[PathElement]) -> list[tuple]:
    prims = []
    for el in elements:
        if isinstance(el, Straight):
            vx, vy = heading_vector(el.heading)
            x1, y1 = x + el.length_um * vx, y + el.length_um * vy
            if el.length_um > 0:
                prims.append(("seg", x, y, x1, y1))
            x, y, h = x1, y1, el.heading
        else:
            nx_, ny_ = heading_vector(rotate(h, 2 * el.turn))
            cx, cy = x + el.radius_um * nx_, y + el.radius_um * ny_
            a0 = math.atan2(y - cy, x - cx)
            da = el.turn * math.radians(el.sweep_deg)
            prims.append(("arc", cx, cy, el.radius_um, a0, da))
            x, y, h = arc_endpoint(x, y, h, el.turn, el.sweep_deg, el.radius_um)
    return prims


def primitive_bbox(prim: tuple) -> tuple[float, float, float, float]:
    if prim[0] == "seg":
        _, x0, y0, x1, y1 = prim
        return min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)
    _, cx, cy, r, _, _ = prim
    # loose box: the full circle always contains the arc
    return cx - r, cy - r, cx + r, cy + r


def _seg_distance(px: np.ndarray, py: np.ndarray, x0, y0, x1, y1) -> np.ndarray:
    dx, dy = x1 - x0, y1 - y0
    den = dx * dx + dy * dy
    if den == 0.0:
        return np.hypot(px - x0, py - y0)
    t = np.clip(((px - x0) * dx + (py - y0) * dy) / den, 0.0, 1.0)
    return np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))


def _arc_distance(px: np.ndarray, py: np.ndarray, cx, cy, r, a0, da) -> np.ndarray:
    vx, vy = px - cx, py - cy
    d = np.hypot(vx, vy)
    ang = np.arctan2(vy, vx)
    rel = np.mod((ang - a0) * np.sign(da), 2.0 * math.pi)
    inside = rel <= abs(da) + 1e-12
    ring = np.abs(d - r)
    ex0, ey0 = cx + r * math.cos(a0), cy + r * math.sin(a0)
    a1 = a0 + da
    ex1, ey1 = cx + r * math.cos(a1), cy + r * math.sin(a1)
    ends = np.minimum(np.hypot(px - ex0, py - ey0), np.hypot(px - ex1, py - ey1))
    return np.where(inside, ring, ends)


def primitive_distance(px: np.ndarray, py: np.ndarray, prim: tuple) -> np.ndarray:
    if prim[0] == "seg":
        return _seg_distance(px, py, *prim[1:])
    return _arc_distance(px, py, *prim[1:])


def rasterize_primitives(prims: Iterable[tuple], pitch: float,
                         radius: float) -> set[tuple[int, int]]:
    """Grid cells (centres at integer multiples of pitch) within radius."""
    cells: set[tuple[int, int]] = set()
    for prim in prims:
        x0, y0, x1, y1 = primitive_bbox(prim)
        i0 = int(math.ceil((x0 - radius) / pitch - 1e-9))
        i1 = int(math.floor((x1 + radius) / pitch + 1e-9))
        j0 = int(math.ceil((y0 - radius) / pitch - 1e-9))
        j1 = int(math.floor((y1 + radius) / pitch + 1e-9))
        if i1 < i0 or j1 < j0:
            continue
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1),
                             indexing="ij")
        dist = primitive_distance(ii * pitch, jj * pitch, prim)
        hit = dist <= radius + 1e-9
        for i, j in zip(ii[hit].ravel(), jj[hit].ravel()):
            cells.add((int(i), int(j)))
    return cells


def rasterize_path(path: PathGeometry, pitch: float, halo: float,
                   half_width: float = 0.25) -> set[tuple[int, int]]:
    """Cells whose centre lies within (half_width + halo) of the centerline.

    Exact point-to-element distances, so the result is independent of how
    the path is split into elements.
    """
    return rasterize_primitives(path_primitives(path), pitch, half_width + halo)


def sample_path(path: PathGeometry, max_sagitta: float) -> np.ndarray:
    """Polyline along the centerline; arc chords deviate <= max_sagitta."""
    pts = [path.start_pose[:2]]
    for prim in path_primitives(path):
        if prim[0] == "seg":
            pts.append((prim[3], prim[4]))
        else:
            _, cx, cy, r, a0, da = prim
            if max_sagitta >= r:
                step = abs(da)
            else:
                step = 2.0 * math.acos(max(1.0 - max_sagitta / r, -1.0))
            n = max(1, int(math.ceil(abs(da) / step - 1e-12)))
            for k in range(1, n + 1):
                a = a0 + da * k / n
                pts.append((cx + r * math.cos(a), cy + r * math.sin(a)))
    out = [pts[0]]
    for p in pts[1:]:
        if abs(p[0] - out[-1][0]) > 1e-12 or abs(p[1] - out[-1][1]) > 1e-12:
            out.append(p)
    return np.asarray(out, dtype=float)


def validate_path_geometry(path: PathGeometry, config) -> list[GeometryFault]:
    """All per-path design-rule facts: empty list iff the path is clean.

    Checks tangent continuity, the minimum bend radius, endpoint
    coincidence with the ports and the face-to-face arrival rule.
    """
    faults: list[GeometryFault] = []
    x, y, h = path.src.x_um, path.src.y_um, path.src.orientation
    if not is_axis(path.src.orientation) or not is_axis(path.dst.orientation):
        faults.append(GeometryFault("facing", "port orientation must be E/N/W/S"))
        return faults
    for idx, el in enumerate(path.elements):
        if isinstance(el, Straight):
            if el.length_um < -1e-12:
                faults.append(GeometryFault(
                    "element", f"element {idx}: negative straight length", x, y))
            if el.heading != h:
                faults.append(GeometryFault(
                    "discontinuity",
                    f"element {idx}: straight heading {heading_name(el.heading)} "
                    f"!= incoming tangent {heading_name(h)}", x, y))
            vx, vy = heading_vector(el.heading)
            x, y = x + el.length_um * vx, y + el.length_um * vy
            h = el.heading
        elif isinstance(el, Arc):
            if el.sweep_deg not in (45, 90):
                faults.append(GeometryFault(
                    "element", f"element {idx}: sweep {el.sweep_deg} not in 45/90",
                    x, y))
                continue
            if el.turn not in (LEFT, RIGHT):
                faults.append(GeometryFault(
                    "element", f"element {idx}: bad turn {el.turn}", x, y))
                continue
            if el.radius_um < config.r_min - 1e-9:
                faults.append(GeometryFault(
                    "radius",
                    f"element {idx}: radius {el.radius_um} um below minimum "
                    f"{config.r_min} um", x, y))
            x, y, h = arc_endpoint(x, y, h, el.turn, el.sweep_deg, el.radius_um)
        else:
            faults.append(GeometryFault("element", f"element {idx}: unknown kind"))
    if math.hypot(x - path.dst.x_um, y - path.dst.y_um) > 1e-6:
        faults.append(GeometryFault(
            "endpoint",
            f"path ends at ({x:.6f},{y:.6f}) but destination port is at "
            f"({path.dst.x_um},{path.dst.y_um})", x, y))
    if h != opposite(path.dst.orientation):
        faults.append(GeometryFault(
            "facing",
            f"arrival tangent {heading_name(h)} is not opposite the destination "
            f"port orientation {heading_name(path.dst.orientation)}", x, y))
    return faults


def merge_straights(elements: list[PathElement]) -> list[PathElement]:
    """Collapse consecutive same-heading straights; drop zero-length ones."""
    out: list[PathElement] = []
    for el in elements:
        if isinstance(el, Straight):
            if el.length_um <= 1e-12:
                continue
            if out and isinstance(out[-1], Straight) and out[-1].heading == el.heading:
                out[-1] = Straight(out[-1].length_um + el.length_um, el.heading)
                continue
        out.append(el)
    return out
