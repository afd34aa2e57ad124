"""Independent design-rule checker.

Everything is re-derived from the layout geometry alone: paths are
walked into analytic segments and arcs, and all clearances use exact
element-to-element distances.  No router data structure or legality
code is consulted, so a router bug cannot certify itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import geometry as geo
from .config import PnrConfig
from .layout import Layout, STATUS_ROUTED

KIND_SPACING = "spacing"
KIND_RADIUS = "bend-radius"
KIND_OVERLAP = "overlap"
KIND_PORT = "port-misalignment"
KIND_XANGLE = "crossing-angle"
KIND_XCLEAR = "crossing-clearance"
KIND_DIE = "out-of-die"

_TOL = 1e-9
_PORT_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    kind: str
    x_um: float
    y_um: float
    entities: tuple[str, ...]
    measured: float
    required: float
    detail: str = ""

    def __str__(self):
        who = ",".join(self.entities)
        return (f"{self.kind} @({self.x_um:.3f},{self.y_um:.3f}) [{who}] "
                f"measured {self.measured:.6g} vs required {self.required:.6g}"
                + (f": {self.detail}" if self.detail else ""))


# ---------------------------------------------------------------------------
# exact distances between segments and circular arcs
# ---------------------------------------------------------------------------

def _pt_seg(px, py, x0, y0, x1, y1):
    dx, dy = x1 - x0, y1 - y0
    den = dx * dx + dy * dy
    if den <= 0.0:
        return math.hypot(px - x0, py - y0), (x0, y0)
    t = max(0.0, min(1.0, ((px - x0) * dx + (py - y0) * dy) / den))
    qx, qy = x0 + t * dx, y0 + t * dy
    return math.hypot(px - qx, py - qy), (qx, qy)


def _arc_contains(a0, da, ang):
    rel = (ang - a0) * (1.0 if da >= 0 else -1.0)
    rel = rel % (2.0 * math.pi)
    return rel <= abs(da) + 1e-12


def _arc_ends(cx, cy, r, a0, da):
    return ((cx + r * math.cos(a0), cy + r * math.sin(a0)),
            (cx + r * math.cos(a0 + da), cy + r * math.sin(a0 + da)))


def _pt_arc(px, py, cx, cy, r, a0, da):
    ang = math.atan2(py - cy, px - cx)
    if _arc_contains(a0, da, ang):
        d = math.hypot(px - cx, py - cy)
        if d <= _TOL:
            q = (cx + r * math.cos(a0), cy + r * math.sin(a0))
            return r, q
        qx = cx + r * (px - cx) / d
        qy = cy + r * (py - cy) / d
        return abs(d - r), (qx, qy)
    e0, e1 = _arc_ends(cx, cy, r, a0, da)
    d0 = math.hypot(px - e0[0], py - e0[1])
    d1 = math.hypot(px - e1[0], py - e1[1])
    return (d0, e0) if d0 <= d1 else (d1, e1)


def _seg_seg(s1, s2):
    _, ax0, ay0, ax1, ay1 = s1
    _, bx0, by0, bx1, by1 = s2

    def orient(ax, ay, bx, by, cx, cy):
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    d1 = orient(bx0, by0, bx1, by1, ax0, ay0)
    d2 = orient(bx0, by0, bx1, by1, ax1, ay1)
    d3 = orient(ax0, ay0, ax1, ay1, bx0, by0)
    d4 = orient(ax0, ay0, ax1, ay1, bx1, by1)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        # proper intersection
        denom = (ax1 - ax0) * (by1 - by0) - (ay1 - ay0) * (bx1 - bx0)
        t = ((bx0 - ax0) * (by1 - by0) - (by0 - ay0) * (bx1 - bx0)) / denom
        ix, iy = ax0 + t * (ax1 - ax0), ay0 + t * (ay1 - ay0)
        return 0.0, (ix, iy), (ix, iy)
    best = None
    for (px, py), seg in (((ax0, ay0), s2), ((ax1, ay1), s2),
                          ((bx0, by0), s1), ((bx1, by1), s1)):
        d, q = _pt_seg(px, py, *seg[1:])
        cand = (d, (px, py), q) if seg is s2 else (d, q, (px, py))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


def _seg_arc(seg, arc):
    _, x0, y0, x1, y1 = seg
    _, cx, cy, r, a0, da = arc
    candidates = []
    for (px, py) in ((x0, y0), (x1, y1)):
        d, q = _pt_arc(px, py, cx, cy, r, a0, da)
        candidates.append((d, (px, py), q))
    for q in _arc_ends(cx, cy, r, a0, da):
        d, p = _pt_seg(q[0], q[1], x0, y0, x1, y1)
        candidates.append((d, p, q))
    # interior critical point: radial foot of the centre on the segment
    d, p = _pt_seg(cx, cy, x0, y0, x1, y1)
    if d > _TOL:
        ang = math.atan2(p[1] - cy, p[0] - cx)
        if _arc_contains(a0, da, ang):
            q = (cx + r * math.cos(ang), cy + r * math.sin(ang))
            candidates.append((abs(d - r), p, q))
    # segment-circle intersections: exact zeros
    dx, dy = x1 - x0, y1 - y0
    fx, fy = x0 - cx, y0 - cy
    a = dx * dx + dy * dy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - r * r
    disc = b * b - 4 * a * c
    if a > 0 and disc >= 0:
        sq = math.sqrt(disc)
        for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
            if -1e-12 <= t <= 1.0 + 1e-12:
                px, py = x0 + t * dx, y0 + t * dy
                ang = math.atan2(py - cy, px - cx)
                if _arc_contains(a0, da, ang):
                    candidates.append((0.0, (px, py), (px, py)))
    return min(candidates, key=lambda c: c[0])


def _arc_arc(arc1, arc2):
    _, c1x, c1y, r1, a01, da1 = arc1
    _, c2x, c2y, r2, a02, da2 = arc2
    candidates = []
    for q in _arc_ends(c1x, c1y, r1, a01, da1):
        d, p = _pt_arc(q[0], q[1], c2x, c2y, r2, a02, da2)
        candidates.append((d, q, p))
    for q in _arc_ends(c2x, c2y, r2, a02, da2):
        d, p = _pt_arc(q[0], q[1], c1x, c1y, r1, a01, da1)
        candidates.append((d, p, q))
    d12 = math.hypot(c2x - c1x, c2y - c1y)
    if d12 > _TOL:
        ux, uy = (c2x - c1x) / d12, (c2y - c1y) / d12
        for s1 in (1.0, -1.0):
            p1 = (c1x + s1 * r1 * ux, c1y + s1 * r1 * uy)
            if not _arc_contains(a01, da1, math.atan2(p1[1] - c1y, p1[0] - c1x)):
                continue
            for s2 in (1.0, -1.0):
                p2 = (c2x - s2 * r2 * ux, c2y - s2 * r2 * uy)
                if not _arc_contains(a02, da2,
                                     math.atan2(p2[1] - c2y, p2[0] - c2x)):
                    continue
                candidates.append((math.hypot(p1[0] - p2[0], p1[1] - p2[1]),
                                   p1, p2))
        # circle-circle intersection points are exact zeros
        if abs(r1 - r2) - _TOL <= d12 <= r1 + r2 + _TOL:
            a = (d12 * d12 + r1 * r1 - r2 * r2) / (2.0 * d12)
            h2 = r1 * r1 - a * a
            h = math.sqrt(max(h2, 0.0))
            mx, my = c1x + a * ux, c1y + a * uy
            for sgn in (1.0, -1.0):
                px, py = mx - sgn * h * uy, my + sgn * h * ux
                ok1 = _arc_contains(a01, da1, math.atan2(py - c1y, px - c1x))
                ok2 = _arc_contains(a02, da2, math.atan2(py - c2y, px - c2x))
                if ok1 and ok2:
                    candidates.append((0.0, (px, py), (px, py)))
    else:
        # concentric: overlapping angular ranges attain |r1 - r2|
        for probe in (a01, a01 + da1 / 2.0, a01 + da1):
            if _arc_contains(a02, da2, probe):
                p1 = (c1x + r1 * math.cos(probe), c1y + r1 * math.sin(probe))
                p2 = (c2x + r2 * math.cos(probe), c2y + r2 * math.sin(probe))
                candidates.append((abs(r1 - r2), p1, p2))
                break
    return min(candidates, key=lambda c: c[0])


def element_distance(p1: tuple, p2: tuple):
    """Exact min distance between two primitives plus the closest points."""
    if p1[0] == "seg" and p2[0] == "seg":
        return _seg_seg(p1, p2)
    if p1[0] == "seg":
        return _seg_arc(p1, p2)
    if p2[0] == "seg":
        d, q, p = _seg_arc(p2, p1)
        return d, p, q
    return _arc_arc(p1, p2)


def _prim_bbox(prim, pad):
    x0, y0, x1, y1 = geo.primitive_bbox(prim)
    return x0 - pad, y0 - pad, x1 + pad, y1 + pad


def _arc_exact_bbox(prim):
    """Tight bbox of an arc (endpoint plus axis-extreme candidates)."""
    _, cx, cy, r, a0, da = prim
    (e0, e1) = _arc_ends(cx, cy, r, a0, da)
    xs = [e0[0], e1[0]]
    ys = [e0[1], e1[1]]
    for k in range(4):
        ang = k * math.pi / 2.0
        if _arc_contains(a0, da, ang):
            xs.append(cx + r * math.cos(ang))
            ys.append(cy + r * math.sin(ang))
    return min(xs), min(ys), max(xs), max(ys)


# ---------------------------------------------------------------------------
# the checker
# ---------------------------------------------------------------------------

def _path_prims_with_arclen(path: geo.PathGeometry):
    """Primitives annotated with (start, end) arclength along the path."""
    out = []
    pos = 0.0
    for prim in geo.path_primitives(path):
        if prim[0] == "seg":
            ln = math.hypot(prim[3] - prim[1], prim[4] - prim[2])
        else:
            ln = prim[3] * abs(prim[5])
        out.append((prim, pos, pos + ln))
        pos += ln
    return out


def check_drc(layout: Layout, config: PnrConfig) -> list[Violation]:
    """All design-rule findings for a layout, empty iff clean."""
    violations: list[Violation] = []
    nl = layout.netlist
    w = config.wg_width
    paths = [(r.net, r.path) for r in layout.routes
             if r.status == STATUS_ROUTED and r.path is not None]
    prims = {nid: _path_prims_with_arclen(p) for nid, p in paths}
    nets_by_id = {n.id: n for n in nl.nets}

    # bend radii and port alignment
    for nid, path in paths:
        for k, el in enumerate(path.elements):
            if isinstance(el, geo.Arc) and el.radius_um < config.r_min - _TOL:
                poses = geo.walk_path(path)
                x, y, _ = poses[k]
                violations.append(Violation(
                    KIND_RADIUS, x, y, (nid,), el.radius_um, config.r_min,
                    f"arc {k} of net {nid}"))
        ex, ey, eh = geo.path_end(path)
        if math.hypot(ex - path.dst.x_um, ey - path.dst.y_um) > _PORT_TOL:
            violations.append(Violation(
                KIND_PORT, ex, ey, (nid, path.dst.ref),
                math.hypot(ex - path.dst.x_um, ey - path.dst.y_um), _PORT_TOL,
                "endpoint does not coincide with the destination port"))
        elif eh != geo.opposite(path.dst.orientation):
            violations.append(Violation(
                KIND_PORT, ex, ey, (nid, path.dst.ref), float(eh),
                float(geo.opposite(path.dst.orientation)),
                "arrival tangent is not face-to-face with the port"))
        if path.elements:
            first = path.elements[0]
            if isinstance(first, geo.Straight) \
                    and first.heading != path.src.orientation:
                violations.append(Violation(
                    KIND_PORT, path.src.x_um, path.src.y_um,
                    (nid, path.src.ref), float(first.heading),
                    float(path.src.orientation),
                    "departure tangent does not match the source port"))

    # crossing-site geometry: orthogonal, both members straight through
    site_boxes = []
    for site in layout.crossings:
        cx = site.cell[0] * layout.pitch
        cy = site.cell[1] * layout.pitch
        half = site.side_um / 2.0
        site_boxes.append((site, cx, cy, half))
        if (site.heading_a - site.heading_b) % 4 != 2:
            violations.append(Violation(
                KIND_XANGLE, cx, cy, (site.net_a, site.net_b),
                float((site.heading_a - site.heading_b) % 8 * 45), 90.0,
                f"site {site.id} headings are not orthogonal"))
            continue
        for nid, heading in ((site.net_a, site.heading_a),
                             (site.net_b, site.heading_b)):
            if nid not in prims or not _straight_through(
                    prims[nid], cx, cy, heading, half, w / 2.0):
                violations.append(Violation(
                    KIND_XANGLE, cx, cy, (nid,), 0.0, 2.0 * half,
                    f"net {nid} does not run straight through site {site.id}"))

    # site-site and site-bend clearance
    for i in range(len(site_boxes)):
        s1, x1, y1, _ = site_boxes[i]
        for j in range(i + 1, len(site_boxes)):
            s2, x2, y2, _ = site_boxes[j]
            d = math.hypot(x2 - x1, y2 - y1)
            if d < config.crossing_clearance - _TOL:
                violations.append(Violation(
                    KIND_XCLEAR, (x1 + x2) / 2, (y1 + y2) / 2,
                    (s1.id, s2.id), d, config.crossing_clearance,
                    "crossing sites too close"))
        for nid, plist in prims.items():
            for prim, _, _ in plist:
                if prim[0] != "arc":
                    continue
                d, _ = _pt_arc(x1, y1, *prim[1:])
                if d < config.crossing_clearance - _TOL:
                    violations.append(Violation(
                        KIND_XCLEAR, x1, y1, (s1.id, nid), d,
                        config.crossing_clearance,
                        f"bend of net {nid} inside the clearance of {s1.id}"))

    # pairwise spacing (edge gap) with the shared-site exemption
    ids = [nid for nid, _ in paths]
    for i in range(len(ids)):
        for j in range(i, len(ids)):
            a, b = ids[i], ids[j]
            worst = None
            for pa, sa0, sa1 in prims[a]:
                for pb, sb0, sb1 in prims[b]:
                    if a == b:
                        # skip pairs adjacent along the path: a bend-radius
                        # path cannot legally return to itself faster than
                        # a half turn
                        if min(abs(sb0 - sa1), abs(sa0 - sb1)) \
                                < math.pi * config.r_min - 1e-6:
                            continue
                    if not _bbox_close(pa, pb, w + config.min_spacing):
                        continue
                    d, p, q = element_distance(pa, pb)
                    gap = d - w
                    if worst is None or gap < worst[0]:
                        worst = (gap, p, q)
            if worst is None:
                continue
            gap, p, q = worst
            if gap >= config.min_spacing - _TOL:
                continue
            mx, my = (p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0
            if a != b and _inside_shared_site(site_boxes, a, b, mx, my):
                continue
            violations.append(Violation(
                KIND_SPACING, mx, my, (a, b) if a != b else (a,),
                gap, config.min_spacing,
                "waveguide gap below minimum" if a != b
                else "path approaches itself"))

    # waveguide-component overlap, with the own-port exemption
    comp_rects = [(c.id, c.x_um, c.y_um, c.width_um, c.height_um)
                  for c in nl.components if c.x_um is not None]
    for nid, plist in prims.items():
        net = nets_by_id[nid]
        own = {net.src[0], net.dst[0]}
        path = dict(paths)[nid]
        ports = ((path.src.x_um, path.src.y_um), (path.dst.x_um, path.dst.y_um))
        for cid, rx, ry, rw, rh in comp_rects:
            for prim, _, _ in plist:
                if not _bbox_overlaps(prim, rx - w, ry - w, rx + rw + w,
                                      ry + rh + w):
                    continue
                d, p = _rect_distance(prim, rx, ry, rw, rh)
                if d >= w / 2.0 - _TOL:
                    continue
                if cid in own and any(
                        math.hypot(p[0] - px, p[1] - py)
                        <= w + 2.0 * config.pitch for px, py in ports):
                    continue
                violations.append(Violation(
                    KIND_OVERLAP, p[0], p[1], (nid, cid), d, w / 2.0,
                    "waveguide overlaps a component footprint"))
                break

    # component-component overlap
    for i in range(len(comp_rects)):
        for j in range(i + 1, len(comp_rects)):
            a, b = comp_rects[i], comp_rects[j]
            ox = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
            oy = min(a[2] + a[4], b[2] + b[4]) - max(a[2], b[2])
            if ox > _TOL and oy > _TOL:
                violations.append(Violation(
                    KIND_OVERLAP, max(a[1], b[1]) + ox / 2,
                    max(a[2], b[2]) + oy / 2, (a[0], b[0]),
                    min(ox, oy), 0.0, "component footprints overlap"))

    # die containment
    die_w, die_h = nl.die_width_um, nl.die_height_um
    for cid, rx, ry, rw, rh in comp_rects:
        if rx < -_TOL or ry < -_TOL or rx + rw > die_w + _TOL \
                or ry + rh > die_h + _TOL:
            violations.append(Violation(
                KIND_DIE, rx, ry, (cid,), 0.0, 0.0,
                "component outside the die"))
    for nid, plist in prims.items():
        for prim, _, _ in plist:
            if prim[0] == "seg":
                x0, y0, x1, y1 = geo.primitive_bbox(prim)
            else:
                x0, y0, x1, y1 = _arc_exact_bbox(prim)
            if x0 - w / 2 < -_TOL or y0 - w / 2 < -_TOL \
                    or x1 + w / 2 > die_w + _TOL or y1 + w / 2 > die_h + _TOL:
                violations.append(Violation(
                    KIND_DIE, x0, y0, (nid,), 0.0, 0.0,
                    "waveguide leaves the die"))
                break
    return violations


def _straight_through(plist, cx, cy, heading, half, lateral_tol):
    horizontal = heading in (geo.E, geo.W)
    for prim, _, _ in plist:
        if prim[0] != "seg":
            continue
        _, x0, y0, x1, y1 = prim
        if horizontal and abs(y0 - y1) < 1e-9 and abs(y0 - cy) <= lateral_tol:
            if min(x0, x1) <= cx - half + 1e-6 \
                    and max(x0, x1) >= cx + half - 1e-6:
                return True
        if (not horizontal) and abs(x0 - x1) < 1e-9 \
                and abs(x0 - cx) <= lateral_tol:
            if min(y0, y1) <= cy - half + 1e-6 \
                    and max(y0, y1) >= cy + half - 1e-6:
                return True
    return False


def _inside_shared_site(site_boxes, a, b, x, y) -> bool:
    for site, cx, cy, half in site_boxes:
        if {site.net_a, site.net_b} == {a, b} \
                and abs(x - cx) <= half + _TOL and abs(y - cy) <= half + _TOL:
            return True
    return False


def _bbox_close(p1, p2, margin) -> bool:
    a = _prim_bbox(p1, margin)
    b = _prim_bbox(p2, 0.0)
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _bbox_overlaps(prim, x0, y0, x1, y1) -> bool:
    a = _prim_bbox(prim, 0.0)
    return not (a[2] < x0 or x1 < a[0] or a[3] < y0 or y1 < a[1])


def _rect_distance(prim, rx, ry, rw, rh):
    """Distance from a primitive to a solid rectangle (0 if it enters)."""
    edges = [
        ("seg", rx, ry, rx + rw, ry),
        ("seg", rx + rw, ry, rx + rw, ry + rh),
        ("seg", rx + rw, ry + rh, rx, ry + rh),
        ("seg", rx, ry + rh, rx, ry),
    ]
    if prim[0] == "seg":
        pts = [(prim[1], prim[2]), (prim[3], prim[4])]
    else:
        pts = list(_arc_ends(*prim[1:]))
    for (px, py) in pts:
        if rx - _TOL <= px <= rx + rw + _TOL and ry - _TOL <= py <= ry + rh + _TOL:
            return 0.0, (px, py)
    best = None
    for edge in edges:
        d, p, _ = element_distance(prim, edge)
        if best is None or d < best[0]:
            best = (d, p)
    return best
