"""Layout container plus lossless JSON and SVG emission.

A layout is a fully placed netlist together with routed path geometry
and the crossing-site table.  JSON is the canonical interchange form
and round-trips exactly; SVG is a human-oriented rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from . import geometry as geo
from .config import PnrConfig
from .errors import InconsistentLayoutError, SchemaError, ValidationError
from .netlist import (Netlist, canonical_json, netlist_to_dict, parse_netlist,
                      _cf)

STATUS_ROUTED = "routed"
STATUS_UNROUTABLE = "unroutable"


@dataclass
class Route:
    net: str
    status: str
    path: Optional[geo.PathGeometry] = None
    reason: str = ""


@dataclass
class Layout:
    netlist: Netlist
    routes: list[Route] = field(default_factory=list)
    crossings: list[geo.CrossingSite] = field(default_factory=list)
    pitch: float = 1.0

    def routed_paths(self) -> list[geo.PathGeometry]:
        return [r.path for r in self.routes if r.status == STATUS_ROUTED and r.path]

    def route_for(self, net_id: str) -> Route:
        for r in self.routes:
            if r.net == net_id:
                return r
        raise ValidationError(f"no route entry for net {net_id!r}")

    def unrouted_count(self) -> int:
        return sum(1 for r in self.routes if r.status != STATUS_ROUTED)


def resolve_endpoint(nl: Netlist, pin: tuple[str, str]) -> geo.PathEndpoint:
    comp = nl.component(pin[0])
    port = comp.port(pin[1])
    x, y = comp.port_position(pin[1])
    return geo.PathEndpoint(x_um=x, y_um=y, orientation=port.orientation,
                            ref=f"{pin[0]}.{pin[1]}")


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _element_to_dict(el: geo.PathElement) -> dict:
    if isinstance(el, geo.Straight):
        return {"kind": "straight", "length_um": _cf(el.length_um),
                "heading": geo.heading_name(el.heading)}
    return {"kind": "arc", "radius_um": _cf(el.radius_um),
            "turn": "left" if el.turn == geo.LEFT else "right",
            "sweep_deg": el.sweep_deg}


def _element_from_dict(raw: dict, path: str) -> geo.PathElement:
    kind = raw.get("kind")
    if kind == "straight":
        return geo.Straight(length_um=float(raw["length_um"]),
                            heading=geo.heading_from_name(raw["heading"]))
    if kind == "arc":
        turn = {"left": geo.LEFT, "right": geo.RIGHT}.get(raw.get("turn"))
        if turn is None:
            raise SchemaError(f"{path}.turn must be left or right")
        sweep = raw.get("sweep_deg")
        if sweep not in (45, 90):
            raise SchemaError(f"{path}.sweep_deg must be 45 or 90")
        return geo.Arc(radius_um=float(raw["radius_um"]), turn=turn,
                       sweep_deg=int(sweep))
    raise SchemaError(f"{path}.kind must be straight or arc")


def layout_to_dict(layout: Layout) -> dict:
    doc = netlist_to_dict(layout.netlist)
    doc["pitch_um"] = _cf(layout.pitch)
    doc["placements"] = [
        {"id": c.id, "x_um": _cf(c.x_um), "y_um": _cf(c.y_um)}
        for c in layout.netlist.components
        if c.x_um is not None and c.y_um is not None
    ]
    doc["routes"] = [
        {
            "net": r.net,
            "status": r.status,
            **({"reason": r.reason} if r.reason else {}),
            "elements": [_element_to_dict(e) for e in r.path.elements]
            if r.path else [],
            "crossings": [
                {"cell": [c[0][0], c[0][1]], "partner": c[1]}
                for c in (r.path.crossings if r.path else [])
            ],
        }
        for r in layout.routes
    ]
    doc["crossings"] = [
        {
            "id": s.id, "cell": [s.cell[0], s.cell[1]], "side_um": _cf(s.side_um),
            "nets": [s.net_a, s.net_b],
            "headings": [geo.heading_name(s.heading_a),
                         geo.heading_name(s.heading_b)],
        }
        for s in layout.crossings
    ]
    return doc


def check_layout_consistent(layout: Layout, config: PnrConfig):
    """Reject layouts whose routed paths fail the geometry validator."""
    for route in layout.routes:
        if route.status != STATUS_ROUTED or route.path is None:
            continue
        faults = geo.validate_path_geometry(route.path, config)
        if faults:
            raise InconsistentLayoutError(
                f"net {route.net!r}: {faults[0].kind}: {faults[0].detail}")


def emit_layout_json(layout: Layout, config: Optional[PnrConfig] = None) -> str:
    if config is not None:
        check_layout_consistent(layout, config)
    return canonical_json(layout_to_dict(layout))


def parse_layout(text: str) -> Layout:
    nl = parse_netlist(text)
    import json
    doc = json.loads(text)
    layout = Layout(netlist=nl, pitch=float(doc.get("pitch_um", 1.0)))

    for k, praw in enumerate(doc.get("placements", [])):
        path = f"$.placements[{k}]"
        if not isinstance(praw, dict) or "id" not in praw:
            raise SchemaError(f"{path} must be an object with an id")
        comp = nl.component(praw["id"])
        comp.x_um = float(praw["x_um"])
        comp.y_um = float(praw["y_um"])

    nets_by_id = {n.id: n for n in nl.nets}
    for k, rraw in enumerate(doc.get("routes", [])):
        path = f"$.routes[{k}]"
        if not isinstance(rraw, dict):
            raise SchemaError(f"{path} must be an object")
        nid = rraw.get("net")
        if nid not in nets_by_id:
            raise ValidationError(f"{path}: route references unknown net {nid!r}")
        status = rraw.get("status", STATUS_ROUTED)
        if status not in (STATUS_ROUTED, STATUS_UNROUTABLE):
            raise SchemaError(f"{path}.status must be routed or unroutable")
        route = Route(net=nid, status=status, reason=rraw.get("reason", ""))
        if status == STATUS_ROUTED:
            net = nets_by_id[nid]
            pg = geo.PathGeometry(
                net=nid,
                src=resolve_endpoint(nl, net.src),
                dst=resolve_endpoint(nl, net.dst),
                elements=[_element_from_dict(e, f"{path}.elements[{i}]")
                          for i, e in enumerate(rraw.get("elements", []))],
                crossings=[((int(c["cell"][0]), int(c["cell"][1])), c["partner"])
                           for c in rraw.get("crossings", [])],
            )
            route.path = pg
        layout.routes.append(route)

    for k, sraw in enumerate(doc.get("crossings", [])):
        path = f"$.crossings[{k}]"
        try:
            layout.crossings.append(geo.CrossingSite(
                id=sraw["id"],
                cell=(int(sraw["cell"][0]), int(sraw["cell"][1])),
                side_um=float(sraw["side_um"]),
                net_a=sraw["nets"][0], net_b=sraw["nets"][1],
                heading_a=geo.heading_from_name(sraw["headings"][0]),
                heading_b=geo.heading_from_name(sraw["headings"][1]),
            ))
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError(f"{path}: malformed crossing entry: {exc}") from exc
    return layout


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

def _f(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return s if s not in ("-0", "") else "0"


def _svg_path_d(path: geo.PathGeometry) -> str:
    x, y, h = path.start_pose
    parts = [f"M {_f(x)} {_f(y)}"]
    for el in path.elements:
        if isinstance(el, geo.Straight):
            vx, vy = geo.heading_vector(el.heading)
            x, y = x + el.length_um * vx, y + el.length_um * vy
            h = el.heading
            parts.append(f"L {_f(x)} {_f(y)}")
        else:
            x, y, h = geo.arc_endpoint(x, y, h, el.turn, el.sweep_deg, el.radius_um)
            sweep_flag = 1 if el.turn == geo.LEFT else 0
            parts.append(
                f"A {_f(el.radius_um)} {_f(el.radius_um)} 0 0 {sweep_flag} "
                f"{_f(x)} {_f(y)}")
    return " ".join(parts)


def emit_svg(layout: Layout, config: Optional[PnrConfig] = None) -> str:
    """Die frame, component footprints, waveguide centerlines, crossings."""
    if config is not None:
        check_layout_consistent(layout, config)
    nl = layout.netlist
    w, h = nl.die_width_um, nl.die_height_um
    margin = max(5.0, 0.02 * max(w, h))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{_f(-margin)} {_f(-margin)} {_f(w + 2 * margin)} '
        f'{_f(h + 2 * margin)}" width="{_f(w + 2 * margin)}" '
        f'height="{_f(h + 2 * margin)}">',
        f'<g transform="translate(0,{_f(h)}) scale(1,-1)">',
        f'<rect class="die" x="0" y="0" width="{_f(w)}" height="{_f(h)}" '
        'fill="none" stroke="#444" stroke-width="0.5"/>',
    ]
    for comp in nl.components:
        if comp.x_um is None or comp.y_um is None:
            continue
        fill = "#f4c9a0" if comp.thermal else "#a9c8e8"
        lines.append(
            f'<rect class="component" x="{_f(comp.x_um)}" y="{_f(comp.y_um)}" '
            f'width="{_f(comp.width_um)}" height="{_f(comp.height_um)}" '
            f'fill="{fill}" stroke="#333" stroke-width="0.2">'
            f'<title>{comp.id}</title></rect>')
    wgw = config.wg_width if config else 0.5
    for route in layout.routes:
        if route.status != STATUS_ROUTED or route.path is None:
            continue
        lines.append(
            f'<path class="waveguide" d="{_svg_path_d(route.path)}" fill="none" '
            f'stroke="#0a7d32" stroke-width="{_f(wgw)}">'
            f'<title>{route.net}</title></path>')
    for site in layout.crossings:
        cx, cy = site.cell[0] * layout.pitch, site.cell[1] * layout.pitch
        half = site.side_um / 2.0
        lines.append(
            f'<rect class="crossing" x="{_f(cx - half)}" y="{_f(cy - half)}" '
            f'width="{_f(site.side_um)}" height="{_f(site.side_um)}" '
            f'fill="none" stroke="#c0392b" stroke-width="0.3"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
