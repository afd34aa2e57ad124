"""Layout JSON round-trips and SVG rendering."""

import json
import re

import pytest

from picpnr import geometry as geo
from picpnr.config import PnrConfig
from picpnr.errors import InconsistentLayoutError
from picpnr.gen import gen_benchmark
from picpnr.layout import (Layout, Route, STATUS_ROUTED, emit_layout_json,
                           emit_svg, parse_layout, resolve_endpoint)
from picpnr.netlist import Net, parse_netlist

CFG = PnrConfig()


def straight_net_layout():
    nl = parse_netlist(json.dumps({
        "die": {"width_um": 40, "height_um": 20},
        "components": [
            {"id": "a", "width_um": 2, "height_um": 2, "fixed": True,
             "x_um": 8, "y_um": 9,
             "ports": [{"id": "p", "dx_um": 2, "dy_um": 1,
                        "orientation": "E", "signal": "te0"}]},
            {"id": "b", "width_um": 2, "height_um": 2, "fixed": True,
             "x_um": 20, "y_um": 9,
             "ports": [{"id": "p", "dx_um": 0, "dy_um": 1,
                        "orientation": "W", "signal": "te0"}]},
        ],
        "nets": [{"id": "n0", "src": "a.p", "dst": "b.p"}],
    }))
    path = geo.PathGeometry(
        net="n0",
        src=resolve_endpoint(nl, ("a", "p")),
        dst=resolve_endpoint(nl, ("b", "p")),
        elements=[geo.Straight(10.0, geo.E)],
    )
    return Layout(netlist=nl, routes=[Route("n0", STATUS_ROUTED, path)])


def test_empty_layout_json_and_svg():
    nl = parse_netlist(json.dumps({"die": {"width_um": 50, "height_um": 30}}))
    layout = Layout(netlist=nl)
    doc = json.loads(emit_layout_json(layout, CFG))
    assert doc["routes"] == []
    assert doc["crossings"] == []
    assert doc["placements"] == []
    svg = emit_svg(layout, CFG)
    assert svg.count("<rect") == 1  # just the die frame
    assert "<path" not in svg


def test_single_straight_svg_path_length():
    svg = emit_svg(straight_net_layout(), CFG)
    paths = re.findall(r'<path class="waveguide" d="([^"]+)"', svg)
    assert len(paths) == 1
    m = re.match(r"M (\S+) (\S+) L (\S+) (\S+)", paths[0])
    x0, y0, x1, y1 = map(float, m.groups())
    assert abs((x1 - x0)) == pytest.approx(10.0)
    assert y0 == y1


def test_json_roundtrip_identity():
    layout = straight_net_layout()
    text = emit_layout_json(layout, CFG)
    back = parse_layout(text)
    assert emit_layout_json(back, CFG) == text
    assert back.routes[0].path.elements == layout.routes[0].path.elements
    assert back.netlist == layout.netlist


def test_inconsistent_layout_rejected():
    layout = straight_net_layout()
    layout.routes[0].path.elements = [geo.Straight(7.0, geo.E)]
    with pytest.raises(InconsistentLayoutError):
        emit_layout_json(layout, CFG)


def test_crossing_site_serialization():
    layout = straight_net_layout()
    for comp in layout.netlist.components:
        comp.ports.append(type(comp.ports[0])(
            id="q", dx_um=1.0, dy_um=2.0, orientation=geo.N, signal="te0"))
    layout.netlist.nets.append(Net("n1", ("b", "q"), ("a", "q"), "te0"))
    layout.crossings.append(geo.CrossingSite(
        id="x0", cell=(15, 10), side_um=10.0, net_a="n0", net_b="n1",
        heading_a=geo.E, heading_b=geo.N))
    text = emit_layout_json(layout)
    back = parse_layout(text)
    assert back.crossings == layout.crossings
    svg = emit_svg(layout)
    assert 'class="crossing"' in svg
