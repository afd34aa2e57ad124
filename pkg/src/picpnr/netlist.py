"""Netlist model and its canonical JSON interchange form.

The schema is intentionally small: a die, rectangular components with
boundary ports, two-pin nets and optional alignment constraint groups.
Electrical ports/nets are accepted and preserved but never routed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from . import geometry as geo
from .errors import SchemaError, ValidationError

OPTICAL_SIGNALS = ("te0", "te1", "tm0")
KNOWN_SIGNALS = OPTICAL_SIGNALS + ("electrical",)

_POS_TOL = 1e-6


@dataclass
class Port:
    id: str
    dx_um: float
    dy_um: float
    orientation: int        # axis heading, outward
    signal: str


@dataclass
class ComponentInstance:
    id: str
    width_um: float
    height_um: float
    fixed: bool = False
    x_um: Optional[float] = None     # lower-left corner; None until placed
    y_um: Optional[float] = None
    thermal: bool = False
    ports: list[Port] = field(default_factory=list)

    def port(self, port_id: str) -> Port:
        for p in self.ports:
            if p.id == port_id:
                return p
        raise ValidationError(f"component {self.id!r} has no port {port_id!r}")

    def port_position(self, port_id: str) -> tuple[float, float]:
        if self.x_um is None or self.y_um is None:
            raise ValidationError(f"component {self.id!r} is not placed")
        p = self.port(port_id)
        return self.x_um + p.dx_um, self.y_um + p.dy_um


@dataclass
class Net:
    id: str
    src: tuple[str, str]     # (component id, port id)
    dst: tuple[str, str]
    signal: str
    weight: float = 1.0


@dataclass
class Netlist:
    die_width_um: float
    die_height_um: float
    components: list[ComponentInstance] = field(default_factory=list)
    nets: list[Net] = field(default_factory=list)
    align_x: list[list[str]] = field(default_factory=list)
    align_y: list[list[str]] = field(default_factory=list)

    def component(self, comp_id: str) -> ComponentInstance:
        for c in self.components:
            if c.id == comp_id:
                return c
        raise ValidationError(f"unknown component {comp_id!r}")

    def optical_nets(self) -> list[Net]:
        return [n for n in self.nets if n.signal != "electrical"]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"missing {path}.{key}")
    return obj[key]

def _num(obj: dict, key: str, path: str) -> float:
    v = _need(obj, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key} must be a number, got {type(v).__name__}")
    return float(v)

def _text(obj: dict, key: str, path: str) -> str:
    v = _need(obj, key, path)
    if not isinstance(v, str):
        raise SchemaError(f"{path}.{key} must be a string")
    return v

def _flag(obj: dict, key: str, path: str, default=None) -> bool:
    if key not in obj:
        if default is None:
            raise SchemaError(f"missing {path}.{key}")
        return default
    v = obj[key]
    if not isinstance(v, bool):
        raise SchemaError(f"{path}.{key} must be a boolean")
    return v


def _parse_port(raw: dict, path: str) -> Port:
    if not isinstance(raw, dict):
        raise SchemaError(f"{path} must be an object")
    orient = _text(raw, "orientation", path)
    if orient not in ("E", "N", "W", "S"):
        raise SchemaError(f"{path}.orientation must be one of E/N/W/S")
    signal = _text(raw, "signal", path)
    if signal not in KNOWN_SIGNALS:
        raise SchemaError(
            f"{path}.signal: unknown signal type {signal!r} "
            f"(known: {', '.join(KNOWN_SIGNALS)})")
    return Port(
        id=_text(raw, "id", path),
        dx_um=_num(raw, "dx_um", path),
        dy_um=_num(raw, "dy_um", path),
        orientation=geo.heading_from_name(orient),
        signal=signal,
    )


def _check_port_on_boundary(comp: ComponentInstance, port: Port):
    w, h, d = comp.width_um, comp.height_um, port
    ok = {
        geo.E: abs(d.dx_um - w) <= _POS_TOL and -_POS_TOL <= d.dy_um <= h + _POS_TOL,
        geo.W: abs(d.dx_um) <= _POS_TOL and -_POS_TOL <= d.dy_um <= h + _POS_TOL,
        geo.N: abs(d.dy_um - h) <= _POS_TOL and -_POS_TOL <= d.dx_um <= w + _POS_TOL,
        geo.S: abs(d.dy_um) <= _POS_TOL and -_POS_TOL <= d.dx_um <= w + _POS_TOL,
    }[port.orientation]
    if not ok:
        raise ValidationError(
            f"port {comp.id}.{port.id} at ({d.dx_um},{d.dy_um}) does not sit on "
            f"the {geo.heading_name(port.orientation)} edge of its "
            f"{w}x{h} um component")


def _parse_component(raw: dict, path: str) -> ComponentInstance:
    if not isinstance(raw, dict):
        raise SchemaError(f"{path} must be an object")
    comp = ComponentInstance(
        id=_text(raw, "id", path),
        width_um=_num(raw, "width_um", path),
        height_um=_num(raw, "height_um", path),
        fixed=_flag(raw, "fixed", path, default=False),
        thermal=_flag(raw, "thermal", path, default=False),
    )
    if comp.width_um <= 0 or comp.height_um <= 0:
        raise ValidationError(f"{path}: footprint must have positive size")
    if "x_um" in raw:
        comp.x_um = _num(raw, "x_um", path)
    if "y_um" in raw:
        comp.y_um = _num(raw, "y_um", path)
    if comp.fixed and (comp.x_um is None or comp.y_um is None):
        raise ValidationError(f"{path}: fixed component {comp.id!r} needs x_um/y_um")
    ports_raw = raw.get("ports", [])
    if not isinstance(ports_raw, list):
        raise SchemaError(f"{path}.ports must be an array")
    seen = set()
    for k, praw in enumerate(ports_raw):
        port = _parse_port(praw, f"{path}.ports[{k}]")
        if port.id in seen:
            raise ValidationError(f"duplicate port id {port.id!r} on {comp.id!r}")
        seen.add(port.id)
        comp.ports.append(port)
        _check_port_on_boundary(comp, port)
    return comp


def _parse_pin(ref: str, path: str) -> tuple[str, str]:
    if not isinstance(ref, str) or ref.count(".") != 1:
        raise SchemaError(f"{path} must look like \"component.port\"")
    comp, port = ref.split(".")
    return comp, port


def parse_netlist(text: str) -> Netlist:
    """Parse and fully validate a netlist JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    die = _need(doc, "die", "$")
    if not isinstance(die, dict):
        raise SchemaError("$.die must be an object")
    nl = Netlist(
        die_width_um=_num(die, "width_um", "$.die"),
        die_height_um=_num(die, "height_um", "$.die"),
    )
    if nl.die_width_um <= 0 or nl.die_height_um <= 0:
        raise ValidationError("die must have positive dimensions")

    comps_raw = doc.get("components", [])
    if not isinstance(comps_raw, list):
        raise SchemaError("$.components must be an array")
    by_id: dict[str, ComponentInstance] = {}
    for k, raw in enumerate(comps_raw):
        comp = _parse_component(raw, f"$.components[{k}]")
        if comp.id in by_id:
            raise ValidationError(f"duplicate component id {comp.id!r}")
        by_id[comp.id] = comp
        nl.components.append(comp)

    nets_raw = doc.get("nets", [])
    if not isinstance(nets_raw, list):
        raise SchemaError("$.nets must be an array")
    net_ids = set()
    for k, raw in enumerate(nets_raw):
        path = f"$.nets[{k}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{path} must be an object")
        nid = _text(raw, "id", path)
        if nid in net_ids:
            raise ValidationError(f"duplicate net id {nid!r}")
        net_ids.add(nid)
        src = _parse_pin(_need(raw, "src", path), f"{path}.src")
        dst = _parse_pin(_need(raw, "dst", path), f"{path}.dst")
        pins = []
        for which, (cid, pid) in (("src", src), ("dst", dst)):
            if cid not in by_id:
                raise ValidationError(
                    f"net {nid!r} {which} references missing component {cid!r}")
            comp = by_id[cid]
            try:
                pins.append(comp.port(pid))
            except ValidationError:
                raise ValidationError(
                    f"net {nid!r} {which} references missing port "
                    f"{cid}.{pid}") from None
        if src == dst:
            raise ValidationError(f"net {nid!r} connects a port to itself")
        if pins[0].signal != pins[1].signal:
            raise ValidationError(
                f"net {nid!r} connects signal {pins[0].signal!r} to "
                f"{pins[1].signal!r}")
        weight = raw.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, (int, float)) \
                or weight < 0:
            raise SchemaError(f"{path}.weight must be a number >= 0")
        nl.nets.append(Net(id=nid, src=src, dst=dst,
                           signal=pins[0].signal, weight=float(weight)))

    # a waveguide port carries exactly one physical connection
    used_pins: dict[tuple[str, str], str] = {}
    for net in nl.nets:
        if net.signal == "electrical":
            continue
        for pin in (net.src, net.dst):
            if pin in used_pins:
                raise ValidationError(
                    f"port {pin[0]}.{pin[1]} is used by both net "
                    f"{used_pins[pin]!r} and net {net.id!r}")
            used_pins[pin] = net.id

    cons = doc.get("constraints", {})
    if not isinstance(cons, dict):
        raise SchemaError("$.constraints must be an object")
    for key, target in (("align_x", nl.align_x), ("align_y", nl.align_y)):
        groups = cons.get(key, [])
        if not isinstance(groups, list):
            raise SchemaError(f"$.constraints.{key} must be an array")
        for g, group in enumerate(groups):
            if not isinstance(group, list) or not all(isinstance(c, str) for c in group):
                raise SchemaError(
                    f"$.constraints.{key}[{g}] must be an array of component ids")
            for cid in group:
                if cid not in by_id:
                    raise ValidationError(
                        f"constraint group {key}[{g}] references missing "
                        f"component {cid!r}")
            target.append(list(group))

    # placed components must fit the die
    for comp in nl.components:
        if comp.fixed:
            if (comp.x_um < -_POS_TOL or comp.y_um < -_POS_TOL
                    or comp.x_um + comp.width_um > nl.die_width_um + _POS_TOL
                    or comp.y_um + comp.height_um > nl.die_height_um + _POS_TOL):
                raise ValidationError(
                    f"fixed component {comp.id!r} lies outside the die")
    return nl


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    """Deterministic JSON rendering used for every emitted document."""
    return json.dumps(obj, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def _cf(x: float) -> float:
    """Canonical float: collapse -0.0 and round-trip cleanly."""
    x = float(x)
    return 0.0 if x == 0.0 else x


def netlist_to_dict(nl: Netlist) -> dict:
    comps = []
    for c in nl.components:
        entry = {
            "id": c.id,
            "width_um": _cf(c.width_um),
            "height_um": _cf(c.height_um),
            "fixed": c.fixed,
            "thermal": c.thermal,
            "ports": [
                {
                    "id": p.id,
                    "dx_um": _cf(p.dx_um),
                    "dy_um": _cf(p.dy_um),
                    "orientation": geo.heading_name(p.orientation),
                    "signal": p.signal,
                }
                for p in c.ports
            ],
        }
        if c.x_um is not None:
            entry["x_um"] = _cf(c.x_um)
        if c.y_um is not None:
            entry["y_um"] = _cf(c.y_um)
        comps.append(entry)
    return {
        "die": {"width_um": _cf(nl.die_width_um), "height_um": _cf(nl.die_height_um)},
        "components": comps,
        "nets": [
            {"id": n.id, "src": f"{n.src[0]}.{n.src[1]}",
             "dst": f"{n.dst[0]}.{n.dst[1]}", "weight": _cf(n.weight)}
            for n in nl.nets
        ],
        "constraints": {"align_x": nl.align_x, "align_y": nl.align_y},
    }


def emit_netlist_json(nl: Netlist) -> str:
    return canonical_json(netlist_to_dict(nl))
