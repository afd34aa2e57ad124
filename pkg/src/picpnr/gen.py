"""Desk-scale benchmark circuit generators.

Three families: a Clements-style rectangular MZI mesh, a WDM bus with
ring-filter drops, and random mixed-size instances.  Every generator is
a pure function of its arguments, so identical seeds give identical
netlists.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo
from .errors import ValidationError
from .netlist import ComponentInstance, Net, Netlist, Port

_SIGNAL = "te0"


def _port(pid, dx, dy, orientation, signal=_SIGNAL) -> Port:
    return Port(id=pid, dx_um=float(dx), dy_um=float(dy),
                orientation=orientation, signal=signal)


def _pad(cid, x, y, orientation) -> ComponentInstance:
    """2x2 um fixed IO pad with a single outward port."""
    dx, dy = {geo.E: (2, 1), geo.W: (0, 1), geo.N: (1, 2), geo.S: (1, 0)}[orientation]
    return ComponentInstance(
        id=cid, width_um=2.0, height_um=2.0, fixed=True,
        x_um=float(x), y_um=float(y),
        ports=[_port("p", dx, dy, orientation)])


def _mzi(cid) -> ComponentInstance:
    """20x10 um Mach-Zehnder block: two west inputs, two east outputs."""
    return ComponentInstance(
        id=cid, width_um=20.0, height_um=10.0, thermal=True,
        ports=[
            _port("in0", 0, 2, geo.W),
            _port("in1", 0, 8, geo.W),
            _port("out0", 20, 2, geo.E),
            _port("out1", 20, 8, geo.E),
        ])


def gen_clements(n: int) -> Netlist:
    """Rectangular mesh of n*(n-1)/2 MZI blocks over n modes."""
    if n < 2:
        raise ValidationError("clements mesh needs size >= 2")
    mode_pitch = 30
    col_pitch = 60
    die_w = float(140 + n * col_pitch)
    die_h = float(80 + (n - 1) * mode_pitch)
    nl = Netlist(die_width_um=die_w, die_height_um=die_h)

    def mode_y(i):
        # mode 0 at the top so mesh drawings read top-down
        return 40 + (n - 1 - i) * mode_pitch

    rails: list[tuple[str, str]] = []
    for i in range(n):
        pad = _pad(f"ioW{i}", 10, mode_y(i) - 1, geo.E)
        nl.components.append(pad)
        rails.append((pad.id, "p"))

    nets = 0

    def connect(src, dst):
        nonlocal nets
        nl.nets.append(Net(id=f"n{nets}", src=src, dst=dst, signal=_SIGNAL))
        nets += 1

    for c in range(n):
        column: list[str] = []
        start = 0 if c % 2 == 0 else 1
        for i in range(start, n - 1, 2):
            mid = f"mzi_c{c}_m{i}"
            mzi = _mzi(mid)
            # nominal mesh position; movable, the placer refines it
            mzi.x_um = float(90 + c * col_pitch)
            mzi.y_um = float((mode_y(i) + mode_y(i + 1)) / 2 - 5)
            nl.components.append(mzi)
            column.append(mid)
            # mode i is the upper rail and feeds the upper port in1
            connect(rails[i], (mid, "in1"))
            connect(rails[i + 1], (mid, "in0"))
            rails[i] = (mid, "out1")
            rails[i + 1] = (mid, "out0")
        if len(column) > 1:
            nl.align_x.append(column)
    for i in range(n):
        pad = _pad(f"ioE{i}", die_w - 12, mode_y(i) - 1, geo.W)
        nl.components.append(pad)
        connect(rails[i], (pad.id, "p"))
    return nl


def gen_wdm_bus(k: int) -> Netlist:
    """Single bus with k ring-filter drops to south-edge pads."""
    if k < 1:
        raise ValidationError("wdm bus needs at least one drop")
    ring_pitch = 60
    die_w = float(140 + k * ring_pitch)
    die_h = 160.0
    bus_y = 100
    nl = Netlist(die_width_um=die_w, die_height_um=die_h)
    nl.components.append(_pad("in", 10, bus_y - 1, geo.E))
    rings = []
    for i in range(k):
        ring = ComponentInstance(
            id=f"ring{i}", width_um=20.0, height_um=20.0, thermal=True,
            x_um=float(60 + i * ring_pitch), y_um=float(bus_y - 10),
            ports=[
                _port("in", 0, 10, geo.W),
                _port("through", 20, 10, geo.E),
                _port("drop", 10, 0, geo.S),
            ])
        nl.components.append(ring)
        rings.append(ring.id)
        nl.components.append(_pad(f"drop{i}", 69 + i * ring_pitch, 10, geo.N))
    nl.components.append(_pad("out", die_w - 12, bus_y - 1, geo.W))
    if len(rings) > 1:
        nl.align_y.append(rings)

    nets = 0

    def connect(src, dst):
        nonlocal nets
        nl.nets.append(Net(id=f"n{nets}", src=src, dst=dst, signal=_SIGNAL))
        nets += 1

    upstream = ("in", "p")
    for i in range(k):
        connect(upstream, (f"ring{i}", "in"))
        upstream = (f"ring{i}", "through")
    connect(upstream, ("out", "p"))
    for i in range(k):
        connect((f"ring{i}", "drop"), (f"drop{i}", "p"))
    return nl


def _random_span(rng) -> int:
    # power-law-ish mix: mostly 2..40 um, occasionally up to 200 um
    t = rng.random() ** 2
    return max(2, int(round(2.0 * 100.0 ** t)))


def gen_random(n: int, seed: int) -> Netlist:
    """n mixed-size components with a connected random two-pin net set."""
    if n < 2:
        raise ValidationError("random benchmark needs size >= 2")
    rng = np.random.default_rng(seed)
    comps: list[ComponentInstance] = []
    inflated_area = 0.0
    for k in range(n):
        w, h = _random_span(rng), _random_span(rng)
        comp = ComponentInstance(
            id=f"c{k}", width_um=float(w), height_um=float(h),
            thermal=bool(rng.random() < 0.1))
        n_ports = int(rng.integers(2, 5))
        used: dict[int, list[int]] = {}
        for p in range(n_ports):
            edge = geo.AXIS_HEADINGS[int(rng.integers(0, 4))]
            along = h if edge in (geo.E, geo.W) else w
            if along < 2:
                off = along // 2
            else:
                off = int(rng.integers(1, along))
            # same-edge ports keep crossing-pitch separation so parallel
            # escapes can cross a shared bus independently
            if any(abs(off - o) < 8 for o in used.get(edge, [])):
                continue
            used.setdefault(edge, []).append(off)
            dx, dy = {
                geo.E: (w, off), geo.W: (0, off),
                geo.N: (off, h), geo.S: (off, 0),
            }[edge]
            comp.ports.append(_port(f"p{p}", dx, dy, edge))
        comps.append(comp)
        inflated_area += (w + 36.0) * (h + 36.0)

    side = 10.0 * math.ceil(math.sqrt(inflated_area / 0.045) / 10.0)
    nl = Netlist(die_width_um=side, die_height_um=side, components=comps)

    free: dict[str, list[str]] = {c.id: [p.id for p in c.ports] for c in comps}

    def take(cid) -> str:
        ports = free[cid]
        pick = ports[int(rng.integers(0, len(ports)))]
        ports.remove(pick)
        return pick

    nets = 0

    def connect(a, b):
        nonlocal nets
        nl.nets.append(Net(id=f"n{nets}", src=a, dst=b, signal=_SIGNAL))
        nets += 1

    order = list(rng.permutation(n))
    for idx in range(1, n):
        cid = comps[order[idx]].id
        candidates = [comps[order[j]].id for j in range(idx)
                      if free[comps[order[j]].id]]
        if not candidates or not free[cid]:
            continue
        other = candidates[int(rng.integers(0, len(candidates)))]
        connect((other, take(other)), (cid, take(cid)))
    # a few extra nets between leftover ports
    extras = n // 4
    for _ in range(extras):
        fr = [cid for cid, ports in free.items() if ports]
        if len(fr) < 2:
            break
        a = fr[int(rng.integers(0, len(fr)))]
        b = fr[int(rng.integers(0, len(fr)))]
        if a == b:
            continue
        connect((a, take(a)), (b, take(b)))
    return nl


def gen_benchmark(kind: str, size: int, seed: int = 0) -> Netlist:
    if size < 1:
        raise ValidationError("benchmark size must be >= 1")
    if kind == "clements":
        return gen_clements(size)
    if kind == "wdm_bus":
        return gen_wdm_bus(size)
    if kind == "random":
        return gen_random(size, seed)
    raise ValidationError(f"unknown benchmark kind {kind!r}")
