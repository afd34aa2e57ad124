"""Flat GDSII stream writer.

Component footprints become BOUNDARY elements on layer 1, waveguide
centerlines PATH elements (with the waveguide width) on layer 2 and
crossing footprints BOUNDARY squares on layer 3.  One user unit is a
micrometre and one database unit a nanometre.  Timestamps are pinned so
identical layouts produce byte-identical streams.
"""

from __future__ import annotations

import struct

from . import geometry as geo
from .config import PnrConfig
from .errors import GdsOverflowError
from .layout import Layout, STATUS_ROUTED, check_layout_consistent

_HEADER = 0x0002
_BGNLIB = 0x0102
_LIBNAME = 0x0206
_UNITS = 0x0305
_ENDLIB = 0x0400
_BGNSTR = 0x0502
_STRNAME = 0x0606
_ENDSTR = 0x0700
_BOUNDARY = 0x0800
_PATH = 0x0900
_LAYER = 0x0D02
_DATATYPE = 0x0E02
_WIDTH = 0x0F03
_XY = 0x1003
_ENDEL = 0x1100

_TIMESTAMP = (2000, 1, 1, 0, 0, 0)  # fixed for reproducible output

LAYER_COMPONENT = 1
LAYER_WAVEGUIDE = 2
LAYER_CROSSING = 3

# writer discretizes arcs a little finer than the 5 nm contract so that
# nanometre coordinate rounding cannot push deviation past the limit
_ARC_SAGITTA_UM = 0.004

_I32_MAX = 2**31 - 1


def _real8(value: float) -> bytes:
    """GDSII 8-byte real: sign, excess-64 base-16 exponent, 56-bit mantissa."""
    if value == 0.0:
        return b"\x00" * 8
    sign = 0x80 if value < 0 else 0
    v = abs(value)
    exponent = 0
    while v >= 1.0:
        v /= 16.0
        exponent += 1
    while v < 1.0 / 16.0:
        v *= 16.0
        exponent -= 1
    mantissa = int(round(v * (1 << 56)))
    if mantissa >= (1 << 56):
        mantissa >>= 4
        exponent += 1
    return bytes([sign | (exponent + 64)]) + mantissa.to_bytes(7, "big")


def _record(rectype: int, payload: bytes = b"") -> bytes:
    length = 4 + len(payload)
    if length % 2:
        raise AssertionError("GDSII records must have even length")
    return struct.pack(">HH", length, rectype) + payload


def _ascii(text: str) -> bytes:
    raw = text.encode("ascii")
    if len(raw) % 2:
        raw += b"\x00"
    return raw


def _db(value_um: float) -> int:
    v = int(round(value_um * 1000.0))
    if not -_I32_MAX - 1 <= v <= _I32_MAX:
        raise GdsOverflowError(
            f"coordinate {value_um} um exceeds the 32-bit database-unit range")
    return v


def _xy(points) -> bytes:
    data = b"".join(struct.pack(">ii", _db(x), _db(y)) for x, y in points)
    return _record(_XY, data)


def _boundary(points, layer: int) -> bytes:
    closed = list(points)
    if closed[0] != closed[-1]:
        closed.append(closed[0])
    return (_record(_BOUNDARY)
            + _record(_LAYER, struct.pack(">h", layer))
            + _record(_DATATYPE, struct.pack(">h", 0))
            + _xy(closed)
            + _record(_ENDEL))


def _wg_path(points, width_um: float) -> bytes:
    return (_record(_PATH)
            + _record(_LAYER, struct.pack(">h", LAYER_WAVEGUIDE))
            + _record(_DATATYPE, struct.pack(">h", 0))
            + _record(_WIDTH, struct.pack(">i", _db(width_um)))
            + _xy(points)
            + _record(_ENDEL))


def emit_gdsii(layout: Layout, config: PnrConfig) -> bytes:
    """Serialize the layout to a flat, single-structure GDSII stream."""
    check_layout_consistent(layout, config)
    ts = struct.pack(">12h", *(_TIMESTAMP * 2))
    out = [
        _record(_HEADER, struct.pack(">h", 600)),
        _record(_BGNLIB, ts),
        _record(_LIBNAME, _ascii("PICPNR")),
        _record(_UNITS, _real8(1e-3) + _real8(1e-9)),
        _record(_BGNSTR, ts),
        _record(_STRNAME, _ascii("LAYOUT")),
    ]
    for comp in layout.netlist.components:
        if comp.x_um is None or comp.y_um is None:
            continue
        x0, y0 = comp.x_um, comp.y_um
        x1, y1 = x0 + comp.width_um, y0 + comp.height_um
        out.append(_boundary([(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
                             LAYER_COMPONENT))
    for route in layout.routes:
        if route.status != STATUS_ROUTED or route.path is None:
            continue
        pts = geo.sample_path(route.path, _ARC_SAGITTA_UM)
        if len(pts) >= 2:
            out.append(_wg_path([(p[0], p[1]) for p in pts], config.wg_width))
    for site in layout.crossings:
        cx, cy = site.cell[0] * layout.pitch, site.cell[1] * layout.pitch
        half = site.side_um / 2.0
        out.append(_boundary(
            [(cx - half, cy - half), (cx + half, cy - half),
             (cx + half, cy + half), (cx - half, cy + half)], LAYER_CROSSING))
    out.append(_record(_ENDSTR))
    out.append(_record(_ENDLIB))
    return b"".join(out)
