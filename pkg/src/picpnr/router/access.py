"""Net grouping/ordering and port-access planning.

Nets are grouped by their source component edge (owner plus outward
orientation).  Groups route biggest-first; inside a group nets go
shortest-first and receive staggered access-point depths so escapes do
not contend for the same turning cells.  Each port also gets a soft
corridor to the die boundary and a hard reservation of the quarter-arc
regions next to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .. import geometry as geo
from ..config import PnrConfig
from ..errors import UnroutablePortError
from ..netlist import Net, Netlist
from .bitmap import OccupancyBitmap
from .moves import ARC_L, ARC_R, MoveTable

_DIR = {geo.E: (1, 0), geo.N: (0, 1), geo.W: (-1, 0), geo.S: (0, -1)}


@dataclass
class NetGroup:
    id: str
    edge: tuple[str, int]          # (component id, port orientation)
    nets: list[str]                # ordered member net ids
    offsets: dict[str, int]        # net id -> stagger index k
    bbox_cells: tuple[int, int, int, int]


@dataclass
class AccessPlan:
    net: str
    side: str                      # "src" or "dst"
    port_ref: str
    port_cell: tuple[int, int]
    heading: int                   # outward port orientation
    access_cell: tuple[int, int]
    lateral_um: float = 0.0        # planned spread; 0 when on the port ray

    @property
    def stub_cells(self) -> int:
        return (abs(self.access_cell[0] - self.port_cell[0])
                + abs(self.access_cell[1] - self.port_cell[1]))

    def access_point_um(self, pitch: float) -> tuple[float, float]:
        di, dj = _DIR[self.heading]
        x = self.access_cell[0] * pitch - dj * self.lateral_um
        y = self.access_cell[1] * pitch + di * self.lateral_um
        return x, y


def order_nets(nl: Netlist, config: PnrConfig) -> list[NetGroup]:
    """Cluster optical nets by source edge and fix the routing order.

    Groups sort by descending size, then descending total half-perimeter
    wirelength, then group id; members by ascending port distance.
    """
    pitch = config.pitch
    members: dict[tuple[str, int], list[tuple[float, str, Net]]] = {}
    pos = {}
    for net in nl.optical_nets():
        sx, sy = nl.component(net.src[0]).port_position(net.src[1])
        dx, dy = nl.component(net.dst[0]).port_position(net.dst[1])
        pos[net.id] = (sx, sy, dx, dy)
        orient = nl.component(net.src[0]).port(net.src[1]).orientation
        key = (net.src[0], orient)
        members.setdefault(key, []).append(
            (math.hypot(dx - sx, dy - sy), net.id, net))
    groups = []
    for (comp, orient), rows in members.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        gid = f"{comp}:{geo.heading_name(orient)}"
        hpwl = 0.0
        i0 = j0 = math.inf
        i1 = j1 = -math.inf
        for _, nid, net in rows:
            sx, sy, dx, dy = pos[nid]
            hpwl += abs(dx - sx) + abs(dy - sy)
            i0 = min(i0, sx / pitch, dx / pitch)
            i1 = max(i1, sx / pitch, dx / pitch)
            j0 = min(j0, sy / pitch, dy / pitch)
            j1 = max(j1, sy / pitch, dy / pitch)
        groups.append(NetGroup(
            id=gid, edge=(comp, orient),
            nets=[nid for _, nid, _ in rows],
            offsets={nid: k for k, (_, nid, _) in enumerate(rows)},
            bbox_cells=(int(math.floor(i0)), int(math.floor(j0)),
                        int(math.ceil(i1)), int(math.ceil(j1)))))
    groups.sort(key=lambda g: (-len(g.nets), -_group_hpwl(g, pos), g.id))
    return groups


def _group_hpwl(group: NetGroup, pos) -> float:
    total = 0.0
    for nid in group.nets:
        sx, sy, dx, dy = pos[nid]
        total += abs(dx - sx) + abs(dy - sy)
    return total


def _spread_positions(laterals: list[float], required: float) -> list[float]:
    """Minimal order-preserving spread so consecutive gaps >= required."""
    n = len(laterals)
    if n < 2:
        return list(laterals)
    out = list(laterals)
    for _ in range(2 * n):
        moved = False
        for i in range(n - 1):
            gap = out[i + 1] - out[i]
            if gap < required - 1e-9:
                push = (required - gap) / 2.0
                out[i] -= push
                out[i + 1] += push
                moved = True
        if not moved:
            break
    # keep the block centred where it started
    shift = (sum(laterals) - sum(out)) / n
    return [v + shift for v in out]


def plan_port_access(nl: Netlist, groups: list[NetGroup],
                     bitmap: OccupancyBitmap, table: MoveTable,
                     config: PnrConfig, net_idx: dict[str, int] | None = None,
                     strict: bool = True):
    """Reservations plus per-port access points.

    Returns (plans, failures): plans maps (net id, side) to an
    AccessPlan; failures maps net id to a human-readable reason.  With
    strict=True the first failure raises UnroutablePortError instead.
    """
    pitch = config.pitch
    plans: dict[tuple[str, str], AccessPlan] = {}
    failures: dict[str, str] = {}
    nets_by_id = {n.id: n for n in nl.optical_nets()}
    stagger_cells = config.crossing_halfspan_cells

    # congested-port spreading: lateral access offsets per component edge
    spread: dict[tuple[str, str], float] = {}
    required = config.wg_width + config.min_spacing
    by_edge: dict[tuple[str, int], list[tuple[float, str, str]]] = {}
    used_ports = {}
    for net in nets_by_id.values():
        for side, (cid, pid) in (("src", net.src), ("dst", net.dst)):
            used_ports[(cid, pid)] = net.id
    for (cid, pid), nid in sorted(used_ports.items()):
        comp = nl.component(cid)
        port = comp.port(pid)
        px, py = comp.port_position(pid)
        lateral = py if port.orientation in (geo.E, geo.W) else px
        by_edge.setdefault((cid, port.orientation), []).append(
            (lateral, pid, nid))
    for key, rows in by_edge.items():
        rows.sort()
        laterals = [r[0] for r in rows]
        adjusted = _spread_positions(laterals, required)
        for (orig, pid, _), new in zip(rows, adjusted):
            if abs(new - orig) > 1e-9:
                spread[(key[0], pid)] = new - orig

    order_in_group = {}
    for group in groups:
        for nid in group.nets:
            order_in_group[nid] = group.offsets[nid]

    def fail(nid: str, ref: str, why: str):
        msg = f"port {ref}: {why}"
        if strict:
            raise UnroutablePortError(msg)
        failures.setdefault(nid, msg)

    for net in sorted(nets_by_id.values(), key=lambda n: n.id):
        for side, (cid, pid) in (("src", net.src), ("dst", net.dst)):
            ref = f"{cid}.{pid}"
            comp = nl.component(cid)
            port = comp.port(pid)
            px, py = comp.port_position(pid)
            if not bitmap.on_grid(px, py):
                fail(net.id, ref, f"port position ({px}, {py}) is off-grid "
                                  f"at pitch {pitch}")
                continue
            cell = bitmap.cell_of(px, py)
            heading = port.orientation
            k = order_in_group.get(net.id, 0) if side == "src" else 0
            want = 1 + k * stagger_cells
            access = _furthest_clear(bitmap, cell, heading, want)
            if access is None:
                fail(net.id, ref, "no legal access point (fully walled)")
                continue
            plans[(net.id, side)] = AccessPlan(
                net=net.id, side=side, port_ref=ref, port_cell=cell,
                heading=heading, access_cell=access,
                lateral_um=spread.get((cid, pid), 0.0))
    # reservations only for ports that planned successfully
    if net_idx is None:
        net_idx = {nid: i for i, nid in enumerate(sorted(nets_by_id))}
    lanes: dict[int, set] = {}
    for (nid, side), plan in sorted(plans.items()):
        if nid in failures:
            continue
        lanes.setdefault(net_idx[nid], set()).update(
            _lane_cells(plan, table, config))
    for (nid, side), plan in sorted(plans.items()):
        if nid in failures:
            continue
        _reserve_corridor(bitmap, plan, net_idx[nid])
        _reserve_stub_tube(bitmap, table, config, plan, net_idx[nid], lanes)
    for (nid, side), plan in sorted(plans.items()):
        if nid in failures:
            continue
        _reserve_bend_region(bitmap, table, plan, net_idx[nid], lanes)
    return plans, failures


def _lane_cells(plan: AccessPlan, table: MoveTable, config: PnrConfig):
    """Cells a port inherently needs: the swept tube of its straight
    escape from the port to one bend radius past the access point."""
    reach = plan.stub_cells + config.r_min_cells
    di, dj = _DIR[plan.heading]
    p = config.pitch
    prim = ("seg", plan.port_cell[0] * p, plan.port_cell[1] * p,
            (plan.port_cell[0] + di * reach) * p,
            (plan.port_cell[1] + dj * reach) * p)
    return geo.rasterize_primitives([prim], p, table.r_query)


def _furthest_clear(bitmap: OccupancyBitmap, cell, heading, want_cells):
    """Deepest stub end <= the staggered depth with all cells clear."""
    di, dj = _DIR[heading]
    best = None
    i, j = cell
    for t in range(1, want_cells + 1):
        ci, cj = i + di * t, j + dj * t
        if not (1 <= ci < bitmap.nx - 1 and 1 <= cj < bitmap.ny - 1):
            break
        if bitmap.state[ci, cj] != 0:
            break
        best = (ci, cj)
    return best


def _reserve_corridor(bitmap: OccupancyBitmap, plan: AccessPlan, net_idx):
    di, dj = _DIR[plan.heading]
    i, j = plan.port_cell
    if bitmap.soft_net[i, j] == -1:
        bitmap.soft_net[i, j] = net_idx
    while True:
        i, j = i + di, j + dj
        if not (1 <= i <= bitmap.nx - 2 and 1 <= j <= bitmap.ny - 2):
            break
        if bitmap.state[i, j] == 1:   # hard obstacle stops propagation
            break
        if bitmap.soft_net[i, j] == -1:
            bitmap.soft_net[i, j] = net_idx


def _reserve_stub_tube(bitmap: OccupancyBitmap, table: MoveTable,
                       config: PnrConfig, plan: AccessPlan, net_idx, lanes):
    """Hard-reserve the escape lane (stub plus one bend radius of
    runway) so no foreign raster or crossing footprint can wall the
    port off before its net has routed."""
    for (ci, cj) in sorted(_lane_cells(plan, table, config)):
        if not (0 <= ci < bitmap.nx and 0 <= cj < bitmap.ny):
            continue
        if bitmap.state[ci, cj] != 0:
            continue
        cur = bitmap.hard_net[ci, cj]
        foreign_lane = any(owner != net_idx and (ci, cj) in cells
                           for owner, cells in lanes.items())
        if foreign_lane or (cur >= 0 and cur != net_idx) or cur == -2:
            bitmap.hard_net[ci, cj] = -2
        elif cur == -1:
            bitmap.hard_net[ci, cj] = net_idx


def _reserve_bend_region(bitmap: OccupancyBitmap, table: MoveTable,
                         plan: AccessPlan, net_idx, lanes):
    """Soft-reserve the quarter-arc regions next to a port for its net.

    These started out hard, but adjacent ports' turn swaths inherently
    overlap (arcs reach a bend radius sideways), so hard claims wall
    neighbours off their own turns.  Soft cost keeps foreign traffic
    out of turn space without deadlocking; the straight escape itself
    is protected by the hard lane reservation.
    """
    hidx = plan.heading // 2
    i, j = plan.port_cell
    for move in (ARC_L, ARC_R):
        start = table.sweep_start[hidx, move]
        count = table.sweep_len[hidx, move]
        for t in range(start, start + count):
            ci = i + int(table.sweep_cells[t, 0])
            cj = j + int(table.sweep_cells[t, 1])
            if not (0 <= ci < bitmap.nx and 0 <= cj < bitmap.ny):
                continue
            if bitmap.state[ci, cj] != 0:
                continue
            if bitmap.soft_net[ci, cj] == -1:
                bitmap.soft_net[ci, cj] = net_idx
