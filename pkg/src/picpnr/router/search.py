"""A* wrapper: kernel invocation, path reconstruction, public neighbor
expansion and the crossing-eligibility decision surface."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from .. import geometry as geo
from ..config import PnrConfig
from ..errors import ValidationError
from ..netlist import Netlist
from .bitmap import OccupancyBitmap, SiteRecord
from .moves import CROSSING, MoveTable, N_MOVES

_DIRI = (1, 0, -1, 0)
_DIRJ = (0, 1, 0, -1)

_SIGNAL_CODES = {"te0": 0, "te1": 1, "tm0": 2, "electrical": 3}


@dataclass
class NetContext:
    """Everything the kernels need to know about the net being routed."""

    net_idx: int
    group_idx: int
    signal: int
    src_comp: int
    dst_comp: int
    src_port_cell: tuple[int, int]
    dst_port_cell: tuple[int, int]

    @classmethod
    def empty(cls):
        return cls(-1, -1, 0, -1, -1, (-9999, -9999), (-9999, -9999))


@dataclass
class RouteAttempt:
    status: int
    cost: float = 0.0
    explored: int = 0
    moves: list = field(default_factory=list)   # [(i, j, hidx, move)] in order
    crossings: list = field(default_factory=list)  # [(cell, foreign net idx)]


class SearchContext:
    """Preallocated arrays plus site tables for one routing session."""

    def __init__(self, bitmap: OccupancyBitmap, table: MoveTable,
                 config: PnrConfig, n_nets: int):
        self.bitmap = bitmap
        self.table = table
        self.config = config
        self.g = np.full((bitmap.nx, bitmap.ny, 4), np.inf, dtype=np.float64)
        self.parent = np.full((bitmap.nx, bitmap.ny, 4), -1, dtype=np.int64)
        cap = max(1 << 16, bitmap.nx * bitmap.ny)
        self.heap_keys = np.empty(cap, dtype=np.float64)
        self.heap_gvals = np.empty(cap, dtype=np.float64)
        self.heap_ties = np.empty(cap, dtype=np.int64)
        self.heap_payloads = np.empty(cap, dtype=np.int64)
        self.flood_work = np.empty(bitmap.nx * bitmap.ny, dtype=np.int64)
        self.net_signals = np.zeros(max(n_nets, 1), dtype=np.int64)
        self.sites: list[SiteRecord] = []
        self._site_arrays = None

    def build_quick(self):
        bm = self.bitmap
        return (((bm.state != 0) | (bm.soft_net >= 0) | (bm.soft_group >= 0)
                 | (bm.hard_net != -1)).astype(np.int8))

    def site_arrays(self):
        if self._site_arrays is None:
            n = len(self.sites)
            ci = np.array([s.cell[0] for s in self.sites], dtype=np.int64) \
                if n else np.zeros(0, dtype=np.int64)
            cj = np.array([s.cell[1] for s in self.sites], dtype=np.int64) \
                if n else np.zeros(0, dtype=np.int64)
            na = np.array([s.net_a for s in self.sites], dtype=np.int64) \
                if n else np.zeros(0, dtype=np.int64)
            nb = np.array([s.net_b for s in self.sites], dtype=np.int64) \
                if n else np.zeros(0, dtype=np.int64)
            self._site_arrays = (ci, cj, na, nb, n)
        return self._site_arrays

    def invalidate_sites(self):
        self._site_arrays = None


def crossing_eligible(ctx: SearchContext, cell: tuple[int, int],
                      moving_heading: int, signal: str = "te0"):
    """Public decision: may a net moving along ``moving_heading`` cross
    the waveguide at ``cell``?  Returns (eligible, reason)."""
    bm = ctx.bitmap
    site_ci, site_cj, _, _, n_sites = ctx.site_arrays()
    horizontal = moving_heading in (geo.E, geo.W)
    fn, reason = K.crossing_check(
        bm.state, bm.owner, bm.hard_net, ctx.net_signals, site_ci, site_cj,
        n_sites, cell[0], cell[1], horizontal, -1, _SIGNAL_CODES[signal],
        bm.nx, bm.ny, ctx.table.cross_k, ctx.table.clear_scan,
        ctx.table.clear2)
    reasons = {
        K.ELIGIBLE: "eligible",
        K.REASON_NOT_ORTHOGONAL: "not orthogonal",
        K.REASON_SIGNAL_TYPE: "signal type mismatch",
        K.REASON_NOT_STRAIGHT: "existing waveguide not locally straight",
        K.REASON_SPACING: "spacing to existing crossing or bend",
    }
    return reason == K.ELIGIBLE, reasons[reason]


def expand_neighbors(ctx: SearchContext, node: geo.Node, net: NetContext):
    """All legal moves from a node, with their costs.

    The same cell rules the A* kernel applies, exposed one node at a
    time; used by tests and by the exhaustive search oracle.
    """
    bm = ctx.bitmap
    t = ctx.table
    hidx = node.heading // 2
    site_ci, site_cj, site_na, site_nb, n_sites = ctx.site_arrays()
    out = []
    for move in range(N_MOVES):
        ei, ej, eh = (int(v) for v in t.move_end[hidx, move])
        if eh < 0:
            continue
        ni, nj = node.i + ei, node.j + ej
        if not (0 <= ni < bm.nx and 0 <= nj < bm.ny):
            continue
        cross_i = cross_j = -1
        cross_net = -1
        cross_state = 0
        horizontal = hidx in (0, 2)
        if move == CROSSING:
            cross_i = node.i + t.cross_k * _DIRI[hidx]
            cross_j = node.j + t.cross_k * _DIRJ[hidx]
            if not (0 <= cross_i < bm.nx and 0 <= cross_j < bm.ny):
                continue
            fn, reason = K.crossing_check(
                bm.state, bm.owner, bm.hard_net, ctx.net_signals, site_ci,
                site_cj, n_sites, cross_i, cross_j, horizontal, net.net_idx,
                net.signal, bm.nx, bm.ny, t.cross_k, t.clear_scan, t.clear2)
            if reason != K.ELIGIBLE:
                continue
            cross_net = fn
            cross_state = K.WG_V if horizontal else K.WG_H
        ok, extra = K.scan_cells(
            bm.state, bm.owner, bm.soft_net, bm.soft_group, bm.hard_net,
            ctx.build_quick(), t.sweep_cells, int(t.sweep_start[hidx, move]),
            int(t.sweep_inner[hidx, move]), int(t.sweep_len[hidx, move]),
            node.i, node.j, bm.nx, bm.ny,
            net.net_idx, net.group_idx,
            net.src_comp, net.dst_comp,
            net.src_port_cell[0], net.src_port_cell[1],
            net.dst_port_cell[0], net.dst_port_cell[1],
            _exempt_radius(ctx.config),
            cross_i, cross_j, cross_net, cross_state, horizontal,
            site_na, site_nb, ctx.config.w_group)
        if not ok:
            continue
        cost = float(t.move_cost[hidx, move]) + extra
        out.append((geo.Node(ni, nj, eh * 2), move, cost))
    return out


def _exempt_radius(config: PnrConfig) -> int:
    return int(math.ceil((config.wg_width + config.min_spacing) / config.pitch)) + 2


def astar(ctx: SearchContext, net: NetContext, start: geo.Node,
          goal: geo.Node, max_pops: int = 0) -> RouteAttempt:
    """Run the kernel search and reconstruct the move sequence."""
    bm = ctx.bitmap
    t = ctx.table
    if max_pops <= 0:
        max_pops = min(6 * bm.nx * bm.ny, 6_000_000)
    # cheap negative filter: if even single-cell connectivity cannot
    # reach the goal, skip the expensive search outright
    if not K.reachable_flood(bm.state, bm.hard_net, bm.nx, bm.ny,
                             net.net_idx, start.i, start.j, goal.i, goal.j,
                             ctx.flood_work):
        return RouteAttempt(status=K.EXHAUSTED, explored=0)
    site_ci, site_cj, site_na, site_nb, n_sites = ctx.site_arrays()
    quick = ctx.build_quick()
    self_g = ctx.g
    self_g.fill(np.inf)
    ctx.parent.fill(-1)
    while True:
        status, cost, pops = K.astar_core(
            bm.state, bm.owner, bm.soft_net, bm.soft_group, bm.hard_net,
            quick, bm.nx, bm.ny,
            t.move_end, t.move_cost, t.sweep_cells, t.sweep_start,
            t.sweep_inner, t.sweep_len, t.cross_k, t.clear_scan, t.clear2,
            net.net_idx, net.group_idx, net.signal, ctx.net_signals,
            net.src_comp, net.dst_comp,
            net.src_port_cell[0], net.src_port_cell[1],
            net.dst_port_cell[0], net.dst_port_cell[1],
            _exempt_radius(ctx.config),
            site_ci, site_cj, site_na, site_nb, n_sites,
            start.i, start.j, start.heading // 2,
            goal.i, goal.j, goal.heading // 2,
            ctx.config.w_len, ctx.config.pitch, ctx.config.w_bend,
            ctx.config.w_group, t.off_f, t.off_l, t.off_len_cells,
            t.arc_speed, max_pops,
            self_g, ctx.parent,
            ctx.heap_keys, ctx.heap_gvals, ctx.heap_ties, ctx.heap_payloads)
        if status == K.HEAP_FULL:
            cap = ctx.heap_keys.shape[0] * 4
            ctx.heap_keys = np.empty(cap, dtype=np.float64)
            ctx.heap_gvals = np.empty(cap, dtype=np.float64)
            ctx.heap_ties = np.empty(cap, dtype=np.int64)
            ctx.heap_payloads = np.empty(cap, dtype=np.int64)
            self_g.fill(np.inf)
            ctx.parent.fill(-1)
            continue
        break
    attempt = RouteAttempt(status=status, cost=cost, explored=pops)
    if status != K.FOUND:
        return attempt
    # walk parents back from the goal
    moves = []
    i, j, h = goal.i, goal.j, goal.heading // 2
    while True:
        code = int(ctx.parent[i, j, h])
        if code < 0:
            break
        move = code % 8
        sid = code // 8
        ph = sid % 4
        pj = (sid // 4) % bm.ny
        pi = sid // (4 * bm.ny)
        moves.append((pi, pj, ph, move))
        i, j, h = pi, pj, ph
    moves.reverse()
    attempt.moves = moves
    for (pi, pj, ph, move) in moves:
        if move == CROSSING:
            ci = pi + t.cross_k * _DIRI[ph]
            cj = pj + t.cross_k * _DIRJ[ph]
            attempt.crossings.append(((ci, cj), int(bm.owner[ci, cj])))
    return attempt


def moves_to_elements(ctx: SearchContext, moves) -> list[geo.PathElement]:
    """Expand the move sequence into path elements (merged later)."""
    out: list[geo.PathElement] = []
    for (pi, pj, ph, move) in moves:
        out.extend(ctx.table.elements[(ph, move)])
    return out


def stub_cells_ok(ctx: SearchContext, net: NetContext, port_cell, access_cell,
                  heading) -> bool:
    """Sweep-check the port-to-access straight like any other move."""
    bm = ctx.bitmap
    length = (abs(access_cell[0] - port_cell[0])
              + abs(access_cell[1] - port_cell[1])) * ctx.config.pitch
    if length <= 0:
        return True
    from .moves import inner_radius
    prim = ("seg", port_cell[0] * ctx.config.pitch,
            port_cell[1] * ctx.config.pitch,
            access_cell[0] * ctx.config.pitch,
            access_cell[1] * ctx.config.pitch)
    inner = sorted(geo.rasterize_primitives([prim], ctx.config.pitch,
                                            inner_radius(ctx.config)))
    outer = sorted(geo.rasterize_primitives([prim], ctx.config.pitch,
                                            ctx.table.r_query) - set(inner))
    site_ci, site_cj, site_na, site_nb, n_sites = ctx.site_arrays()
    arr = np.array(inner + outer, dtype=np.int64).reshape(-1, 2)
    ok, _ = K.scan_cells(
        bm.state, bm.owner, bm.soft_net, bm.soft_group, bm.hard_net,
        ctx.build_quick(), arr, 0, len(inner), len(arr), 0, 0, bm.nx, bm.ny,
        net.net_idx, net.group_idx, net.src_comp, net.dst_comp,
        net.src_port_cell[0], net.src_port_cell[1],
        net.dst_port_cell[0], net.dst_port_cell[1],
        _exempt_radius(ctx.config),
        -1, -1, -1, 0, heading in (geo.E, geo.W),
        site_na, site_nb, ctx.config.w_group)
    return bool(ok)
