"""Routing session: group-ordered net routing with crossing insertion
and local rip-up-and-reroute refinement.

The bitmap is rebuilt from the committed path set after every rip, so
there is no incremental-restore bookkeeping to get wrong; crossing
sites are re-derived from path crossing records and dropped when their
partner waveguide has moved away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from .. import geometry as geo
from ..config import PnrConfig
from ..errors import ValidationError
from ..layout import Layout, Route, STATUS_ROUTED, STATUS_UNROUTABLE, \
    resolve_endpoint
from ..netlist import Net, Netlist
from .access import AccessPlan, NetGroup, order_nets, plan_port_access
from .bitmap import OccupancyBitmap, SiteRecord
from .moves import MoveTable
from .search import (NetContext, SearchContext, _SIGNAL_CODES, astar,
                     moves_to_elements, stub_cells_ok)

_DIR = {geo.E: (1, 0), geo.N: (0, 1), geo.W: (-1, 0), geo.S: (0, -1)}


@dataclass
class RouterReport:
    routed: int = 0
    unroutable: int = 0
    reasons: dict = field(default_factory=dict)
    ripup_accepted: int = 0
    cost_trace: list = field(default_factory=list)   # total cost after events


class RoutingSession:
    def __init__(self, nl: Netlist, config: PnrConfig):
        self.nl = nl
        self.config = config
        self.table = MoveTable.build(config)
        self.bitmap = OccupancyBitmap(nl, config)
        self.nets: list[Net] = sorted(nl.optical_nets(), key=lambda n: n.id)
        self.net_idx = {n.id: i for i, n in enumerate(self.nets)}
        self.ctx = SearchContext(self.bitmap, self.table, config,
                                 len(self.nets))
        for n in self.nets:
            self.ctx.net_signals[self.net_idx[n.id]] = _SIGNAL_CODES[n.signal]
        self.paths: dict[str, geo.PathGeometry] = {}
        self.reasons: dict[str, str] = {}
        self.groups: list[NetGroup] = []
        self.group_idx: dict[str, int] = {}
        self.plans: dict[tuple[str, str], AccessPlan] = {}

    # -- contexts ----------------------------------------------------------

    def net_context(self, net: Net) -> NetContext:
        bm = self.bitmap
        src = self.nl.component(net.src[0])
        dst = self.nl.component(net.dst[0])
        return NetContext(
            net_idx=self.net_idx[net.id],
            group_idx=self.group_idx.get(net.id, -1),
            signal=_SIGNAL_CODES[net.signal],
            src_comp=bm.comp_index[src.id],
            dst_comp=bm.comp_index[dst.id],
            src_port_cell=bm.cell_of(*src.port_position(net.src[1])),
            dst_port_cell=bm.cell_of(*dst.port_position(net.dst[1])),
        )

    # -- committed-state rebuild --------------------------------------------

    def rebuild(self):
        """Recompute the routing state from the committed path set."""
        bm = self.bitmap
        bm.reset_routing_state()
        self.ctx.sites = []
        self.ctx.invalidate_sites()
        for nid in sorted(self.paths):
            bm.commit_path(self.net_idx[nid], self.paths[nid], self.table)
        k = self.config.crossing_halfspan_cells
        for nid in sorted(self.paths):
            path = self.paths[nid]
            kept = []
            for cell, partner in path.crossings:
                if partner in self.paths and \
                        self._covers_straight(self.paths[partner], cell, k) \
                        and self._covers_straight(path, cell, k):
                    site_idx = len(self.ctx.sites)
                    axis = self._axis_through(path, cell)
                    self.ctx.sites.append(SiteRecord(
                        cell=cell, net_a=self.net_idx[nid],
                        net_b=self.net_idx[partner],
                        axis_a=K.WG_H if axis == 0 else K.WG_V))
                    bm.mark_site(site_idx, cell,
                                 {self.net_idx[nid], self.net_idx[partner]})
                    kept.append((cell, partner))
            path.crossings = kept
        self.ctx.invalidate_sites()

    def _covers_straight(self, path: geo.PathGeometry, cell, k) -> bool:
        """Does the path run straight through the cell for k cells on
        both sides (along either axis)?"""
        px = cell[0] * self.config.pitch
        py = cell[1] * self.config.pitch
        span = k * self.config.pitch
        for prim in geo.path_primitives(path):
            if prim[0] != "seg":
                continue
            _, x0, y0, x1, y1 = prim
            if abs(y0 - y1) < 1e-9 and abs(py - y0) <= 1e-6:
                if min(x0, x1) <= px - span + 1e-9 \
                        and max(x0, x1) >= px + span - 1e-9:
                    return True
            if abs(x0 - x1) < 1e-9 and abs(px - x0) <= 1e-6:
                if min(y0, y1) <= py - span + 1e-9 \
                        and max(y0, y1) >= py + span - 1e-9:
                    return True
        return False

    def _axis_through(self, path: geo.PathGeometry, cell) -> int:
        px = cell[0] * self.config.pitch
        py = cell[1] * self.config.pitch
        for prim in geo.path_primitives(path):
            if prim[0] != "seg":
                continue
            _, x0, y0, x1, y1 = prim
            if abs(y0 - y1) < 1e-9 and abs(py - y0) <= 1e-6 \
                    and min(x0, x1) <= px + 1e-9 <= max(x0, x1) + 2e-9:
                return 0
        return 1

    # -- single-net routing --------------------------------------------------

    def route_net(self, net: Net) -> bool:
        nid = net.id
        nctx = self.net_context(net)
        src_plan = self.plans.get((nid, "src"))
        dst_plan = self.plans.get((nid, "dst"))
        if src_plan is None or dst_plan is None:
            self.reasons.setdefault(nid, "no access plan")
            return False
        src_ep = resolve_endpoint(self.nl, net.src)
        dst_ep = resolve_endpoint(self.nl, net.dst)

        direct = self._try_direct(net, nctx, src_ep, dst_ep)
        if direct is not None:
            self._commit(net, direct, [])
            return True

        for plan in (src_plan, dst_plan):
            if not stub_cells_ok(self.ctx, nctx, plan.port_cell,
                                 plan.access_cell, plan.heading):
                self.reasons[nid] = f"access stub blocked at {plan.port_ref}"
                return False
        start = geo.Node(*src_plan.access_cell, src_plan.heading)
        goal = geo.Node(*dst_plan.access_cell, geo.opposite(dst_plan.heading))
        attempt = astar(self.ctx, nctx, start, goal)
        if attempt.status != K.FOUND:
            self.reasons[nid] = (
                f"search exhausted after exploring {attempt.explored} nodes")
            return False
        pitch = self.config.pitch
        elements = [geo.Straight(src_plan.stub_cells * pitch,
                                 src_plan.heading)]
        elements += moves_to_elements(self.ctx, attempt.moves)
        elements.append(geo.Straight(dst_plan.stub_cells * pitch,
                                     geo.opposite(dst_plan.heading)))
        path = geo.PathGeometry(
            net=nid, src=src_ep, dst=dst_ep,
            elements=geo.merge_straights(elements))
        faults = geo.validate_path_geometry(path, self.config)
        if faults:
            self.reasons[nid] = f"internal geometry fault: {faults[0].detail}"
            return False
        crossings = [(cell, self.nets[fidx].id)
                     for cell, fidx in attempt.crossings]
        if not self._sites_compatible(crossings):
            self.reasons[nid] = "crossing sites on the path conflict"
            return False
        self._commit(net, path, crossings)
        return True

    def _try_direct(self, net, nctx, src_ep, dst_ep):
        """Straight-shot connection for aligned face-to-face ports."""
        if dst_ep.orientation != geo.opposite(src_ep.orientation):
            return None
        vx, vy = geo.heading_vector(src_ep.orientation)
        ddx = dst_ep.x_um - src_ep.x_um
        ddy = dst_ep.y_um - src_ep.y_um
        dist = ddx * vx + ddy * vy
        if dist <= 0:
            return None
        if abs(ddx - dist * vx) > 1e-9 or abs(ddy - dist * vy) > 1e-9:
            return None
        a = self.bitmap.cell_of(src_ep.x_um, src_ep.y_um)
        b = self.bitmap.cell_of(dst_ep.x_um, dst_ep.y_um)
        if not stub_cells_ok(self.ctx, nctx, a, b, src_ep.orientation):
            return None
        path = geo.PathGeometry(
            net=net.id, src=src_ep, dst=dst_ep,
            elements=[geo.Straight(dist, src_ep.orientation)])
        if geo.validate_path_geometry(path, self.config):
            return None
        return path

    def _sites_compatible(self, crossings) -> bool:
        """New sites must respect mutual clearance (the kernel only
        checked each against pre-existing sites)."""
        clear2 = self.table.clear2
        cells = [c for c, _ in crossings]
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                d2 = float((cells[i][0] - cells[j][0]) ** 2
                           + (cells[i][1] - cells[j][1]) ** 2)
                if d2 < clear2 - 1e-9:
                    return False
        return True

    def _commit(self, net: Net, path: geo.PathGeometry, crossings):
        nid = net.id
        path.crossings = list(crossings)
        self.paths[nid] = path
        idx = self.net_idx[nid]
        self.bitmap.commit_path(idx, path, self.table)
        for cell, partner in crossings:
            site_idx = len(self.ctx.sites)
            axis = self._axis_through(path, cell)
            self.ctx.sites.append(SiteRecord(
                cell=cell, net_a=idx, net_b=self.net_idx[partner],
                axis_a=K.WG_H if axis == 0 else K.WG_V))
            self.bitmap.mark_site(site_idx, cell,
                                  {idx, self.net_idx[partner]})
        self.ctx.invalidate_sites()
        # the committed raster replaces the port bend reservation
        hard = self.bitmap.hard_net
        hard[hard == idx] = -1
        self.reasons.pop(nid, None)

    # -- cost accounting -----------------------------------------------------

    def net_cost(self, path: geo.PathGeometry) -> float:
        length, bends = geo.path_stats(path)
        return self.config.w_len * length + self.config.w_bend * bends

    @property
    def unrouted_penalty(self) -> float:
        """Scalar stand-in for an unrouted net, larger than any path a
        refinement step would accept, so routing one strictly lowers
        total cost."""
        return self.config.w_len * 10.0 * (self.nl.die_width_um
                                           + self.nl.die_height_um)

    def total_metric(self) -> float:
        """Total layout cost: routed path costs, crossing costs and the
        unrouted penalty per missing net.  Monotone under accepted
        refinement steps."""
        cost = sum(self.net_cost(p) for p in self.paths.values())
        cost += self.config.w_cross * len(self.ctx.sites)
        cost += self.unrouted_penalty * (len(self.nets) - len(self.paths))
        return cost

    def net_crossing_count(self, nid: str) -> int:
        idx = self.net_idx[nid]
        return sum(1 for s in self.ctx.sites
                   if s.net_a == idx or s.net_b == idx)

    # -- phases ---------------------------------------------------------------

    def route_all_groups(self, report: RouterReport):
        for group in self.groups:
            box_cells = self._apply_group_box(group)
            for nid in group.nets:
                net = self.nets[self.net_idx[nid]]
                if (nid, "src") not in self.plans \
                        or (nid, "dst") not in self.plans:
                    continue
                self.route_net(net)
            for (ci, cj) in box_cells:
                if self.bitmap.soft_group[ci, cj] == self._gid(group):
                    self.bitmap.soft_group[ci, cj] = -1

    def _gid(self, group: NetGroup) -> int:
        return self.groups.index(group)

    def _apply_group_box(self, group: NetGroup):
        gid = self._gid(group)
        i0, j0, i1, j1 = group.bbox_cells
        i0, j0 = max(i0, 0), max(j0, 0)
        i1 = min(i1, self.bitmap.nx - 1)
        j1 = min(j1, self.bitmap.ny - 1)
        cells = []
        for ci in range(i0, i1 + 1):
            for cj in range(j0, j1 + 1):
                if self.bitmap.soft_group[ci, cj] == -1:
                    self.bitmap.soft_group[ci, cj] = gid
                    cells.append((ci, cj))
        return cells

    def rip_up_reroute(self, report: RouterReport, max_rounds: int = 0):
        """Rip and re-search nets, keeping strictly improving layouts.

        Nets with the most crossings (then highest cost) go first;
        unrouted nets are retried every round, and when one still fails
        a victim pass rips a likely blocker and re-routes both.  The
        total cost (with a fixed penalty per unrouted net) never
        increases across accepted steps.
        """
        if max_rounds <= 0:
            max_rounds = self.config.ripup_rounds
        for _ in range(max_rounds):
            improved = False
            unrouted = sorted(n.id for n in self.nets
                              if n.id not in self.paths
                              and (n.id, "src") in self.plans
                              and (n.id, "dst") in self.plans)
            routed = sorted(
                self.paths,
                key=lambda nid: (-self.net_crossing_count(nid),
                                 -self.net_cost(self.paths[nid]), nid))
            for nid in unrouted + routed:
                net = self.nets[self.net_idx[nid]]
                before = self.total_metric()
                old_path = self.paths.pop(nid, None)
                if old_path is not None:
                    self.rebuild()
                ok = self.route_net(net)
                if ok:
                    self.rebuild()
                    after = self.total_metric()
                    if after < before - 1e-9:
                        improved = True
                        report.ripup_accepted += 1
                        report.cost_trace.append(after)
                        continue
                # restore the original if the new layout is not better
                self.paths.pop(nid, None)
                if old_path is not None:
                    self.paths[nid] = old_path
                self.rebuild()
                if old_path is None and not ok:
                    if self._victim_swap(net, report):
                        improved = True
            if not improved:
                break

    def _victim_swap(self, net: Net, report: RouterReport) -> bool:
        """Last resort for an unroutable net: rip one committed net that
        crowds its endpoints, route both, keep only strict improvements."""
        nid = net.id
        sx, sy = self.nl.component(net.src[0]).port_position(net.src[1])
        dx, dy = self.nl.component(net.dst[0]).port_position(net.dst[1])
        x0, x1 = min(sx, dx) - 20, max(sx, dx) + 20
        y0, y1 = min(sy, dy) - 20, max(sy, dy) + 20

        def crowds(path: geo.PathGeometry) -> bool:
            for prim in geo.path_primitives(path):
                bx0, by0, bx1, by1 = geo.primitive_bbox(prim)
                if bx0 <= x1 and bx1 >= x0 and by0 <= y1 and by1 >= y0:
                    return True
            return False

        victims = sorted(v for v, p in self.paths.items() if crowds(p))
        for vid in victims[:8]:
            before = self.total_metric()
            victim_path = self.paths.pop(vid)
            self.rebuild()
            ok_n = self.route_net(net)
            ok_v = ok_n and self.route_net(self.nets[self.net_idx[vid]])
            if ok_n and ok_v:
                self.rebuild()
                after = self.total_metric()
                if after < before - 1e-9:
                    report.ripup_accepted += 1
                    report.cost_trace.append(after)
                    return True
            # roll back both
            self.paths.pop(nid, None)
            self.paths.pop(vid, None)
            self.paths[vid] = victim_path
            self.rebuild()
        return False


def route_all(nl: Netlist, config: PnrConfig) -> tuple[Layout, RouterReport]:
    """Route every optical net of a legalized placement.

    Builds the bitmap, orders nets into groups, plans port access,
    routes each group committing rasters and crossings, then runs
    rip-up refinement.  Unroutable nets are reported, never fatal.
    """
    session = RoutingSession(nl, config)
    report = RouterReport()
    session.groups = order_nets(nl, config)
    session.group_idx = {}
    for gi, group in enumerate(session.groups):
        for nid in group.nets:
            session.group_idx[nid] = gi
    session.plans, failures = plan_port_access(
        nl, session.groups, session.bitmap, session.table, config,
        net_idx=session.net_idx, strict=False)
    session.reasons.update(failures)
    session.route_all_groups(report)
    session.rip_up_reroute(report)

    routes = []
    for net in nl.optical_nets():
        if net.id in session.paths:
            routes.append(Route(net=net.id, status=STATUS_ROUTED,
                                path=session.paths[net.id]))
        else:
            routes.append(Route(net=net.id, status=STATUS_UNROUTABLE,
                                reason=session.reasons.get(net.id, "")))
    crossings = []
    for si, site in enumerate(session.ctx.sites):
        heading_a = geo.E if site.axis_a == K.WG_H else geo.N
        crossings.append(geo.CrossingSite(
            id=f"x{si}", cell=site.cell, side_um=config.crossing_size,
            net_a=session.nets[site.net_a].id,
            net_b=session.nets[site.net_b].id,
            heading_a=heading_a, heading_b=geo.left90(heading_a)))
    layout = Layout(netlist=nl, routes=routes, crossings=crossings,
                    pitch=config.pitch)
    report.routed = sum(1 for r in routes if r.status == STATUS_ROUTED)
    report.unroutable = sum(1 for r in routes if r.status != STATUS_ROUTED)
    report.reasons = dict(session.reasons)
    return layout, report
