"""Insertion-loss model and layout-level aggregate metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import geometry as geo
from .config import PnrConfig
from .layout import Layout, STATUS_ROUTED


def insertion_loss(path: geo.PathGeometry, config: PnrConfig,
                   crossing_count: int | None = None) -> float:
    """IL = a_prop * length + a_bend * bends + a_cross * crossings.

    Arc bends count by sweep: a 45-degree arc is half a bend.  The
    crossing count defaults to the path's own crossing records.
    """
    length, bends = geo.path_stats(path)
    n_cross = (len(path.crossings) if crossing_count is None
               else crossing_count)
    return (config.a_prop * length + config.a_bend * bends
            + config.a_cross * n_cross)


@dataclass
class NetMetrics:
    net: str
    routed: bool
    wirelength_um: float = 0.0
    bends: float = 0.0
    crossings: int = 0
    insertion_loss_db: float = 0.0


@dataclass
class LayoutMetrics:
    nets: list[NetMetrics] = field(default_factory=list)
    total_wirelength_um: float = 0.0
    total_bends: float = 0.0
    total_crossings: int = 0
    total_insertion_loss_db: float = 0.0
    max_net_loss_db: float = 0.0
    unrouted: int = 0

    def to_dict(self) -> dict:
        return {
            "nets": [vars(m) for m in self.nets],
            "total_wirelength_um": self.total_wirelength_um,
            "total_bends": self.total_bends,
            "total_crossings": self.total_crossings,
            "total_insertion_loss_db": self.total_insertion_loss_db,
            "max_net_loss_db": self.max_net_loss_db,
            "unrouted": self.unrouted,
        }

    def table(self) -> str:
        lines = [f"{'net':<12}{'len um':>10}{'bends':>8}{'cross':>7}"
                 f"{'loss dB':>10}"]
        for m in self.nets:
            if m.routed:
                lines.append(f"{m.net:<12}{m.wirelength_um:>10.2f}"
                             f"{m.bends:>8.1f}{m.crossings:>7d}"
                             f"{m.insertion_loss_db:>10.4f}")
            else:
                lines.append(f"{m.net:<12}{'unroutable':>35}")
        lines.append(f"{'TOTAL':<12}{self.total_wirelength_um:>10.2f}"
                     f"{self.total_bends:>8.1f}{self.total_crossings:>7d}"
                     f"{self.total_insertion_loss_db:>10.4f}")
        return "\n".join(lines)


def layout_metrics(layout: Layout, config: PnrConfig) -> LayoutMetrics:
    """Per-net and total wirelength, bends, crossings and loss.

    A shared crossing site counts once in the layout total and once in
    each member net's loss.
    """
    out = LayoutMetrics()
    per_net_sites: dict[str, int] = {}
    for site in layout.crossings:
        per_net_sites[site.net_a] = per_net_sites.get(site.net_a, 0) + 1
        per_net_sites[site.net_b] = per_net_sites.get(site.net_b, 0) + 1
    for route in layout.routes:
        if route.status != STATUS_ROUTED or route.path is None:
            out.nets.append(NetMetrics(net=route.net, routed=False))
            out.unrouted += 1
            continue
        length, bends = geo.path_stats(route.path)
        crossings = per_net_sites.get(route.net, 0)
        loss = insertion_loss(route.path, config, crossing_count=crossings)
        out.nets.append(NetMetrics(
            net=route.net, routed=True, wirelength_um=length, bends=bends,
            crossings=crossings, insertion_loss_db=loss))
        out.total_wirelength_um += length
        out.total_bends += bends
        out.total_insertion_loss_db += loss
        out.max_net_loss_db = max(out.max_net_loss_db, loss)
    out.total_crossings = len(layout.crossings)
    return out
