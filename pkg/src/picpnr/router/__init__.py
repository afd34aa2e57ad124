from .access import AccessPlan, NetGroup, order_nets, plan_port_access
from .bitmap import OccupancyBitmap
from .flow import RouterReport, RoutingSession, route_all
from .moves import MoveTable
from .search import (NetContext, SearchContext, astar, crossing_eligible,
                     expand_neighbors)

__all__ = [
    "AccessPlan", "NetGroup", "order_nets", "plan_port_access",
    "OccupancyBitmap", "RouterReport", "RoutingSession", "route_all",
    "MoveTable", "NetContext", "SearchContext", "astar",
    "crossing_eligible", "expand_neighbors",
]
