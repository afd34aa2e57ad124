"""Routing-informed analytical global placement.

The objective couples an orientation-aware net cost with a soft bin
density penalty.  Minimization runs Nesterov-accelerated projected
gradient descent whose step sizes come from a Barzilai-Borwein secant
rule applied per size block, so metre-scale and micron-scale components
update at their own pace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .config import PnrConfig
from .errors import ValidationError
from .netlist import ComponentInstance, Netlist


# ---------------------------------------------------------------------------
# orientation-aware wirelength (per-net cost and its exact gradient)
# ---------------------------------------------------------------------------

def coswa_net_cost(u, u_orientation: int, v, v_orientation: int,
                   beta: float, eps: float):
    """Smooth net cost that penalizes misfaced ports.

    cost = l * (1 + beta*(1-cos phi_u)/2 + beta*(1-cos phi_v)/2) with
    l = sqrt(|v-u|^2 + eps); phi_u is the angle between the source port
    orientation and the net direction, phi_v the same at the sink.
    Returns (cost, grad_u, grad_v).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = np.array(geo.heading_vector(u_orientation))
    dv = np.array(geo.heading_vector(v_orientation))
    diff = v - u
    ell = math.sqrt(float(diff @ diff) + eps)
    dd = du - dv
    cost = (1.0 + beta) * ell - 0.5 * beta * float(dd @ diff)
    grad_u = -(1.0 + beta) * diff / ell + 0.5 * beta * dd
    grad_v = (1.0 + beta) * diff / ell - 0.5 * beta * dd
    return cost, grad_u, grad_v


def _coswa_batch(U, DU, V, DV, weights, beta, eps):
    """Vectorized total cost and endpoint gradients over all nets."""
    diff = V - U
    ell = np.sqrt(np.einsum("ij,ij->i", diff, diff) + eps)
    dd = DU - DV
    costs = (1.0 + beta) * ell - 0.5 * beta * np.einsum("ij,ij->i", dd, diff)
    gu = -(1.0 + beta) * diff / ell[:, None] + 0.5 * beta * dd
    gv = -gu
    return float(weights @ costs), gu * weights[:, None], gv * weights[:, None]


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

@dataclass
class DensityBins:
    """Uniform bin grid over the die with per-bin capacity."""

    edges_x: np.ndarray
    edges_y: np.ndarray
    capacity: np.ndarray     # (nbx, nby)

    @classmethod
    def for_die(cls, die_w: float, die_h: float, n: int,
                target_density: float = 1.0) -> "DensityBins":
        ex = np.linspace(0.0, die_w, n + 1)
        ey = np.linspace(0.0, die_h, n + 1)
        bw, bh = die_w / n, die_h / n
        cap = np.full((n, n), bw * bh * target_density)
        return cls(ex, ey, cap)


def _axis_overlap(centers: np.ndarray, halves: np.ndarray,
                  lo: np.ndarray, hi: np.ndarray):
    """Smoothed interval-overlap profile and its derivative.

    The exact overlap of [c-a, c+a] with a bin [lo, hi] is a trapezoid
    in c; its linear ramps are replaced with smoothstep ramps so the
    result is C1 while plateau values (full overlap) stay exact.
    Shapes: centers/halves (n, 1), lo/hi (1, nb); returns (n, nb).
    """
    c = centers
    a = halves
    k1 = lo - a
    k2 = np.minimum(lo + a, hi - a)
    k3 = np.maximum(lo + a, hi - a)
    k4 = hi + a
    H = np.minimum(2.0 * a + 0 * hi, hi - lo)
    val = np.zeros(np.broadcast_shapes(c.shape, k1.shape))
    der = np.zeros_like(val)

    up = (c > k1) & (c < k2)
    w_up = np.maximum(k2 - k1, 1e-300)
    t = np.clip((c - k1) / w_up, 0.0, 1.0)
    val = np.where(up, H * t * t * (3.0 - 2.0 * t), val)
    der = np.where(up, H * 6.0 * t * (1.0 - t) / w_up, der)

    mid = (c >= k2) & (c <= k3)
    val = np.where(mid, H + 0 * val, val)

    down = (c > k3) & (c < k4)
    w_dn = np.maximum(k4 - k3, 1e-300)
    t = np.clip((c - k3) / w_dn, 0.0, 1.0)
    s = t * t * (3.0 - 2.0 * t)
    val = np.where(down, H * (1.0 - s), val)
    der = np.where(down, -H * 6.0 * t * (1.0 - t) / w_dn, der)
    return val, der


def density_penalty(centers: np.ndarray, halfsizes: np.ndarray,
                    bins: DensityBins, movable_mask=None):
    """Soft-rectangle bin overflow penalty.

    Every component deposits its smoothed footprint into the bins;
    penalty = sum_b max(0, fill_b - cap_b)^2.  Returns the scalar and
    the analytic gradient with respect to the (movable) centres.
    """
    n = centers.shape[0]
    if n == 0:
        return 0.0, np.zeros((0, 2))
    ox, dox = _axis_overlap(centers[:, 0:1], halfsizes[:, 0:1],
                            bins.edges_x[None, :-1], bins.edges_x[None, 1:])
    oy, doy = _axis_overlap(centers[:, 1:2], halfsizes[:, 1:2],
                            bins.edges_y[None, :-1], bins.edges_y[None, 1:])
    fill = np.einsum("ci,cj->ij", ox, oy)
    over = np.maximum(fill - bins.capacity, 0.0)
    penalty = float(np.sum(over * over))
    # d penalty / d fill_b = 2 * over_b ; chain through the deposits
    gx = 2.0 * np.einsum("ij,ci,cj->c", over, dox, oy)
    gy = 2.0 * np.einsum("ij,ci,cj->c", over, ox, doy)
    grad = np.stack([gx, gy], axis=1)
    if movable_mask is not None:
        grad = grad[movable_mask]
    return penalty, grad


def exact_overflow(centers, halfsizes, bins: DensityBins) -> float:
    """Hard rectangle overlap overflow, used for the stop criterion."""
    lox = np.maximum(centers[:, 0:1] - halfsizes[:, 0:1], bins.edges_x[None, :-1])
    hix = np.minimum(centers[:, 0:1] + halfsizes[:, 0:1], bins.edges_x[None, 1:])
    loy = np.maximum(centers[:, 1:2] - halfsizes[:, 1:2], bins.edges_y[None, :-1])
    hiy = np.minimum(centers[:, 1:2] + halfsizes[:, 1:2], bins.edges_y[None, 1:])
    ox = np.maximum(hix - lox, 0.0)
    oy = np.maximum(hiy - loy, 0.0)
    fill = np.einsum("ci,cj->ij", ox, oy)
    return float(np.sum(np.maximum(fill - bins.capacity, 0.0)))


# ---------------------------------------------------------------------------
# routing-informed spacing inflation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeMargins:
    """Per-edge whitespace (um) reserved around a footprint."""

    west: float
    east: float
    south: float
    north: float

    def of(self, heading: int) -> float:
        return {geo.W: self.west, geo.E: self.east,
                geo.S: self.south, geo.N: self.north}[heading]

    @property
    def as_tuple(self):
        return (self.west, self.east, self.south, self.north)


def spacing_inflation(component: ComponentInstance, nets,
                      congestion_estimate: dict | None,
                      config: PnrConfig) -> EdgeMargins:
    """Margin per edge from port density and estimated congestion.

    margin(edge) = min_spacing + s1 * max(0, used_ports(edge) - 1)
                 + s2 * congestion(edge), plus a uniform thermal margin
    for thermally sensitive components.
    """
    used_pins = set()
    for net in nets:
        if net.signal == "electrical":
            continue
        for cid, pid in (net.src, net.dst):
            if cid == component.id:
                used_pins.add(pid)
    counts = {h: 0 for h in geo.AXIS_HEADINGS}
    for port in component.ports:
        if port.id in used_pins:
            counts[port.orientation] += 1
    congestion = congestion_estimate or {}
    margins = {}
    for h in geo.AXIS_HEADINGS:
        c = float(congestion.get(h, 0.0))
        if not 0.0 <= c <= 1.0:
            raise ValidationError(f"congestion estimate {c} outside [0, 1]")
        m = (config.min_spacing
             + config.s1_codir * max(0, counts[h] - 1)
             + config.s2_congestion * c)
        if component.thermal:
            m += config.thermal_margin
        margins[h] = m
    return EdgeMargins(west=margins[geo.W], east=margins[geo.E],
                       south=margins[geo.S], north=margins[geo.N])


def estimate_congestion(nl: Netlist) -> dict[str, dict[int, float]]:
    """Fraction of port probe lines per edge that hit other nets' boxes.

    Each used port shoots a ray to the die boundary along its
    orientation; the edge congestion is the fraction of that edge's
    rays intersecting the bounding box of at least one unrelated net.
    Components must be placed.
    """
    boxes = []
    for net in nl.nets:
        if net.signal == "electrical":
            continue
        try:
            ax, ay = nl.component(net.src[0]).port_position(net.src[1])
            bx, by = nl.component(net.dst[0]).port_position(net.dst[1])
        except ValidationError:
            continue
        boxes.append((net.id, min(ax, bx), min(ay, by), max(ax, bx),
                      max(ay, by), {net.src[0], net.dst[0]}))
    out: dict[str, dict[int, float]] = {}
    for comp in nl.components:
        if comp.x_um is None:
            continue
        rays = {h: [] for h in geo.AXIS_HEADINGS}
        for port in comp.ports:
            px, py = comp.port_position(port.id)
            h = port.orientation
            if h == geo.E:
                seg = (px, py, nl.die_width_um, py)
            elif h == geo.W:
                seg = (0.0, py, px, py)
            elif h == geo.N:
                seg = (px, py, px, nl.die_height_um)
            else:
                seg = (px, 0.0, px, py)
            hit = False
            for nid, x0, y0, x1, y1, owners in boxes:
                if comp.id in owners:
                    continue
                if seg[0] <= x1 and seg[2] >= x0 and seg[1] <= y1 and seg[3] >= y0:
                    hit = True
                    break
            rays[h].append(hit)
        out[comp.id] = {
            h: (sum(v) / len(v) if v else 0.0) for h, v in rays.items()
        }
    return out


# ---------------------------------------------------------------------------
# constraint projection
# ---------------------------------------------------------------------------

def project_constraints(centers: np.ndarray, align_x: list[list[int]],
                        align_y: list[list[int]], lo: np.ndarray,
                        hi: np.ndarray):
    """Alignment-group means plus die clamping, in place of the input.

    Aligned groups are clamped against the tightest member bounds so
    the projection is idempotent.  Returns (centers, warnings).
    """
    centers = centers.copy()
    warnings: list[str] = []
    for axis, groups in ((0, align_x), (1, align_y)):
        for group in groups:
            idx = np.asarray(group, dtype=int)
            if idx.size == 0:
                continue
            mean = float(np.mean(centers[idx, axis]))
            glo = float(np.max(lo[idx, axis]))
            ghi = float(np.min(hi[idx, axis]))
            if glo <= ghi:
                centers[idx, axis] = min(max(mean, glo), ghi)
            else:
                warnings.append(
                    f"alignment group on axis {'xy'[axis]} is infeasible "
                    f"(bounds [{glo:.3f}, {ghi:.3f}]); members clamped "
                    "individually")
                centers[idx, axis] = np.clip(mean, lo[idx, axis], hi[idx, axis])
    np.clip(centers, lo, hi, out=centers)
    return centers, warnings


# ---------------------------------------------------------------------------
# blockwise Barzilai-Borwein step
# ---------------------------------------------------------------------------

def bbb_step(delta_x: np.ndarray, delta_g: np.ndarray, prev_alpha: float,
             alpha_min: float, alpha_max: float) -> float:
    """BB1 secant step for one size block, clamped; keeps the previous
    step when the curvature estimate is not positive."""
    num = float(np.dot(delta_x.ravel(), delta_x.ravel()))
    den = float(np.dot(delta_x.ravel(), delta_g.ravel()))
    if den <= 0.0 or num == 0.0:
        return prev_alpha
    return min(max(num / den, alpha_min), alpha_max)


def size_blocks(areas: np.ndarray) -> list[np.ndarray]:
    """Partition component indices into log2-area buckets."""
    if areas.size == 0:
        return []
    buckets = np.floor(np.log2(np.maximum(areas, 1e-12))).astype(int)
    return [np.flatnonzero(buckets == b) for b in sorted(set(buckets.tolist()))]


# ---------------------------------------------------------------------------
# the global placement driver
# ---------------------------------------------------------------------------

@dataclass
class PlaceResult:
    iterations: int
    converged: bool
    overflow_fraction: float
    wirelength_cost: float
    warnings: list[str] = field(default_factory=list)


def _net_arrays(nl: Netlist, movable_index: dict[str, int]):
    """Endpoint bookkeeping: which centre drives each pin, plus offsets."""
    src_idx, dst_idx = [], []
    src_off, dst_off = [], []
    src_dir, dst_dir = [], []
    weights = []
    fixed_pos = {}
    for comp in nl.components:
        if comp.id not in movable_index:
            fixed_pos[comp.id] = (comp.x_um or 0.0, comp.y_um or 0.0)
    for net in nl.nets:
        ends = []
        for cid, pid in (net.src, net.dst):
            comp = nl.component(cid)
            port = comp.port(pid)
            off = (port.dx_um - comp.width_um / 2.0,
                   port.dy_um - comp.height_um / 2.0)
            if cid in movable_index:
                ends.append((movable_index[cid], off, port.orientation))
            else:
                x0, y0 = fixed_pos[cid]
                ends.append((-1, (x0 + comp.width_um / 2.0 + off[0],
                                  y0 + comp.height_um / 2.0 + off[1]),
                             port.orientation))
        (si, so, sd), (di, do, dd) = ends
        src_idx.append(si); src_off.append(so); src_dir.append(sd)
        dst_idx.append(di); dst_off.append(do); dst_dir.append(dd)
        weights.append(net.weight)
    return (np.array(src_idx, dtype=int), np.array(src_off, dtype=float),
            np.array([geo.heading_vector(h) for h in src_dir], dtype=float)
            if src_dir else np.zeros((0, 2)),
            np.array(dst_idx, dtype=int), np.array(dst_off, dtype=float),
            np.array([geo.heading_vector(h) for h in dst_dir], dtype=float)
            if dst_dir else np.zeros((0, 2)),
            np.array(weights, dtype=float))


class _Objective:
    def __init__(self, nl: Netlist, config: PnrConfig, movables, margins):
        self.nl = nl
        self.config = config
        self.movables = movables
        self.movable_index = {c.id: i for i, c in enumerate(movables)}
        (self.src_idx, self.src_off, self.src_dir, self.dst_idx,
         self.dst_off, self.dst_dir, self.weights) = _net_arrays(
            nl, self.movable_index)
        # inflated half-sizes for density deposits and bounds
        self.half = np.array(
            [((c.width_um + margins[c.id].west + margins[c.id].east) / 2.0,
              (c.height_um + margins[c.id].south + margins[c.id].north) / 2.0)
             for c in movables], dtype=float).reshape(-1, 2)
        # the inflated centre is offset when margins are asymmetric
        self.center_shift = np.array(
            [((margins[c.id].east - margins[c.id].west) / 2.0,
              (margins[c.id].north - margins[c.id].south) / 2.0)
             for c in movables], dtype=float).reshape(-1, 2)
        fixed = [c for c in nl.components
                 if c.id not in self.movable_index and c.x_um is not None]
        self.fixed_centers = np.array(
            [(c.x_um + c.width_um / 2.0, c.y_um + c.height_um / 2.0)
             for c in fixed], dtype=float).reshape(-1, 2)
        self.fixed_half = np.array(
            [(c.width_um / 2.0, c.height_um / 2.0) for c in fixed],
            dtype=float).reshape(-1, 2)
        nb = config.density_bins
        if nb <= 0:
            span = max(nl.die_width_um, nl.die_height_um)
            nb = int(min(32, max(4, span // (8 * config.pitch))))
        self.bins = DensityBins.for_die(nl.die_width_um, nl.die_height_um,
                                        nb, config.target_density)

    def pin_positions(self, centers):
        n = len(self.weights)
        U = np.zeros((n, 2))
        V = np.zeros((n, 2))
        for arr, idx, off in ((U, self.src_idx, self.src_off),
                              (V, self.dst_idx, self.dst_off)):
            m = idx >= 0
            arr[m] = centers[idx[m]] + off[m]
            arr[~m] = off[~m]
        return U, V

    def wirelength(self, centers):
        if len(self.weights) == 0:
            return 0.0, np.zeros_like(centers)
        U, V = self.pin_positions(centers)
        total, gu, gv = _coswa_batch(U, self.src_dir, V, self.dst_dir,
                                     self.weights, self.config.beta,
                                     self.config.eps_wirelength)
        grad = np.zeros_like(centers)
        m = self.src_idx >= 0
        np.add.at(grad, self.src_idx[m], gu[m])
        m = self.dst_idx >= 0
        np.add.at(grad, self.dst_idx[m], gv[m])
        return total, grad

    def density(self, centers):
        all_centers = np.vstack([centers + self.center_shift,
                                 self.fixed_centers])
        all_half = np.vstack([self.half, self.fixed_half])
        mask = np.zeros(len(all_centers), dtype=bool)
        mask[:len(centers)] = True
        return density_penalty(all_centers, all_half, self.bins, mask)

    def overflow_fraction(self, centers):
        movable_area = float(np.sum(4.0 * self.half[:, 0] * self.half[:, 1]))
        if movable_area == 0.0:
            return 0.0
        all_centers = np.vstack([centers + self.center_shift,
                                 self.fixed_centers])
        all_half = np.vstack([self.half, self.fixed_half])
        return exact_overflow(all_centers, all_half, self.bins) / movable_area


def global_place(nl: Netlist, config: PnrConfig) -> PlaceResult:
    """Place movable components; positions are written onto the netlist.

    Deterministic for a fixed seed: initialization scatters movable
    components around the die centre with +-5% jitter, and the
    optimizer itself is seed-free.
    """
    movables = [c for c in nl.components if not c.fixed]
    if not movables:
        return PlaceResult(iterations=0, converged=True, overflow_fraction=0.0,
                           wirelength_cost=0.0)
    margins = {}
    congestion_zero = {h: 0.0 for h in geo.AXIS_HEADINGS}
    for comp in nl.components:
        margins[comp.id] = spacing_inflation(comp, nl.nets, congestion_zero,
                                             config)
    obj = _Objective(nl, config, movables, margins)

    rng = np.random.default_rng(config.seed)
    die = np.array([nl.die_width_um, nl.die_height_um])
    x = np.tile(die / 2.0, (len(movables), 1))
    x += rng.uniform(-0.05, 0.05, size=x.shape) * die
    # components that carry a position warm-start from it unjittered
    for row, comp in enumerate(movables):
        if comp.x_um is not None and comp.y_um is not None:
            x[row] = (comp.x_um + comp.width_um / 2.0,
                      comp.y_um + comp.height_um / 2.0)

    lo = obj.half - obj.center_shift
    hi = die[None, :] - obj.half - obj.center_shift
    bad = np.any(lo > hi, axis=1)
    if np.any(bad):
        names = [movables[i].id for i in np.flatnonzero(bad)[:5]]
        raise ValidationError(
            f"inflated footprints of {names} cannot fit the die at all")

    align_x = [[obj.movable_index[cid] for cid in group]
               for group in nl.align_x]
    align_y = [[obj.movable_index[cid] for cid in group]
               for group in nl.align_y]
    for groups, what in ((nl.align_x, "align_x"), (nl.align_y, "align_y")):
        for group in groups:
            for cid in group:
                if cid not in obj.movable_index:
                    raise ValidationError(
                        f"{what} group references non-movable component {cid!r}")

    warnings: list[str] = []
    x, w = project_constraints(x, align_x, align_y, lo, hi)
    warnings.extend(w)

    blocks = size_blocks(np.array([c.width_um * c.height_um for c in movables]))
    alphas = [1.0 for _ in blocks]

    wl0, gw0 = obj.wirelength(x)
    d0, gd0 = obj.density(x)
    gw_scale = float(np.mean(np.abs(gw0))) if gw0.size else 0.0
    gd_scale = float(np.mean(np.abs(gd0))) if gd0.size else 0.0
    lam = 0.05 * gw_scale / gd_scale if gd_scale > 1e-12 else 1e-3

    def full_objective(pts):
        wl, _ = obj.wirelength(pts)
        dd, _ = obj.density(pts)
        return wl, dd

    y = x.copy()
    x_prev = x.copy()
    y_prev = None
    g_prev = None
    a_k = 1.0
    damping = 1.0           # global safeguard scale on the BB steps
    history: list[tuple[float, float]] = [full_objective(x)]
    iterations = 0
    converged = False
    quiet = 0

    for k in range(config.max_iterations):
        iterations = k + 1
        wl, gw = obj.wirelength(y)
        dd, gd = obj.density(y)
        g = gw + lam * gd
        if y_prev is not None:
            for bi, idx in enumerate(blocks):
                alphas[bi] = bbb_step((y - y_prev)[idx], (g - g_prev)[idx],
                                      alphas[bi], config.alpha_min,
                                      config.alpha_max)

        # nonmonotone safeguard: accept a step only if it does not exceed
        # the worst objective in a short window; otherwise damp and retry
        f_ref = max(w_ + lam * d_ for w_, d_ in history[-5:])
        restarted = False
        x_new = y
        for _ in range(30):
            step = np.zeros_like(y)
            for bi, idx in enumerate(blocks):
                step[idx] = damping * alphas[bi] * g[idx]
            x_new, w = project_constraints(y - step, align_x, align_y, lo, hi)
            wl_n, dd_n = full_objective(x_new)
            if wl_n + lam * dd_n <= f_ref + 1e-12 * (1.0 + abs(f_ref)):
                break
            damping *= 0.5
            restarted = True
        warnings.extend(w)
        history.append((wl_n, dd_n))
        if len(history) > 8:
            history.pop(0)
        damping = min(1.0, damping * 1.3)

        if restarted:
            a_k = 1.0           # momentum restart after a rejected step
            y_next = x_new.copy()
        else:
            a_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * a_k * a_k))
            mu = (a_k - 1.0) / a_next
            y_next, _ = project_constraints(x_new + mu * (x_new - x_prev),
                                            align_x, align_y, lo, hi)
            a_k = a_next

        move = float(np.max(np.abs(x_new - x_prev))) if x_new.size else 0.0
        y_prev, g_prev = y, g
        x_prev, x = x, x_new
        y = y_next
        lam *= config.density_mu

        quiet = quiet + 1 if move < 1e-2 * config.pitch else 0
        if obj.overflow_fraction(x) < config.overflow_stop and quiet >= 3:
            converged = True
            break

    for comp, (cx, cy) in zip(movables, x):
        comp.x_um = float(cx - comp.width_um / 2.0)
        comp.y_um = float(cy - comp.height_um / 2.0)
    wl_final, _ = obj.wirelength(x)
    result = PlaceResult(iterations=iterations, converged=converged,
                         overflow_fraction=obj.overflow_fraction(x),
                         wirelength_cost=wl_final, warnings=warnings)
    if not converged:
        result.warnings.append(
            f"placement hit the iteration cap ({config.max_iterations}); "
            "returning best effort")
    return result


def wirelength_objective(nl: Netlist, config: PnrConfig) -> float:
    """Net-cost total at the current positions (for baseline comparisons)."""
    movables = [c for c in nl.components if not c.fixed]
    margins = {c.id: EdgeMargins(0, 0, 0, 0) for c in nl.components}
    obj = _Objective(nl, config, movables, margins)
    centers = np.array([(c.x_um + c.width_um / 2.0, c.y_um + c.height_um / 2.0)
                        for c in movables], dtype=float).reshape(-1, 2)
    total, _ = obj.wirelength(centers)
    return total
