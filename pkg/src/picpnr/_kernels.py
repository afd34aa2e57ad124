"""Hot routing kernels: cell legality scans and the A* search core.

The same source compiles two ways.  With numba available (the default)
every kernel is jitted via ``@_jit``; setting ``PICPNR_BACKEND=numpy``
skips compilation and runs the identical functions as plain Python on
numpy arrays, which is slow but dependency-free and bit-identical.
``PICPNR_BACKEND=numba`` makes a missing numba an error instead of a
silent fallback.

Cell states: 0 free, 1 component, 2 waveguide on the x axis, 3 waveguide
on the y axis, 4 bend/diagonal, 5 crossing footprint.
"""

from __future__ import annotations

import os

import numpy as np

_ENV = os.environ.get("PICPNR_BACKEND", "auto").lower()
if _ENV not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"PICPNR_BACKEND must be auto, numba or numpy, got {_ENV!r}")

USE_NUMBA = False
if _ENV in ("auto", "numba"):
    try:
        import numba
        USE_NUMBA = True
    except ImportError:
        if _ENV == "numba":
            raise
BACKEND = "numba" if USE_NUMBA else "numpy"


def _jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


FREE, COMPONENT, WG_H, WG_V, TURN, CROSS = 0, 1, 2, 3, 4, 5

# reason codes for crossing eligibility
ELIGIBLE = 0
REASON_NOT_ORTHOGONAL = 1
REASON_SIGNAL_TYPE = 2
REASON_NOT_STRAIGHT = 3
REASON_SPACING = 4

# search status codes
FOUND = 0
EXHAUSTED = -1
HEAP_FULL = -2
POP_LIMIT = -3


@_jit
def cell_allowed(state, owner, soft_net, soft_group, hard_net,
                 ci, cj, nx, ny, net, group,
                 src_comp, dst_comp, src_pi, src_pj, dst_pi, dst_pj, exempt_r,
                 cross_i, cross_j, cross_net, cross_state, mover_horizontal,
                 site_net_a, site_net_b, w_group):
    """Single-cell legality under the swept-tube rules.

    Returns (ok, soft_cost).  ``cross_*`` describe the one foreign
    waveguide a crossing move is allowed to pass over (cross_state == 0
    for non-crossing moves).
    """
    if ci < 0 or cj < 0 or ci >= nx or cj >= ny:
        return False, 0.0
    s = state[ci, cj]
    if s == COMPONENT:
        o = owner[ci, cj]
        if (o == src_comp and abs(ci - src_pi) <= exempt_r
                and abs(cj - src_pj) <= exempt_r):
            return True, 0.0
        if (o == dst_comp and abs(ci - dst_pi) <= exempt_r
                and abs(cj - dst_pj) <= exempt_r):
            return True, 0.0
        return False, 0.0
    if s == WG_H or s == WG_V or s == TURN:
        if cross_state != 0 and s == cross_state \
                and owner[ci, cj] == cross_net:
            if mover_horizontal and ci == cross_i:
                return True, 0.0
            if (not mover_horizontal) and cj == cross_j:
                return True, 0.0
        return False, 0.0
    if s == CROSS:
        sid = owner[ci, cj]
        if site_net_a[sid] == net or site_net_b[sid] == net:
            return True, 0.0
        return False, 0.0
    # free cell: reservations apply
    extra = 0.0
    h = hard_net[ci, cj]
    if h >= 0 and h != net:
        return False, 0.0
    if h == -2:
        extra += w_group
    sn = soft_net[ci, cj]
    if sn >= 0 and sn != net:
        extra += w_group
    sg = soft_group[ci, cj]
    if sg >= 0 and sg != group:
        extra += w_group
    return True, extra


@_jit
def scan_cells(state, owner, soft_net, soft_group, hard_net, quick,
               cells, start, inner, count, base_i, base_j, nx, ny, net, group,
               src_comp, dst_comp, src_pi, src_pj, dst_pi, dst_pj, exempt_r,
               cross_i, cross_j, cross_net, cross_state, mover_horizontal,
               site_net_a, site_net_b, w_group):
    """Legality of a whole swept-cell list (offsets relative to a node).

    Cells [start, start+inner) lie within the inner radius and obey the
    full rules; the remaining outer ring only conflicts with committed
    bend cells, whose raster may sit up to the grid-cover radius off
    their true curve.  ``quick`` flags cells needing any check at all.
    """
    extra = 0.0
    for t in range(start, start + inner):
        ci = base_i + cells[t, 0]
        cj = base_j + cells[t, 1]
        if ci < 0 or cj < 0 or ci >= nx or cj >= ny:
            return False, 0.0
        if quick[ci, cj] == 0:
            continue
        ok, e = cell_allowed(
            state, owner, soft_net, soft_group, hard_net,
            ci, cj, nx, ny, net, group,
            src_comp, dst_comp, src_pi, src_pj, dst_pi, dst_pj, exempt_r,
            cross_i, cross_j, cross_net, cross_state, mover_horizontal,
            site_net_a, site_net_b, w_group)
        if not ok:
            return False, 0.0
        extra += e
    for t in range(start + inner, start + count):
        ci = base_i + cells[t, 0]
        cj = base_j + cells[t, 1]
        if ci < 0 or cj < 0 or ci >= nx or cj >= ny:
            return False, 0.0
        if state[ci, cj] == TURN and owner[ci, cj] != net:
            return False, 0.0
    return True, extra


@_jit
def crossing_check(state, owner, hard_net, net_signals,
                   site_ci, site_cj, n_sites,
                   ci, cj, mover_horizontal, self_net, self_signal,
                   nx, ny, k, clear_scan, clear2):
    """Crossing eligibility at cell (ci, cj) for a mover along one axis.

    Returns (foreign_net, reason); reason 0 means eligible.  The four
    clauses: orthogonal headings, equal signal types, the existing
    waveguide locally straight for k cells on both sides, and clearance
    from existing crossing sites and committed bends.  The footprint
    square must also be clear of components and of hard reservations
    belonging to third-party ports, or the site would wall them off.
    """
    want = WG_V if mover_horizontal else WG_H
    if state[ci, cj] != want:
        return -1, REASON_NOT_ORTHOGONAL
    fn = owner[ci, cj]
    if net_signals[fn] != self_signal:
        return fn, REASON_SIGNAL_TYPE
    for t in range(1, k + 1):
        if mover_horizontal:
            if cj - t < 0 or cj + t >= ny:
                return fn, REASON_NOT_STRAIGHT
            if state[ci, cj - t] != want or owner[ci, cj - t] != fn:
                return fn, REASON_NOT_STRAIGHT
            if state[ci, cj + t] != want or owner[ci, cj + t] != fn:
                return fn, REASON_NOT_STRAIGHT
        else:
            if ci - t < 0 or ci + t >= nx:
                return fn, REASON_NOT_STRAIGHT
            if state[ci - t, cj] != want or owner[ci - t, cj] != fn:
                return fn, REASON_NOT_STRAIGHT
            if state[ci + t, cj] != want or owner[ci + t, cj] != fn:
                return fn, REASON_NOT_STRAIGHT
    for t in range(n_sites):
        d2 = float((site_ci[t] - ci) ** 2 + (site_cj[t] - cj) ** 2)
        if d2 < clear2 - 1e-9:
            return fn, REASON_SPACING
    scan = clear_scan if clear_scan > k else k
    for di in range(-scan, scan + 1):
        for dj in range(-scan, scan + 1):
            ii = ci + di
            jj = cj + dj
            if ii < 0 or jj < 0 or ii >= nx or jj >= ny:
                continue
            if state[ii, jj] == TURN \
                    and float(di * di + dj * dj) < clear2 - 1e-9:
                return fn, REASON_SPACING
            if abs(di) <= k and abs(dj) <= k:
                if state[ii, jj] == COMPONENT:
                    return fn, REASON_SPACING
                h = hard_net[ii, jj]
                if h >= 0 and h != self_net and h != fn:
                    return fn, REASON_SPACING
    return fn, ELIGIBLE


@_jit
def reachable_flood(state, hard_net, nx, ny, net,
                    si, sj, gi, gj, work):
    """Over-approximate reachability: 4-connected BFS over cells whose
    neighborhood could hold a waveguide centerline.

    A centerline can never run directly beside a component cell (the
    inner sweep forbids it), so component-adjacent cells are treated as
    walls except near the start and goal stubs.  Committed waveguides
    stay passable since they may be crossed.  A negative answer proves
    the goal unreachable without running the full search.
    """
    if si < 0 or sj < 0 or si >= nx or sj >= ny:
        return False
    if gi < 0 or gj < 0 or gi >= nx or gj >= ny:
        return False

    def passable(i, j):
        if state[i, j] == COMPONENT:
            return False
        h = hard_net[i, j]
        if h >= 0 and h != net:
            return False
        if (abs(i - si) <= 2 and abs(j - sj) <= 2) \
                or (abs(i - gi) <= 2 and abs(j - gj) <= 2):
            return True
        if i > 0 and state[i - 1, j] == COMPONENT:
            return False
        if i < nx - 1 and state[i + 1, j] == COMPONENT:
            return False
        if j > 0 and state[i, j - 1] == COMPONENT:
            return False
        if j < ny - 1 and state[i, j + 1] == COMPONENT:
            return False
        return True

    seen = np.zeros((nx, ny), dtype=np.uint8)
    head = 0
    tail = 0
    work[tail] = si * ny + sj
    tail += 1
    seen[si, sj] = 1
    while head < tail:
        cur = work[head]
        head += 1
        i = cur // ny
        j = cur % ny
        if i == gi and j == gj:
            return True
        for t in range(4):
            if t == 0:
                ni, nj = i + 1, j
            elif t == 1:
                ni, nj = i - 1, j
            elif t == 2:
                ni, nj = i, j + 1
            else:
                ni, nj = i, j - 1
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny:
                continue
            if seen[ni, nj]:
                continue
            seen[ni, nj] = 1
            if not passable(ni, nj):
                continue
            work[tail] = ni * ny + nj
            tail += 1
    return False


# ---------------------------------------------------------------------------
# binary heap on parallel arrays, deterministic FIFO tie-breaking
# ---------------------------------------------------------------------------

@_jit
def _heap_less(keys, gvals, ties, a, b):
    # order by f; equal-f ties prefer the deeper node (larger g), then
    # FIFO insertion order, so the pop sequence is fully deterministic
    if keys[a] != keys[b]:
        return keys[a] < keys[b]
    if gvals[a] != gvals[b]:
        return gvals[a] > gvals[b]
    return ties[a] < ties[b]


@_jit
def heap_push(keys, gvals, ties, payloads, size, key, gval, tie, payload):
    i = size
    keys[i] = key
    gvals[i] = gval
    ties[i] = tie
    payloads[i] = payload
    while i > 0:
        p = (i - 1) >> 1
        if _heap_less(keys, gvals, ties, i, p):
            keys[i], keys[p] = keys[p], keys[i]
            gvals[i], gvals[p] = gvals[p], gvals[i]
            ties[i], ties[p] = ties[p], ties[i]
            payloads[i], payloads[p] = payloads[p], payloads[i]
            i = p
        else:
            break
    return size + 1


@_jit
def heap_pop(keys, gvals, ties, payloads, size):
    key = keys[0]
    gval = gvals[0]
    payload = payloads[0]
    size -= 1
    if size > 0:
        keys[0] = keys[size]
        gvals[0] = gvals[size]
        ties[0] = ties[size]
        payloads[0] = payloads[size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < size and _heap_less(keys, gvals, ties, l, m):
                m = l
            if r < size and _heap_less(keys, gvals, ties, r, m):
                m = r
            if m == i:
                break
            keys[i], keys[m] = keys[m], keys[i]
            gvals[i], gvals[m] = gvals[m], gvals[i]
            ties[i], ties[m] = ties[m], ties[i]
            payloads[i], payloads[m] = payloads[m], payloads[i]
            i = m
    return key, gval, payload, size


@_jit
def _bend_lower_bound(hidx, goal_hidx, fwd, lat):
    """Admissible bend cost (in w_bend units) from the total-turning-angle
    argument: every move costs w_bend per 90 degrees of turning."""
    rel = (goal_hidx - hidx) % 4
    if rel == 1 or rel == 3:
        return 1.0
    if rel == 2:
        return 2.0
    # same heading
    if lat != 0:
        return 1.0
    if fwd < 0:
        return 2.0
    return 0.0


@_jit
def heuristic(i, j, h, goal_i, goal_j, goal_h, w_len, pitch, w_bend,
              off_f, off_l, off_len, arc_speed):
    """Admissible cost-to-go: a support-function length bound plus the
    turning-angle bend bound.

    For any direction u, every move advances at most speed(u) * length
    along u, so length >= displacement/speed(u) taken along the goal
    direction.  speed(u) is the max over the straight, offset and arc
    moves.
    """
    di = goal_i - i
    dj = goal_j - j
    adx = abs(di)
    ady = abs(dj)
    dist = np.sqrt(float(di * di + dj * dj))
    if dist > 0.0:
        c = (adx if adx >= ady else ady) / dist     # cos of folded angle
        s = (ady if adx >= ady else adx) / dist
        speed = c                                   # axis straights
        v = (off_f * c + off_l * s) / off_len       # S-offset move
        if v > speed:
            speed = v
        v = (c + s) * arc_speed                     # quarter-arc chord
        if v > speed:
            speed = v
        length_lb = dist * pitch / speed
    else:
        length_lb = 0.0
    if h == 0:
        fwd, lat = di, dj
    elif h == 1:
        fwd, lat = dj, -di
    elif h == 2:
        fwd, lat = -di, -dj
    else:
        fwd, lat = -dj, di
    return w_len * length_lb + w_bend * _bend_lower_bound(h, goal_h, fwd, lat)


@_jit
def astar_core(state, owner, soft_net, soft_group, hard_net, quick,
               nx, ny,
               move_end, move_cost, sweep_cells, sweep_start,
               sweep_inner, sweep_len, cross_k, clear_scan, clear2,
               net, group, self_signal, net_signals,
               src_comp, dst_comp, src_pi, src_pj, dst_pi, dst_pj, exempt_r,
               site_ci, site_cj, site_net_a, site_net_b, n_sites,
               start_i, start_j, start_h, goal_i, goal_j, goal_h,
               w_len, pitch, w_bend, w_group, off_f, off_l, off_len,
               arc_speed, max_pops,
               g, parent,
               heap_keys, heap_gvals, heap_ties, heap_payloads):
    """Curvy-aware A* over (cell, heading) states.

    Moves per heading: straight, two quarter arcs, two S-offsets and the
    atomic perpendicular-crossing straight.  Returns (status, cost,
    pops); parents encode (state_id * 8 + move) for reconstruction.
    """
    heap_cap = heap_keys.shape[0]
    size = 0
    tie = 0
    sid0 = ((start_i * ny) + start_j) * 4 + start_h
    g[start_i, start_j, start_h] = 0.0
    parent[start_i, start_j, start_h] = -1
    size = heap_push(heap_keys, heap_gvals, heap_ties, heap_payloads, size,
                     heuristic(start_i, start_j, start_h, goal_i, goal_j,
                               goal_h, w_len, pitch, w_bend,
                               off_f, off_l, off_len, arc_speed),
                     0.0, tie, sid0)
    tie += 1
    pops = 0
    while size > 0:
        key, gval, sid, size = heap_pop(heap_keys, heap_gvals, heap_ties,
                                        heap_payloads, size)
        h = sid % 4
        j = (sid // 4) % ny
        i = sid // (4 * ny)
        if gval > g[i, j, h] + 1e-12:
            continue  # stale entry
        gc = g[i, j, h]
        pops += 1
        if pops > max_pops:
            return POP_LIMIT, 0.0, pops
        if i == goal_i and j == goal_j and h == goal_h:
            return FOUND, gc, pops
        for m in range(6):
            ei = move_end[h, m, 0]
            ej = move_end[h, m, 1]
            eh = move_end[h, m, 2]
            if eh < 0:
                continue
            ni = i + ei
            nj = j + ej
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny:
                continue
            cross_i = -1
            cross_j = -1
            cross_net = -1
            cross_state = 0
            horizontal = (h == 0 or h == 2)
            if m == 5:
                if h == 0:
                    cross_i, cross_j = i + cross_k, j
                elif h == 1:
                    cross_i, cross_j = i, j + cross_k
                elif h == 2:
                    cross_i, cross_j = i - cross_k, j
                else:
                    cross_i, cross_j = i, j - cross_k
                if cross_i < 0 or cross_j < 0 or cross_i >= nx \
                        or cross_j >= ny:
                    continue
                fn, reason = crossing_check(
                    state, owner, hard_net, net_signals, site_ci, site_cj,
                    n_sites, cross_i, cross_j, horizontal, net, self_signal,
                    nx, ny, cross_k, clear_scan, clear2)
                if reason != ELIGIBLE:
                    continue
                cross_net = fn
                cross_state = WG_V if horizontal else WG_H
            ok, extra = scan_cells(
                state, owner, soft_net, soft_group, hard_net, quick,
                sweep_cells, sweep_start[h, m], sweep_inner[h, m],
                sweep_len[h, m], i, j,
                nx, ny, net, group,
                src_comp, dst_comp, src_pi, src_pj, dst_pi, dst_pj, exempt_r,
                cross_i, cross_j, cross_net, cross_state, horizontal,
                site_net_a, site_net_b, w_group)
            if not ok:
                continue
            ng = gc + move_cost[h, m] + extra
            if ng < g[ni, nj, eh] - 1e-12:
                g[ni, nj, eh] = ng
                parent[ni, nj, eh] = sid * 8 + m
                if size >= heap_cap:
                    return HEAP_FULL, 0.0, pops
                size = heap_push(
                    heap_keys, heap_gvals, heap_ties, heap_payloads, size,
                    ng + heuristic(ni, nj, eh, goal_i, goal_j, goal_h,
                                   w_len, pitch, w_bend,
                                   off_f, off_l, off_len, arc_speed),
                    ng, tie, ((ni * ny) + nj) * 4 + eh)
                tie += 1
    return EXHAUSTED, 0.0, pops
