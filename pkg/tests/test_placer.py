"""Placer math: gradients against finite differences, BB step behaviour,
projection, inflation arithmetic and the full placement driver."""

import itertools
import json
import math

import numpy as np
import pytest

from picpnr import geometry as geo
from picpnr.config import PnrConfig
from picpnr.errors import ValidationError
from picpnr.gen import gen_benchmark
from picpnr.legalize import compute_margins, legalize, overlap_pairs
from picpnr.netlist import parse_netlist
from picpnr.placer import (DensityBins, PlaceResult, bbb_step, coswa_net_cost,
                           density_penalty, estimate_congestion, global_place,
                           project_constraints, size_blocks, spacing_inflation,
                           wirelength_objective)

CFG = PnrConfig()


class TestCoswa:
    def test_faced_ports_cost_is_distance(self):
        cost, gu, gv = coswa_net_cost((0, 0), geo.E, (10, 0), geo.W,
                                      beta=0.5, eps=1e-12)
        assert cost == pytest.approx(10.0, abs=1e-5)

    def test_averted_ports_pay_full_penalty(self):
        cost, _, _ = coswa_net_cost((0, 0), geo.W, (10, 0), geo.E,
                                    beta=0.5, eps=1e-12)
        assert cost == pytest.approx(20.0, abs=1e-5)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        h = 1e-3
        for _ in range(100):
            u = rng.uniform(0, 100, 2)
            v = rng.uniform(0, 100, 2)
            du = int(rng.integers(0, 4)) * 2
            dv = int(rng.integers(0, 4)) * 2
            beta = 0.3
            eps = 1e-2
            _, gu, gv = coswa_net_cost(u, du, v, dv, beta, eps)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                fp, _, _ = coswa_net_cost(u + e, du, v, dv, beta, eps)
                fm, _, _ = coswa_net_cost(u - e, du, v, dv, beta, eps)
                fd = (fp - fm) / (2 * h)
                assert abs(fd - gu[k]) <= 1e-4 * max(1.0, abs(fd))
                fp, _, _ = coswa_net_cost(u, du, v + e, dv, beta, eps)
                fm, _, _ = coswa_net_cost(u, du, v - e, dv, beta, eps)
                fd = (fp - fm) / (2 * h)
                assert abs(fd - gv[k]) <= 1e-4 * max(1.0, abs(fd))

    def test_facing_pair_is_orientation_argmin(self):
        """Over all 16 orientation pairs the faced pair is cheapest."""
        u, v = np.array([3.0, 7.0]), np.array([40.0, 7.0])
        costs = {}
        for du, dv in itertools.product(geo.AXIS_HEADINGS, repeat=2):
            costs[(du, dv)] = coswa_net_cost(u, du, v, dv, 0.5, 1e-9)[0]
        best = min(costs, key=costs.get)
        assert best == (geo.E, geo.W)

    def test_smooth_at_coincident_points(self):
        cost, gu, gv = coswa_net_cost((5, 5), geo.E, (5, 5), geo.W, 0.5, 1e-2)
        assert np.isfinite(cost) and np.all(np.isfinite(gu))


class TestDensity:
    def test_single_component_no_overflow(self):
        bins = DensityBins.for_die(100, 100, 10)
        centers = np.array([[50.0, 50.0]])
        halves = np.array([[5.0, 5.0]])
        penalty, grad = density_penalty(centers, halves, bins)
        assert penalty == 0.0
        assert np.all(grad == 0.0)

    def test_two_overlapping_components_repel(self):
        bins = DensityBins.for_die(100, 100, 10)
        centers = np.array([[52.0, 50.0], [48.0, 50.0]])
        halves = np.array([[10.0, 10.0], [10.0, 10.0]])
        penalty, grad = density_penalty(centers, halves, bins)
        assert penalty > 0.0
        # descent (-grad) separates them: right one right, left one left
        assert grad[0, 0] < 0.0 < grad[1, 0]

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        bins = DensityBins.for_die(60, 60, 6)
        h = 1e-3
        for _ in range(100):
            n = int(rng.integers(2, 6))
            centers = rng.uniform(10, 50, (n, 2))
            halves = rng.uniform(3, 9, (n, 2))
            _, grad = density_penalty(centers, halves, bins)
            c = int(rng.integers(0, n))
            k = int(rng.integers(0, 2))
            e = np.zeros_like(centers)
            e[c, k] = h
            fp, _ = density_penalty(centers + e, halves, bins)
            fm, _ = density_penalty(centers - e, halves, bins)
            fd = (fp - fm) / (2 * h)
            assert abs(fd - grad[c, k]) <= 1e-4 * max(1.0, abs(fd)), \
                f"density grad mismatch: fd={fd} analytic={grad[c, k]}"


class TestInflation:
    def make_comp(self, n_east_ports, thermal=False):
        from picpnr.netlist import ComponentInstance, Net, Port
        ports = [Port(f"p{i}", 10.0, 2.0 + i, geo.E, "te0")
                 for i in range(n_east_ports)]
        comp = ComponentInstance("c", 10.0, 10.0, thermal=thermal, ports=ports)
        nets = [Net(f"n{i}", ("c", f"p{i}"), ("z", "q"), "te0")
                for i in range(n_east_ports)]
        return comp, nets

    def test_single_port_base_margin(self):
        comp, nets = self.make_comp(1)
        m = spacing_inflation(comp, nets, None, CFG)
        assert m.east == pytest.approx(0.5)

    def test_five_codirectional_ports(self):
        comp, nets = self.make_comp(5)
        m = spacing_inflation(comp, nets, None, CFG)
        assert m.east == pytest.approx(0.5 + 4 * 2.0)

    def test_thermal_margin_on_all_edges(self):
        comp, nets = self.make_comp(1, thermal=True)
        m = spacing_inflation(comp, nets, None, CFG)
        assert min(m.as_tuple) >= 10.0

    def test_congestion_term(self):
        comp, nets = self.make_comp(1)
        m = spacing_inflation(comp, nets, {geo.E: 0.5}, CFG)
        assert m.east == pytest.approx(0.5 + 0.5 * 10.0)

    def test_bad_congestion_rejected(self):
        comp, nets = self.make_comp(1)
        with pytest.raises(ValidationError):
            spacing_inflation(comp, nets, {geo.E: 1.5}, CFG)


class TestProjection:
    def bounds(self, n):
        lo = np.zeros((n, 2))
        hi = np.full((n, 2), 100.0)
        return lo, hi

    def test_align_to_mean(self):
        centers = np.array([[0.0, 10.0], [4.0, 20.0]])
        lo, hi = self.bounds(2)
        out, _ = project_constraints(centers, [[0, 1]], [], lo, hi)
        assert out[:, 0] == pytest.approx([2.0, 2.0])
        assert out[:, 1] == pytest.approx([10.0, 20.0])

    def test_idempotent(self):
        centers = np.array([[7.0, 10.0], [7.0, 20.0], [50.0, 50.0]])
        lo, hi = self.bounds(3)
        once, _ = project_constraints(centers, [[0, 1]], [], lo, hi)
        twice, _ = project_constraints(once, [[0, 1]], [], lo, hi)
        assert np.array_equal(once, twice)
        assert np.array_equal(once, centers)  # already aligned + in bounds

    def test_boundary_clamp(self):
        centers = np.array([[-3.0, 50.0]])
        lo = np.array([[2.5, 2.5]])
        hi = np.array([[97.5, 97.5]])
        out, _ = project_constraints(centers, [], [], lo, hi)
        assert out[0, 0] == pytest.approx(2.5)

    def test_infeasible_group_warns(self):
        centers = np.array([[10.0, 1.0], [20.0, 2.0]])
        lo = np.array([[0.0, 0.0], [15.0, 0.0]])
        hi = np.array([[12.0, 90.0], [90.0, 90.0]])
        out, warnings = project_constraints(centers, [[0, 1]], [], lo, hi)
        assert warnings
        assert out[0, 0] <= 12.0 and out[1, 0] >= 15.0


class TestBBB:
    def test_quadratic_recovers_inverse_curvature(self):
        # f = q/2 x^2, gradient qx: any secant pair gives alpha = 1/q
        q = 7.0
        x0, x1 = np.array([3.0]), np.array([1.2])
        a = bbb_step(x1 - x0, q * (x1 - x0), prev_alpha=1.0,
                     alpha_min=1e-3, alpha_max=1e2)
        assert a == pytest.approx(1.0 / q, rel=1e-12)

    def test_nonpositive_curvature_keeps_previous(self):
        a = bbb_step(np.array([1.0]), np.array([-2.0]), prev_alpha=0.37,
                     alpha_min=1e-3, alpha_max=1e2)
        assert a == 0.37

    def test_two_blocks_decouple(self):
        """Blocks with curvatures 1 and 100 get steps ~1 and ~0.01."""
        qs = [1.0, 100.0]
        alphas = []
        for q in qs:
            x0 = np.array([5.0])
            g0 = q * x0
            x1 = x0 - 0.001 * g0
            g1 = q * x1
            alphas.append(bbb_step(x1 - x0, g1 - g0, 1.0, 1e-3, 1e2))
        assert alphas[0] == pytest.approx(1.0, rel=1e-9)
        assert alphas[1] == pytest.approx(0.01, rel=1e-9)

    def test_blockwise_beats_best_fixed_step(self):
        """Separable quadratic, curvatures 1 and 100: per-block BB must
        reach ||g|| <= 1e-6 in at most half the fixed-step iterations."""
        q = np.array([1.0, 100.0])
        x_fixed = np.array([10.0, 10.0])
        alpha_fixed = 2.0 / (q[0] + q[1])  # optimal fixed step
        it_fixed = 0
        while np.linalg.norm(q * x_fixed) > 1e-6 and it_fixed < 10000:
            x_fixed = x_fixed - alpha_fixed * (q * x_fixed)
            it_fixed += 1

        x = np.array([10.0, 10.0])
        alphas = np.array([1e-3, 1e-3])
        g = q * x
        it_bb = 0
        x_old, g_old = x.copy(), g.copy()
        while np.linalg.norm(g) > 1e-6 and it_bb < 10000:
            x = x - alphas * g
            g = q * x
            for b in range(2):
                alphas[b] = bbb_step(np.array([x[b] - x_old[b]]),
                                     np.array([g[b] - g_old[b]]),
                                     alphas[b], 1e-3, 1e2)
            x_old = x.copy()
            g_old = g.copy()
            it_bb += 1
        assert it_bb <= it_fixed / 2, (it_bb, it_fixed)

    def test_size_blocks_partition(self):
        areas = np.array([4.0, 5.0, 400.0, 3.9, 1000.0])
        blocks = size_blocks(areas)
        flat = sorted(int(i) for b in blocks for i in b)
        assert flat == [0, 1, 2, 3, 4]
        lookup = {int(i): bi for bi, b in enumerate(blocks) for i in b}
        assert lookup[0] == lookup[1]          # 4 and 5 share a bucket
        assert lookup[0] != lookup[2]


def two_movable_doc():
    return json.dumps({
        "die": {"width_um": 200, "height_um": 100},
        "components": [
            {"id": "padL", "width_um": 2, "height_um": 2, "fixed": True,
             "x_um": 4, "y_um": 49,
             "ports": [{"id": "p", "dx_um": 2, "dy_um": 1,
                        "orientation": "E", "signal": "te0"}]},
            {"id": "m1", "width_um": 8, "height_um": 8,
             "ports": [{"id": "w", "dx_um": 0, "dy_um": 4,
                        "orientation": "W", "signal": "te0"},
                       {"id": "e", "dx_um": 8, "dy_um": 4,
                        "orientation": "E", "signal": "te0"}]},
            {"id": "m2", "width_um": 8, "height_um": 8,
             "ports": [{"id": "w", "dx_um": 0, "dy_um": 4,
                        "orientation": "W", "signal": "te0"},
                       {"id": "e", "dx_um": 8, "dy_um": 4,
                        "orientation": "E", "signal": "te0"}]},
            {"id": "padR", "width_um": 2, "height_um": 2, "fixed": True,
             "x_um": 194, "y_um": 49,
             "ports": [{"id": "p", "dx_um": 0, "dy_um": 1,
                        "orientation": "W", "signal": "te0"}]},
        ],
        "nets": [
            {"id": "n0", "src": "padL.p", "dst": "m1.w"},
            {"id": "n1", "src": "m1.e", "dst": "m2.w"},
            {"id": "n2", "src": "m2.e", "dst": "padR.p"},
        ],
    })


class TestGlobalPlace:
    def test_all_fixed_returns_verbatim(self):
        nl = parse_netlist(json.dumps({
            "die": {"width_um": 100, "height_um": 100},
            "components": [{"id": "a", "width_um": 2, "height_um": 2,
                            "fixed": True, "x_um": 10, "y_um": 20,
                            "ports": []}],
        }))
        res = global_place(nl, CFG)
        assert res.iterations == 0 and res.converged
        assert (nl.components[0].x_um, nl.components[0].y_um) == (10, 20)

    def test_chain_converges_to_pad_line(self):
        """Two movable blocks between opposite pads settle on the line
        between them (wirelength-only optimum, no density pressure)."""
        nl = parse_netlist(two_movable_doc())
        res = global_place(nl, CFG)
        for cid in ("m1", "m2"):
            comp = nl.component(cid)
            cy = comp.y_um + comp.height_um / 2.0
            assert abs(cy - 50.0) <= 1.0, (cid, cy, res)

    def test_deterministic_per_seed(self):
        nl1 = parse_netlist(two_movable_doc())
        nl2 = parse_netlist(two_movable_doc())
        global_place(nl1, CFG)
        global_place(nl2, CFG)
        for a, b in zip(nl1.components, nl2.components):
            assert (a.x_um, a.y_um) == (b.x_um, b.y_um)

    def test_clements4_beats_random_baseline(self):
        from picpnr.netlist import emit_netlist_json
        nl = gen_benchmark("clements", 4)
        res = global_place(nl, CFG)
        assert res.overflow_fraction < 0.05
        placed_cost = wirelength_objective(nl, CFG)

        # baseline: uniform random placement with the same seed
        base = gen_benchmark("clements", 4)
        rng = np.random.default_rng(CFG.seed)
        for comp in base.components:
            if comp.fixed:
                continue
            comp.x_um = float(rng.uniform(0, base.die_width_um - comp.width_um))
            comp.y_um = float(rng.uniform(0, base.die_height_um - comp.height_um))
        base_cost = wirelength_objective(base, CFG)
        assert placed_cost <= base_cost


class TestLegalize:
    def doc_two_overlapping(self):
        return json.dumps({
            "die": {"width_um": 100, "height_um": 100},
            "components": [
                {"id": "a", "width_um": 10, "height_um": 10,
                 "x_um": 20, "y_um": 20, "ports": []},
                {"id": "b", "width_um": 10, "height_um": 10,
                 "x_um": 29, "y_um": 20, "ports": []},
            ],
        })

    def test_non_overlapping_identity_up_to_snap(self):
        nl = parse_netlist(json.dumps({
            "die": {"width_um": 100, "height_um": 100},
            "components": [
                {"id": "a", "width_um": 10, "height_um": 10,
                 "x_um": 20.3, "y_um": 20.0, "ports": []},
                {"id": "b", "width_um": 10, "height_um": 10,
                 "x_um": 60.0, "y_um": 60.0, "ports": []},
            ],
        }))
        legalize(nl, CFG)
        assert nl.component("a").x_um == 20.0
        assert nl.component("b").x_um == 60.0

    def test_pair_shifted_by_overlap_plus_spacing(self):
        nl = parse_netlist(self.doc_two_overlapping())
        margins = compute_margins(nl, CFG, with_congestion=False)
        legalize(nl, CFG, margins)
        a, b = nl.component("a"), nl.component("b")
        assert a.x_um == 20.0  # first in order, stays
        # b must start at least at a's right edge + both margins (0.5 + 0.5)
        assert b.x_um >= 30.0 + 1.0 - 1e-9
        assert not overlap_pairs(nl, margins)

    def test_random20_no_overlaps_bruteforce(self):
        nl = gen_benchmark("random", 20, seed=4)
        global_place(nl, CFG)
        margins = compute_margins(nl, CFG)
        legalize(nl, CFG, margins)
        bad = overlap_pairs(nl, margins)
        assert bad == []
        for c in nl.components:
            assert c.x_um >= -1e-9 and c.y_um >= -1e-9
            assert c.x_um + c.width_um <= nl.die_width_um + 1e-9
            assert c.y_um + c.height_um <= nl.die_height_um + 1e-9
            # positions snapped to pitch
            assert abs(c.x_um / CFG.pitch - round(c.x_um / CFG.pitch)) < 1e-9

    def test_capacity_error(self):
        nl = parse_netlist(json.dumps({
            "die": {"width_um": 20, "height_um": 20},
            "components": [
                {"id": "a", "width_um": 15, "height_um": 15,
                 "x_um": 0, "y_um": 0, "ports": []},
                {"id": "b", "width_um": 15, "height_um": 15,
                 "x_um": 1, "y_um": 1, "ports": []},
            ],
        }))
        from picpnr.errors import CapacityError
        with pytest.raises(CapacityError):
            legalize(nl, CFG)


def test_estimate_congestion_bounds():
    nl = gen_benchmark("clements", 3)
    global_place(nl, CFG)
    cong = estimate_congestion(nl)
    for per_edge in cong.values():
        for v in per_edge.values():
            assert 0.0 <= v <= 1.0
