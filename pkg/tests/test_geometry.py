"""Core path-geometry tests: arc kinematics, rasterization, validation.

Expected values for the derived cases come from independent oracles
computed right here (parametric circle sampling, brute-force
point-to-curve distances), never from the code under test.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picpnr import geometry as geo
from picpnr.config import PnrConfig
from picpnr.errors import ValidationError

CFG = PnrConfig()


def make_path(src, dst, elements, net="n0"):
    return geo.PathGeometry(
        net=net,
        src=geo.PathEndpoint(*src),
        dst=geo.PathEndpoint(*dst),
        elements=elements,
    )


class TestHeadings:
    def test_orientation_rotation_closure(self):
        for h in geo.AXIS_HEADINGS:
            assert geo.left90(h) in geo.AXIS_HEADINGS
            assert geo.right90(h) in geo.AXIS_HEADINGS
            assert geo.opposite(geo.opposite(h)) == h
            assert geo.right90(geo.left90(h)) == h

    def test_vectors_are_unit(self):
        for h in range(8):
            vx, vy = geo.heading_vector(h)
            assert math.hypot(vx, vy) == pytest.approx(1.0, abs=1e-12)

    def test_names_roundtrip(self):
        for h in range(8):
            assert geo.heading_from_name(geo.heading_name(h)) == h


class TestArcEndpoint:
    def test_quarter_turn_right(self):
        x, y, h = geo.arc_endpoint(0, 0, geo.E, geo.RIGHT, 90, 5.0)
        assert (x, y) == pytest.approx((5.0, -5.0), abs=1e-12)
        assert h == geo.S

    def test_quarter_turn_left_mirror(self):
        x, y, h = geo.arc_endpoint(0, 0, geo.E, geo.LEFT, 90, 5.0)
        assert (x, y) == pytest.approx((5.0, 5.0), abs=1e-12)
        assert h == geo.N

    def test_45_right_matches_circle_sampler(self):
        # oracle: walk the actual circle parametrically
        r = 5.0
        center = (0.0, -r)  # right turn from east heading at origin
        angles = np.linspace(math.pi / 2, math.pi / 2 - math.pi / 4, 200001)
        ox = center[0] + r * np.cos(angles[-1])
        oy = center[1] + r * np.sin(angles[-1])
        expect = (r * math.sin(math.pi / 4), -r * (1 - math.cos(math.pi / 4)))
        assert (ox, oy) == pytest.approx(expect, abs=1e-9)

        x, y, h = geo.arc_endpoint(0, 0, geo.E, geo.RIGHT, 45, r)
        assert (x, y) == pytest.approx((ox, oy), abs=1e-9)
        assert (x, y) == pytest.approx((3.5355339, -1.4644661), abs=1e-6)
        assert h == geo.SE

    def test_invalid_radius_rejected(self):
        with pytest.raises(ValidationError, match="invalid-radius"):
            geo.arc_endpoint(0, 0, geo.E, geo.LEFT, 90, 3.0, min_radius=5.0)

    @given(h=st.integers(0, 7), turn=st.sampled_from([geo.LEFT, geo.RIGHT]),
           sweep=st.sampled_from([45, 90]),
           r=st.floats(1.0, 50.0, allow_nan=False))
    def test_s_bend_closure(self, h, turn, sweep, r):
        # equal opposite sweeps restore the original heading
        x, y, h1 = geo.arc_endpoint(0, 0, h, turn, sweep, r)
        _, _, h2 = geo.arc_endpoint(x, y, h1, -turn, sweep, r)
        assert h2 == h

    @given(st.lists(st.tuples(st.sampled_from(["s", "a"]),
                              st.integers(0, 3),
                              st.floats(0.5, 20.0)), min_size=1, max_size=12),
           st.integers(0, 3))
    @settings(max_examples=60)
    def test_concatenated_displacements_match_walk(self, spec, h0):
        """Summing per-element displacements reproduces the walked endpoint."""
        elements = []
        h = geo.AXIS_HEADINGS[h0]
        for kind, sel, val in spec:
            if kind == "s":
                elements.append(geo.Straight(val, h))
            else:
                turn = geo.LEFT if sel % 2 == 0 else geo.RIGHT
                sweep = 45 if sel < 2 else 90
                elements.append(geo.Arc(5.0 + val, turn, sweep))
                h = geo.rotate(h, turn if sweep == 45 else 2 * turn)
        path = make_path((0, 0, geo.AXIS_HEADINGS[h0]), (0, 0, geo.E), elements)
        x, y = 0.0, 0.0
        hh = geo.AXIS_HEADINGS[h0]
        for el in elements:
            if isinstance(el, geo.Straight):
                vx, vy = geo.heading_vector(el.heading)
                x, y = x + el.length_um * vx, y + el.length_um * vy
                hh = el.heading
            else:
                x, y, hh = geo.arc_endpoint(x, y, hh, el.turn, el.sweep_deg,
                                            el.radius_um)
        wx, wy, wh = geo.path_end(path)
        assert math.hypot(wx - x, wy - y) < 1e-9
        assert wh == hh


class TestRasterize:
    def test_straight_10um(self):
        path = make_path((0, 0, geo.E), (10, 0, geo.W),
                         [geo.Straight(10.0, geo.E)])
        cells = geo.rasterize_path(path, pitch=1.0, halo=0.0, half_width=0.25)
        assert cells == {(i, 0) for i in range(11)}

    def test_empty_path(self):
        path = make_path((0, 0, geo.E), (0, 0, geo.W), [])
        assert geo.rasterize_path(path, 1.0, 0.0) == set()

    def test_arc_matches_bruteforce_annulus(self):
        r, half_width, halo = 5.0, 0.25, 1.0
        path = make_path((0, 0, geo.E), (5, 5, geo.S),
                         [geo.Arc(r, geo.LEFT, 90)])
        got = geo.rasterize_path(path, 1.0, halo, half_width)

        # oracle: brute-force distance to the quarter circle over a box
        center = (0.0, 5.0)
        expect = set()
        for i in range(-10, 16):
            for j in range(-10, 16):
                dx, dy = i - center[0], j - center[1]
                d = math.hypot(dx, dy)
                ang = math.atan2(dy, dx)  # arc spans -pi/2 .. 0
                if -math.pi / 2 - 1e-12 <= ang <= 1e-12:
                    dist = abs(d - r)
                else:
                    dist = min(math.hypot(i - 0, j - 0), math.hypot(i - 5, j - 5))
                if dist <= half_width + halo + 1e-9:
                    expect.add((i, j))
        assert got == expect

    def test_reparameterization_invariance(self):
        a = make_path((0, 0, geo.E), (20, 0, geo.W), [geo.Straight(20.0, geo.E)])
        b = make_path((0, 0, geo.E), (20, 0, geo.W),
                      [geo.Straight(7.0, geo.E), geo.Straight(5.0, geo.E),
                       geo.Straight(8.0, geo.E)])
        assert geo.rasterize_path(a, 1.0, 0.5) == geo.rasterize_path(b, 1.0, 0.5)


class TestValidate:
    def straight_path(self):
        return make_path((0, 0, geo.E), (10, 0, geo.W),
                         [geo.Straight(10.0, geo.E)])

    def test_clean_straight(self):
        assert geo.validate_path_geometry(self.straight_path(), CFG) == []

    def test_small_radius_flagged(self):
        # 3 um bend violates the 5 um minimum radius rule
        path = make_path((0, 0, geo.E), (3, 3, geo.S),
                         [geo.Arc(3.0, geo.LEFT, 90)])
        faults = geo.validate_path_geometry(path, CFG)
        assert any(f.kind == "radius" for f in faults)

    def test_perpendicular_arrival_flagged(self):
        path = make_path((0, 0, geo.E), (10, 0, geo.S),
                         [geo.Straight(10.0, geo.E)])
        faults = geo.validate_path_geometry(path, CFG)
        assert any(f.kind == "facing" for f in faults)
        assert not any(f.kind == "endpoint" for f in faults)

    def test_endpoint_mismatch_flagged(self):
        path = make_path((0, 0, geo.E), (11, 0, geo.W),
                         [geo.Straight(10.0, geo.E)])
        faults = geo.validate_path_geometry(path, CFG)
        assert any(f.kind == "endpoint" for f in faults)

    def test_discontinuity_flagged(self):
        path = make_path((0, 0, geo.E), (5, 5, geo.W),
                         [geo.Straight(5.0, geo.E), geo.Straight(5.0, geo.N)])
        faults = geo.validate_path_geometry(path, CFG)
        assert any(f.kind == "discontinuity" for f in faults)

    def clean_bend_path(self):
        # E for 5, left 90 at R=5, N for 5: ends at (10, 10) heading N
        return make_path((0, 0, geo.E), (10, 10, geo.S),
                         [geo.Straight(5.0, geo.E), geo.Arc(5.0, geo.LEFT, 90),
                          geo.Straight(5.0, geo.N)])

    def test_clean_bend(self):
        assert geo.validate_path_geometry(self.clean_bend_path(), CFG) == []

    @pytest.mark.parametrize("mutate", range(4))
    def test_single_mutations_detected(self, mutate):
        """Any one injected defect is reported with a matching kind."""
        path = self.clean_bend_path()
        if mutate == 0:
            path.elements[1] = geo.Arc(4.0, geo.LEFT, 90)
            want = "radius"
        elif mutate == 1:
            path.elements[2] = geo.Straight(5.0, geo.E)
            want = "discontinuity"
        elif mutate == 2:
            path.elements[2] = geo.Straight(7.0, geo.N)
            want = "endpoint"
        else:
            path.dst = geo.PathEndpoint(10, 10, geo.N)
            want = "facing"
        faults = geo.validate_path_geometry(path, CFG)
        assert faults, "mutation must be detected"
        assert any(f.kind == want for f in faults)


class TestSample:
    def test_sagitta_bound(self):
        path = make_path((0, 0, geo.E), (5, 5, geo.S), [geo.Arc(5.0, geo.LEFT, 90)])
        pts = geo.sample_path(path, max_sagitta=0.005)
        center = np.array([0.0, 5.0])
        # all sample points on the circle
        radii = np.hypot(*(pts - center).T)
        assert np.max(np.abs(radii - 5.0)) < 1e-9
        # chord midpoints no farther than the sagitta from the circle
        mids = (pts[1:] + pts[:-1]) / 2
        mid_r = np.hypot(*(mids - center).T)
        assert np.max(5.0 - mid_r) <= 0.005 + 1e-12

    def test_merge_straights(self):
        els = [geo.Straight(3.0, geo.E), geo.Straight(0.0, geo.E),
               geo.Straight(4.0, geo.E), geo.Arc(5.0, geo.LEFT, 90),
               geo.Straight(2.0, geo.N)]
        merged = geo.merge_straights(els)
        assert merged[0] == geo.Straight(7.0, geo.E)
        assert len(merged) == 3
