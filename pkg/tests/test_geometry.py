"""Polyline geometry: resampling, distances, boxes, and widening."""

import numpy as np
import pytest

import lanetopo as lt
from conftest import straight_lane
from oracles import avg_l1_loops, chamfer_loops, frechet_recursive, random_polyline


class TestResample:
    def test_straight_line_three_points(self):
        poly = lt.Polyline3D(np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]]))
        out = lt.resample_uniform(poly, 3)
        expected = np.array([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]])
        assert np.array_equal(out.points, expected)

    def test_l_shape_five_points(self):
        # two 4 m legs, arc positions {0, 2, 4, 6, 8}; the corner sits at 4
        poly = lt.Polyline3D(np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [4.0, 4.0, 0.0]]))
        out = lt.resample_uniform(poly, 5)
        expected = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [4.0, 0.0, 0.0],
                             [4.0, 2.0, 0.0], [4.0, 4.0, 0.0]])
        assert np.allclose(out.points, expected, atol=1e-12)

    def test_identity_on_uniform_polyline(self):
        # binary-exact spacing, so interpolation targets hit the vertices
        poly = straight_lane(0.0, 20.0, 3.0, n=5)
        out = lt.resample_uniform(poly, 5)
        assert np.array_equal(out.points, poly.points)

    def test_identity_on_irrational_spacing(self):
        t = np.linspace(0.0, 1.0, 7)
        pts = np.stack([t * np.pi, t * np.e, np.zeros(7)], axis=1)
        out = lt.resample_uniform(lt.Polyline3D(pts), 7)
        assert np.allclose(out.points, pts, atol=1e-9)

    def test_endpoints_are_preserved_exactly(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pts = random_polyline(rng, 6)
            out = lt.resample_array(pts, 9)
            assert np.array_equal(out[0], pts[0])
            assert np.array_equal(out[-1], pts[-1])

    def test_output_count(self):
        poly = straight_lane(0.0, 10.0, 0.0, n=4)
        for n in (2, 3, 11, 40):
            assert lt.resample_uniform(poly, n).n_points == n

    def test_fewer_than_two_points_raises(self):
        poly = straight_lane(0.0, 10.0, 0.0, n=4)
        with pytest.raises(ValueError):
            lt.resample_uniform(poly, 1)

    def test_arc_length_preserved_when_vertices_hit_the_grid(self):
        # output points sit on the input curve, so length is preserved only
        # when every interior vertex lands on a target arc position; the
        # L shape with n = 5 and any straight line qualify
        L = lt.Polyline3D(np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [4.0, 4.0, 0.0]]))
        out = lt.resample_uniform(L, 5)
        assert abs(lt.arc_length(out) - lt.arc_length(L)) <= 1e-9 * lt.arc_length(L)

        line = straight_lane(0.0, 37.0, 2.0, n=3)
        for n in (2, 5, 16):
            out = lt.resample_uniform(line, n)
            assert abs(lt.arc_length(out) - lt.arc_length(line)) \
                <= 1e-9 * lt.arc_length(line)

    def test_corner_cutting_never_lengthens(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pts = random_polyline(rng, 5)
            out = lt.resample_array(pts, 7)
            assert lt.arc_length(out) <= lt.arc_length(pts) + 1e-12


class TestAvgL1:
    def test_identical_is_zero(self):
        pts = random_polyline(np.random.default_rng(0), 5)
        assert lt.avg_l1(pts, pts) == 0.0

    def test_unit_shift_in_two_axes(self):
        a = random_polyline(np.random.default_rng(1), 4)
        b = a + np.array([1.0, 1.0, 0.0])
        assert lt.avg_l1(a, b) == pytest.approx(2.0, abs=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = random_polyline(rng, 6)
            b = random_polyline(rng, 6)
            assert lt.avg_l1(a, b) == pytest.approx(avg_l1_loops(a, b), abs=1e-12)

    def test_unequal_counts_raise(self):
        with pytest.raises(ValueError):
            lt.avg_l1(np.zeros((3, 3)), np.zeros((4, 3)))


class TestDiscreteFrechet:
    def test_identical_is_zero(self):
        pts = random_polyline(np.random.default_rng(0), 5)
        assert lt.discrete_frechet(pts, pts) == 0.0

    def test_parallel_offset_equals_offset(self):
        a = straight_lane(0.0, 10.0, 0.0, n=6).points
        for d in (0.5, 1.75, 4.0):
            b = a + np.array([0.0, d, 0.0])
            assert lt.discrete_frechet(a, b) == pytest.approx(d, abs=1e-12)

    def test_matches_recursive_definition(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = random_polyline(rng, int(rng.integers(2, 7)))
            b = random_polyline(rng, int(rng.integers(2, 7)))
            assert lt.discrete_frechet(a, b) == pytest.approx(
                frechet_recursive(a, b), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            a = random_polyline(rng, 5)
            b = random_polyline(rng, 4)
            assert lt.discrete_frechet(a, b) == lt.discrete_frechet(b, a)

    def test_reversal_identity(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = random_polyline(rng, 5)
            b = random_polyline(rng, 6)
            assert lt.discrete_frechet(a, b) == pytest.approx(
                lt.discrete_frechet(b[::-1], a[::-1]), abs=1e-12)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            a = random_polyline(rng, 4)
            b = random_polyline(rng, 5)
            c = random_polyline(rng, 6)
            ab = lt.discrete_frechet(a, b)
            bc = lt.discrete_frechet(b, c)
            ac = lt.discrete_frechet(a, c)
            assert ac <= ab + bc + 1e-12

    def test_endpoint_distances_are_lower_bounds(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            a = random_polyline(rng, 5)
            b = random_polyline(rng, 5)
            d = lt.discrete_frechet(a, b)
            assert d >= np.linalg.norm(a[0] - b[0]) - 1e-12
            assert d >= np.linalg.norm(a[-1] - b[-1]) - 1e-12

    def test_accepts_polylines(self):
        a = straight_lane(0.0, 10.0, 0.0)
        b = straight_lane(0.0, 10.0, 2.0)
        assert lt.discrete_frechet(a, b) == pytest.approx(2.0, abs=1e-12)


class TestChamfer:
    def test_identical_is_zero(self):
        pts = random_polyline(np.random.default_rng(0), 5)
        assert lt.chamfer(pts, pts) == 0.0

    def test_single_point_sets(self):
        a = np.array([[0.0, 0.0, 0.0]])
        b = np.array([[3.0, 4.0, 0.0]])
        assert lt.chamfer(a, b) == pytest.approx(5.0, abs=1e-12)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = random_polyline(rng, int(rng.integers(2, 8)))
            b = random_polyline(rng, int(rng.integers(2, 8)))
            assert lt.chamfer(a, b) == pytest.approx(chamfer_loops(a, b), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a = random_polyline(rng, 6)
        b = random_polyline(rng, 3)
        assert lt.chamfer(a, b) == lt.chamfer(b, a)


class TestBoxes:
    def test_iou_identical(self):
        assert lt.box_iou((0.0, 0.0, 2.0, 2.0), (0.0, 0.0, 2.0, 2.0)) == 1.0

    def test_iou_disjoint(self):
        assert lt.box_iou((0.0, 0.0, 1.0, 1.0), (5.0, 5.0, 6.0, 6.0)) == 0.0

    def test_iou_half_overlap(self):
        # intersection 2, union 6
        assert lt.box_iou((0.0, 0.0, 2.0, 2.0), (1.0, 0.0, 3.0, 2.0)) \
            == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_iou_touching_edge_is_zero(self):
        assert lt.box_iou((0.0, 0.0, 1.0, 1.0), (1.0, 0.0, 2.0, 1.0)) == 0.0

    def test_giou_identical(self):
        assert lt.giou((0.0, 0.0, 1.0, 1.0), (0.0, 0.0, 1.0, 1.0)) == 1.0

    def test_giou_separated_unit_boxes(self):
        # iou 0, hull area 3, union 2 -> 0 - (3 - 2) / 3
        assert lt.giou((0.0, 0.0, 1.0, 1.0), (2.0, 0.0, 3.0, 1.0)) \
            == pytest.approx(-1.0 / 3.0, abs=1e-12)

    def test_giou_never_exceeds_iou(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            x0, y0, x1, y1 = rng.uniform(0, 10, 4)
            a = (min(x0, x1), min(y0, y1), max(x0, x1) + 0.1, max(y0, y1) + 0.1)
            x0, y0, x1, y1 = rng.uniform(0, 10, 4)
            b = (min(x0, x1), min(y0, y1), max(x0, x1) + 0.1, max(y0, y1) + 0.1)
            assert lt.giou(a, b) <= lt.box_iou(a, b) + 1e-12

    def test_giou_range(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            x, y = rng.uniform(0, 10, 2)
            a = (x, y, x + 1.0, y + 2.0)
            x, y = rng.uniform(0, 10, 2)
            b = (x, y, x + 2.0, y + 1.0)
            g = lt.giou(a, b)
            assert -1.0 <= g <= 1.0


class TestWidenToSegment:
    def test_straight_lane_boundaries(self):
        seg = lt.widen_to_segment(straight_lane(0.0, 10.0, 0.0, n=5), width=2.0)
        assert np.allclose(seg.left.points[:, 1], 1.0)
        assert np.allclose(seg.right.points[:, 1], -1.0)
        assert np.array_equal(seg.centerline.points[:, 1], np.zeros(5))

    def test_point_counts_match(self):
        seg = lt.widen_to_segment(straight_lane(0.0, 10.0, 0.0, n=7), width=1.75)
        assert seg.left.n_points == seg.right.n_points == seg.centerline.n_points == 7

    def test_category_passthrough(self):
        seg = lt.widen_to_segment(straight_lane(0.0, 10.0, 0.0), width=1.0,
                                  category="pedestrian_crossing")
        assert seg.category == "pedestrian_crossing"

    def test_nonpositive_width_raises(self):
        with pytest.raises(ValueError):
            lt.widen_to_segment(straight_lane(0.0, 10.0, 0.0), width=0.0)

    def test_boundary_offset_magnitude(self):
        rng = np.random.default_rng(14)
        t = np.linspace(0.0, 2.0 * np.pi, 20)
        pts = np.stack([10.0 * np.cos(t), 10.0 * np.sin(t), np.zeros_like(t)], axis=1)
        seg = lt.widen_to_segment(lt.Polyline3D(pts), width=3.0)
        off_l = np.linalg.norm(seg.left.points - pts, axis=1)
        off_r = np.linalg.norm(seg.right.points - pts, axis=1)
        assert np.allclose(off_l, 1.5, atol=1e-9)
        assert np.allclose(off_r, 1.5, atol=1e-9)
