"""Synthetic scene generator, roundabout variant, and the degradation model."""

import numpy as np
import pytest

import lanetopo as lt
from conftest import perfect_prediction


class TestSynthParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            lt.SynthParams(lane_spacing=2.0)
        with pytest.raises(ValueError):
            lt.SynthParams(n_corridors=0)
        with pytest.raises(ValueError):
            lt.SynthParams(n_points=1)
        with pytest.raises(ValueError):
            lt.SynthParams(segment_length=0.0)

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            lt.NoiseParams(point_sigma=-0.1)
        with pytest.raises(ValueError):
            lt.NoiseParams(drop_rate=1.5)
        with pytest.raises(ValueError):
            lt.NoiseParams(topo_flip_rate=-0.2)


class TestGenerateScene:
    def test_plain_chain_counts(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=1, n_segments=2,
                                                 split_prob=0.0, merge_prob=0.0,
                                                 n_traffic=0, seed=0))
        assert len(scene.lanes) == 2
        assert scene.topo.ll.sum() == 1.0
        assert scene.topo.ll[0, 1] == 1.0

    def test_forced_split_adds_a_branch(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=1, n_segments=2,
                                                 split_prob=1.0, merge_prob=0.0,
                                                 n_traffic=0, seed=0))
        # one predecessor with two successors
        assert len(scene.lanes) == 3
        assert scene.topo.ll.sum() == 2.0
        assert scene.topo.ll[0].sum() == 2.0

    def test_generated_scenes_validate_cleanly(self):
        for seed in range(10):
            scene = lt.generate_scene(lt.SynthParams(n_corridors=3, n_segments=4,
                                                     split_prob=0.3, merge_prob=0.3,
                                                     n_traffic=4, seed=seed))
            assert lt.validate_scene(scene) == []

    def test_same_seed_same_scene(self):
        params = lt.SynthParams(n_corridors=2, n_segments=3, split_prob=0.5,
                                n_traffic=3, seed=7)
        a = lt.generate_scene(params)
        b = lt.generate_scene(params)
        assert len(a.lanes) == len(b.lanes)
        for la, lb in zip(a.lanes, b.lanes):
            assert np.array_equal(la.points, lb.points)
        assert np.array_equal(a.topo.ll, b.topo.ll)
        assert np.array_equal(a.topo.lt, b.topo.lt)
        assert [el.bbox for el in a.traffic] == [el.bbox for el in b.traffic]

    def test_different_seeds_differ(self):
        pa = lt.SynthParams(n_corridors=2, n_segments=3, split_prob=0.5, seed=0)
        pb = lt.SynthParams(n_corridors=2, n_segments=3, split_prob=0.5, seed=1)
        a = lt.generate_scene(pa)
        b = lt.generate_scene(pb)
        same = len(a.lanes) == len(b.lanes) and all(
            np.array_equal(x.points, y.points) for x, y in zip(a.lanes, b.lanes))
        assert not same

    def test_disconnected_lanes_keep_their_distance(self):
        params = lt.SynthParams(n_corridors=3, n_segments=3, split_prob=0.3,
                                merge_prob=0.3, lane_spacing=3.0, seed=4)
        scene = lt.generate_scene(params)
        n = len(scene.lanes)
        for i in range(n):
            for j in range(i + 1, n):
                a, b = scene.lanes[i], scene.lanes[j]
                share = any(
                    float(np.linalg.norm(pa - pb)) <= lt.JUNCTION_TOL
                    for pa in (a.initial, a.terminal)
                    for pb in (b.initial, b.terminal))
                if share:
                    continue
                gap = min(float(np.linalg.norm(pa - pb))
                          for pa in a.points for pb in b.points)
                assert gap >= 1.0, f"lanes {i}, {j} nearly touch without a junction"

    def test_grade_lifts_z(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=1, n_segments=2,
                                                 split_prob=0.0, merge_prob=0.0,
                                                 grade=0.05, n_traffic=0, seed=0))
        flat = lt.generate_scene(lt.SynthParams(n_corridors=1, n_segments=2,
                                                split_prob=0.0, merge_prob=0.0,
                                                grade=0.0, n_traffic=0, seed=0))
        assert np.all(flat.lanes[0].points[:, 2] == 0.0)
        assert scene.lanes[1].terminal[2] > 0.0

    def test_traffic_fields(self):
        scene = lt.generate_scene(lt.SynthParams(n_traffic=5, seed=2))
        assert len(scene.traffic) == 5
        assert scene.topo.lt.shape == (len(scene.lanes), 5)
        for el in scene.traffic:
            assert el.score is None
            assert el.category in lt.TRAFFIC_CATEGORIES


class TestInferLl:
    def test_endpoint_coincidence(self):
        a = lt.Polyline3D(np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]]))
        b = lt.Polyline3D(np.array([[10.0, 0.0, 0.0], [20.0, 0.0, 0.0]]))
        c = lt.Polyline3D(np.array([[30.0, 0.0, 0.0], [40.0, 0.0, 0.0]]))
        ll = lt.infer_ll([a, b, c])
        expected = np.zeros((3, 3))
        expected[0, 1] = 1.0
        assert np.array_equal(ll, expected)

    def test_tolerance_boundary(self):
        a = lt.Polyline3D(np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]]))
        near = lt.Polyline3D(np.array([[10.009, 0.0, 0.0], [20.0, 0.0, 0.0]]))
        far = lt.Polyline3D(np.array([[10.02, 0.0, 0.0], [20.0, 0.0, 0.0]]))
        assert lt.infer_ll([a, near])[0, 1] == 1.0
        assert lt.infer_ll([a, far])[0, 1] == 0.0


class TestRoundabout:
    def test_edge_count_is_four_per_arm(self):
        for n_arms in (2, 3, 4, 6):
            scene = lt.generate_roundabout(n_arms=n_arms, seed=0)
            assert len(scene.lanes) == 3 * n_arms
            assert scene.topo.ll.sum() == 4.0 * n_arms

    def test_ring_forms_a_directed_cycle(self):
        n_arms = 4
        scene = lt.generate_roundabout(n_arms=n_arms, seed=0)
        ring = scene.topo.ll[:n_arms, :n_arms]
        # each arc feeds exactly the next one around the ring
        assert ring.sum() == n_arms
        reach = np.linalg.matrix_power(ring, n_arms)
        assert np.all(np.diag(reach) == 1.0)

    def test_validates_cleanly(self):
        for seed in range(3):
            scene = lt.generate_roundabout(n_arms=4, seed=seed)
            assert lt.validate_scene(scene) == []

    def test_too_few_arms_raises(self):
        with pytest.raises(ValueError):
            lt.generate_roundabout(n_arms=1)


class TestPerturb:
    def test_zero_noise_reproduces_ground_truth(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3,
                                                 n_traffic=3, seed=0))
        pred = lt.perturb(scene, lt.NoiseParams(), seed=0)
        assert len(pred.lanes) == len(scene.lanes)
        for a, b in zip(pred.lanes, scene.lanes):
            assert np.array_equal(a.points, b.points)
        assert np.array_equal(pred.lane_scores, np.ones(len(scene.lanes)))
        assert np.array_equal(pred.topo.ll, scene.topo.ll)
        assert np.array_equal(pred.topo.lt, scene.topo.lt)

    def test_zero_noise_scores_perfectly(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3,
                                                 n_traffic=3, seed=1))
        rep = lt.evaluate(lt.perturb(scene, lt.NoiseParams(), seed=0), scene)
        assert (rep.det_l, rep.det_t, rep.top_ll, rep.top_lt, rep.ols) \
            == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_dropping_every_lane_zeroes_detection(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3, seed=2))
        pred = lt.perturb(scene, lt.NoiseParams(drop_rate=1.0), seed=0)
        assert pred.lanes == []
        assert lt.evaluate(pred, scene).det_l == 0.0

    def test_spurious_lanes_sit_far_from_the_scene(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3, seed=3))
        pred = lt.perturb(scene, lt.NoiseParams(spurious_rate=1.0), seed=5)
        n = len(scene.lanes)
        assert len(pred.lanes) > n
        y_max = max(float(l.points[:, 1].max()) for l in scene.lanes)
        for extra, score in zip(pred.lanes[n:], pred.lane_scores[n:]):
            assert float(extra.points[:, 1].min()) >= y_max + 25.0
            assert score <= 0.5

    def test_score_noise_blends_toward_half(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3, seed=4))
        lam = 0.4
        pred = lt.perturb(scene, lt.NoiseParams(score_noise=lam), seed=0)
        expected = (1.0 - lam) * scene.topo.ll + 0.5 * lam
        np.fill_diagonal(expected, 0.0)
        assert np.allclose(pred.topo.ll, expected, atol=1e-12)

    def test_flip_rate_one_inverts_off_diagonal(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3, seed=5))
        pred = lt.perturb(scene, lt.NoiseParams(topo_flip_rate=1.0), seed=0)
        expected = 1.0 - scene.topo.ll
        np.fill_diagonal(expected, 0.0)
        assert np.array_equal(pred.topo.ll, expected)

    def test_jitter_is_seed_deterministic(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3, seed=6))
        noise = lt.NoiseParams(point_sigma=0.3, score_noise=0.2)
        a = lt.perturb(scene, noise, seed=9)
        b = lt.perturb(scene, noise, seed=9)
        c = lt.perturb(scene, noise, seed=10)
        assert all(np.array_equal(x.points, y.points)
                   for x, y in zip(a.lanes, b.lanes))
        assert np.array_equal(a.topo.ll, b.topo.ll)
        assert any(not np.array_equal(x.points, y.points)
                   for x, y in zip(a.lanes, c.lanes))

    def test_perturbed_output_is_a_valid_prediction(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3,
                                                 n_traffic=2, seed=7))
        noise = lt.NoiseParams(point_sigma=0.5, drop_rate=0.2, spurious_rate=0.3,
                               score_noise=0.3, topo_flip_rate=0.1)
        pred = lt.perturb(scene, noise, seed=11)
        assert lt.validate_prediction(pred, scene.n_points) == []

    def test_more_noise_scores_worse(self):
        scene = lt.generate_scene(lt.SynthParams(n_corridors=2, n_segments=3,
                                                 n_traffic=2, seed=8))
        mild = lt.evaluate(lt.perturb(scene, lt.NoiseParams(point_sigma=0.05), seed=0),
                           scene)
        harsh = lt.evaluate(lt.perturb(scene, lt.NoiseParams(point_sigma=4.0), seed=0),
                            scene)
        assert harsh.ols <= mild.ols
