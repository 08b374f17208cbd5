"""Synthetic lane-graph scenes and a controllable degradation model.

Scenes are built from straight segments, circular arcs, and smoothstep
lateral blends. Corridors run along +x; splits and merges attach only to
the outer corridors and diverge outward by exactly the lane spacing, which
keeps every pair of lanes that share no junction at least one lane spacing
apart (the separation guarantee the correlation margin rests on).
Lane-lane topology is derived from shared junction points, never stored
independently of the geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scene import (
    DEFAULT_N_POINTS,
    JUNCTION_TOL,
    Polyline3D,
    Prediction,
    Scene,
    TopologyGraph,
    TrafficElement,
)

TRAFFIC_CATEGORIES = ("traffic_light", "stop_sign", "speed_limit", "yield_sign")
CANVAS = (1920.0, 1080.0)


@dataclass(frozen=True)
class SynthParams:
    n_corridors: int = 2
    n_segments: int = 2
    segment_length: float = 20.0
    lane_spacing: float = 4.0
    split_prob: float = 0.3
    merge_prob: float = 0.2
    n_points: int = DEFAULT_N_POINTS
    n_traffic: int = 3
    grade: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lane_spacing < 3.0:
            raise ValueError(
                f"lane_spacing must be >= 3 m to keep lanes separable, got {self.lane_spacing}"
            )
        if self.n_corridors < 1 or self.n_segments < 1:
            raise ValueError("need at least one corridor and one segment")
        if self.n_points < 2:
            raise ValueError("need at least 2 points per lane")
        if self.segment_length <= 0.0:
            raise ValueError("segment_length must be positive")


@dataclass(frozen=True)
class NoiseParams:
    point_sigma: float = 0.0
    drop_rate: float = 0.0
    spurious_rate: float = 0.0
    score_noise: float = 0.0
    topo_flip_rate: float = 0.0

    def __post_init__(self):
        for name in ("point_sigma", "spurious_rate"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("drop_rate", "score_noise", "topo_flip_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _straight(x0: float, x1: float, y: float, grade: float, n: int) -> np.ndarray:
    x = np.linspace(x0, x1, n)
    pts = np.empty((n, 3))
    pts[:, 0] = x
    pts[:, 1] = y
    pts[:, 2] = grade * x
    return pts


def _lateral_blend(x0: float, x1: float, y0: float, y1: float,
                   grade: float, n: int) -> np.ndarray:
    x = np.linspace(x0, x1, n)
    t = np.linspace(0.0, 1.0, n)
    pts = np.empty((n, 3))
    pts[:, 0] = x
    pts[:, 1] = y0 + (y1 - y0) * _smoothstep(t)
    pts[:, 2] = grade * x
    return pts


def infer_ll(lanes: list[Polyline3D]) -> np.ndarray:
    """Adjacency from geometry: edge (i, j) iff lane i ends where lane j starts."""
    n = len(lanes)
    ll = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            gap = np.linalg.norm(lanes[i].terminal - lanes[j].initial)
            if gap <= JUNCTION_TOL:
                ll[i, j] = 1.0
    return ll


def _draw_traffic(rng: np.random.Generator, n_traffic: int, n_lanes: int):
    traffic = []
    for _ in range(n_traffic):
        x0 = rng.uniform(0.0, CANVAS[0] - 170.0)
        y0 = rng.uniform(0.0, CANVAS[1] - 170.0)
        w = rng.uniform(40.0, 150.0)
        h = rng.uniform(40.0, 150.0)
        cat = str(rng.choice(TRAFFIC_CATEGORIES))
        traffic.append(TrafficElement(bbox=(x0, y0, x0 + w, y0 + h), category=cat))
    lt = np.zeros((n_lanes, n_traffic))
    for t in range(n_traffic):
        k = int(1 + rng.integers(0, 2))
        for lane in rng.choice(n_lanes, size=min(k, n_lanes), replace=False):
            lt[int(lane), t] = 1.0
    return traffic, lt


def generate_scene(params: SynthParams = SynthParams()) -> Scene:
    """Parallel corridors of chained segments with outward splits and merges."""
    rng = np.random.default_rng(params.seed)
    p = params
    lanes: list[np.ndarray] = []

    xs = [s * p.segment_length for s in range(p.n_segments + 1)]
    for c in range(p.n_corridors):
        y = c * p.lane_spacing
        for s in range(p.n_segments):
            lanes.append(_straight(xs[s], xs[s + 1], y, p.grade, p.n_points))

    # splits leave the bottom corridor downward, merges join the top corridor
    # from above; interior corridors stay clean so unrelated lanes never
    # come closer than the spacing
    split_y = -p.lane_spacing
    merge_y = (p.n_corridors - 1) * p.lane_spacing + p.lane_spacing
    for s in range(1, p.n_segments):
        if rng.random() < p.split_prob:
            lanes.append(_lateral_blend(xs[s], xs[s] + p.segment_length,
                                        0.0, split_y, p.grade, p.n_points))
        if rng.random() < p.merge_prob:
            y_top = (p.n_corridors - 1) * p.lane_spacing
            lanes.append(_lateral_blend(xs[s] - p.segment_length, xs[s],
                                        merge_y, y_top, p.grade, p.n_points))

    polylines = [Polyline3D(pts) for pts in lanes]
    ll = infer_ll(polylines)
    traffic, lt = _draw_traffic(rng, p.n_traffic, len(polylines))
    return Scene(lanes=polylines, traffic=traffic,
                 topo=TopologyGraph(ll=ll, lt=lt), n_points=p.n_points)


def generate_roundabout(radius: float = 20.0, n_arms: int = 4,
                        n_points: int = DEFAULT_N_POINTS, seed: int = 0) -> Scene:
    """Ring of circular arcs with one entry and one exit lane per arm.

    Junction k sits at angle 2*pi*k/n_arms. Arc k runs from junction k to
    junction k+1; the entry of arm k ends at junction k and the exit leaves
    it, so every junction has two incoming and two outgoing lanes and the
    derived topology has 4*n_arms edges.
    """
    if n_arms < 2:
        raise ValueError(f"need at least 2 arms, got {n_arms}")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    thetas = [2.0 * np.pi * k / n_arms for k in range(n_arms)]
    ring = lambda th: np.array([radius * np.cos(th), radius * np.sin(th), 0.0])
    outer_r = 1.8 * radius
    outer = lambda th: np.array([outer_r * np.cos(th), outer_r * np.sin(th), 0.0])
    delta = 0.35 * (2.0 * np.pi / n_arms)

    def arc(th0: float, th1: float) -> np.ndarray:
        th = np.linspace(th0, th1, n_points)
        return np.stack([radius * np.cos(th), radius * np.sin(th),
                         np.zeros(n_points)], axis=1)

    def chord(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        t = np.linspace(0.0, 1.0, n_points)[:, None]
        pts = a[None, :] + t * (b - a)[None, :]
        pts[0], pts[-1] = a, b  # pin endpoints for exact junction coincidence
        return pts

    lanes: list[np.ndarray] = []
    for k in range(n_arms):
        th0, th1 = thetas[k], thetas[k] + 2.0 * np.pi / n_arms
        lanes.append(arc(th0, th1))
    for k in range(n_arms):
        lanes.append(chord(outer(thetas[k] - delta), ring(thetas[k])))  # entry
    for k in range(n_arms):
        lanes.append(chord(ring(thetas[k]), outer(thetas[k] + delta)))  # exit

    polylines = [Polyline3D(pts) for pts in lanes]
    ll = infer_ll(polylines)
    traffic, lt = _draw_traffic(rng, n_arms, len(polylines))
    return Scene(lanes=polylines, traffic=traffic,
                 topo=TopologyGraph(ll=ll, lt=lt), n_points=n_points)


def perturb(scene: Scene, noise: NoiseParams, seed: int = 0) -> Prediction:
    """Degraded copy of a scene posing as a prediction.

    Lane points get isotropic Gaussian noise; lanes are dropped and spurious
    far-away lanes appended; topology scores are the binary ground truth
    blended toward 0.5 by score_noise, then flipped entrywise with
    probability topo_flip_rate. With all-zero noise the prediction
    reproduces the ground truth and every metric is 1.
    """
    rng = np.random.default_rng(seed)
    n = len(scene.lanes)

    keep = rng.random(n) >= noise.drop_rate if noise.drop_rate > 0 else np.ones(n, bool)
    kept_idx = [i for i in range(n) if keep[i]]

    lanes: list[Polyline3D] = []
    for i in kept_idx:
        pts = scene.lanes[i].points
        jitter = rng.normal(0.0, noise.point_sigma, size=pts.shape) \
            if noise.point_sigma > 0 else 0.0
        lanes.append(Polyline3D(pts + jitter))

    n_spurious = int(rng.poisson(noise.spurious_rate * n)) if noise.spurious_rate > 0 else 0
    if n_spurious:
        all_pts = np.concatenate([l.points for l in scene.lanes])
        y_far = float(all_pts[:, 1].max()) + 25.0
        x_lo = float(all_pts[:, 0].min())
        length = max(5.0, float(np.mean([np.linalg.norm(l.points[-1] - l.points[0])
                                         for l in scene.lanes])))
        for k in range(n_spurious):
            x0 = x_lo + rng.uniform(0.0, length)
            y = y_far + 10.0 * k + rng.uniform(0.0, 2.0)
            lanes.append(Polyline3D(_straight(x0, x0 + length, y, 0.0, scene.n_points)))

    n_out = len(lanes)
    scores = np.ones(n_out)
    if noise.score_noise > 0:
        jitter = np.abs(rng.normal(0.0, noise.score_noise, size=n_out))
        scores = np.clip(1.0 - 0.3 * jitter, 0.05, 1.0)
    for k in range(len(kept_idx), n_out):
        scores[k] = rng.uniform(0.1, 0.5)  # spurious lanes rank low

    lam = noise.score_noise

    def blended(gt_val: float) -> float:
        return (1.0 - lam) * gt_val + 0.5 * lam

    ll = np.zeros((n_out, n_out))
    for a, ia in enumerate(kept_idx):
        for b, ib in enumerate(kept_idx):
            ll[a, b] = blended(scene.topo.ll[ia, ib])
    for a in range(n_out):
        for b in range(n_out):
            if a >= len(kept_idx) or b >= len(kept_idx):
                ll[a, b] = blended(0.0)
    if noise.topo_flip_rate > 0:
        flip = rng.random(ll.shape) < noise.topo_flip_rate
        ll = np.where(flip, 1.0 - ll, ll)
    np.fill_diagonal(ll, 0.0)

    n_traffic = len(scene.traffic)
    lt = np.zeros((n_out, n_traffic))
    for a, ia in enumerate(kept_idx):
        for t in range(n_traffic):
            lt[a, t] = blended(scene.topo.lt[ia, t])
    for a in range(len(kept_idx), n_out):
        for t in range(n_traffic):
            lt[a, t] = blended(0.0)
    if noise.topo_flip_rate > 0 and lt.size:
        flip = rng.random(lt.shape) < noise.topo_flip_rate
        lt = np.where(flip, 1.0 - lt, lt)

    traffic = [replace(el, score=1.0) for el in scene.traffic]
    return Prediction(lanes=lanes, lane_scores=scores, traffic=traffic,
                      topo=TopologyGraph(ll=ll, lt=lt))
