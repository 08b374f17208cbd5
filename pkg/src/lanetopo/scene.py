"""Scene data model: lane polylines, traffic elements, topology graphs.

A Scene is the ground-truth container used everywhere else: an ordered list
of 3D lane centerlines sampled at a fixed point count, front-view traffic
element boxes, and two adjacency structures (lane-lane and lane-traffic).
A Prediction mirrors the Scene but carries confidence scores instead of
binary adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Endpoints closer than this (metres) are treated as one junction point.
JUNCTION_TOL = 0.01

DEFAULT_N_POINTS = 11


@dataclass(frozen=True)
class Polyline3D:
    """Ordered 3D point sequence, shape (n, 3) with n >= 2."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"polyline must have shape (n, 3), got {pts.shape}")
        if pts.shape[0] < 2:
            raise ValueError("polyline needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline has non-finite coordinates")
        if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise ValueError("polyline has consecutive duplicate points")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    @property
    def initial(self) -> np.ndarray:
        return self.points[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.points[-1]


@dataclass(frozen=True)
class TrafficElement:
    """Front-view axis-aligned box with a category label.

    bbox is (x_min, y_min, x_max, y_max) in pixels. Ground-truth elements
    carry score=None; predicted elements carry a confidence in [0, 1].
    """

    bbox: tuple[float, float, float, float]
    category: str
    score: float | None = None

    def __post_init__(self):
        box = tuple(float(v) for v in self.bbox)
        if len(box) != 4 or not all(np.isfinite(box)):
            raise ValueError(f"bbox must be 4 finite numbers, got {self.bbox!r}")
        x0, y0, x1, y1 = box
        if x0 >= x1 or y0 >= y1:
            raise ValueError(f"degenerate bbox {box}: need x_min < x_max and y_min < y_max")
        if self.score is not None:
            s = float(self.score)
            if not (0.0 <= s <= 1.0) or not np.isfinite(s):
                raise ValueError(f"score {self.score!r} outside [0, 1]")
            object.__setattr__(self, "score", s)
        object.__setattr__(self, "bbox", box)


@dataclass(frozen=True)
class TopologyGraph:
    """Adjacency containers: ll is (n_lanes, n_lanes), lt is (n_lanes, n_traffic).

    Ground truth holds {0, 1} entries, predictions hold scores in [0, 1].
    Value rules are checked by validate_scene / validate_prediction rather
    than here, so that malformed inputs stay representable for reporting.
    """

    ll: np.ndarray
    lt: np.ndarray

    def __post_init__(self):
        ll = np.asarray(self.ll, dtype=np.float64)
        lt = np.asarray(self.lt, dtype=np.float64)
        if ll.ndim != 2:
            raise ValueError(f"ll must be 2D, got shape {ll.shape}")
        if lt.ndim != 2:
            raise ValueError(f"lt must be 2D, got shape {lt.shape}")
        object.__setattr__(self, "ll", ll)
        object.__setattr__(self, "lt", lt)


@dataclass(frozen=True)
class Scene:
    """Ground-truth scene: lanes, traffic elements, binary topology."""

    lanes: list[Polyline3D]
    traffic: list[TrafficElement]
    topo: TopologyGraph
    n_points: int = DEFAULT_N_POINTS


@dataclass(frozen=True)
class Prediction:
    """Predicted scene: lanes with confidences, scored traffic, scored topology."""

    lanes: list[Polyline3D]
    lane_scores: np.ndarray
    traffic: list[TrafficElement]
    topo: TopologyGraph

    def __post_init__(self):
        scores = np.asarray(self.lane_scores, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "lane_scores", scores)


@dataclass(frozen=True)
class LaneSegment:
    """Centerline plus left/right boundary polylines, all with one point count."""

    centerline: Polyline3D
    left: Polyline3D
    right: Polyline3D
    category: str = "lane"

    def __post_init__(self):
        n = self.centerline.n_points
        if self.left.n_points != n or self.right.n_points != n:
            raise ValueError(
                "lane segment polylines disagree on point count: "
                f"{n}/{self.left.n_points}/{self.right.n_points}"
            )


def junction_point(a: Polyline3D, b: Polyline3D, tol: float = JUNCTION_TOL):
    """Shared junction of predecessor a and successor b, or None.

    The junction is a's terminal point when it lies within tol of b's
    initial point. a's terminal is the canonical coordinate.
    """
    gap = float(np.linalg.norm(a.terminal - b.initial))
    if gap <= tol:
        return a.terminal.copy()
    return None


def validate_scene(scene: Scene) -> list[str]:
    """Check scene-level invariants; return one message per violation.

    An empty list means the scene is well formed. Messages name the entity
    and the rule so CLI users can act on them.
    """
    out: list[str] = []
    n_lanes = len(scene.lanes)
    n_traffic = len(scene.traffic)

    for i, lane in enumerate(scene.lanes):
        if lane.n_points != scene.n_points:
            out.append(
                f"lane {i}: point count {lane.n_points} != scene n_points {scene.n_points}"
            )

    ll, lt = scene.topo.ll, scene.topo.lt
    if ll.shape != (n_lanes, n_lanes):
        out.append(f"topology ll: shape {ll.shape} != ({n_lanes}, {n_lanes})")
    if lt.shape != (n_lanes, n_traffic):
        out.append(f"topology lt: shape {lt.shape} != ({n_lanes}, {n_traffic})")

    for name, mat in (("ll", ll), ("lt", lt)):
        bad = (mat != 0.0) & (mat != 1.0)
        for i, j in zip(*np.nonzero(bad)):
            out.append(f"topology {name}[{i}][{j}] = {mat[i, j]!r} is not binary")

    if ll.shape == (n_lanes, n_lanes):
        for i in range(n_lanes):
            if ll[i, i] != 0.0:
                out.append(f"topology ll: self-connection at lane {i}")
        for i, j in zip(*np.nonzero(ll)):
            if i == j:
                continue
            gap = float(np.linalg.norm(scene.lanes[i].terminal - scene.lanes[j].initial))
            if gap > JUNCTION_TOL:
                out.append(
                    f"topology ll[{i}][{j}]=1 but endpoints are {gap:.4f} m apart "
                    f"(tolerance {JUNCTION_TOL})"
                )
    return out


def validate_prediction(pred: Prediction, n_points: int | None = None) -> list[str]:
    """Check prediction-level invariants; return one message per violation."""
    out: list[str] = []
    n_lanes = len(pred.lanes)
    n_traffic = len(pred.traffic)

    if n_points is not None:
        for i, lane in enumerate(pred.lanes):
            if lane.n_points != n_points:
                out.append(
                    f"lane {i}: point count {lane.n_points} != expected n_points {n_points}"
                )

    if pred.lane_scores.shape != (n_lanes,):
        out.append(
            f"lane_scores: length {pred.lane_scores.shape[0]} != lane count {n_lanes}"
        )
    else:
        for i, s in enumerate(pred.lane_scores):
            if not (0.0 <= s <= 1.0) or not np.isfinite(s):
                out.append(f"lane {i}: score {s!r} outside [0, 1]")

    for j, el in enumerate(pred.traffic):
        if el.score is None:
            out.append(f"traffic {j}: predicted element is missing a score")

    ll, lt = pred.topo.ll, pred.topo.lt
    if ll.shape != (n_lanes, n_lanes):
        out.append(f"topology ll: shape {ll.shape} != ({n_lanes}, {n_lanes})")
    else:
        for i in range(n_lanes):
            if ll[i, i] != 0.0:
                out.append(f"topology ll: self-connection score at lane {i}")
    if lt.shape != (n_lanes, n_traffic):
        out.append(f"topology lt: shape {lt.shape} != ({n_lanes}, {n_traffic})")

    for name, mat in (("ll", ll), ("lt", lt)):
        if not np.all(np.isfinite(mat)):
            out.append(f"topology {name}: non-finite entries")
        elif mat.size and (mat.min() < 0.0 or mat.max() > 1.0):
            out.append(f"topology {name}: scores outside [0, 1]")
    return out
