"""Detection and topology metrics.

Conventions used throughout:

* Instance matching is greedy in descending prediction score (ties broken
  by input index), each ground-truth instance consumable once. A lane
  prediction is a true positive when its discrete Frechet distance to an
  unmatched ground-truth lane is below the threshold; a traffic prediction
  needs box IoU at or above the threshold and the same category.
* Average precision interpolates precision at every achieved recall step
  (area under the precision/recall curve).
* Topology scores are ranked per ground-truth vertex. An entry with score
  exactly 0 is not a predicted edge; edges whose far endpoint is an
  unmatched prediction count as false positives.
* Vacuously perfect cases score 1.0: a metric with nothing to detect and
  nothing predicted is clean, not broken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import box_iou, chamfer, discrete_frechet
from .scene import LaneSegment, Prediction, Scene

DET_L_THRESHOLDS = (1.0, 2.0, 3.0)
DET_T_IOU = 0.75
TOP_FRECHET = 1.5
TOP_IOU = 0.75
LS_THRESHOLDS = (1.0, 2.0, 3.0)
LS_TOP_THRESHOLD = 1.5
LS_CATEGORIES = ("lane", "pedestrian_crossing")


@dataclass(frozen=True)
class LaneSegmentReport:
    map: float
    ap_lane: float | None
    ap_ped: float | None
    top_lsls: float | None


@dataclass(frozen=True)
class MetricReport:
    det_l: float
    det_t: float
    top_ll: float
    top_lt: float
    ols: float
    lane_segments: LaneSegmentReport | None = None


def average_precision(tp_flags, n_gt: int) -> float:
    """AP of a ranked true/false-positive list against n_gt ground truths."""
    if n_gt == 0:
        return 1.0 if len(tp_flags) == 0 else 0.0
    if len(tp_flags) == 0:
        return 0.0
    flags = np.asarray(tp_flags, dtype=bool)
    tp_cum = np.cumsum(flags)
    precision = tp_cum / np.arange(1, flags.size + 1)
    # precision interpolated from the right: best precision at recall >= r
    p_interp = np.maximum.accumulate(precision[::-1])[::-1]
    return float(p_interp[flags].sum() / n_gt)


def rank_by_score(scores: np.ndarray) -> np.ndarray:
    """Indices in descending score order; equal scores keep input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def greedy_match(dist: np.ndarray, scores: np.ndarray, threshold: float,
                 better_below: bool = True):
    """Greedy one-to-one matching of predictions (rows) to ground truth (cols).

    Predictions are visited in descending score; each takes the best still
    unmatched ground truth that clears the threshold (distance strictly
    below it, or similarity at or above it). Returns (tp_flags in ranked
    order, pred_to_gt map, ranked order).
    """
    n_pred, n_gt = dist.shape
    order = rank_by_score(scores)
    taken = np.zeros(n_gt, dtype=bool)
    pred_to_gt = np.full(n_pred, -1)
    flags = []
    for p in order:
        best = -1
        best_d = None
        for g in range(n_gt):
            if taken[g]:
                continue
            d = dist[p, g]
            ok = (d < threshold) if better_below else (d >= threshold)
            if not ok:
                continue
            if best < 0 or (d < best_d if better_below else d > best_d):
                best, best_d = g, d
        if best >= 0:
            taken[best] = True
            pred_to_gt[p] = best
            flags.append(True)
        else:
            flags.append(False)
    return flags, pred_to_gt, order


def det_l(pred: Prediction, scene: Scene,
          thresholds=DET_L_THRESHOLDS) -> float:
    """Lane detection score: AP over Frechet thresholds, averaged."""
    n_pred, n_gt = len(pred.lanes), len(scene.lanes)
    if n_gt == 0:
        return 1.0 if n_pred == 0 else 0.0
    if n_pred == 0:
        return 0.0
    dist = np.empty((n_pred, n_gt))
    for p, lane in enumerate(pred.lanes):
        for g, gt in enumerate(scene.lanes):
            dist[p, g] = discrete_frechet(lane, gt)
    aps = []
    for thr in thresholds:
        flags, _, _ = greedy_match(dist, pred.lane_scores, thr)
        aps.append(average_precision(flags, n_gt))
    return float(np.mean(aps))


def det_t(pred: Prediction, scene: Scene, iou_threshold: float = DET_T_IOU) -> float:
    """Traffic detection score: per-category AP at the IoU threshold, averaged
    over the categories present in the ground truth."""
    cats = sorted({el.category for el in scene.traffic})
    if not cats:
        return 1.0 if not pred.traffic else 0.0
    aps = []
    for cat in cats:
        gts = [el for el in scene.traffic if el.category == cat]
        preds = [el for el in pred.traffic if el.category == cat]
        if not preds:
            aps.append(0.0)
            continue
        iou = np.empty((len(preds), len(gts)))
        for p, pe in enumerate(preds):
            for g, ge in enumerate(gts):
                iou[p, g] = box_iou(pe.bbox, ge.bbox)
        scores = np.array([el.score for el in preds], dtype=np.float64)
        flags, _, _ = greedy_match(iou, scores, iou_threshold, better_below=False)
        aps.append(average_precision(flags, len(gts)))
    return float(np.mean(aps))


def _vertex_ap(gt_row: np.ndarray, score_row: np.ndarray | None,
               col_to_gt: np.ndarray | None) -> float:
    """AP of one vertex's outgoing predicted edges against its GT edges.

    score_row is the matched prediction's score row (None when the vertex
    is unmatched); col_to_gt maps prediction columns to GT columns (-1 for
    unmatched endpoints, which makes their edges false positives).
    """
    n_gt_edges = int(gt_row.sum())
    if score_row is None:
        return 0.0
    cols = np.nonzero(score_row > 0.0)[0]
    if cols.size == 0:
        return 1.0 if n_gt_edges == 0 else 0.0
    order = cols[rank_by_score(score_row[cols])]
    flags = []
    for q in order:
        w = int(col_to_gt[q])
        flags.append(w >= 0 and gt_row[w] == 1.0)
    return average_precision(flags, n_gt_edges)


def top_score(pred: Prediction, scene: Scene, kind: str,
              frechet_threshold: float = TOP_FRECHET,
              iou_threshold: float = TOP_IOU) -> float:
    """Topology score over ground-truth vertices with outgoing edges.

    Lanes are matched by Frechet distance, traffic elements by IoU. Each
    qualifying vertex contributes the AP of its ranked predicted edges; the
    score is the mean over vertices.
    """
    if kind not in ("ll", "lt"):
        raise ValueError(f"kind must be 'll' or 'lt', got {kind!r}")
    n_pred, n_gt = len(pred.lanes), len(scene.lanes)

    lane_map_gt = np.full(n_gt, -1)  # gt lane -> pred lane
    if n_pred and n_gt:
        dist = np.empty((n_pred, n_gt))
        for p, lane in enumerate(pred.lanes):
            for g, gt in enumerate(scene.lanes):
                dist[p, g] = discrete_frechet(lane, gt)
        _, pred_to_gt, _ = greedy_match(dist, pred.lane_scores, frechet_threshold)
        for p, g in enumerate(pred_to_gt):
            if g >= 0:
                lane_map_gt[g] = p
    lane_col_to_gt = np.full(n_pred, -1)
    for g, p in enumerate(lane_map_gt):
        if p >= 0:
            lane_col_to_gt[p] = g

    if kind == "ll":
        gt_adj = scene.topo.ll
        score_mat = pred.topo.ll
        col_to_gt = lane_col_to_gt
    else:
        gt_adj = scene.topo.lt
        score_mat = pred.topo.lt
        n_pt, n_gtt = len(pred.traffic), len(scene.traffic)
        col_to_gt = np.full(n_pt, -1)
        if n_pt and n_gtt:
            iou = np.empty((n_pt, n_gtt))
            for p, pe in enumerate(pred.traffic):
                for g, ge in enumerate(scene.traffic):
                    same = pe.category == ge.category
                    iou[p, g] = box_iou(pe.bbox, ge.bbox) if same else -1.0
            scores = np.array([el.score if el.score is not None else 0.0
                               for el in pred.traffic])
            _, t_pred_to_gt, _ = greedy_match(iou, scores, iou_threshold,
                                              better_below=False)
            col_to_gt = t_pred_to_gt

    vertices = [v for v in range(n_gt) if gt_adj[v].sum() > 0]
    if not vertices:
        any_edge = score_mat.size and float(np.max(score_mat)) > 0.0
        return 0.0 if any_edge else 1.0

    aps = []
    for v in vertices:
        p = int(lane_map_gt[v])
        row = score_mat[p] if p >= 0 else None
        aps.append(_vertex_ap(gt_adj[v], row, col_to_gt))
    return float(np.mean(aps))


def ols(det_l_score: float, det_t_score: float, top_ll_score: float,
        top_lt_score: float) -> float:
    """Overall score: mean of the detection scores and the square roots of
    the topology scores."""
    return 0.25 * (det_l_score + det_t_score
                   + np.sqrt(top_ll_score) + np.sqrt(top_lt_score))


def lane_segment_distance(a: LaneSegment, b: LaneSegment) -> float:
    """Mean of the boundary Chamfer distance and the centerline Frechet distance.

    The boundary term concatenates left and right boundary points on each
    side before the Chamfer computation.
    """
    ab = np.concatenate([a.left.points, a.right.points])
    bb = np.concatenate([b.left.points, b.right.points])
    d_lr = chamfer(ab, bb)
    d_c = discrete_frechet(a.centerline.points, b.centerline.points)
    return 0.5 * (d_lr + d_c)


def lane_segment_metrics(preds: list[LaneSegment], scores, gts: list[LaneSegment],
                         pred_topo: np.ndarray | None = None,
                         gt_topo: np.ndarray | None = None,
                         thresholds=LS_THRESHOLDS,
                         top_threshold: float = LS_TOP_THRESHOLD) -> LaneSegmentReport:
    """Per-category AP over lane-segment distance thresholds, plus the
    segment-to-segment topology score when adjacency is supplied.

    Categories absent from the ground truth report None and are excluded
    from the mean.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.shape[0] != len(preds):
        raise ValueError(f"{len(preds)} segments but {scores.shape[0]} scores")

    dist = np.empty((len(preds), len(gts)))
    for p, ps in enumerate(preds):
        for g, gs in enumerate(gts):
            dist[p, g] = lane_segment_distance(ps, gs) \
                if ps.category == gs.category else np.inf

    per_cat: dict[str, float | None] = {}
    for cat in LS_CATEGORIES:
        g_idx = [g for g, seg in enumerate(gts) if seg.category == cat]
        p_idx = [p for p, seg in enumerate(preds) if seg.category == cat]
        if not g_idx:
            per_cat[cat] = None if not p_idx else 0.0
            continue
        if not p_idx:
            per_cat[cat] = 0.0
            continue
        sub = dist[np.ix_(p_idx, g_idx)]
        sub_scores = scores[p_idx]
        aps = []
        for thr in thresholds:
            flags, _, _ = greedy_match(sub, sub_scores, thr)
            aps.append(average_precision(flags, len(g_idx)))
        per_cat[cat] = float(np.mean(aps))

    present = [v for v in per_cat.values() if v is not None]
    mean_ap = float(np.mean(present)) if present else 1.0

    top_lsls = None
    if pred_topo is not None and gt_topo is not None:
        top_lsls = _top_segments(preds, scores, gts, dist, pred_topo, gt_topo,
                                 top_threshold)

    return LaneSegmentReport(map=mean_ap, ap_lane=per_cat["lane"],
                             ap_ped=per_cat["pedestrian_crossing"],
                             top_lsls=top_lsls)


def _top_segments(preds, scores, gts, dist, pred_topo, gt_topo, threshold) -> float:
    n_pred, n_gt = dist.shape
    gt_to_pred = np.full(n_gt, -1)
    if n_pred and n_gt:
        _, pred_to_gt, _ = greedy_match(dist, scores, threshold)
        for p, g in enumerate(pred_to_gt):
            if g >= 0:
                gt_to_pred[g] = p
    col_to_gt = np.full(n_pred, -1)
    for g, p in enumerate(gt_to_pred):
        if p >= 0:
            col_to_gt[p] = g

    vertices = [v for v in range(n_gt) if gt_topo[v].sum() > 0]
    if not vertices:
        any_edge = pred_topo.size and float(np.max(pred_topo)) > 0.0
        return 0.0 if any_edge else 1.0
    aps = []
    for v in vertices:
        p = int(gt_to_pred[v])
        row = pred_topo[p] if p >= 0 else None
        aps.append(_vertex_ap(gt_topo[v], row, col_to_gt))
    return float(np.mean(aps))


def evaluate(pred: Prediction, scene: Scene,
             det_l_thresholds=DET_L_THRESHOLDS,
             det_t_iou: float = DET_T_IOU,
             top_frechet: float = TOP_FRECHET,
             top_iou: float = TOP_IOU,
             lane_segments: tuple | None = None) -> MetricReport:
    """Full metric report for one scene.

    lane_segments, when given, is (pred_segments, pred_scores, gt_segments,
    pred_topo, gt_topo) and fills the optional lane-segment block.
    """
    d_l = det_l(pred, scene, det_l_thresholds)
    d_t = det_t(pred, scene, det_t_iou)
    t_ll = top_score(pred, scene, "ll", top_frechet, top_iou)
    t_lt = top_score(pred, scene, "lt", top_frechet, top_iou)
    block = None
    if lane_segments is not None:
        p_segs, p_scores, g_segs, p_topo, g_topo = lane_segments
        block = lane_segment_metrics(p_segs, p_scores, g_segs, p_topo, g_topo)
    return MetricReport(det_l=d_l, det_t=d_t, top_ll=t_ll, top_lt=t_lt,
                        ols=float(ols(d_l, d_t, t_ll, t_lt)),
                        lane_segments=block)
