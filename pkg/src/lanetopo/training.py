"""Training machinery: losses, assignment, group strategy, and a toy fit loop.

The loss tree mirrors the detection stack: per-task losses (lane, traffic,
lane-lane topology, lane-traffic topology) combine with fixed weights, and
each query group is assigned to ground truth independently with a Hungarian
matcher, unmatched queries supervised as negatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .attention import (
    CrossAttentionParams,
    ModelDims,
    SigmoidMaskParams,
    masked_cross_attention_backward,
    masked_cross_attention_forward,
    sigmoid_mask_backward,
    sigmoid_mask_forward,
)
from .connect import build_connected_gt, correlation_distances
from .features import GeometryEncoder, lane_values
from .heads import TopologyHeadParams, match_connected, predict_ll_backward, predict_ll_cached
from .nn import mlp_grad_vars
from .scene import Scene

FOCAL_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Task weights and within-task term weights."""

    lane: float = 1.0
    traffic: float = 1.0
    ll: float = 5.0
    lt: float = 5.0
    lane_cls: float = 1.5
    lane_reg: float = 0.025
    traffic_cls: float = 1.2
    traffic_reg: float = 3.0
    traffic_iou: float = 1.2


@dataclass(frozen=True)
class GroupConfig:
    """Query-group replication: k groups, optionally with per-group feature seeds."""

    k: int = 6
    seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"group count must be >= 1, got {self.k}")
        if self.seeds is not None and len(self.seeds) != self.k:
            raise ValueError(f"need {self.k} per-group seeds, got {len(self.seeds)}")


def focal_loss(pred, target, alpha: float = 0.25, gamma: float = 2.0,
               reduction: str = "mean"):
    """Binary focal loss. Predictions are clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(pred, dtype=np.float64), FOCAL_CLAMP, 1.0 - FOCAL_CLAMP)
    t = np.asarray(target, dtype=np.float64)
    p_t = np.where(t == 1.0, p, 1.0 - p)
    a_t = np.where(t == 1.0, alpha, 1.0 - alpha)
    loss = -a_t * (1.0 - p_t) ** gamma * np.log(p_t)
    if reduction == "mean":
        return float(loss.mean()) if loss.size else 0.0
    if reduction == "sum":
        return float(loss.sum())
    return loss


def focal_loss_grad(pred, target, alpha: float = 0.25, gamma: float = 2.0):
    """Elementwise d(focal)/d(pred). Zero where the clamp is active."""
    raw = np.asarray(pred, dtype=np.float64)
    p = np.clip(raw, FOCAL_CLAMP, 1.0 - FOCAL_CLAMP)
    t = np.asarray(target, dtype=np.float64)
    pos = t == 1.0
    one_m_p = 1.0 - p
    g_pos = alpha * (gamma * one_m_p ** (gamma - 1.0) * np.log(p) - one_m_p ** gamma / p)
    g_neg = (1.0 - alpha) * (p ** gamma / one_m_p - gamma * p ** (gamma - 1.0) * np.log(one_m_p))
    g = np.where(pos, g_pos, g_neg)
    inside = (raw > FOCAL_CLAMP) & (raw < 1.0 - FOCAL_CLAMP)
    return g * inside


def l1_loss(a, b) -> float:
    """Mean absolute difference over all coordinates of two point sets."""
    pa = a.points if hasattr(a, "points") else np.asarray(a, dtype=np.float64)
    pb = b.points if hasattr(b, "points") else np.asarray(b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise ValueError(f"shapes differ: {pa.shape} vs {pb.shape}")
    return float(np.abs(pa - pb).mean()) if pa.size else 0.0


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment of min(n, m) pairs, sorted by row.

    Rectangular inputs are padded to square with a large constant
    (10x the largest magnitude), and pad pairs are dropped from the result;
    the constant padding leaves the real sub-assignment unchanged.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2D, got shape {cost.shape}")
    n, m = cost.shape
    if n == 0 or m == 0:
        return []
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix has non-finite entries")
    if n != m:
        side = max(n, m)
        pad = 10.0 * max(1.0, float(np.abs(cost).max()))
        square = np.full((side, side), pad)
        square[:n, :m] = cost
        cost = square
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if r < n and c < m]
    pairs.sort()
    return pairs


def assignment_cost(cost, pairs) -> float:
    return float(sum(cost[r][c] for r, c in pairs))


def match_group(scores, pred_lanes, gt_lanes, weights: LossWeights = LossWeights()):
    """Assign one query group to ground truth and compute its lane loss.

    Cost of (query p, gt g) is lane_cls * focal(score_p, 1) +
    lane_reg * l1(lane_p, lane_g). Matched queries are supervised as
    positives with the regression term; unmatched queries as negatives.
    Returns (pairs, loss).
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    n_pred, n_gt = len(scores), len(gt_lanes)
    if len(pred_lanes) != n_pred:
        raise ValueError(f"{n_pred} scores but {len(pred_lanes)} lanes")

    if n_pred == 0:
        return [], 0.0

    if n_gt == 0:
        loss = weights.lane_cls * focal_loss(scores, np.zeros(n_pred))
        return [], float(loss)

    cost = np.empty((n_pred, n_gt))
    pos_cost = focal_loss(scores, np.ones(n_pred), reduction="none")
    for p in range(n_pred):
        for g in range(n_gt):
            cost[p, g] = weights.lane_cls * pos_cost[p] \
                + weights.lane_reg * l1_loss(pred_lanes[p], gt_lanes[g])

    pairs = hungarian(cost)
    targets = np.zeros(n_pred)
    for p, _ in pairs:
        targets[p] = 1.0
    loss_cls = focal_loss(scores, targets)
    loss_reg = float(np.mean([l1_loss(pred_lanes[p], gt_lanes[g]) for p, g in pairs]))
    loss = weights.lane_cls * loss_cls + weights.lane_reg * loss_reg
    return pairs, float(loss)


def lane_loss(cls_term: float, reg_term: float, weights: LossWeights = LossWeights()) -> float:
    return weights.lane_cls * cls_term + weights.lane_reg * reg_term


def traffic_loss(cls_term: float, reg_term: float, iou_term: float,
                 weights: LossWeights = LossWeights()) -> float:
    return weights.traffic_cls * cls_term + weights.traffic_reg * reg_term \
        + weights.traffic_iou * iou_term


def total_loss(lane: float, traffic: float, ll: float, lt: float,
               weights: LossWeights = LossWeights()) -> float:
    """Top-level combination of the four task losses."""
    return weights.lane * lane + weights.traffic * traffic \
        + weights.ll * ll + weights.lt * lt


def sum_group_losses(losses) -> float:
    """Group strategy total: exact sum of per-group losses."""
    return math.fsum(float(v) for v in losses)


@dataclass
class FitResult:
    losses: list[float]
    mask_params: SigmoidMaskParams
    tam_params: CrossAttentionParams
    head_params: TopologyHeadParams
    final_scores: np.ndarray
    target: np.ndarray

    def variables(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.mask_params.variables("mask"))
        out.update(self.tam_params.variables("tam"))
        out.update(self.head_params.variables())
        return out


def toy_fit(scene: Scene, steps: int = 500, lr: float = 0.05, seed: int = 0,
            group: GroupConfig | None = None,
            dims: ModelDims = ModelDims(c=16, n_heads=4)) -> FitResult:
    """Fit the mask, cross-attention, and topology-head parameters to one scene.

    Plain gradient descent against the ground-truth lane-lane adjacency with
    a focal loss over the off-diagonal score entries. Query features are
    fixed seeded geometry encodings; with k replicated groups the recorded
    loss is the group-strategy sum and gradients accumulate over groups.
    """
    group = group or GroupConfig(k=1)
    rng = np.random.default_rng(seed)
    connected = build_connected_gt(scene)
    pairs = match_connected(scene.lanes, connected)
    d = correlation_distances(scene.lanes, connected)
    n = len(scene.lanes)
    target = scene.topo.ll.copy()
    off_diag = ~np.eye(n, dtype=bool)
    n_terms = int(off_diag.sum())
    if n_terms == 0:
        raise ValueError("scene has no off-diagonal lane pairs to supervise")

    mask_params = SigmoidMaskParams.init(dims.c, rng)
    tam_params = CrossAttentionParams.init(dims, rng)
    head_params = TopologyHeadParams.init(dims.c, rng)

    lane_vals = lane_values(scene.lanes)
    conn_vals = lane_values([c.curve for c in connected])

    def group_features(g: int):
        s = group.seeds[g] if group.seeds is not None else seed
        enc_rng = np.random.default_rng(s)
        enc_lane = GeometryEncoder.init(lane_vals.shape[1], dims.c, enc_rng)
        enc_conn = GeometryEncoder.init(conn_vals.shape[1], dims.c, enc_rng)
        qc = enc_conn.encode(conn_vals) if connected else np.zeros((0, dims.c))
        return enc_lane.encode(lane_vals), qc

    feats = [group_features(g) for g in range(group.k)]

    losses: list[float] = []
    use_tam = len(connected) > 0
    scores = np.zeros((n, n))
    for _ in range(steps):
        group_losses = []
        acc: dict[str, np.ndarray] = {}
        for q, qc in feats:
            if use_tam:
                s_mask, cache_s = sigmoid_mask_forward(mask_params, d)
                q_hat, cache_t = masked_cross_attention_forward(tam_params, q, qc, s_mask)
            else:
                q_hat = q
            scores, cache_h = predict_ll_cached(head_params, q_hat, qc, pairs)

            loss = focal_loss(scores[off_diag], target[off_diag])
            group_losses.append(loss)

            g_scores = np.zeros_like(scores)
            g_scores[off_diag] = focal_loss_grad(scores[off_diag], target[off_diag]) / n_terms
            gq_hat, _, head_grads = predict_ll_backward(
                head_params, cache_h, g_scores, len(connected))
            for k, v in head_grads.items():
                acc[k] = acc.get(k, 0.0) + v
            if use_tam:
                _, _, gs, tam_grads = masked_cross_attention_backward(
                    tam_params, cache_t, gq_hat)
                _, mask_grads = sigmoid_mask_backward(mask_params, cache_s, gs)
                for k, v in tam_grads.items():
                    acc[f"tam.{k}"] = acc.get(f"tam.{k}", 0.0) + v
                for k, v in mlp_grad_vars("mask", mask_grads).items():
                    acc[k] = acc.get(k, 0.0) + v

        losses.append(sum_group_losses(group_losses))

        params = {}
        params.update(head_params.variables())
        if use_tam:
            params.update(tam_params.variables("tam"))
            params.update(mask_params.variables("mask"))
        for name, grad in acc.items():
            params[name] -= lr * grad

    return FitResult(losses=losses, mask_params=mask_params, tam_params=tam_params,
                     head_params=head_params, final_scores=scores, target=target)
