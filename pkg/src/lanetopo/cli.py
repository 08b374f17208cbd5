"""Command-line harness.

Subcommands: synth, connected, predict, eval, gradcheck, fitdemo. Every
file-writing command also writes a <output>.manifest.json recording the
command, parameters, seeds, and input/output hashes, so runs can be
reproduced and compared byte for byte (manifest equality ignores wall time).

Exit codes: 0 success, 1 check failure (gradcheck exceedance, fitdemo miss),
2 input or contract error (schema violations are printed one per line).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from .attention import ModelDims
from .connect import build_connected_gt
from .geometry import widen_to_segment
from .gradcheck import run_gradcheck
from .metrics import (
    DET_L_THRESHOLDS,
    DET_T_IOU,
    TOP_FRECHET,
    TOP_IOU,
    LaneSegmentReport,
    MetricReport,
    evaluate,
)
from .pipeline import PipelineConfig, run_pipeline
from .serialize import (
    TOOL_VERSION,
    SchemaError,
    build_manifest,
    connected_list_to_dict,
    prediction_to_dict,
    read_json,
    read_prediction,
    read_scene,
    report_to_dict,
    scene_to_dict,
    write_json,
    write_manifest,
    write_metrics_csv,
)
from .synth import NoiseParams, SynthParams, generate_roundabout, generate_scene
from .training import GroupConfig, LossWeights, toy_fit

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


def _data_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.glob("*.json")
                  if not p.name.endswith(".manifest.json"))


def _default_workers() -> int:
    return min(8, os.cpu_count() or 1)


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    if args.kind == "grid":
        params = SynthParams(
            n_corridors=args.corridors, n_segments=args.segments,
            segment_length=args.segment_length, lane_spacing=args.spacing,
            split_prob=args.split_prob, merge_prob=args.merge_prob,
            n_points=args.n_points, n_traffic=args.traffic,
            grade=args.grade, seed=args.seed,
        )
        scene = generate_scene(params)
        manifest_params = {f.name: getattr(params, f.name)
                           for f in dataclass_fields(params)}
    else:
        scene = generate_roundabout(radius=args.radius, n_arms=args.arms,
                                    n_points=args.n_points, seed=args.seed)
        manifest_params = {"kind": "roundabout", "radius": args.radius,
                           "n_arms": args.arms, "n_points": args.n_points}
    write_json(args.out, scene_to_dict(scene))
    write_manifest(args.out, build_manifest(
        "synth", manifest_params, {"seed": args.seed}, [], [args.out],
        time.perf_counter() - t0))
    print(f"wrote {args.out}: {len(scene.lanes)} lanes, "
          f"{len(scene.traffic)} traffic elements, "
          f"{int(scene.topo.ll.sum())} lane-lane edges")
    return EXIT_OK


def cmd_connected(args) -> int:
    t0 = time.perf_counter()
    scene = read_scene(args.scene)
    conn = build_connected_gt(scene)
    write_json(args.out, connected_list_to_dict(conn))
    write_manifest(args.out, build_manifest(
        "connected", {}, {}, [args.scene], [args.out],
        time.perf_counter() - t0))
    print(f"wrote {args.out}: {len(conn)} connected lanes")
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        dims=ModelDims(c=args.channels, n_heads=args.heads),
        n_lane_queries=args.lane_queries,
        n_traffic_queries=args.traffic_queries,
        param_seed=args.param_seed,
        source=args.source,
        noise=NoiseParams(
            point_sigma=args.point_sigma, drop_rate=args.drop_rate,
            spurious_rate=args.spurious_rate, score_noise=args.score_noise,
            topo_flip_rate=args.topo_flip_rate,
        ),
        noise_seed=args.noise_seed,
        use_tam=not args.no_tam,
    )


def _predict_one(scene_path: Path, out_path: Path, cfg: PipelineConfig,
                 manifest_params: dict) -> str:
    t0 = time.perf_counter()
    scene = read_scene(scene_path)
    pred = run_pipeline(scene, cfg)
    write_json(out_path, prediction_to_dict(pred))
    write_manifest(out_path, build_manifest(
        "predict", manifest_params,
        {"param_seed": cfg.param_seed, "noise_seed": cfg.noise_seed},
        [scene_path], [out_path], time.perf_counter() - t0))
    return f"wrote {out_path}: {len(pred.lanes)} lanes"


def cmd_predict(args) -> int:
    cfg = _pipeline_config(args)
    manifest_params = {
        "channels": args.channels, "heads": args.heads,
        "lane_queries": args.lane_queries, "traffic_queries": args.traffic_queries,
        "source": args.source, "use_tam": not args.no_tam,
        "point_sigma": args.point_sigma, "drop_rate": args.drop_rate,
        "spurious_rate": args.spurious_rate, "score_noise": args.score_noise,
        "topo_flip_rate": args.topo_flip_rate,
    }
    scene_path = Path(args.scene)
    out_path = Path(args.out)
    if scene_path.is_dir():
        files = _data_files(scene_path)
        if not files:
            raise ValueError(f"no scene files in {scene_path}")
        out_path.mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_predict_one, f, out_path / f.name, cfg,
                                   manifest_params) for f in files]
            for fut in futures:
                print(fut.result())
    else:
        print(_predict_one(scene_path, out_path, cfg, manifest_params))
    return EXIT_OK


def _eval_one(pred_path: Path, gt_path: Path, args) -> MetricReport:
    scene = read_scene(gt_path)
    pred = read_prediction(pred_path)
    segments = (
        [widen_to_segment(l, args.lane_width) for l in pred.lanes],
        pred.lane_scores,
        [widen_to_segment(l, args.lane_width) for l in scene.lanes],
        pred.topo.ll,
        scene.topo.ll,
    )
    return evaluate(
        pred, scene,
        det_l_thresholds=tuple(args.det_thresholds),
        det_t_iou=args.det_iou,
        top_frechet=args.top_frechet,
        top_iou=args.top_iou,
        lane_segments=segments,
    )


def _mean_report(reports: list[MetricReport]) -> MetricReport:
    def avg(values):
        present = [v for v in values if v is not None]
        return float(np.mean(present)) if present else None

    blocks = [r.lane_segments for r in reports if r.lane_segments is not None]
    block = None
    if blocks:
        block = LaneSegmentReport(
            map=avg([b.map for b in blocks]),
            ap_lane=avg([b.ap_lane for b in blocks]),
            ap_ped=avg([b.ap_ped for b in blocks]),
            top_lsls=avg([b.top_lsls for b in blocks]),
        )
    return MetricReport(
        det_l=avg([r.det_l for r in reports]),
        det_t=avg([r.det_t for r in reports]),
        top_ll=avg([r.top_ll for r in reports]),
        top_lt=avg([r.top_lt for r in reports]),
        ols=avg([r.ols for r in reports]),
        lane_segments=block,
    )


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    pred_path = Path(args.pred)
    gt_path = Path(args.gt)
    if pred_path.is_dir() != gt_path.is_dir():
        raise ValueError("pred and gt must both be files or both be directories")

    if pred_path.is_dir():
        pred_files = _data_files(pred_path)
        if not pred_files:
            raise ValueError(f"no prediction files in {pred_path}")
        jobs = []
        for pf in pred_files:
            gf = gt_path / pf.name
            if not gf.exists():
                raise ValueError(f"no ground-truth file for {pf.name} in {gt_path}")
            jobs.append((pf, gf))
    else:
        jobs = [(pred_path, gt_path)]

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = [pool.submit(_eval_one, pf, gf, args) for pf, gf in jobs]
        rows = [(pf.stem, fut.result()) for (pf, _), fut in zip(jobs, futures)]

    mean = _mean_report([r for _, r in rows])
    doc = {
        "version": 1,
        "scenes": {name: report_to_dict(r) for name, r in rows},
        "mean": report_to_dict(mean),
    }
    out_json = Path(args.out)
    write_json(out_json, doc)
    csv_rows = list(rows) + ([("mean", mean)] if len(rows) > 1 else [])
    out_csv = Path(args.csv) if args.csv else out_json.with_suffix(".csv")
    write_metrics_csv(out_csv, csv_rows)
    inputs = sorted({str(p) for pair in jobs for p in pair})
    write_manifest(out_json, build_manifest(
        "eval",
        {"det_thresholds": list(args.det_thresholds), "det_iou": args.det_iou,
         "top_frechet": args.top_frechet, "top_iou": args.top_iou,
         "lane_width": args.lane_width},
        {}, inputs, [out_json, out_csv], time.perf_counter() - t0))
    for name, r in rows:
        print(f"{name}: DET_l {r.det_l:.4f}  DET_t {r.det_t:.4f}  "
              f"TOP_ll {r.top_ll:.4f}  TOP_lt {r.top_lt:.4f}  OLS {r.ols:.4f}")
    if len(rows) > 1:
        print(f"mean: OLS {mean.ols:.4f} over {len(rows)} scenes")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    t0 = time.perf_counter()
    results = run_gradcheck(seed=args.seed, instances=args.instances,
                            eps=args.eps, corrupt=args.corrupt)
    by_op: dict[str, list] = {}
    for r in results:
        by_op.setdefault(r.op, []).append(r)

    print(f"{'op':<24} {'instances':>9} {'max rel err':>12}  status")
    checked = [r for r in results if not r.skipped]
    overall = max((r.max_rel_error for r in checked), default=0.0)
    for op, rs in by_op.items():
        live = [r for r in rs if not r.skipped]
        worst = max((r.max_rel_error for r in live), default=0.0)
        status = "ok" if worst < args.tol else "FAIL"
        if len(live) < len(rs):
            status += f" ({len(rs) - len(live)} skipped)"
        print(f"{op:<24} {len(rs):>9} {worst:>12.3e}  {status}")

    passed = bool(checked) and overall < args.tol
    print(f"max relative error {overall:.3e} (tolerance {args.tol:g}) -> "
          f"{'pass' if passed else 'FAIL'}")

    doc = {
        "version": 1, "seed": args.seed, "instances": args.instances,
        "eps": args.eps, "tol": args.tol,
        "ops": [{"op": r.op, "max_rel_error": r.max_rel_error,
                 "n_entries": r.n_entries, "skipped": r.skipped,
                 "note": r.note} for r in results],
        "max_rel_error": overall, "pass": passed,
    }
    write_json(args.out, doc)
    write_manifest(args.out, build_manifest(
        "gradcheck",
        {"instances": args.instances, "eps": args.eps, "tol": args.tol,
         "corrupt": args.corrupt},
        {"seed": args.seed}, [], [args.out], time.perf_counter() - t0))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _load_weights(path) -> LossWeights:
    d = read_json(path)
    names = {f.name for f in dataclass_fields(LossWeights)}
    unknown = set(d) - names
    if unknown:
        raise SchemaError([f"weights: unknown key '{k}'" for k in sorted(unknown)])
    return LossWeights(**{k: float(v) for k, v in d.items()})


def cmd_fitdemo(args) -> int:
    t0 = time.perf_counter()
    scene = read_scene(args.scene)
    weights = _load_weights(args.weights) if args.weights else LossWeights()
    result = toy_fit(scene, steps=args.steps, lr=args.lr, seed=args.seed,
                     group=GroupConfig(k=args.groups))

    lines = ["step,loss"]
    lines += [f"{k},{loss:.9g}" for k, loss in enumerate(result.losses)]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(args.out, build_manifest(
        "fitdemo",
        {"steps": args.steps, "lr": args.lr, "groups": args.groups,
         "max_loss": args.max_loss,
         "weights": {f.name: getattr(weights, f.name)
                     for f in dataclass_fields(weights)}},
        {"seed": args.seed}, [args.scene], [args.out],
        time.perf_counter() - t0))

    final = result.losses[-1]
    if not np.isfinite(final):
        print(f"fit diverged: final loss {final!r}")
        return EXIT_CHECK_FAILED
    print(f"wrote {args.out}: {len(result.losses)} steps, "
          f"loss {result.losses[0]:.6f} -> {final:.6f}")
    if final < args.max_loss:
        return EXIT_OK
    print(f"final loss {final:.6f} did not reach {args.max_loss:g}")
    return EXIT_CHECK_FAILED


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None
    if not values:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanetopo",
        description="Lane-graph topology toolkit: synthetic scenes, "
                    "connected-lane construction, topology prediction, metrics.",
    )
    parser.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth scene")
    p.add_argument("--kind", choices=("grid", "roundabout"), default="grid")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-points", type=int, default=11)
    p.add_argument("--corridors", type=int, default=2)
    p.add_argument("--segments", type=int, default=2)
    p.add_argument("--segment-length", type=float, default=20.0)
    p.add_argument("--spacing", type=float, default=4.0)
    p.add_argument("--split-prob", type=float, default=0.3)
    p.add_argument("--merge-prob", type=float, default=0.2)
    p.add_argument("--traffic", type=int, default=3)
    p.add_argument("--grade", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=20.0, help="roundabout only")
    p.add_argument("--arms", type=int, default=4, help="roundabout only")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("connected", help="build ground-truth connected lanes")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_connected)

    p = sub.add_parser("predict", help="run the pipeline on a scene or directory")
    p.add_argument("--scene", required=True, help="scene file or directory")
    p.add_argument("--out", required=True, help="output file or directory")
    p.add_argument("--source", choices=("gt", "perturbed"), default="gt")
    p.add_argument("--param-seed", type=int, default=0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--point-sigma", type=float, default=0.0)
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--spurious-rate", type=float, default=0.0)
    p.add_argument("--score-noise", type=float, default=0.0)
    p.add_argument("--topo-flip-rate", type=float, default=0.0)
    p.add_argument("--no-tam", action="store_true",
                   help="ablation: skip the masked cross-attention")
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--lane-queries", type=int, default=300)
    p.add_argument("--traffic-queries", type=int, default=100)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="prediction file or directory")
    p.add_argument("--gt", required=True, help="scene file or directory")
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", default=None, help="CSV path (default: out with .csv)")
    p.add_argument("--det-thresholds", type=_comma_floats,
                   default=DET_L_THRESHOLDS, metavar="T1,T2,T3")
    p.add_argument("--det-iou", type=float, default=DET_T_IOU)
    p.add_argument("--top-frechet", type=float, default=TOP_FRECHET)
    p.add_argument("--top-iou", type=float, default=TOP_IOU)
    p.add_argument("--lane-width", type=float, default=1.75,
                   help="width used to widen centerlines into lane segments")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out", default="gradcheck_report.json")
    p.add_argument("--corrupt", default=None, metavar="OP",
                   help="fault injection: offset OP's analytic gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("fitdemo", help="fit the topology head to one scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="loss-trajectory CSV path")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", type=int, default=1)
    p.add_argument("--max-loss", type=float, default=0.05)
    p.add_argument("--weights", default=None,
                   help="LossWeights JSON, recorded in the manifest")
    p.set_defaults(func=cmd_fitdemo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as err:
        for v in err.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except json.JSONDecodeError as err:
        print(f"error: invalid JSON: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
