"""Command-line surface: synth, render, train, classify, detect, evaluate.

Every subcommand is a pure function of its declared inputs. Exit codes:
0 success, 2 missing or malformed input, 3 config/checkpoint mismatch,
4 evaluation pairing error. ``--threads 1`` pins the BLAS pools before
numpy loads, which makes runs bitwise reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MISMATCH = 3
EXIT_PAIRING = 4

# Published full-scale benchmark results, recorded for side-by-side display
# in reports; desk-scale runs do not claim to reproduce them.
REFERENCE_RESULTS = {
    "classification_test_accuracy": {"two_stream_rgb_prgb": 0.873,
                                     "baseline": 0.864},
    "detection_test_iou": {"two_stream_rgb_prgb": 0.349, "baseline": 0.515},
    "detection_test_map": {"two_stream_rgb_prgb": 0.110, "baseline": 0.131},
}

# Size presets: "desk" trains in minutes on a CPU; "paper" mirrors the
# published full-scale architecture and schedule.
PROFILES = {
    "desk": {
        "model": {
            "filters": [4, 8, 8, 16, 16],
            "pool_sizes": [[2, 2, 2], [2, 2, 2], [2, 2, 2], [1, 1, 2], [1, 1, 2]],
            "input_size": [32, 32, 16, 3],
            "hidden_dim": 2048,
            "bias_init": 0.2,
        },
        "optimizer": {"epochs": 500},
    },
    "paper": {
        "model": {
            "filters": [32, 64, 128, 256, 512],
            "pool_sizes": [[4, 3, 2], [4, 3, 2], [2, 2, 2], [2, 2, 2], [2, 2, 2]],
            "input_size": [120, 120, 100, 3],
            "hidden_dim": 512,
        },
        "optimizer": {"learning_rate": 0.0001, "momentum": 0.5, "epochs": 2000},
    },
}


def _set_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(n)


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_json(path, what: str):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file {p} does not exist")
    with open(p, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _merge_profile(doc: dict, profile: str | None) -> dict:
    if not profile:
        return doc
    merged = dict(doc)
    for section, values in PROFILES[profile].items():
        block = dict(values)
        block.update(merged.get(section, {}))
        merged[section] = block
    return merged


def _run_config(args, task_override=None):
    from .training import RunConfig

    doc = _load_json(args.config, "config")
    doc = _merge_profile(doc, getattr(args, "profile", None))
    if task_override:
        doc["task"] = task_override
    return RunConfig.from_dict(doc)


def _decision_override(run, args):
    from .decision import DecisionMethod

    variant = args.decision or run.decision.variant
    sigma = args.sigma if args.sigma is not None else run.decision.sigma
    stride = args.stride if args.stride is not None else run.decision.stride
    run.decision = DecisionMethod(variant, sigma=sigma, stride=stride)


def _emit(doc: dict, out_path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    print(text, end="")


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    from .data import SyntheticSpec, write_synthetic_dataset

    try:
        doc = _load_json(args.spec, "synthetic spec")
        spec = SyntheticSpec.from_dict(doc)
        if args.seed is not None:
            spec.seed = args.seed
        manifest = write_synthetic_dataset(spec, args.out)
    except (FileNotFoundError, ValueError, OSError, TypeError, KeyError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    print(json.dumps({"out": str(args.out), "videos": len(manifest["videos"]),
                      "files": len(manifest["files"])}))
    return EXIT_OK


def cmd_render(args) -> int:
    import numpy as np
    from PIL import Image

    from .data import FRAME_PATTERN, load_frame_sequence
    from .pose import (BLACK, OVERLAY, SkeletonSpec, compose_frame,
                       parse_keypoint_stream)

    mode = {"black": BLACK, "overlay": OVERLAY}[args.mode]
    try:
        seq = load_frame_sequence(args.frames)
        poses = parse_keypoint_stream(args.poses)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    spec = SkeletonSpec(line_thickness=args.thickness,
                        keypoint_radius=args.radius)
    count = seq.frame_count
    if len(poses) != seq.frame_count:
        count = min(len(poses), seq.frame_count)
        print(f"warning: {seq.frame_count} frames vs {len(poses)} pose frames; "
              f"rendering {count}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        frame = (seq.read_frames([i])[0] * 255.0 + 0.5).astype(np.uint8)
        img = compose_frame(mode, frame, poses[i], spec)
        Image.fromarray(img).save(out / FRAME_PATTERN.format(i))
    print(json.dumps({"out": str(out), "frames": count, "mode": args.mode}))
    return EXIT_OK


def cmd_train(args) -> int:
    from .training import TrainingDiverged, train

    try:
        run = _run_config(args)
    except (FileNotFoundError, ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_INPUT, f"bad config: {exc}")
    try:
        summary = train(run, progress=_progress_printer(args.quiet))
    except TrainingDiverged as exc:
        return _fail(1, str(exc))
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    print(json.dumps({key: summary[key] for key in
                      ("final_checkpoint", "best_checkpoint", "log", "epochs_run")}))
    return EXIT_OK


def cmd_classify(args) -> int:
    from .model import CheckpointMismatch, load_checkpoint
    from .training import load_video

    try:
        run = _run_config(args, task_override="classify")
        _decision_override(run, args)
    except (FileNotFoundError, ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_INPUT, f"bad config: {exc}")
    try:
        net = load_checkpoint(args.checkpoint, expected_config=run.model)
    except CheckpointMismatch as exc:
        return _fail(EXIT_MISMATCH, str(exc))
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    from .training import classify_clip

    try:
        video = load_video(args.clip, run.streams)
        probs, label, n_windows = classify_clip(net, video, run)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    _emit({
        "video": video.name,
        "label": int(label),
        "probs": [float(p) for p in probs],
        "method": run.decision.variant,
        "windows": n_windows,
    }, args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    from .model import CheckpointMismatch, load_checkpoint
    from .training import detect_video, load_video

    try:
        run = _run_config(args, task_override="detect")
        _decision_override(run, args)
        if args.threshold is not None:
            if not 0.0 < args.threshold < 1.0:
                raise ValueError(f"threshold must lie in (0,1), got {args.threshold}")
            run.threshold = args.threshold
        if args.min_length is not None:
            run.min_length = args.min_length
    except (FileNotFoundError, ValueError, TypeError, KeyError) as exc:
        return _fail(EXIT_INPUT, f"bad config: {exc}")
    try:
        net = load_checkpoint(args.checkpoint, expected_config=run.model)
    except CheckpointMismatch as exc:
        return _fail(EXIT_MISMATCH, str(exc))
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    try:
        video = load_video(args.video, run.streams)
        segments, _, n_windows = detect_video(net, video, run)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    if n_windows == 0:
        print(f"warning: video has {video.frame_count} frames, shorter than "
              f"one {run.model.input_size[2]}-frame window; no segments",
              file=sys.stderr)
    _emit({
        "video": video.name,
        "segments": [{"begin": s.begin, "end": s.end, "label": s.label,
                      "score": s.score} for s in segments],
        "method": run.decision.variant,
        "windows": n_windows,
    }, args.out)
    return EXIT_OK


def _load_segments(doc):
    from .decision import Segment

    return [Segment(int(s["begin"]), int(s["end"]), int(s.get("label", 1)),
                    float(s.get("score", 1.0)))
            for s in doc.get("segments", [])]


def cmd_evaluate(args) -> int:
    from .decision import classification_metrics, map_score, matched_iou_stats

    try:
        pred_doc = _load_json(args.pred, "prediction")
        gt_doc = _load_json(args.gt, "ground truth")
    except (FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))

    if args.task == "classify":
        pred_items = {item["video"]: int(item["label"])
                      for item in pred_doc.get("items", [])}
        gt_items = {item["video"]: int(item["label"])
                    for item in gt_doc.get("items", [])}
        if set(pred_items) != set(gt_items):
            only_pred = sorted(set(pred_items) - set(gt_items))
            only_gt = sorted(set(gt_items) - set(pred_items))
            return _fail(EXIT_PAIRING,
                         f"video names do not pair up (prediction-only: "
                         f"{only_pred}, ground-truth-only: {only_gt})")
        names = sorted(gt_items)
        labels = [gt_items[n] for n in names] + [pred_items[n] for n in names]
        num_classes = max(labels) + 1 if labels else 1
        accuracy, confusion = classification_metrics(
            [pred_items[n] for n in names], [gt_items[n] for n in names],
            num_classes)
        report = {
            "task": "classify",
            "videos": len(names),
            "accuracy": accuracy,
            "confusion": confusion.tolist(),
        }
    else:
        if pred_doc.get("video") != gt_doc.get("video"):
            return _fail(EXIT_PAIRING,
                         f"video names do not pair up: prediction is for "
                         f"{pred_doc.get('video')!r}, ground truth for "
                         f"{gt_doc.get('video')!r}")
        try:
            preds = _load_segments(pred_doc)
            gts = _load_segments(gt_doc)
        except (ValueError, KeyError) as exc:
            return _fail(EXIT_INPUT, f"bad segment: {exc}")
        # detection is the binary stroke task: labels are not matched
        preds = [type(s)(s.begin, s.end, 1, s.score) for s in preds]
        gts = [type(s)(s.begin, s.end, 1, s.score) for s in gts]
        mean_matched, mean_over_gt = matched_iou_stats(preds, gts, 0.5)
        mean_ap, per_threshold = map_score(preds, gts)
        report = {
            "task": "detect",
            "video": gt_doc.get("video"),
            "predictions": len(preds),
            "ground_truth": len(gts),
            "mean_matched_iou": mean_matched,
            "mean_iou_over_gt": mean_over_gt,
            "ap_per_threshold": {f"{t:.2f}": ap for t, ap in per_threshold.items()},
            "map": mean_ap,
        }
    if args.profile == "paper":
        report["reference_full_scale"] = REFERENCE_RESULTS
    _emit(report, args.out)
    return EXIT_OK


def _progress_printer(quiet: bool):
    if quiet:
        return None

    def show(row):
        parts = [f"epoch {row['epoch']}", f"loss {row['loss']:.5f}",
                 f"acc {row['accuracy']:.3f}"]
        if "val_accuracy" in row:
            parts.append(f"val {row['val_accuracy']:.3f}")
        print("  ".join(parts), file=sys.stderr)

    return show


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokenet",
        description="Two-stream pose 3D CNN: synthesize data, render pose "
                    "frames, train, classify, detect, evaluate.")
    parser.add_argument("--threads", type=int, default=0,
                        help="cap BLAS threads (1 = bitwise reproducible; "
                             "0 = leave library defaults)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic stroke dataset")
    p.add_argument("--spec", required=True, help="SyntheticSpec JSON file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="render pose / pose-over-RGB frames")
    p.add_argument("--frames", required=True, help="input frame directory or TTEN")
    p.add_argument("--poses", required=True, help="keypoint JSONL stream")
    p.add_argument("--mode", choices=["black", "overlay"], required=True)
    p.add_argument("--out", required=True, help="output frame directory")
    p.add_argument("--thickness", type=int, default=2, help="skeleton line px")
    p.add_argument("--radius", type=int, default=2, help="keypoint disc px")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("train", help="train per a run-config JSON")
    p.add_argument("--config", required=True, help="run-config JSON file")
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="size preset merged under the config")
    p.add_argument("--quiet", action="store_true", help="no per-epoch stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="aggregate window predictions for one clip")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clip", required=True, help="clip directory")
    p.add_argument("--decision", choices=["no-window", "mean", "gaussian", "vote"],
                   default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--out", default=None, help="also write the JSON here")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("detect", help="sliding-window stroke detection")
    p.add_argument("--config", required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--video", required=True, help="video directory")
    p.add_argument("--decision", choices=["mean", "gaussian", "vote-sliding"],
                   default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--min-length", type=int, default=None, dest="min_length")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--task", choices=["classify", "detect"], required=True)
    p.add_argument("--profile", choices=sorted(PROFILES), default=None,
                   help="paper: attach full-scale reference numbers")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads > 0:
        _set_threads(args.threads)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
