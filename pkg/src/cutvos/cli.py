"""Command-line entry point.

Subcommands operate on the dataset layout and write machine-readable
artifacts. Every file-emitting run writes exactly one manifest.json holding
the fully resolved configuration, the master seed, and the resolved argv,
so deterministic runs can be reproduced bit-exactly from the manifest
alone. Exit codes: 0 success, 1 usage error, 2 data error (the stable error
code is printed to stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import dataset as ds
from . import harness as hn
from . import localcues as lc
from . import metrics as mt
from . import shotdetect as sd
from . import tma
from .errors import DimensionMismatch, MissingFrame, ToolkitError
from .imgops import spawn_rng

SEED_ENV_VAR = "CUTVOS_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def load_schema(name: str) -> dict:
    """Load one of the published JSON schema files by stem name."""
    from importlib.resources import files

    return json.loads(
        (files("cutvos") / "schemas" / f"{name}.schema.json").read_text()
    )


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_json(path: Path, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def _manifest(command: str, args, config: dict, seed, inputs: dict, outputs: dict,
              started: float) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "toolkit_version": __version__,
        "inputs": inputs,
        "outputs": outputs,
        "argv_resolved": _resolved_argv(command, args),
        "duration_s": round(time.monotonic() - started, 6),
    }


def _resolved_argv(command: str, args) -> list[str]:
    argv = [command]
    skip = {"handler", "json_out", "command"}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        if key == "root":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv.extend([flag, str(value)])
    if getattr(args, "root", None) is not None:
        argv.insert(1, str(args.root))
    return argv


def _emit(args, command: str, manifest: dict, result: dict) -> None:
    if args.json_out:
        print(json.dumps(
            {"command": command, "manifest": manifest, "result": result},
            sort_keys=True,
        ))


def _iter_tracks(index: ds.DatasetIndex):
    """(sample_index, video, object_id) in deterministic order."""
    i = 0
    for video in index.videos:
        for oid in video.object_ids:
            yield i, video, oid
            i += 1


def _parallel(jobs: int, func, items: list):
    if jobs <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root)
    stats = ds.compute_stats(index).to_json_dict()
    manifest = _manifest(
        "stats", args, config={}, seed=None,
        inputs={"root": str(args.root)},
        outputs={"out": str(args.out) if args.out else None}, started=started,
    )
    if args.out:
        out = Path(args.out)
        atomic_write_json(out / "stats.json", stats)
        atomic_write_json(out / "manifest.json", manifest)
    if args.json_out:
        _emit(args, "stats", manifest, stats)
    else:
        for key, value in stats.items():
            print(f"{key}: {value}")
    return 0


# ---------------------------------------------------------------- augment


def _load_donor_clip(video: ds.VideoEntry, length: int) -> ds.FrameSequenceSample:
    frames = [ds.load_frame(p) for p in video.frame_paths[:length]]
    h, w = frames[0].shape[:2]
    masks = [np.zeros((h, w), np.uint8) for _ in frames]
    return ds.FrameSequenceSample(
        video_id=video.video_id, frames=frames, masks=masks, object_id=1,
        fps=video.fps,
    )


def cmd_augment(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root)
    if args.config:
        config, file_seed = tma.load_config(args.config)
    else:
        config, file_seed = tma.TmaConfig(), None
    seed = args.seed if args.seed is not None else (
        file_seed if file_seed is not None else _default_seed()
    )
    out = Path(args.out)
    t = config.clip_length
    donor_cache: dict[str, ds.FrameSequenceSample] = {}

    def donor_for(v: ds.VideoEntry) -> ds.FrameSequenceSample:
        if v.video_id not in donor_cache:
            donor_cache[v.video_id] = _load_donor_clip(v, t)
        return donor_cache[v.video_id]

    transitions: dict[str, list[int]] = {}
    provenance: dict[str, list] = {}
    for sample_index, video, oid in _iter_tracks(index):
        if video.n_frames < t:
            raise MissingFrame(
                f"{video.video_id} has {video.n_frames} frames, need {t}"
            )
        timeline = ds.load_sample(
            index.root / "JPEGImages" / video.video_id,
            index.root / "Annotations" / video.video_id,
            oid, fps=video.fps,
        )
        clip = timeline.window(0, t)
        donors = [
            donor_for(v) for v in index.videos if v.video_id != video.video_id
            and v.n_frames >= 1
        ]
        pool = tma.DonorPool(donors=donors, timeline=timeline, current_start=0)
        rng = spawn_rng(seed, sample_index)
        outcome = tma.apply_tma(clip, pool, config, rng)
        name = f"{video.video_id}_obj{oid}"
        for i, (frame, mask) in enumerate(
            zip(outcome.sample.frames, outcome.sample.masks)
        ):
            atomic_write_bytes(
                out / "JPEGImages" / name / f"{i:05d}.jpg",
                ds.encode_frame_jpeg(frame),
            )
            atomic_write_bytes(
                out / "Annotations" / name / f"{i:05d}.png",
                ds.encode_mask_png(mask),
            )
        transitions[name] = outcome.label_indices()
        provenance[name] = outcome.provenance
    atomic_write_json(out / "transitions.json", transitions)
    atomic_write_json(out / "provenance.json", provenance)
    manifest = _manifest(
        "augment", args, config=tma.config_to_mapping(config), seed=seed,
        inputs={"root": str(args.root), "config": str(args.config) if args.config else None},
        outputs={"out": str(out)}, started=started,
    )
    atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "augment", manifest, {"transitions": transitions})
    return 0


# ---------------------------------------------------------------- detect


def cmd_detect(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root, scan_masks=False)
    config = sd.DetectorConfig(tau_tr=args.tau, min_shot_len=args.min_shot_len)
    out = Path(args.out)
    detections: dict[str, list[int]] = {}

    def run_one(video: ds.VideoEntry):
        frames = [ds.load_frame(p) for p in video.frame_paths]
        if args.scores_file:
            scores = sd.read_scores_file(args.scores_file)
            if len(scores) != len(frames):
                raise DimensionMismatch(
                    f"{args.scores_file} holds {len(scores)} scores for "
                    f"{len(frames)} frames"
                )
        else:
            scores = sd.compute_scores(frames, sd.HistogramScorer(args.window))
        indices = sd.threshold_scores(scores, config)
        shots = sd.scores_to_shots(indices, len(frames))
        atomic_write_json(out / "shots" / f"{video.video_id}.json", shots.to_json_obj())
        atomic_write_bytes(
            out / "scores" / f"{video.video_id}.csv",
            sd.scores_csv_text(scores).encode(),
        )
        return video.video_id, indices

    for vid, indices in _parallel(args.jobs, run_one, index.videos):
        detections[vid] = indices
    manifest = _manifest(
        "detect", args,
        config={"tau_tr": args.tau, "window": args.window,
                "min_shot_len": args.min_shot_len,
                "scores_file": str(args.scores_file) if args.scores_file else None},
        seed=None, inputs={"root": str(args.root)},
        outputs={"out": str(out)}, started=started,
    )
    atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "detect", manifest, {"detections": detections})
    return 0


# ---------------------------------------------------------------- evaluate


def _load_track_masks(mask_dir: Path, n_frames: int, object_id: int) -> list[np.ndarray]:
    paths = sorted(mask_dir.glob("*.png"))
    if len(paths) != n_frames:
        raise MissingFrame(
            f"{mask_dir} holds {len(paths)} masks, expected {n_frames}"
        )
    out = []
    for p in paths:
        m = ds.load_mask(p)
        out.append(np.where(m == object_id, np.uint8(object_id), np.uint8(0)))
    return out


def cmd_evaluate(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root)
    pred_root = Path(args.pred)
    shots_dir = Path(args.shots) if args.shots else index.root / "shots"
    per_object: dict[str, dict] = {}
    merged_tallies: dict[str, list[int]] = {}
    untyped: list[str] = []
    means = {"mean_j": [], "mean_f": [], "j_and_f": [], "jt": []}
    for _, video, oid in _iter_tracks(index):
        gt = ds.load_sample(
            index.root / "JPEGImages" / video.video_id,
            index.root / "Annotations" / video.video_id, oid, fps=video.fps,
        )
        pred = _load_track_masks(pred_root / video.video_id, len(gt), oid)
        shots_path = shots_dir / f"{video.video_id}.json"
        shots = ds.load_shot_annotation(shots_path) if shots_path.exists() else None
        report = mt.evaluate_track(pred, gt.masks, shots, args.tolerance)
        key = f"{video.video_id}/{oid}"
        per_object[key] = report.to_json_dict()
        for name in means:
            means[name].append(getattr(report, name))
        if shots is not None and all(seg.types for seg in shots.segments[1:]):
            acc = mt.transition_accuracy(pred, gt.masks, shots)
            for tname, (c, n, _) in acc.per_type.items():
                cur = merged_tallies.get(tname, [0, 0])
                merged_tallies[tname] = [cur[0] + c, cur[1] + n]
        elif shots is not None and len(shots.segments) > 1:
            untyped.append(video.video_id)
    per_type = {
        name: (c, n, c / n if n else 0.0) for name, (c, n) in merged_tallies.items()
    }
    total = sum(n for _, n, _ in per_type.values())
    expected = sum(c for c, _, _ in per_type.values()) / total if total else 0.0
    acc_report = mt.TransitionAccuracyReport(per_type=per_type, expected_accuracy=expected)
    result = {
        "per_object": per_object,
        "aggregate": {
            name: round(float(np.mean(vals)), 6) if vals else 0.0
            for name, vals in means.items()
        } | {"n_objects": len(per_object)},
        "transition_accuracy": acc_report.to_json_dict(),
        "untyped_videos": untyped,
    }
    manifest = _manifest(
        "evaluate", args,
        config={"boundary_tolerance_px": args.tolerance},
        seed=None,
        inputs={"root": str(args.root), "pred": str(pred_root), "shots": str(shots_dir)},
        outputs={"out": str(args.out) if args.out else None}, started=started,
    )
    if args.out:
        out = Path(args.out)
        atomic_write_json(out / "eval_report.json", result)
        atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "evaluate", manifest, result)
    if not args.json_out:
        agg = result["aggregate"]
        print(
            f"J {agg['mean_j']:.3f}  F {agg['mean_f']:.3f}  "
            f"J&F {agg['j_and_f']:.3f}  Jt {agg['jt']:.3f}  "
            f"({agg['n_objects']} objects)"
        )
    return 0


# ---------------------------------------------------------------- partition


def cmd_partition(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root)
    out = Path(args.out)
    cues_doc: dict[str, dict] = {}
    for _, video, oid in _iter_tracks(index):
        sample = ds.load_sample(
            index.root / "JPEGImages" / video.video_id,
            index.root / "Annotations" / video.video_id, oid, fps=video.fps,
        )
        frame0, mask0 = sample.frames[0], sample.masks[0]
        if not mask0.any():
            continue  # object not present in the conditional frame
        feature = None
        if args.feature_file and args.feature_file != "auto":
            feature = lc.read_feature_file(args.feature_file)
        _, part, cues = lc.partition_object(
            frame0, mask0, k=args.groups, tau_p=args.tau_p, feature=feature
        )
        name = f"{video.video_id}_obj{oid}"
        ch, cw = (feature or lc.color_feature_grid(frame0)).cell_sizes(mask0.shape)
        h, w = mask0.shape
        up = np.repeat(np.repeat(part.labels, ch, axis=0), cw, axis=1)[:h, :w]
        label_map = np.where(mask0 > 0, up, 0).astype(np.uint8)
        atomic_write_bytes(
            out / "labels" / f"{name}.png", ds.encode_mask_png(label_map)
        )
        cues_doc[name] = cues.to_json_dict() | {"k": part.k}
    atomic_write_json(out / "cues.json", cues_doc)
    manifest = _manifest(
        "partition", args,
        config={"groups": args.groups, "tau_p": args.tau_p,
                "feature_file": args.feature_file},
        seed=None, inputs={"root": str(args.root)},
        outputs={"out": str(out)}, started=started,
    )
    atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "partition", manifest, {"cues": cues_doc})
    return 0


# ---------------------------------------------------------------- track


def cmd_track(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root)
    out = Path(args.out)
    config = hn.HarnessConfig(tau_tr=args.tau, n_adj=args.na, n_scene=args.ns)
    traces: dict[str, dict] = {}
    merged: dict[str, list[np.ndarray]] = {}
    for _, video, oid in _iter_tracks(index):
        sample = ds.load_sample(
            index.root / "JPEGImages" / video.video_id,
            index.root / "Annotations" / video.video_id, oid, fps=video.fps,
        )
        scorer = sd.HistogramScorer(args.window)
        if args.segmenter == "oracle":
            shots_path = index.root / "shots" / f"{video.video_id}.json"
            if not shots_path.exists():
                raise MissingFrame(f"oracle segmenter needs {shots_path}")
            shots = ds.load_shot_annotation(shots_path)
            oracle_dir = Path(args.oracle_masks) if args.oracle_masks else (
                index.root / "Annotations" / video.video_id
            )
            oracle_masks = _load_track_masks(oracle_dir, len(sample), oid)
            segmenter = hn.make_oracle_segmenter(shots, lambda t: oracle_masks[t])
        else:
            segmenter = hn.propagate_last_segmenter
        trace = hn.run_tracker(sample.frames, sample.masks[0], scorer, segmenter, config)
        traces[f"{video.video_id}/{oid}"] = trace.to_json_dict()
        stack = merged.setdefault(
            video.video_id,
            [np.zeros(sample.shape, np.uint8) for _ in range(len(sample))],
        )
        for t, mask in enumerate(trace.masks):
            stack[t] = np.where(mask > 0, np.uint8(oid), stack[t])
    for vid, stack in merged.items():
        for t, mask in enumerate(stack):
            atomic_write_bytes(
                out / "Annotations" / vid / f"{t:05d}.png", ds.encode_mask_png(mask)
            )
    atomic_write_json(out / "trace.json", traces)
    manifest = _manifest(
        "track", args,
        config={"tau_tr": args.tau, "n_adj": args.na, "n_scene": args.ns,
                "window": args.window, "segmenter": args.segmenter},
        seed=None, inputs={"root": str(args.root)},
        outputs={"out": str(out)}, started=started,
    )
    atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "track", manifest, {"videos": sorted(merged)})
    return 0


# ---------------------------------------------------------------- overlay


def overlay_frame(frame: np.ndarray, mask: np.ndarray, alpha: float) -> np.ndarray:
    """Alpha-blend each object label with its fixed palette color."""
    out = frame.astype(np.float64)
    for label in np.unique(mask):
        if label == 0:
            continue
        color = np.array(ds.OBJECT_PALETTE[(int(label) - 1) % len(ds.OBJECT_PALETTE)])
        sel = mask == label
        out[sel] = (1.0 - alpha) * out[sel] + alpha * color
    return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)


def cmd_overlay(args) -> int:
    started = time.monotonic()
    index = ds.load_dataset_index(args.root, scan_masks=False)
    pred_root = Path(args.pred) if args.pred else index.root / "Annotations"
    out = Path(args.out)

    def run_one(video: ds.VideoEntry):
        mask_paths = sorted((pred_root / video.video_id).glob("*.png"))
        if len(mask_paths) != video.n_frames:
            raise MissingFrame(
                f"{video.video_id}: {len(mask_paths)} masks for {video.n_frames} frames"
            )
        import io

        from PIL import Image

        for i, (fp, mp) in enumerate(zip(video.frame_paths, mask_paths)):
            frame = ds.load_frame(fp)
            mask = ds.load_mask(mp)
            if mask.shape != frame.shape[:2]:
                raise DimensionMismatch(
                    f"{video.video_id}[{i}]: mask {mask.shape} vs frame {frame.shape[:2]}"
                )
            blended = overlay_frame(frame, mask, args.alpha)
            buf = io.BytesIO()
            Image.fromarray(blended).save(buf, format="PNG")
            atomic_write_bytes(out / video.video_id / f"{i:05d}.png", buf.getvalue())
        return video.video_id

    done = _parallel(args.jobs, run_one, index.videos)
    manifest = _manifest(
        "overlay", args, config={"alpha": args.alpha}, seed=None,
        inputs={"root": str(args.root), "pred": str(pred_root)},
        outputs={"out": str(out)}, started=started,
    )
    atomic_write_json(out / "manifest.json", manifest)
    _emit(args, "overlay", manifest, {"videos": sorted(done)})
    return 0


# ---------------------------------------------------------------- dispatch


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="cutvos", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_out=True):
        p.add_argument("root", help="dataset root directory")
        p.add_argument("--json", dest="json_out", action="store_true",
                       help="print machine-readable output to stdout")
        p.add_argument("--jobs", type=int, default=1)
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stats", help="dataset statistics")
    common(p, needs_out=False)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("augment", help="transition-mimicking augmentation")
    common(p)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${SEED_ENV_VAR} or 0)")
    p.set_defaults(handler=cmd_augment)

    p = sub.add_parser("detect", help="shot transition detection")
    common(p)
    p.add_argument("--tau", type=float, default=sd.DEFAULT_TAU_TR)
    p.add_argument("--window", type=int, default=sd.DEFAULT_WINDOW)
    p.add_argument("--min-shot-len", type=int, default=sd.DEFAULT_MIN_SHOT_LEN)
    p.add_argument("--scores-file", default=None,
                   help="sidecar per-frame scores instead of the baseline scorer")
    p.set_defaults(handler=cmd_detect)

    p = sub.add_parser("evaluate", help="J/F/J&F/Jt and transition accuracy")
    common(p, needs_out=False)
    p.add_argument("--out", default=None)
    p.add_argument("--pred", required=True, help="prediction mask root")
    p.add_argument("--shots", default=None, help="shot annotation dir")
    p.add_argument("--tolerance", type=int, default=None,
                   help="boundary matching tolerance in pixels")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("partition", help="local-cue region partitioning")
    common(p)
    p.add_argument("--groups", type=int, default=lc.DEFAULT_GROUPS)
    p.add_argument("--tau-p", type=float, default=lc.DEFAULT_TAU_P)
    p.add_argument("--feature-file", default="auto")
    p.set_defaults(handler=cmd_partition)

    p = sub.add_parser("track", help="memory-routing tracker harness")
    common(p)
    p.add_argument("--tau", type=float, default=sd.DEFAULT_TAU_TR)
    p.add_argument("--na", type=int, default=hn.DEFAULT_N_ADJ)
    p.add_argument("--ns", type=int, default=hn.DEFAULT_N_SCENE)
    p.add_argument("--window", type=int, default=sd.DEFAULT_WINDOW)
    p.add_argument("--segmenter", choices=["oracle", "last"], default="last")
    p.add_argument("--oracle-masks", default=None)
    p.set_defaults(handler=cmd_track)

    p = sub.add_parser("overlay", help="render mask overlays")
    common(p)
    p.add_argument("--pred", default=None, help="mask root (default: Annotations)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(handler=cmd_overlay)

    return parser


def cmd_dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ToolkitError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cmd_dispatch())
