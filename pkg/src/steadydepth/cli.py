"""Subcommand front-end: synth | pairs | calibrate | check-flow | finetune | evaluate.

stdout carries machine-readable output only; progress goes to stderr. Exit
code 1 flags validation problems (bad flags, missing paths, malformed files)
with a JSON error object on stderr; exit code 2 flags runtime failures such
as a non-finite loss. Every run directory receives the resolved configuration
so a run can be reproduced from its outputs alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats
from .calibration import calibrate
from .errors import (
    NoAcceptedPairs,
    NonFiniteLoss,
    SteadyDepthError,
)
from .flowcheck import fb_consistency, intersect_dynamic_mask, overlap_accept
from .geometry import Camera, CameraPose
from .loss import LossConfig
from .metrics import (
    DisparityAlignment,
    align_disparity_ransac,
    depth_metrics,
    drift,
    evaluate_tracks,
    instability,
    photometric_error,
    tracks_to_3d,
)
from .optimizer import (
    DEFAULT_GRID_LONG_SIDE,
    FinetuneConfig,
    finetune,
    init_from_depth,
)
from .pairing import sample_pairs
from .synth import (
    BUNDLED_SCENES,
    analytic_flow,
    dynamic_mask,
    pair_validity,
    perturb,
    render,
    scene_from_dict,
    scene_to_dict,
    stereo_disparity,
    synth_tracks,
)

RUNTIME_ERRORS = (NonFiniteLoss, NoAcceptedPairs)


class ValidationError(Exception):
    """A problem the user can fix: flags, paths, malformed inputs."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _write_config(out_dir: Path, args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    (out_dir / "config.json").write_text(json.dumps(resolved, indent=2, default=str) + "\n")


def _require_dir(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ValidationError(f"{flag}: directory {path} does not exist")
    return p


def _require_file(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{flag}: file {path} does not exist")
    return p


def _flow_name(i: int, j: int) -> str:
    return f"flow_{i:04d}_{j:04d}.flo"


def _mask_name(i: int, j: int) -> str:
    return f"mask_{i:04d}_{j:04d}.pgm"


def _depth_name(f: int) -> str:
    return f"depth_{f:04d}.pfm"


def _read_depth_dir(path: Path, n_frames: int, flag: str) -> list[np.ndarray]:
    depths = []
    for f in range(n_frames):
        fp = path / _depth_name(f)
        if not fp.is_file():
            raise ValidationError(f"{flag}: missing {fp}")
        depths.append(read_float_depth(fp))
    return depths


def read_float_depth(path) -> np.ndarray:
    return formats.read_pfm(path).astype(np.float64)


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if (args.spec is None) == (args.preset is None):
        raise ValidationError("pass exactly one of --spec or --preset")
    if args.preset is not None:
        if args.preset not in BUNDLED_SCENES:
            raise ValidationError(
                f"unknown preset {args.preset!r}; choose from {sorted(BUNDLED_SCENES)}"
            )
        spec = BUNDLED_SCENES[args.preset]()
    else:
        path = _require_file(args.spec, "--spec")
        spec = scene_from_dict(json.loads(path.read_text()))
    out = Path(args.out)
    for sub in ("rgb", "depth", "flows", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    _progress(f"rendering {spec.n_frames} frames")
    rendered = render(spec)
    cams = [spec.camera(f) for f in range(spec.n_frames)]
    formats.write_cameras(out / "cameras.json", cams)
    (out / "scene.json").write_text(json.dumps(scene_to_dict(spec), indent=2) + "\n")
    for f in range(spec.n_frames):
        formats.write_ppm(out / "rgb" / f"frame_{f:04d}.ppm", rendered.rgb[f])
        formats.write_pfm(out / "depth" / _depth_name(f), rendered.depth[f])

    pairs = sample_pairs(spec.n_frames)
    _progress(f"writing flows and masks for {len(pairs)} pairs")
    for (i, j) in pairs:
        fwd, _ = analytic_flow(spec, i, j, rendered)
        bwd, _ = analytic_flow(spec, j, i, rendered)
        formats.write_flo(out / "flows" / _flow_name(i, j), fwd)
        formats.write_flo(out / "flows" / _flow_name(j, i), bwd)
        formats.write_pgm(out / "masks" / _mask_name(i, j), pair_validity(spec, i, j, rendered))

    tracks = synth_tracks(spec, args.tracks, seed=args.seed, rendered=rendered)
    formats.write_tracks(out / "tracks.txt", tracks)

    if spec.moving_index is not None:
        (out / "dynamic").mkdir(exist_ok=True)
        for f in range(spec.n_frames):
            formats.write_pgm(out / "dynamic" / f"dynamic_{f:04d}.pgm",
                              dynamic_mask(spec, rendered, f))
    if spec.stereo_baseline is not None:
        (out / "stereo").mkdir(exist_ok=True)
        for f in range(spec.n_frames):
            formats.write_ppm(out / "stereo" / f"right_{f:04d}.ppm",
                              rendered.stereo_rgb[f])
            disp = stereo_disparity(spec, rendered, f)
            formats.write_pfm(out / "stereo" / f"disp_{f:04d}.pfm",
                              np.where(np.isfinite(disp), disp, 0.0))
    if args.perturb_sigma > 0:
        (out / "init").mkdir(exist_ok=True)
        for f in range(spec.n_frames):
            noisy = perturb(rendered.depth[f], "gaussian-log", args.perturb_sigma,
                            seed=args.perturb_seed + f)
            formats.write_pfm(out / "init" / _depth_name(f), noisy)
    _write_config(out, args)
    print(json.dumps({"frames": spec.n_frames, "pairs": len(pairs),
                      "tracks": len(tracks), "out": str(out)}))
    return 0


# ---------------------------------------------------------------------------
# pairs


def cmd_pairs(args) -> int:
    if args.frames < 2:
        raise ValidationError("--frames must be >= 2")
    for (i, j) in sample_pairs(args.frames):
        print(f"{i} {j}")
    return 0


# ---------------------------------------------------------------------------
# calibrate


def cmd_calibrate(args) -> int:
    cams = formats.read_cameras(_require_file(args.cameras, "--cameras"))
    ref_dir = _require_dir(args.depth_ref, "--depth-ref")
    mvs_dir = _require_dir(args.depth_mvs, "--depth-mvs")
    depths_ref = _read_depth_dir(ref_dir, len(cams), "--depth-ref")
    depths_mvs = _read_depth_dir(mvs_dir, len(cams), "--depth-mvs")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report, scaled_poses = calibrate(depths_ref, depths_mvs, [c.pose for c in cams])
    scaled_cams = [Camera(intrinsics=c.intrinsics, pose=p)
                   for c, p in zip(cams, scaled_poses)]
    formats.write_cameras(out / "cameras_calibrated.json", scaled_cams)
    doc = {
        "per_frame": report.per_frame,
        "global_scale": report.global_scale,
        "frames_skipped": report.frames_skipped,
    }
    (out / "scale_report.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_config(out, args)
    print(json.dumps(doc))
    return 0


# ---------------------------------------------------------------------------
# check-flow


def cmd_check_flow(args) -> int:
    if args.frames < 2:
        raise ValidationError("--frames must be >= 2")
    flow_dir = _require_dir(args.flows, "--flows")
    dyn_dir = Path(args.dynamic_masks) if args.dynamic_masks else None
    if dyn_dir is not None and not dyn_dir.is_dir():
        raise ValidationError(f"--dynamic-masks: directory {dyn_dir} does not exist")
    out = Path(args.out)
    (out / "masks").mkdir(parents=True, exist_ok=True)

    rows = ["i,j,valid_ratio,accepted"]
    for (i, j) in sample_pairs(args.frames):
        fwd_path = flow_dir / _flow_name(i, j)
        bwd_path = flow_dir / _flow_name(j, i)
        if not fwd_path.is_file() or not bwd_path.is_file():
            raise ValidationError(f"--flows: missing flow files for pair ({i}, {j})")
        fwd = formats.read_flo(fwd_path).astype(np.float64)
        bwd = formats.read_flo(bwd_path).astype(np.float64)
        mask = fb_consistency(fwd, bwd, threshold_px=args.threshold)
        if dyn_dir is not None:
            dyn = formats.read_pgm(dyn_dir / f"dynamic_{i:04d}.pgm")
            mask = intersect_dynamic_mask(mask, dyn)
        ratio = float(mask.mean())
        accepted = overlap_accept(mask, min_ratio=args.min_ratio)
        formats.write_pgm(out / "masks" / _mask_name(i, j), mask)
        rows.append(f"{i},{j},{ratio!r},{int(accepted)}")
    (out / "acceptance.csv").write_text("\n".join(rows) + "\n")
    _write_config(out, args)
    print((out / "acceptance.csv").read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# finetune


FINETUNE_DEFAULTS = {
    "cameras": None,
    "depth_init": None,
    "flows": None,
    "masks": None,
    "out": None,
    "epochs": 20,
    "batch_size": 4,
    "lr": 4e-4,
    "disparity_weight": 0.1,
    "stride": 1,
    "smooth_weight": 0.0,
    "grid_long_side": DEFAULT_GRID_LONG_SIDE,
    "seed": 0,
}


def _resolve_finetune_settings(args) -> dict:
    """Merge defaults < config file < explicit flags into one settings dict.

    The flags parse with SUPPRESS defaults, so only explicitly passed values
    appear in the namespace and a run can be reproduced from a previous run's
    config.json alone.
    """
    settings = dict(FINETUNE_DEFAULTS)
    given = {k: v for k, v in vars(args).items()
             if k not in ("func", "command", "config", "threads")}
    if getattr(args, "config", None):
        path = _require_file(args.config, "--config")
        try:
            loaded = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"--config: not valid JSON ({exc})") from exc
        unknown = set(loaded) - set(FINETUNE_DEFAULTS)
        if unknown:
            raise ValidationError(f"--config: unknown keys {sorted(unknown)}")
        settings.update(loaded)
    settings.update(given)
    for key in ("cameras", "depth_init", "flows", "masks", "out"):
        if settings[key] is None:
            flag = "--" + key.replace("_", "-")
            raise ValidationError(f"{flag} is required (flag or config file)")
    return settings


def cmd_finetune(args) -> int:
    settings = _resolve_finetune_settings(args)
    cams = formats.read_cameras(_require_file(settings["cameras"], "--cameras"))
    n = len(cams)
    init_dir = _require_dir(settings["depth_init"], "--depth-init")
    flow_dir = _require_dir(settings["flows"], "--flows")
    mask_dir = _require_dir(settings["masks"], "--masks")
    out = Path(settings["out"])
    (out / "depth").mkdir(parents=True, exist_ok=True)

    depths = _read_depth_dir(init_dir, n, "--depth-init")
    pairs = sample_pairs(n)
    flows, masks = {}, {}
    for (i, j) in pairs:
        fp = flow_dir / _flow_name(i, j)
        mp = mask_dir / _mask_name(i, j)
        if not fp.is_file():
            raise ValidationError(f"--flows: missing {fp}")
        if not mp.is_file():
            raise ValidationError(f"--masks: missing {mp}")
        flows[(i, j)] = formats.read_flo(fp).astype(np.float64)
        masks[(i, j)] = formats.read_pgm(mp)

    config = FinetuneConfig(
        epochs=settings["epochs"],
        batch_size=settings["batch_size"],
        lr=settings["lr"],
        loss=LossConfig(disparity_weight=settings["disparity_weight"],
                        pixel_stride=settings["stride"]),
        smooth_weight=settings["smooth_weight"],
        rng_seed=settings["seed"],
    )
    field = init_from_depth(depths, grid_long_side=settings["grid_long_side"])

    pair_rows = ["epoch,i,j,spatial,disparity,total,n_pixels"]

    def log_pair(epoch, pair, br):
        pair_rows.append(
            f"{epoch},{pair[0]},{pair[1]},{br.spatial!r},{br.disparity!r},"
            f"{br.total!r},{br.n_pixels}"
        )

    _progress(f"optimizing {n} frames over {len(pairs)} pairs")
    result, history = finetune(cams, flows, masks, pairs, field, config,
                               pair_callback=log_pair)

    for f in range(n):
        formats.write_pfm(out / "depth" / _depth_name(f), result.decode(f))
    hist_rows = ["epoch,mean_total,mean_spatial,mean_disparity,n_pairs"]
    for h in history:
        hist_rows.append(
            f"{h.epoch},{h.mean_total!r},{h.mean_spatial!r},{h.mean_disparity!r},{h.n_pairs}"
        )
    (out / "history.csv").write_text("\n".join(hist_rows) + "\n")
    (out / "pair_log.csv").write_text("\n".join(pair_rows) + "\n")
    (out / "config.json").write_text(
        json.dumps({k: settings[k] for k in sorted(settings)}, indent=2) + "\n"
    )
    print(json.dumps({"epochs": len(history) - 1,
                      "final_mean_total": history[-1].mean_total,
                      "final_mean_spatial": history[-1].mean_spatial,
                      "out": str(out)}))
    return 0


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    cams = formats.read_cameras(_require_file(args.cameras, "--cameras"))
    n = len(cams)
    depth_dir = _require_dir(args.depths, "--depths")
    depths = _read_depth_dir(depth_dir, n, "--depths")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    metrics: dict = {}
    track_rows = ["track_id,n_points,instability,drift"]
    curve_rows = ["rank,instability,drift"]
    if args.tracks:
        tracks = formats.read_tracks(_require_file(args.tracks, "--tracks"))
        agg = evaluate_tracks(tracks, depths, cams)
        metrics["instability_raw"] = agg.instability_raw
        metrics["instability_pct"] = agg.instability_pct
        metrics["drift_raw"] = agg.drift_raw
        metrics["drift_pct"] = agg.drift_pct
        metrics["scene_scale"] = agg.scene_scale
        metrics["n_tracks"] = agg.n_tracks
        metrics["n_degenerate_tracks"] = agg.n_degenerate
        per_track = []
        for tid, track in enumerate(tracks):
            try:
                t3d = tracks_to_3d(track, depths, cams)
                per_track.append((tid, len(t3d.points), instability(t3d), drift(t3d)))
            except SteadyDepthError:
                continue
        for tid, npts, inst, drf in per_track:
            track_rows.append(f"{tid},{npts},{inst!r},{drf!r}")
        for rank, (inst, drf) in enumerate(
            zip(sorted(v[2] for v in per_track), sorted(v[3] for v in per_track))
        ):
            curve_rows.append(f"{rank},{inst!r},{drf!r}")

    if args.gt_depths:
        gt = _read_depth_dir(_require_dir(args.gt_depths, "--gt-depths"), n,
                             "--gt-depths")
        per_frame = [depth_metrics(d, g, alignment=args.alignment, space=args.space)
                     for d, g in zip(depths, gt)]
        metrics["depth"] = {
            key: float(np.mean([m[key] for m in per_frame]))
            for key in per_frame[0]
        }

    if args.stereo_right:
        if not (args.stereo_disp and args.left_rgb):
            raise ValidationError(
                "stereo evaluation needs --stereo-right, --stereo-disp, "
                "--left-rgb, and --stereo-baseline together"
            )
        right_dir = _require_dir(args.stereo_right, "--stereo-right")
        disp_dir = _require_dir(args.stereo_disp, "--stereo-disp")
        _require_dir(args.left_rgb, "--left-rgb")
        if args.stereo_baseline <= 0:
            raise ValidationError("--stereo-baseline must be > 0")
        # per-frame scale/shift fits averaged into one video-level alignment
        per_frame = []
        for f in range(n):
            stereo_disp = read_float_depth(disp_dir / f"disp_{f:04d}.pfm")
            stereo_disp = np.where(stereo_disp > 0, stereo_disp, np.nan)
            pred_disp = np.where(depths[f] > 0,
                                 1.0 / np.where(depths[f] > 0, depths[f], 1.0),
                                 np.nan)
            per_frame.append(align_disparity_ransac(pred_disp, stereo_disp,
                                                    seed=args.seed))
        video_alignment = DisparityAlignment(
            scale=float(np.mean([a.scale for a in per_frame])),
            shift=float(np.mean([a.shift for a in per_frame])),
            inlier_ratio=float(np.mean([a.inlier_ratio for a in per_frame])),
        )
        errors = []
        for f in range(n):
            left = np.asarray(
                formats.read_ppm(Path(args.left_rgb) / f"frame_{f:04d}.ppm"),
                dtype=np.float64) / 255.0
            right = np.asarray(
                formats.read_ppm(right_dir / f"right_{f:04d}.ppm"),
                dtype=np.float64) / 255.0
            pose = cams[f].pose
            cam_right = Camera(
                intrinsics=cams[f].intrinsics,
                pose=CameraPose(R=pose.R, t=pose.t + pose.R @ np.array(
                    [args.stereo_baseline, 0.0, 0.0])),
            )
            errors.append(photometric_error(left, right, depths[f], cams[f],
                                            cam_right, video_alignment))
        metrics["photometric_mse"] = float(np.mean(errors))
        metrics["alignment"] = {"scale": video_alignment.scale,
                                "shift": video_alignment.shift,
                                "inlier_ratio": video_alignment.inlier_ratio}

    (out / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    (out / "per_track.csv").write_text("\n".join(track_rows) + "\n")
    (out / "curves.csv").write_text("\n".join(curve_rows) + "\n")
    _write_config(out, args)
    print(json.dumps(metrics))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="steadydepth",
                     description="Geometrically consistent video depth refinement")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on worker threads (the current implementation "
                             "is single-threaded; values > 1 have no effect)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render an oracle dataset")
    p.add_argument("--spec", help="scene JSON file")
    p.add_argument("--preset", help=f"bundled scene: {sorted(BUNDLED_SCENES)}")
    p.add_argument("--out", required=True)
    p.add_argument("--tracks", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb-sigma", type=float, default=0.0,
                   help="also write log-depth-noised copies of the true depth")
    p.add_argument("--perturb-seed", type=int, default=1000)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pairs", help="print the sampled frame pairs")
    p.add_argument("--frames", type=int, required=True)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("calibrate", help="align camera translations to a depth scale")
    p.add_argument("--cameras", required=True)
    p.add_argument("--depth-ref", required=True,
                   help="reference-scale depth PFM directory")
    p.add_argument("--depth-mvs", required=True,
                   help="reconstruction-scale depth PFM directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("check-flow", help="consistency-filter flows into masks")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--dynamic-masks", default=None)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--min-ratio", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_check_flow)

    p = sub.add_parser("finetune", help="optimize the depth field")
    p.add_argument("--config", default=None,
                   help="JSON with any finetune settings (a previous run's "
                        "config.json works); explicit flags override it")
    supp = argparse.SUPPRESS
    p.add_argument("--cameras", default=supp)
    p.add_argument("--depth-init", default=supp)
    p.add_argument("--flows", default=supp)
    p.add_argument("--masks", default=supp)
    p.add_argument("--out", default=supp)
    p.add_argument("--epochs", type=int, default=supp)
    p.add_argument("--batch-size", type=int, default=supp)
    p.add_argument("--lr", type=float, default=supp)
    p.add_argument("--disparity-weight", type=float, default=supp)
    p.add_argument("--stride", type=int, default=supp)
    p.add_argument("--smooth-weight", type=float, default=supp)
    p.add_argument("--grid-long-side", type=int, default=supp)
    p.add_argument("--seed", type=int, default=supp)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="compute stability/drift/depth metrics")
    p.add_argument("--cameras", required=True)
    p.add_argument("--depths", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tracks", default=None)
    p.add_argument("--gt-depths", default=None)
    p.add_argument("--alignment", choices=["median", "none"], default="median")
    p.add_argument("--space", choices=["depth", "disparity"], default="depth")
    p.add_argument("--left-rgb", default=None)
    p.add_argument("--stereo-right", default=None)
    p.add_argument("--stereo-disp", default=None)
    p.add_argument("--stereo-baseline", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        return args.func(args)
    except ValidationError as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}),
              file=sys.stderr)
        return 1
    except RUNTIME_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except SteadyDepthError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
