"""Command-line entry point: ``geosup {synth,loss,refine,eval}``.

Every command prints one JSON summary line to stdout and writes full results
to files. Exit codes: 0 success, 2 input or configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data_io, synthetic
from .errors import ConfigurationError, InputError, NumericalError, ParseError
from .gravity import estimate_R_bs, gravity_from_spatial
from .kvfile import parse_floats, read_key_values
from .metrics import EvaluationCrop, MetricReport, error_map, evaluate
from .refiner import MonoInputs, RefinementConfig, StereoInputs, refine
from .semantics import DEFAULT_GATED, default_mapping
from .sigl import SiglConfig, sigl_total
from .warp import Pose, loss_view_synthesis_stereo

logger = logging.getLogger("geosup")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _summary(**kw):
    print(json.dumps(kw, sort_keys=True, default=float))


def _threads() -> int:
    raw = os.environ.get("GEOSUP_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _categories(text: str | None):
    if text is None:
        return DEFAULT_GATED
    return tuple(c.strip() for c in text.split(",") if c.strip())


def _mapping(path):
    return data_io.read_mapping(path) if path else default_mapping()


def _gravity(args, calib):
    if args.gravity:
        return data_io.read_gravity(args.gravity)
    if getattr(args, "imu", None):
        records = data_io.read_imu_record(args.imu)
        if calib.R_cb is None:
            raise ConfigurationError("IMU gravity needs R_cb in the calibration file")
        if records and isinstance(records[0], data_io.OrientationRecord):
            return gravity_from_spatial(calib.R_cb, records[-1].R_bs)
        R_bs = estimate_R_bs(data_io.accel_pairs(records), single_pair=args.single_pair, window=args.imu_window)
        return gravity_from_spatial(calib.R_cb, R_bs)
    return None


def _add_gravity_args(p):
    p.add_argument("--gravity", help="key-value file with 'gravity = gx gy gz' (camera frame)")
    p.add_argument("--imu", help="IMU CSV (acceleration pairs or roll/pitch/yaw); needs R_cb in --calib")
    p.add_argument("--imu-window", type=int, default=None, help="use only the last N IMU rows")
    p.add_argument("--single-pair", action="store_true", help="accept a yaw-ambiguous single-direction IMU fit")


# --- synth ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    text = Path(args.scene).read_text(encoding="utf-8")
    scene = synthetic.parse_scene(text, args.scene)
    out = data_io.ensure_dir(args.out_dir)
    intr = scene.intrinsics
    depth, mask, index = synthetic.render_depth(scene)
    data_io.write_depth_png(out / "depth.png", depth)
    data_io.write_label_png(out / "labels.png", synthetic.class_id_map(scene, index))
    data_io.write_calibration(out / "calib.txt", intr)
    data_io.write_gravity(out / "gravity.txt", scene.gravity)
    data_io.write_image(out / "preview.png", data_io.visualize(1.0 / depth))
    written = ["depth.png", "labels.png", "calib.txt", "gravity.txt", "preview.png"]
    left = synthetic.render_view(scene)
    data_io.write_image(out / "left.png", left, bits=16)
    written.append("left.png")
    if scene.baseline is not None:
        _, right, _ = synthetic.render_stereo_pair(scene)
        data_io.write_image(out / "right.png", right, bits=16)
        (out / "baseline.txt").write_text(f"baseline = {scene.baseline!r}\n", encoding="utf-8")
        written += ["right.png", "baseline.txt"]
    if args.noise > 0 or args.dropout > 0:
        noisy = synthetic.add_depth_noise(depth, args.noise, args.dropout, args.seed)
        data_io.write_depth_png(out / "depth_noisy.png", noisy)
        written.append("depth_noisy.png")
    valid = int(np.count_nonzero(np.isfinite(depth)))
    _summary(command="synth", out_dir=str(out), files=written, valid_pixels=valid, planes=len(scene.planes))
    return EXIT_OK


# --- loss ------------------------------------------------------------------------------


def cmd_loss(args) -> int:
    calib = data_io.read_calibration(args.calib)
    intr = calib.intrinsics
    depth = data_io.read_depth_png(args.depth)
    if depth.shape != intr.shape:
        raise InputError(f"depth size {depth.shape} does not match calibration {intr.shape}")
    mask = data_io.read_label_png(args.labels, _mapping(args.mapping))
    cats = _categories(args.categories)
    cfg = SiglConfig(args.w_hp, args.w_vp, cats, args.K, args.vp_mode, args.min_region, not args.global_regions)
    gravity = _gravity(args, calib)
    wants_sigl = (cfg.w_hp > 0 or cfg.w_vp > 0) and len(cats) > 0
    if wants_sigl and gravity is None:
        raise ConfigurationError("plane losses requested but no --gravity or --imu given")
    report = sigl_total(depth, intr, gravity, mask, cfg) if wants_sigl else None
    summary = {"command": "loss", "categories": list(cats)}
    if report is not None:
        summary.update(total=report.total, hp=report.hp, vp=report.vp, regions=len(report.regions),
                       skipped_regions=report.skipped_regions, per_category=report.per_category)
    else:
        summary.update(total=0.0, hp=0.0, vp=0.0, regions=0)
    if args.left and args.right:
        if args.baseline is None:
            raise ConfigurationError("--baseline is required with --left/--right")
        left = data_io.read_image(args.left)
        right = data_io.read_image(args.right)
        with np.errstate(invalid="ignore", divide="ignore"):
            disp = intr.fx * args.baseline / depth
        summary["photometric"] = loss_view_synthesis_stereo(left, right, disp)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["region", "category", "orientation", "pixels", "loss", "weight", "weighted"])
            for r in report.regions if report else []:
                w.writerow([r.index, r.category, r.orientation, r.pixels, repr(r.loss), repr(r.weight), repr(r.weighted)])
            w.writerow(["total", "", "", "", repr(summary["total"]), "", repr(summary["total"])])
    _summary(**summary)
    return EXIT_OK


# --- refine ----------------------------------------------------------------------------


def _parse_weights(text: str | None) -> dict:
    if not text:
        return {}
    names = {"photometric": "photometric", "smoothness": "smoothness", "hp": "w_hp", "w_hp": "w_hp", "vp": "w_vp", "w_vp": "w_vp"}
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigurationError(f"--weights entry {item!r} is not 'name=value'")
        key, val = (s.strip() for s in item.split("=", 1))
        try:
            v = float(val)
        except ValueError:
            raise ConfigurationError(f"--weights value for '{key}' is not a number") from None
        if key == "sigl":
            out["w_hp"] = out["w_vp"] = v
        elif key in names:
            out[names[key]] = v
        else:
            raise ConfigurationError(f"unknown weight '{key}'")
    return out


def read_poses(path) -> dict[int, Pose]:
    """Key-value poses: ``pose.<frame> = r00 r01 ... r22 tx ty tz`` (reference to frame)."""
    kv = read_key_values(path)
    poses = {}
    for key, value in kv.items():
        if not key.startswith("pose."):
            raise ParseError(f"{path}: unknown key '{key}'")
        try:
            idx = int(key[5:])
        except ValueError:
            raise ParseError(f"{path}: bad pose key '{key}'") from None
        vals = parse_floats(value, key, 12, str(path))
        poses[idx] = Pose(np.array(vals[:9]).reshape(3, 3), np.array(vals[9:]))
    return poses


def _fill_invalid(depth):
    depth = depth.copy()
    bad = ~(np.isfinite(depth) & (depth > 0))
    if bad.all():
        raise InputError("initial depth has no valid pixels")
    if bad.any():
        depth[bad] = np.median(depth[~bad])
    return depth


def cmd_refine(args) -> int:
    cfg = RefinementConfig.from_file(args.config) if args.config else RefinementConfig()
    overrides = _parse_weights(args.weights)
    if args.max_iter is not None:
        overrides["max_iterations"] = args.max_iter
    if args.categories is not None:
        overrides["categories"] = _categories(args.categories)
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    calib = data_io.read_calibration(args.calib)
    intr = calib.intrinsics
    init_depth = data_io.read_depth_png(args.init)
    if init_depth.shape != intr.shape:
        raise InputError(f"initial depth size {init_depth.shape} does not match calibration {intr.shape}")
    init = np.clip(1.0 / _fill_invalid(init_depth), cfg.d_min, cfg.d_max)
    if args.left or args.right:
        if not (args.left and args.right and args.baseline):
            raise ConfigurationError("stereo mode needs --left, --right and --baseline")
        inputs = StereoInputs(data_io.read_image(args.left), data_io.read_image(args.right), args.baseline)
    elif args.frames:
        if not args.poses:
            raise ConfigurationError("monocular mode needs --poses")
        frames = [data_io.read_image(f) for f in args.frames]
        poses = read_poses(args.poses)
        missing = [i for i in range(1, len(frames)) if i not in poses]
        if missing:
            raise InputError(f"missing pose for neighbour frame(s) {missing}")
        inputs = MonoInputs(frames[0], tuple(frames[1:]), tuple(poses[i] for i in range(1, len(frames))))
    else:
        inputs = None
        if cfg.photometric > 0:
            cfg = cfg.with_overrides(photometric=0.0)
    mask = data_io.read_label_png(args.labels, _mapping(args.mapping)) if args.labels else None
    gravity = _gravity(args, calib) if cfg.uses_sigl else None
    refined, trace = refine(init, inputs, gravity, mask, intr, cfg)
    out = data_io.ensure_dir(args.out_dir)
    depth = 1.0 / refined
    data_io.write_depth_png(out / "refined_depth.png", depth)
    data_io.write_pfm(out / "refined_inv_depth.pfm", refined)
    (out / "trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    summary = dict(command="refine", iterations=len(trace), reason=trace.reason,
                   initial_loss=trace.initial.total, final_loss=trace.totals[-1], out_dir=str(out))
    if args.gt:
        gt = data_io.read_depth_png(args.gt)
        before = evaluate(1.0 / init, gt, cap=args.cap)
        after = evaluate(depth, gt, cap=args.cap)
        summary.update(initial_abs_rel=before.abs_rel, final_abs_rel=after.abs_rel)
    _summary(**summary)
    return EXIT_OK


# --- eval -----------------------------------------------------------------------------------


def _crop(text: str) -> EvaluationCrop | None:
    if text == "garg":
        return EvaluationCrop.garg()
    if text == "none":
        return None
    vals = parse_floats(text, "--crop", 4, "--crop")
    return EvaluationCrop(*vals)


def cmd_eval(args) -> int:
    preds = data_io.list_files(args.pred_dir)
    gts = data_io.list_files(args.gt_dir)
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        print(f"error: unmatched files: {', '.join(unmatched)}", file=sys.stderr)
        return EXIT_INPUT
    if not preds:
        raise InputError("no depth PNGs found")
    crop = _crop(args.crop)
    names = sorted(preds)

    def one(name):
        pred = data_io.read_depth_png(preds[name])
        gt = data_io.read_depth_png(gts[name])
        pred = np.nan_to_num(pred, nan=0.0)
        rep = evaluate(pred, gt, args.cap, crop, filter_gt_by_cap=not args.no_gt_cap)
        if args.vis_dir:
            vis = data_io.visualize(error_map(pred, gt, args.cap), vmax=args.vis_max)
            data_io.write_image(Path(args.vis_dir) / name, vis)
        return rep

    if args.vis_dir:
        data_io.ensure_dir(args.vis_dir)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(one, names))
    agg = MetricReport.mean(reports)
    out = args.out or "metrics.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("image",) + MetricReport.FIELDS)
        for name, rep in zip(names, reports):
            w.writerow([name] + [repr(getattr(rep, f)) for f in MetricReport.FIELDS])
        w.writerow(["mean"] + [repr(getattr(agg, f)) for f in MetricReport.FIELDS])
    _summary(command="eval", images=len(names), out=str(out), **agg.as_dict())
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geosup", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a planar scene file to depth, labels and images")
    p.add_argument("scene")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--noise", type=float, default=0.0, help="relative Gaussian depth noise for depth_noisy.png")
    p.add_argument("--dropout", type=float, default=0.0, help="fraction of pixels dropped from depth_noisy.png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("loss", help="evaluate plane losses (and optionally stereo photometric loss)")
    p.add_argument("--depth", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--mapping", help="class/category mapping file (default: CityScapes grouping)")
    _add_gravity_args(p)
    p.add_argument("--categories", default=None, help="comma-separated gated categories")
    p.add_argument("-K", type=int, default=8, help="sampled directions for the vertical-plane loss")
    p.add_argument("--w-hp", type=float, default=1.0)
    p.add_argument("--w-vp", type=float, default=1.0)
    p.add_argument("--vp-mode", choices=("sampled", "exact"), default="sampled")
    p.add_argument("--min-region", type=int, default=16)
    p.add_argument("--global-regions", action="store_true", help="one region per category instead of per component")
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--baseline", type=float)
    p.add_argument("--out", help="per-region CSV")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("refine", help="refine an inverse-depth map")
    p.add_argument("--init", required=True, help="initial depth PNG")
    p.add_argument("--calib", required=True)
    p.add_argument("--labels")
    p.add_argument("--mapping")
    _add_gravity_args(p)
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--baseline", type=float)
    p.add_argument("--frames", nargs="+", help="reference frame followed by neighbouring frames")
    p.add_argument("--poses", help="key-value file of reference-to-neighbour poses")
    p.add_argument("--config", help="key-value refinement config")
    p.add_argument("--weights", help="overrides such as 'photometric=1,smoothness=0.1,hp=0.5,vp=0.5' or 'sigl=0'")
    p.add_argument("--categories", default=None)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--gt", help="ground-truth depth PNG for before/after AbsRel")
    p.add_argument("--cap", type=float, default=80.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="depth metrics over matching prediction/ground-truth PNGs")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--cap", type=float, default=80.0)
    p.add_argument("--crop", default="garg", help="'garg', 'none' or 'top,bottom,left,right' fractions")
    p.add_argument("--no-gt-cap", action="store_true", help="keep ground truth deeper than the cap")
    p.add_argument("--out", help="CSV path (default metrics.csv)")
    p.add_argument("--vis-dir", help="write grey error maps here (darker = smaller error)")
    p.add_argument("--vis-max", type=float, default=0.5, help="AbsRel mapped to white")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
