"""Command-line pipeline: world generation, sensor simulation, ground-truth
building, dataset assembly, training, prediction, stitching, evaluation and
image export.

All randomness flows from explicit seed flags, so any subcommand rerun with
identical inputs produces identical outputs. Exit codes: 0 success, 2 bad
arguments, 3 data-contract violation, 4 training divergence.

An optional ``--config FILE`` (JSON) supplies defaults for flags; explicit
flags override the file.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data as datamod
from . import gridio, mapping, sensors, train as trainmod, world as worldmod
from .errors import Divergence, GridwiseError
from .groundtruth import IdealIsmParams, MapSpec, accumulate_map, cut_labels
from .grid import DEFAULT_TAU
from .nn.model import AeConfig, AeModel

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONTRACT = 3
EXIT_DIVERGED = 4


def _load_config(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _cfg(args, config, key, default):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    return config.get(key, default)


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_world(args):
    spec = worldmod.SceneSpec.from_json(_load_config(args.spec)) \
        if args.spec else worldmod.SceneSpec()
    w = worldmod.generate_world(args.seed, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w.save(out / "world.json")
    print(f"world seed={args.seed}: {w.segments.shape[0]} segments, "
          f"{len(w.movers)} movers -> {out / 'world.json'}")
    return EXIT_OK


def cmd_simulate(args):
    config = _load_config(args.config)
    w = worldmod.World.load(Path(args.world) / "world.json")
    step = float(_cfg(args, config, "step", 1.0))
    traj = worldmod.generate_trajectory(w, args.traj_seed, step=step)
    frames = int(_cfg(args, config, "frames", len(traj)))
    if frames > len(traj):
        raise GridwiseError(
            f"requested {frames} frames but the trajectory supports {len(traj)}")
    traj = worldmod.Trajectory(traj.times[:frames], traj.poses[:frames])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traj.save(out / "trajectory.csv")
    max_range = float(_cfg(args, config, "max-range", 20.0))
    sensor_tag = 0 if args.sensor == sensors.LIDAR else 1
    if args.sensor == sensors.LIDAR:
        n_beams = int(_cfg(args, config, "beams", 360))
        sigma = float(_cfg(args, config, "lidar-sigma", 0.02))
    else:
        params = sensors.RadarParams(
            range_sigma=float(_cfg(args, config, "radar-range-sigma", 0.3)),
            azimuth_sigma=float(np.radians(_cfg(args, config, "radar-azimuth-sigma-deg", 2.0))),
            base_detection_prob=float(_cfg(args, config, "radar-base-p", 0.35)),
            ghost_rate=float(_cfg(args, config, "radar-ghost-rate", 1.5)),
            max_range=max_range,
        )
    for i, (t, pose) in enumerate(zip(traj.times, traj.poses)):
        rng = np.random.default_rng([w.seed, args.traj_seed, sensor_tag, i])
        if args.sensor == sensors.LIDAR:
            scan = sensors.simulate_lidar(w, pose, float(t), rng, n_beams,
                                          max_range, sigma)
        else:
            scan = sensors.simulate_radar(w, pose, float(t), rng, params)
        sensors.save_scan(scan, out / f"frame_{i:05d}.csv")
    _write_json(out / "meta.json", {
        "world_seed": w.seed, "traj_seed": args.traj_seed,
        "sensor": args.sensor, "frames": frames, "step": step,
        "max_range": max_range, "bounds": list(w.bounds),
    })
    print(f"{args.sensor}: {frames} frames -> {out}")
    return EXIT_OK


def _load_scan_dir(path):
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    traj = worldmod.Trajectory.load(path / "trajectory.csv")
    scans = [sensors.load_scan(p) for p in sorted(path.glob("frame_*.csv"))]
    return meta, traj, scans


def cmd_build_gt(args):
    meta, traj, scans = _load_scan_dir(args.scans)
    res = float(args.resolution)
    params = IdealIsmParams(l_free=args.l_free, l_occ=args.l_occ,
                            max_range=meta["max_range"])
    spec = MapSpec.from_bounds(meta["bounds"], res)
    grid = accumulate_map(scans, traj, params, spec)
    gridio.save_grid(grid, args.out)
    print(f"ground truth {grid.width}x{grid.height} @ {res} m -> {args.out}")
    return EXIT_OK


def cmd_make_dataset(args):
    if len(args.scans) != len(args.gt):
        raise GridwiseError("need one --gt map per --scans directory")
    pairs = []
    sensors_seen = set()
    resolutions = set()
    skipped_total = 0
    for scan_dir, gt_path in zip(args.scans, args.gt):
        meta, traj, scans = _load_scan_dir(scan_dir)
        sensors_seen.add(meta["sensor"])
        gt = gridio.load_grid(gt_path)
        resolutions.add(round(gt.resolution, 12))
        patches, skipped = cut_labels(gt, traj, args.side)
        skipped_total += len(skipped)
        dropped = set(skipped)
        kept = [i for i in range(len(traj)) if i not in dropped]
        sub_traj = worldmod.Trajectory(traj.times[kept],
                                       [traj.poses[i] for i in kept])
        sub_scans = [scans[i] for i in kept]
        pairs.extend(datamod.make_pairs(sub_scans, patches, sub_traj,
                                        meta["world_seed"], tau=args.tau,
                                        v_thresh=args.v_thresh))
    if len(sensors_seen) != 1:
        raise GridwiseError(f"mixed sensors in one dataset: {sensors_seen}")
    if len(resolutions) != 1:
        raise GridwiseError(f"ground-truth maps disagree on resolution: {resolutions}")
    res = resolutions.pop()
    manifest = datamod.split_save(pairs, args.split, args.out, extra_meta={
        "sensor": sensors_seen.pop(), "tau": args.tau,
        "v_thresh": args.v_thresh, "resolution": res,
        "window": args.side * res,
    })
    counts = {s: manifest["splits"][s]["count"] for s in ("train", "test")}
    print(f"dataset: {counts['train']} train / {counts['test']} test pairs "
          f"({skipped_total} poses skipped) -> {args.out}")
    return EXIT_OK


_SCHEME_FLAGS = {"inverse-ratio": trainmod.INVERSE_CLASS_RATIO,
                 "independent": trainmod.INDEPENDENT_CLASS_MSE}


def cmd_train(args):
    config = _load_config(args.config)
    manifest = datamod.load_manifest(args.dataset)
    split = datamod.load_split(args.dataset, "train")
    if len(split) == 0:
        raise GridwiseError("training split is empty")
    channels = _cfg(args, config, "channels", None)
    if isinstance(channels, str):
        channels = tuple(int(c) for c in channels.split(","))
    ae_cfg = AeConfig(side=manifest["side"],
                      channels=tuple(channels) if channels else AeConfig().channels)
    seed = int(_cfg(args, config, "seed", 0))
    model = AeModel(ae_cfg, seed=seed)
    loss_cfg = trainmod.LossConfig(
        scheme=_SCHEME_FLAGS[args.scheme],
        lam=float(_cfg(args, config, "lambda", 1e-4)),
        tau=float(manifest.get("tau", DEFAULT_TAU)))
    train_cfg = trainmod.TrainConfig(
        epochs=int(_cfg(args, config, "epochs", 20)),
        batch_size=int(_cfg(args, config, "batch-size", 16)),
        lr=float(_cfg(args, config, "lr", 2e-4)),
        seed=seed,
        augment=bool(_cfg(args, config, "augment", True)))
    meta = mapping.ModelMeta(
        sensor=manifest["sensor"], side=manifest["side"],
        window=manifest["window"], scheme=loss_cfg.scheme, config=ae_cfg,
        tau=loss_cfg.tau,
        v_thresh=manifest.get("v_thresh", sensors.DEFAULT_V_THRESH))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        trainmod.train(model, split, loss_cfg, train_cfg,
                       log_path=out.with_suffix(out.suffix + ".log.csv"))
    except Divergence as exc:
        mapping.save_model(model, meta, out)  # last finite state
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    mapping.save_model(model, meta, out)
    print(f"model [{meta.sensor}/{args.scheme}] -> {out}")
    return EXIT_OK


def cmd_predict(args):
    model, meta = mapping.load_model(args.model)
    scan = sensors.load_scan(args.scan)
    patch = mapping.predict_patch(model, meta, scan)
    gridio.save_grid(patch, args.out)
    print(f"patch {patch.width}x{patch.height} -> {args.out}")
    return EXIT_OK


def cmd_stitch(args):
    model, meta = mapping.load_model(args.model)
    scan_meta, traj, scans = _load_scan_dir(args.scans)
    spec = MapSpec.from_bounds(scan_meta["bounds"], meta.resolution)
    grid = mapping.stitch(model, meta, scans, traj, spec)
    gridio.save_grid(grid, args.out)
    print(f"stitched map {grid.width}x{grid.height} -> {args.out}")
    return EXIT_OK


def cmd_eval(args):
    model, meta = mapping.load_model(args.model)
    split = datamod.load_split(args.dataset, args.split)
    if len(split) == 0:
        raise GridwiseError(f"{args.split} split is empty")
    preds = []
    for i in range(len(split)):
        x = split.inputs[i][None, None]
        logits = model.forward(x.astype(np.float32), train=False)
        preds.append(np.tanh(logits[0, 0].astype(np.float64) / 2.0))
    mse = mapping.per_class_mse(np.stack(preds),
                                split.labels.astype(np.float64), meta.tau)
    metrics = {"scheme": meta.scheme, "sensor": meta.sensor,
               "free_mse": mse["free_mse"], "unknown_mse": mse["unknown_mse"],
               "occupied_mse": mse["occupied_mse"],
               "occ_iou": None, "free_iou": None}
    if args.stitched and args.gt:
        occ_iou, free_iou, _ = mapping.map_agreement(
            gridio.load_grid(args.stitched), gridio.load_grid(args.gt), meta.tau)
        metrics["occ_iou"] = occ_iou
        metrics["free_iou"] = free_iou
    _write_json(args.out, metrics)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_export(args):
    grid = gridio.load_grid(args.grid)
    if args.format == "pgm":
        gridio.export_pgm(grid, args.out)
    else:
        gridio.export_png(grid, args.out)
    print(f"{args.format} image {grid.width}x{grid.height} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridwise",
        description="Synthetic occupancy-mapping pipeline: simulate, learn "
                    "an inverse sensor model, stitch maps.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-world", help="generate a synthetic world")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--spec", help="JSON scene-mix weights")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_world)

    s = sub.add_parser("simulate", help="simulate scans along a trajectory")
    s.add_argument("--world", required=True, help="directory with world.json")
    s.add_argument("--sensor", choices=[sensors.LIDAR, sensors.RADAR],
                   required=True)
    s.add_argument("--traj-seed", type=int, required=True)
    s.add_argument("--frames", type=int)
    s.add_argument("--step", type=float)
    s.add_argument("--max-range", type=float)
    s.add_argument("--beams", type=int, help="lidar beam count")
    s.add_argument("--lidar-sigma", type=float, help="lidar range noise (m)")
    s.add_argument("--radar-range-sigma", type=float)
    s.add_argument("--radar-azimuth-sigma-deg", type=float)
    s.add_argument("--radar-base-p", type=float)
    s.add_argument("--radar-ghost-rate", type=float)
    s.add_argument("--config", help="JSON defaults; flags override")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_simulate)

    b = sub.add_parser("build-gt", help="accumulate a ground-truth map")
    b.add_argument("--scans", required=True, help="lidar scan directory")
    b.add_argument("--resolution", type=float, default=15.0 / 64)
    b.add_argument("--l-free", type=float, default=-0.41)
    b.add_argument("--l-occ", type=float, default=1.73)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_build_gt)

    m = sub.add_parser("make-dataset", help="pair scans with label patches")
    m.add_argument("--scans", nargs="+", required=True,
                   help="one or more scan directories (one world each)")
    m.add_argument("--gt", nargs="+", required=True,
                   help="matching ground-truth maps")
    m.add_argument("--side", type=int, choices=[64, 128], default=64)
    m.add_argument("--split", type=float, default=0.8,
                   help="train fraction of world seeds")
    m.add_argument("--tau", type=float, default=DEFAULT_TAU)
    m.add_argument("--v-thresh", type=float, default=sensors.DEFAULT_V_THRESH)
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_make_dataset)

    t = sub.add_parser("train", help="train an inverse sensor model")
    t.add_argument("--dataset", required=True)
    t.add_argument("--scheme", choices=sorted(_SCHEME_FLAGS), required=True)
    t.add_argument("--config", help="JSON defaults; flags override")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--channels", help="comma-separated encoder channels")
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train)

    pr = sub.add_parser("predict", help="predict one log-odds patch")
    pr.add_argument("--model", required=True)
    pr.add_argument("--scan", required=True, help="frame CSV (sidecar JSON beside it)")
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=cmd_predict)

    st = sub.add_parser("stitch", help="fuse predicted patches into a map")
    st.add_argument("--model", required=True)
    st.add_argument("--scans", required=True)
    st.add_argument("--out", required=True)
    st.set_defaults(fn=cmd_stitch)

    e = sub.add_parser("eval", help="evaluate a model on a dataset split")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", choices=["train", "test"], default="test")
    e.add_argument("--stitched", help="optional stitched map for IoU")
    e.add_argument("--gt", help="ground-truth map for IoU")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_eval)

    x = sub.add_parser("export", help="export a grid as an image")
    x.add_argument("--grid", required=True)
    x.add_argument("--format", choices=["pgm", "png"], required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(fn=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Divergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (GridwiseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
