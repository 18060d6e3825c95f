"""Command-line entry points, one per pipeline stage.

Stage commands (resample, crop, outliers) transform a dataset directory
into a new one; experiment commands (features, train, evaluate) take a raw
manifest and run the standard preprocessing internally (resample to 30 fps,
crop-normalize, fragment). ``GMA_DATA_DIR`` supplies default locations when
--manifest/--out are omitted. Every command that uses randomness accepts
--seed and is byte-deterministic given it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (
    ExperimentConfig,
    aggregate_raw,
    default_hyperparams,
    read_raw_results,
    run_experiment,
    samples_from_fragments,
    write_raw_results,
)
from .features import build_features, write_feature_csv
from .keypoints import parse_keypoint
from .learn import TrainConfig, save_model, train
from .learn.forest import rf_fit
from .preprocess import (
    ScriptedCorrections,
    crop_record,
    fragment_dataset,
    outlier_loop,
    prepare_records,
    resample_record,
    rounds_report_json,
)
from .records import (
    DataError,
    DatasetManifest,
    ManifestEntry,
    load_manifest,
    load_records,
    write_manifest,
    write_tracks,
)
from .synth import SynthSpec, generate, save_dataset
from .trackers import ConstantTracker, JumpInjectingTracker

ENV_DATA_DIR = "GMA_DATA_DIR"


def _data_dir() -> Path:
    return Path(os.environ.get(ENV_DATA_DIR, "."))


def _manifest_path(args) -> Path:
    if args.manifest:
        return Path(args.manifest)
    return _data_dir() / "manifest.csv"


def _save_transformed(records, manifest: DatasetManifest, out_dir: Path) -> None:
    (out_dir / "tracks").mkdir(parents=True, exist_ok=True)
    entries = []
    for record in records:
        rel = Path("tracks") / f"{record.video_id}.csv"
        write_tracks(record.tracks, out_dir / rel)
        entries.append(ManifestEntry(
            video_id=record.video_id, subject_id=record.subject_id,
            age_group=record.age_group, label=record.label, fps=record.fps,
            frame_width=record.frame_width, frame_height=record.frame_height,
            track_path=rel,
        ))
    write_manifest(DatasetManifest(entries=tuple(entries)), out_dir / "manifest.csv")


def _make_tracker(name: str):
    if name == "constant":
        return ConstantTracker()
    if name == "inject-jump":
        return JumpInjectingTracker()
    raise DataError(f"unknown tracker {name!r}")


def _prepared_fragments(args):
    manifest = load_manifest(_manifest_path(args))
    records = load_records(manifest)
    prepared = prepare_records(records, dst_fps=args.fps, margin=args.margin)
    return fragment_dataset(prepared)


# ------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_subjects=args.subjects,
        class_balance=args.balance,
        occlusion_rate=args.occlusion,
        fps_choices=tuple(float(f) for f in args.fps_choices.split(",")),
        duration_range=(args.duration_min, args.duration_max),
        age_group=args.age_group,
        seed=args.seed,
    )
    manifest, records = generate(spec)
    out = Path(args.out) if args.out else _data_dir()
    path = save_dataset(manifest, records, out, spec)
    print(f"wrote {len(records)} videos under {out} (manifest: {path})")
    return 0


def cmd_resample(args) -> int:
    manifest = load_manifest(_manifest_path(args))
    records = [resample_record(r, args.fps) for r in load_records(manifest)]
    out = Path(args.out)
    _save_transformed(records, manifest, out)
    print(f"resampled {len(records)} videos to {args.fps} fps under {out}")
    return 0


def cmd_crop(args) -> int:
    manifest = load_manifest(_manifest_path(args))
    records = [crop_record(r, args.margin) for r in load_records(manifest)]
    out = Path(args.out)
    _save_transformed(records, manifest, out)
    crops = {
        r.video_id: [r.crop.x_min, r.crop.y_min, r.crop.x_max, r.crop.y_max]
        for r in records
    }
    with open(out / "crops.json", "w") as fh:
        json.dump(crops, fh, indent=2, sort_keys=True)
    print(f"cropped {len(records)} videos under {out}")
    return 0


def cmd_outliers(args) -> int:
    manifest = load_manifest(_manifest_path(args))
    records = load_records(manifest)
    tracker = _make_tracker(args.tracker)

    corrections_by_video: dict[str, list] = {}
    if args.corrections:
        import csv as _csv
        with open(args.corrections, newline="") as fh:
            reader = _csv.reader(fh)
            header = next(reader, None)
            if header != ["video_id", "round", "keypoint", "frame", "x", "y"]:
                raise DataError(f"{args.corrections}: bad corrections header {header}")
            for row in reader:
                if not row:
                    continue
                corrections_by_video.setdefault(row[0], []).append(
                    (int(row[1]), parse_keypoint(row[2]), int(row[3]), float(row[4]), float(row[5]))
                )

    report = {}
    total_flags = 0
    corrected = []
    for record in records:
        source = ScriptedCorrections(corrections_by_video.get(record.video_id, []))
        tracks, rounds = outlier_loop(record.tracks, tracker, source,
                                      max_rounds=args.max_rounds, k=args.k)
        report[record.video_id] = rounds_report_json(rounds)
        total_flags += sum(len(r) for r in rounds)
        corrected.append(record.with_tracks(tracks))

    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    if args.out:
        _save_transformed(corrected, manifest, Path(args.out))
    print(f"outlier loop done: {total_flags} flags across {len(records)} videos")
    return 0


def cmd_features(args) -> int:
    fragments, length = _prepared_fragments(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    index_lines = ["fragment_id,video_id,subject_id,age_group,label,start_frame,path"]
    for i, frag in enumerate(fragments):
        tensor = build_features(frag, args.features, args.angles_on_normalized)
        rel = f"fragment_{i:04d}.csv"
        write_feature_csv(tensor, out / rel)
        index_lines.append(
            f"{i},{frag.video_id},{frag.subject_id},{frag.age_group},{frag.label},{frag.start_frame},{rel}"
        )
    (out / "fragments.csv").write_text("\n".join(index_lines) + "\n")
    print(f"wrote {len(fragments)} fragment tensors (length {length}) under {out}")
    return 0


def cmd_train(args) -> int:
    fragments, _ = _prepared_fragments(args)
    samples = samples_from_fragments(fragments, args.features, args.angles_on_normalized)
    if args.model == "rf":
        X = np.stack([s.values.reshape(-1) for s in samples])
        y = np.array([s.label for s in samples])
        model = rf_fit(X, y, n_trees=args.trees, seed=args.seed)
    else:
        defaults = default_hyperparams(args.model)
        config = TrainConfig(
            model=args.model,
            lr=args.lr if args.lr is not None else defaults["lr"],
            batch_size=args.batch_size if args.batch_size is not None else defaults["batch_size"],
            epochs=args.epochs if args.epochs is not None else defaults["epochs"],
            seed=args.seed,
        )
        model, losses = train(args.model, [(s.values, s.label) for s in samples], config)
        print(f"final training loss {losses[-1]:.6f} over {config.epochs} epochs")
    save_model(model, args.out)
    print(f"saved {args.model} checkpoint to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    fragments, _ = _prepared_fragments(args)
    samples = samples_from_fragments(fragments, args.features, args.angles_on_normalized)
    hyper = dict(default_hyperparams(args.model))
    if args.model == "rf" and args.trees is not None:
        hyper["n_trees"] = args.trees
    if args.model in ("cnn", "lstm"):
        if args.lr is not None:
            hyper["lr"] = args.lr
        if args.batch_size is not None:
            hyper["batch_size"] = args.batch_size
        if args.epochs is not None:
            hyper["epochs"] = args.epochs
    config = ExperimentConfig(
        model=args.model,
        feature_set=args.features,
        age_group=args.age_group,
        grid=(hyper,),
        n_seeds=args.seeds,
        test_frac=args.test_frac,
        k_folds=args.folds,
        seed=args.seed,
    )
    result = run_experiment(config, samples)
    from .records import write_report
    write_report(result.report, args.out)
    if args.raw:
        write_raw_results(result.raw_rows, args.raw)
    for row in result.report.sorted_rows():
        print(f"{row.model} {row.feature_set} {row.age_group} {row.metric}: "
              f"{row.mean:.4f} +/- {row.std:.4f} (n={row.n_seeds})")
    if result.skipped_seeds:
        print(f"skipped {len(result.skipped_seeds)} seeds", file=sys.stderr)
    print(f"wrote report to {args.out}")
    return 0


def cmd_report(args) -> int:
    rows = read_raw_results(args.raw)
    report = aggregate_raw(rows)
    from .records import write_report
    write_report(report, args.out)
    print(f"aggregated {len(rows)} raw rows into {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        manifest_path=_manifest_path(args),
        frames_dir=Path(args.frames_dir) if args.frames_dir else None,
        data_dir=Path(args.data_dir) if args.data_dir else _data_dir() / "annotations",
        tracker=_make_tracker(args.tracker),
        outlier_k=args.k,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmakit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gmakit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_manifest(p):
        p.add_argument("--manifest", help=f"dataset manifest (default: ${ENV_DATA_DIR}/manifest.csv)")

    def add_prep(p):
        p.add_argument("--fps", type=float, default=30.0, help="common rate to resample to")
        p.add_argument("--margin", type=float, default=0.15, help="crop margin fraction")
        p.add_argument("--angles-on-normalized", action="store_true",
                       help="compute angles on crop-normalized coordinates instead of pixel geometry")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--subjects", type=int, default=40)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--occlusion", type=float, default=0.02)
    p.add_argument("--fps-choices", default="30,60,120")
    p.add_argument("--duration-min", type=float, default=8.0)
    p.add_argument("--duration-max", type=float, default=16.0)
    p.add_argument("--age-group", choices=["early", "late"], default=None,
                   help="fix one age group (default: alternate)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=f"output directory (default: ${ENV_DATA_DIR})")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("resample", help="resample all videos to a common fps")
    add_manifest(p)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("crop", help="crop-normalize every video from its extreme keypoints")
    add_manifest(p)
    p.add_argument("--margin", type=float, default=0.15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("outliers", help="run the outlier detect/correct/retrack loop")
    add_manifest(p)
    p.add_argument("--k", type=float, default=15.0, help="flag threshold in displacement sigmas")
    p.add_argument("--max-rounds", type=int, default=3)
    p.add_argument("--corrections", help="corrections log CSV: video_id,round,keypoint,frame,x,y")
    p.add_argument("--report", help="write per-video rounds report JSON here")
    p.add_argument("--out", help="write corrected tracks + manifest here")
    p.add_argument("--tracker", default="constant", choices=["constant", "inject-jump"])
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("features", help="export per-fragment feature tensors as CSV")
    add_manifest(p)
    add_prep(p)
    p.add_argument("--features", required=True, choices=["coords", "angles", "both"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train one model on the whole dataset")
    add_manifest(p)
    add_prep(p)
    p.add_argument("--model", required=True, choices=["rf", "cnn", "lstm"])
    p.add_argument("--features", required=True, choices=["coords", "angles", "both"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=170)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="seed-sweep evaluation with held-out subjects")
    add_manifest(p)
    add_prep(p)
    p.add_argument("--model", required=True, choices=["rf", "cnn", "lstm"])
    p.add_argument("--features", required=True, choices=["coords", "angles", "both"])
    p.add_argument("--age-group", choices=["early", "late"], default=None)
    p.add_argument("--seeds", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-frac", type=float, default=0.2)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--trees", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="summary report CSV")
    p.add_argument("--raw", help="per-seed raw results CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="aggregate a raw per-seed CSV into a summary report")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    add_manifest(p)
    p.add_argument("--frames-dir", help="directory of per-video frame PNGs")
    p.add_argument("--data-dir", help="where annotations/corrections are persisted")
    p.add_argument("--tracker", default="constant", choices=["constant", "inject-jump"])
    p.add_argument("--k", type=float, default=15.0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
