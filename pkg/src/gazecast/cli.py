"""Command-line entry point: gen / train / eval / infer / check.

Exit codes: 0 success, 1 usage or config error, 2 check or training
failure, 3 data or checkpoint error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data as D
from . import tensor as T
from .config import RunConfig, config_from_text, load_config, parse_config_lines
from .errors import CheckpointError, ConfigError, DatasetError, GazecastError
from .evaluate import evaluate_model
from .geometry import write_pgm
from .heads import argmax_point
from .model import GazeTargetModel, build_batch
from .serialization import load_checkpoint, save_checkpoint
from .train import TrainingDivergedError, train_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK = 2
EXIT_DATA = 3

_SCENE_KEYS = {
    "scene.n_objects": ("n_objects", int),
    "scene.n_people": ("n_people", int),
    "scene.depth_layers": ("depth_layers", int),
    "scene.resolution": ("resolution", int),
    "scene.target_rule": ("target_rule", str),
    "scene.p_out_of_frame": ("p_out_of_frame", float),
    "scene.seed": ("rng_seed", int),
}


def _load_scene_spec(path, seed_override=None) -> D.SceneSpec:
    kwargs = {}
    if path:
        with open(path) as f:
            raw = parse_config_lines(f)
        for key, val in raw.items():
            if key not in _SCENE_KEYS:
                raise ConfigError(f"unknown scene key {key!r}")
            attr, cast = _SCENE_KEYS[key]
            kwargs[attr] = cast(val)
    if seed_override is not None:
        kwargs["rng_seed"] = seed_override
    return D.SceneSpec(**kwargs)


def cmd_gen(args) -> int:
    spec = _load_scene_spec(args.spec, args.seed)
    samples = D.generate_dataset(spec, args.count)
    D.write_dataset(samples, args.out)
    summary = D.self_check(samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    print(f"self-check: {summary['checked']} in-frame checked, "
          f"{summary['mismatches']} oracle mismatches, "
          f"{summary['cone_violations']} cone violations")
    if summary["mismatches"] or summary["cone_violations"]:
        return EXIT_CHECK
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    samples = D.read_dataset(args.data)
    if not samples:
        raise DatasetError(f"{args.data}: dataset is empty")
    init_states = []
    for path in args.init or []:
        state, _, _ = load_checkpoint(path)
        init_states.append(state)
    csv_path = args.csv or (os.path.splitext(args.out)[0] + "_loss.csv")
    model = train_model(cfg, samples, init_states=init_states, csv_path=csv_path,
                        log=lambda msg: print(msg, flush=True))
    save_checkpoint(args.out, model.state_dict(), cfg.config_hash(), cfg.to_text())
    print(f"checkpoint written to {args.out} (config {cfg.config_hash()})")
    return EXIT_OK


def _load_model(ckpt_path) -> tuple[GazeTargetModel, RunConfig]:
    state, config_hash, config_text = load_checkpoint(ckpt_path)
    cfg = config_from_text(config_text)
    if cfg.config_hash() != config_hash:
        raise CheckpointError(f"{ckpt_path}: config hash mismatch "
                              f"({config_hash} vs {cfg.config_hash()})")
    model = GazeTargetModel(cfg)
    model.load_state_dict(state)
    return model, cfg


def cmd_eval(args) -> int:
    model, cfg = _load_model(args.ckpt)
    samples = D.read_dataset(args.data)
    report, dumps = evaluate_model(model, samples, cfg, oracle_heatmaps=args.oracle)
    with open(args.report, "w") as f:
        f.write(report.to_json() + "\n")
    if args.dump:
        with open(args.dump, "w") as f:
            for d in dumps:
                f.write(d.to_json() + "\n")
    print(f"evaluated {report.n_samples} samples: AUC {report.auc:.4f}, "
          f"AvgDist {report.avg_dist:.4f}, MinDist {report.min_dist:.4f}, "
          f"AP {report.ap if report.ap is None else round(report.ap, 4)}")
    return EXIT_OK


def cmd_infer(args) -> int:
    model, cfg = _load_model(args.ckpt)
    samples = {s.sample_id: s for s in D.read_dataset(args.data)}
    if args.sample not in samples:
        raise DatasetError(f"sample {args.sample} not in {args.data}")
    sample = samples[args.sample]
    batch = build_batch([sample], cfg)
    with T.no_grad():
        result = model(batch)
    os.makedirs(args.render, exist_ok=True)
    cone = result.cone.data[0, 0]
    heatmap = result.heatmap.data[0, 0]
    write_pgm(os.path.join(args.render, "cone.pgm"), cone)
    write_pgm(os.path.join(args.render, "heatmap.pgm"), heatmap)

    overlay = sample.modality(cfg.modalities[0]).mean(axis=0)
    px, py = argmax_point(heatmap)
    res = overlay.shape[-1]
    _mark(overlay, px, py, res, 1.0)
    for gx, gy in sample.gaze_points:
        _mark(overlay, gx, gy, res, 0.0)
    write_pgm(os.path.join(args.render, "overlay.pgm"), overlay)
    print(f"rendered cone.pgm, heatmap.pgm, overlay.pgm to {args.render}")
    print(f"predicted gaze point: ({px:.4f}, {py:.4f})")
    return EXIT_OK


def _mark(img: np.ndarray, x: float, y: float, res: int, value: float) -> None:
    """Draw a small cross at a normalized point."""
    ci = min(int(y * res), res - 1)
    cj = min(int(x * res), res - 1)
    for di in range(-2, 3):
        i = min(max(ci + di, 0), res - 1)
        img[i, cj] = value
    for dj in range(-2, 3):
        j = min(max(cj + dj, 0), res - 1)
        img[ci, j] = value


def cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks(args.suite)
    failures = 0
    for res in results:
        print(res.line())
        failures += 0 if res.passed else 1
    if failures:
        print(f"{failures}/{len(results)} checks FAILED")
        return EXIT_CHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazecast",
                                     description="desk-scale multimodal gaze target prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--spec", help="scene spec file (scene.* keys)")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, help="override scene.seed")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="train a model variant")
    p.add_argument("--config", help="run config file (model.*/train.*/loss.* keys)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--init", action="append",
                   help="checkpoint whose matching weights seed this model (repeatable)")
    p.add_argument("--csv", help="loss curve CSV path (default: alongside checkpoint)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", required=True, help="metrics JSON output")
    p.add_argument("--dump", help="per-sample JSONL output")
    p.add_argument("--oracle", action="store_true",
                   help="score ground-truth heatmaps instead of predictions (sanity bound)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="run one sample and render PGM images")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sample", type=int, required=True)
    p.add_argument("--render", required=True, help="output directory")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("check", help="run verification suites")
    p.add_argument("--suite", choices=("grad", "oracle", "all"), default="all")
    p.set_defaults(fn=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (DatasetError, CheckpointError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GazecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
