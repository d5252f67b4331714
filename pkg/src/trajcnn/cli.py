"""``trajcnn`` command line: train, eval, predict, bench, ablate.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.
Machine-readable output (JSON/CSV) goes to stdout or named files;
diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, checkpoint, kernels
from .baselines import linear_predict
from .data import SCENES, DataFormatError, leave_one_out, load_data_dir
from .model import ModelConfig, build
from .train import (TrainConfig, TrainingDiverged, ablate_decode_mode, ablate_layers, evaluate,
                    make_model, train)

log = logging.getLogger("trajcnn")


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", type=Path)
    p.add_argument("--hold-out", choices=SCENES)
    p.add_argument("--ckpt", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--embed", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--obs-len", type=int, default=8)
    p.add_argument("--pred-len", type=int, default=12)
    p.add_argument("--decode-mode", choices=("multi", "sequential"), default="multi")
    p.add_argument("--input-mode", choices=("offsets", "absolute"), default="offsets")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", choices=("compiled", "python"),
                   help="conv kernel backend (default: compiled when built)")
    p.add_argument("-v", "--verbose", action="store_true")


def _training_flags(p):
    p.add_argument("--model", choices=("cnn", "lstm"), default="cnn")
    p.add_argument("--max-epochs", type=int, default=300)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trajcnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on four scenes, validate on a held-out fraction")
    _shared(p)
    _training_flags(p)
    p.add_argument("--log", type=Path, help="write the per-epoch log CSV here")

    p = sub.add_parser("eval", help="ADE/FDE on the held-out scene as JSON")
    _shared(p)
    p.add_argument("--baseline", choices=("linear",), help="evaluate a baseline instead of --ckpt")
    p.add_argument("--per-sample", type=Path, help="CSV with predicted and true points per window")

    p = sub.add_parser("predict", help="read observed 'x y' lines, print predicted positions")
    _shared(p)
    p.add_argument("--obs", type=Path, help="observed trajectory file (default: stdin)")
    p.add_argument("--debug-zero-weights", action="store_true",
                   help="use an all-zero model built from the flags instead of --ckpt")

    p = sub.add_parser("bench", help="inference latency table (CSV)")
    _shared(p)
    p.add_argument("--models", default="cnn,lstm", help="comma-separated model kinds")
    p.add_argument("--ref", default=None, help="reference model for the speed-up column")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=200)
    p.add_argument("--backends", action="store_true",
                   help="compare compiled and python kernels instead")

    p = sub.add_parser("ablate", help="layer-count or decode-mode ablation (CSV)")
    _shared(p)
    _training_flags(p)
    p.add_argument("--mode", choices=("layers", "decode"), required=True)
    p.add_argument("--folds", default=",".join(SCENES), help="comma-separated held-out scenes")
    return parser


def _model_config(args) -> ModelConfig:
    return ModelConfig(obs_len=args.obs_len, pred_len=args.pred_len, embed_dim=args.embed,
                       num_layers=args.layers, kernel_size=args.kernel,
                       decode_mode=args.decode_mode, input_mode=args.input_mode, seed=args.seed)


def _train_config(args) -> TrainConfig:
    return TrainConfig(batch_size=args.batch, max_epochs=args.max_epochs, patience=args.patience,
                       lr=args.lr, seed=args.seed)


def _require(args, *names):
    for n in names:
        if getattr(args, n.replace("-", "_")) is None:
            raise CliError(f"--{n} is required")


def _load_scenes(args):
    _require(args, "data-dir")
    return load_data_dir(args.data_dir)


def _load_ckpt(path):
    try:
        return checkpoint.load(path)
    except checkpoint.CheckpointError as exc:
        raise CliError(f"{path}: {exc}") from exc


def cmd_train(args, mcfg, tcfg):
    _require(args, "hold-out", "out")
    scenes = _load_scenes(args)
    tr, va, _ = leave_one_out(scenes, args.hold_out, seed=args.seed, val_fraction=args.val_fraction,
                              obs_len=mcfg.obs_len, pred_len=mcfg.pred_len)
    print(f"training {args.model} on {len(tr)} windows, validating on {len(va)}", file=sys.stderr)
    model, tlog = train(make_model(args.model, mcfg), tr, va, tcfg)
    checkpoint.save(model, args.out)
    if args.log:
        args.log.write_text(tlog.to_csv())
    best = tlog.val_loss[tlog.best_epoch]
    print(f"best epoch {tlog.best_epoch}, val loss {best:.6f} ({tlog.stop_reason})", file=sys.stderr)


def cmd_eval(args, mcfg, tcfg):
    _require(args, "hold-out")
    if args.baseline:
        predict = lambda o: linear_predict(o, mcfg.pred_len)  # noqa: E731
        obs_len, pred_len = mcfg.obs_len, mcfg.pred_len
    else:
        _require(args, "ckpt")
        model = _load_ckpt(args.ckpt)
        obs_len, pred_len = model.config.obs_len, model.config.pred_len
        if (obs_len, pred_len) != (args.obs_len, args.pred_len):
            raise CliError(f"checkpoint expects obs/pred {obs_len}/{pred_len}, "
                           f"flags say {args.obs_len}/{args.pred_len}")
        predict = model.predict
    scenes = _load_scenes(args)
    _, _, test = leave_one_out(scenes, args.hold_out, seed=args.seed, val_fraction=0.0,
                               obs_len=obs_len, pred_len=pred_len)
    report = evaluate(predict, test)
    if args.per_sample:
        _write_per_sample(args.per_sample, predict, test)
    print(json.dumps(report.to_dict()))


def _write_per_sample(path, predict, samples):
    obs = np.stack([s.observed for s in samples])
    preds = predict(obs)
    pred_len = preds.shape[1]
    header = ["scene", "pedestrian", "start_frame"]
    header += [f"pred_{a}{t}" for t in range(pred_len) for a in "xy"]
    header += [f"true_{a}{t}" for t in range(pred_len) for a in "xy"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for s, p in zip(samples, preds):
            ped = ":".join(str(x) for x in s.pedestrian)
            w.writerow([s.scene_name, ped, s.start_frame]
                       + [f"{v:.6f}" for v in p.ravel()]
                       + [f"{v:.6f}" for v in s.future.ravel()])


def _read_observed(args, obs_len):
    text = args.obs.read_text() if args.obs else sys.stdin.read()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise CliError(f"line {lineno}: expected 'x y', got {line.strip()!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise CliError(f"line {lineno}: non-numeric coordinate in {line.strip()!r}") from None
    if len(rows) != obs_len:
        raise CliError(f"expected {obs_len} observed lines, got {len(rows)}")
    return np.array(rows)


def cmd_predict(args, mcfg, tcfg):
    if args.debug_zero_weights:
        model = build(mcfg)
        for p in model.params.values():
            p.data[...] = 0
    else:
        _require(args, "ckpt")
        model = _load_ckpt(args.ckpt)
    obs = _read_observed(args, model.config.obs_len)
    try:
        pred = model.predict(obs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    for x, y in pred:
        print(f"{x:.6f} {y:.6f}")


def cmd_bench(args, mcfg, tcfg):
    if args.backends:
        rows = bench.bench_backends(build(mcfg), batch=args.batch,
                                    iters=args.iters, warmup=args.warmup)
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    models = []
    if args.ckpt:
        models.append(_load_ckpt(args.ckpt))
    for kind in filter(None, args.models.split(",")):
        if not any(m.kind == kind for m in models):
            models.append(make_model(kind, mcfg))
    reports = [bench.bench_inference(m, args.batch, args.iters, args.warmup, args.threads)
               for m in models]
    sys.stdout.write(bench.to_csv(bench.compare(reports, args.ref)))


def cmd_ablate(args, mcfg, tcfg):
    scenes = _load_scenes(args)
    folds = [f for f in args.folds.split(",") if f]
    unknown = [f for f in folds if f not in SCENES]
    if unknown:
        raise CliError(f"unknown fold(s): {', '.join(unknown)}")
    if args.mode == "layers":
        rows = ablate_layers(scenes, (3, 4, 5), mcfg, tcfg, folds=folds)
        key = "layers"
    else:
        rows = ablate_decode_mode(scenes, replace(mcfg, decode_mode="multi"), tcfg, folds=folds)
        key = "decode_mode"
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow([key, "ade", "fde"] + [f"{s}_{m}" for s in folds for m in ("ade", "fde")])
    for r in rows:
        rep = r["report"]
        cells = [f"{rep.scenes[s][m]:.4f}" for s in folds for m in ("ade", "fde")]
        out.writerow([r[key], f"{r['ade']:.4f}", f"{r['fde']:.4f}"] + cells)


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "bench": cmd_bench, "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.backend:
        try:
            kernels.use_backend(args.backend)
        except ValueError as exc:
            parser.error(str(exc))
    try:
        mcfg = _model_config(args)
        tcfg = _train_config(args) if hasattr(args, "max_epochs") else None
    except ValueError as exc:
        parser.error(str(exc))
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        COMMANDS[args.command](args, mcfg, tcfg)
    except (CliError, DataFormatError, FileNotFoundError, KeyError, TrainingDiverged) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"trajcnn {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
