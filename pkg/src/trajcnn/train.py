"""Training loop with early stopping, leave-one-out driver and ablations."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as tn
from .baselines import LstmConfig, build_lstm, linear_predict
from .data import SCENES, leave_one_out, stack_samples
from .metrics import EvalReport, aggregate, combine
from .model import ModelConfig, build
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 10
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError(f"patience must be in [0, max_epochs], got {self.patience}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stop_reason: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, (tr, va) in enumerate(zip(self.train_loss, self.val_loss)):
            w.writerow([e, repr(tr), repr(va)])
        return buf.getvalue()


def displacement_targets(observed: np.ndarray, future: np.ndarray) -> np.ndarray:
    """Per-step future displacements, the first measured from the last observation."""
    full = np.concatenate([observed[:, -1:], future], axis=1)
    return np.diff(full, axis=1)


def one_step_windows(observed: np.ndarray, future: np.ndarray, pred_len: int, offsets=None):
    """Teacher-forced (window, next displacement) pairs for a one-step head.

    By default every sample yields all ``pred_len`` windows (sample-major).
    With ``offsets`` (one int in ``[0, pred_len)`` per sample) each sample
    yields just the window starting that many steps into its future.
    """
    obs_len = observed.shape[1]
    full = np.concatenate([observed, future], axis=1)
    if offsets is None:
        n = len(full)
        offsets = np.tile(np.arange(pred_len), n)
        full = np.repeat(full, pred_len, axis=0)
    rows = np.arange(len(full))[:, None]
    w = full[rows, np.asarray(offsets)[:, None] + np.arange(obs_len)]
    last, nxt = w[:, -1], full[rows[:, 0], np.asarray(offsets) + obs_len]
    return w, (nxt - last)[:, None, :]


def _training_arrays(model, samples):
    obs, fut = stack_samples(samples)
    if len(samples) == 0:
        return obs, fut
    if model.config.decode_mode == "sequential":
        return one_step_windows(obs, fut, model.config.pred_len)
    return obs, displacement_targets(obs, fut)


def _mean_loss(model, inputs, targets, batch_size) -> float:
    total = 0.0
    with tn.no_grad():
        for s in range(0, len(inputs), batch_size):
            inp = model.input_tensor(inputs[s:s + batch_size])
            pred = model.displacements(inp)
            tgt = targets[s:s + batch_size].astype(model.dtype)
            total += float(tn.mse_loss(pred, tgt).data) * len(tgt)
    return total / len(inputs)


def train(model, train_samples, val_samples, config: TrainConfig = TrainConfig()):
    """Fit ``model`` in place with Adam on displacement MSE.

    Stops once the validation loss has not improved for ``patience`` epochs and
    restores the best-validation weights (earliest epoch on ties). With no
    validation samples it runs ``max_epochs`` and keeps the final weights.
    Returns ``(model, TrainLog)``.
    """
    if not train_samples:
        raise ValueError("empty training set")
    sequential = model.config.decode_mode == "sequential"
    if sequential:
        # one randomly placed teacher-forced window per sample and epoch, so an
        # epoch is one pass over the samples as in multi-output mode
        obs_tr, fut_tr = stack_samples(train_samples)
    else:
        x_tr, y_tr = _training_arrays(model, train_samples)
    have_val = len(val_samples) > 0
    if have_val:
        x_va, y_va = _training_arrays(model, val_samples)

    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    tlog = TrainLog()
    best_val = math.inf
    best_state = None
    bad = 0
    n = len(train_samples)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        if sequential:
            ks = rng.integers(0, model.config.pred_len, size=n)
            x_tr, y_tr = one_step_windows(obs_tr, fut_tr, model.config.pred_len, ks)
        running = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            opt.zero_grad()
            pred = model.displacements(model.input_tensor(x_tr[idx]))
            loss = tn.mse_loss(pred, y_tr[idx].astype(model.dtype))
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite training loss at epoch {epoch}, batch starting {s}")
            tn.backward(loss)
            opt.step()
            running += value * len(idx)
        train_loss = running / n
        tlog.train_loss.append(train_loss)

        if not have_val:
            tlog.val_loss.append(float("nan"))
            continue
        val = _mean_loss(model, x_va, y_va, max(config.batch_size, 256))
        if not math.isfinite(val):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        tlog.val_loss.append(val)
        log.info("epoch %d train %.6f val %.6f", epoch, train_loss, val)
        if val < best_val:
            best_val, bad = val, 0
            tlog.best_epoch = epoch
            best_state = [p.data.copy() for p in params]
        else:
            bad += 1
            if bad > config.patience:
                tlog.stop_reason = f"no improvement for {bad} epochs"
                break
    else:
        tlog.stop_reason = "max_epochs"

    if best_state is not None:
        for p, d in zip(params, best_state):
            p.data[...] = d
    else:
        tlog.best_epoch = len(tlog.train_loss) - 1
    model.zero_grad()
    return model, tlog


def evaluate(predict, samples, timing: dict | None = None) -> EvalReport:
    """ADE/FDE of ``predict`` (observed batch -> positions) over ``samples``."""
    if not samples:
        raise ValueError("no samples to evaluate")
    obs, fut = stack_samples(samples)
    preds = np.concatenate([predict(obs[s:s + 1024]) for s in range(0, len(obs), 1024)])
    report = aggregate(preds, fut, [s.scene_name for s in samples])
    report.timing = timing
    return report


def make_model(kind: str, model_config: ModelConfig):
    if kind == "cnn":
        return build(model_config)
    if kind == "lstm":
        return build_lstm(LstmConfig(obs_len=model_config.obs_len, pred_len=model_config.pred_len,
                                     embed_dim=model_config.embed_dim,
                                     hidden_dim=model_config.embed_dim, seed=model_config.seed))
    raise ValueError(f"unknown model kind {kind!r}")


def run_leave_one_out(scenes: dict, held_out: str, model_config: ModelConfig = ModelConfig(),
                      train_config: TrainConfig = TrainConfig(), kind: str = "cnn",
                      val_fraction: float = 0.1):
    """Train on every scene but ``held_out`` and evaluate on it.

    Returns ``(EvalReport, model, TrainLog)``; ``kind="linear"`` skips training.
    """
    missing = [s for s in SCENES if s not in scenes]
    if missing:
        raise KeyError(f"missing scene(s): {', '.join(missing)}")
    tr, va, te = leave_one_out(scenes, held_out, seed=train_config.seed, val_fraction=val_fraction,
                               obs_len=model_config.obs_len, pred_len=model_config.pred_len)
    if kind == "linear":
        return evaluate(lambda o: linear_predict(o, model_config.pred_len), te), None, None
    model = make_model(kind, model_config)
    model, tlog = train(model, tr, va, train_config)
    return evaluate(model.predict, te), model, tlog


def run_all_folds(scenes, model_config=ModelConfig(), train_config=TrainConfig(), kind="cnn",
                  folds=SCENES, val_fraction=0.1) -> EvalReport:
    reports = []
    for held in folds:
        rep, _, _ = run_leave_one_out(scenes, held, model_config, train_config, kind, val_fraction)
        log.info("%s %s: ADE %.3f FDE %.3f", kind, held, rep.ade, rep.fde)
        reports.append(rep)
    return combine(reports)


def ablate_layers(scenes, layer_counts=(3, 4, 5), model_config=ModelConfig(),
                  train_config=TrainConfig(), folds=SCENES):
    """One model per layer count on identical seeds and splits.

    Returns rows ``{"layers", "ade", "fde", "report"}`` with the unweighted scene average.
    """
    rows = []
    for n in layer_counts:
        rep = run_all_folds(scenes, replace(model_config, num_layers=n), train_config, folds=folds)
        rows.append({"layers": n, "ade": rep.avg_ade, "fde": rep.avg_fde, "report": rep})
    return rows


def ablate_decode_mode(scenes, model_config=ModelConfig(), train_config=TrainConfig(),
                       folds=SCENES):
    """Multi-output vs. sequential one-step decoding with the same trunk."""
    rows = []
    for mode in ("multi", "sequential"):
        rep = run_all_folds(scenes, replace(model_config, decode_mode=mode), train_config, folds=folds)
        rows.append({"decode_mode": mode, "ade": rep.avg_ade, "fde": rep.avg_fde, "report": rep})
    return rows
