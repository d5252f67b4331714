"""Displacement errors and their per-scene aggregation (float64 throughout)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    if pred.ndim < 2 or pred.shape[-2] == 0:
        raise ValueError("empty trajectory")
    return pred, gt


def ade(pred, gt):
    """Mean Euclidean distance over the predicted steps.

    Works on ``(T, 2)`` or batched ``(N, T, 2)`` inputs (one value per pair).
    """
    pred, gt = _pair(pred, gt)
    return np.linalg.norm(pred - gt, axis=-1).mean(axis=-1)


def fde(pred, gt):
    """Euclidean distance at the final predicted step."""
    pred, gt = _pair(pred, gt)
    return np.linalg.norm(pred[..., -1, :] - gt[..., -1, :], axis=-1)


@dataclass
class EvalReport:
    """``ade``/``fde`` are sample-weighted; ``avg_*`` average the scene means."""

    ade: float
    fde: float
    n: int
    scenes: dict = field(default_factory=dict)
    timing: dict | None = None

    @property
    def avg_ade(self) -> float:
        return float(np.mean([s["ade"] for s in self.scenes.values()]))

    @property
    def avg_fde(self) -> float:
        return float(np.mean([s["fde"] for s in self.scenes.values()]))

    def to_dict(self) -> dict:
        d = {"ade": self.ade, "fde": self.fde, "n": self.n,
             "scenes": {k: dict(v) for k, v in self.scenes.items()},
             "avg_ade": self.avg_ade, "avg_fde": self.avg_fde}
        if self.timing is not None:
            d["timing"] = self.timing
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def aggregate(preds, gts, scene_labels) -> EvalReport:
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    labels = np.asarray(scene_labels)
    if preds.ndim != 3 or len(preds) == 0:
        raise ValueError("aggregate needs a non-empty batch of (T, 2) predictions")
    if len(labels) != len(preds):
        raise ValueError(f"{len(labels)} scene labels for {len(preds)} samples")
    a, f = ade(preds, gts), fde(preds, gts)
    scenes = {}
    for name in dict.fromkeys(labels.tolist()):
        m = labels == name
        scenes[name] = {"ade": float(a[m].mean()), "fde": float(f[m].mean()), "n": int(m.sum())}
    return EvalReport(float(a.mean()), float(f.mean()), len(preds), scenes)


def combine(reports) -> EvalReport:
    """Merge fold reports (e.g. the five leave-one-out runs)."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to combine")
    scenes = {}
    for r in reports:
        scenes.update(r.scenes)
    n = sum(s["n"] for s in scenes.values())
    a = sum(s["ade"] * s["n"] for s in scenes.values()) / n
    f = sum(s["fde"] * s["n"] for s in scenes.values()) / n
    return EvalReport(a, f, n, scenes)


def table_average(values) -> float:
    """Unweighted mean of per-scene cells, as in a results table's AVG row."""
    values = list(values)
    if not values:
        raise ValueError("no values")
    return float(np.mean(values))
