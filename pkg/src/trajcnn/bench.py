"""Inference latency measurement and speed-up tables."""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from . import kernels

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # optional; without it BLAS keeps its default pool
    threadpool_limits = None

CSV_FIELDS = ["model", "batch", "threads", "mean_s", "median_s", "p95_s", "per_sample_us"]


@dataclass
class LatencyReport:
    model: str
    batch: int
    iterations: int
    warmup: int
    threads: int
    timings: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.timings))

    @property
    def median(self) -> float:
        return float(np.median(self.timings))

    @property
    def p95(self) -> float:
        return float(np.percentile(self.timings, 95))

    @property
    def per_sample_us(self) -> float:
        return self.median / self.batch * 1e6

    def row(self) -> dict:
        return {"model": self.model, "batch": self.batch, "threads": self.threads,
                "mean_s": self.mean, "median_s": self.median, "p95_s": self.p95,
                "per_sample_us": self.per_sample_us}


def random_batch(batch: int, obs_len: int = 8, seed: int = 0) -> np.ndarray:
    """Plausible random-walk windows (meters) for timing."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, 0.1, size=(batch, obs_len, 2)) + rng.normal(0.0, 0.4, size=(batch, 1, 2))
    return np.cumsum(steps, axis=1)


def bench_inference(model, batch=32, iters: int = 1000, warmup: int = 200, threads: int = 1,
                    name: str | None = None) -> LatencyReport:
    """Time ``model.predict`` on a fixed batch.

    ``batch`` is either a size or a ``(B, obs_len, 2)`` array. Inputs are built
    before timing. With ``threads > 1`` the batch is sharded across a fixed
    worker pool; BLAS is pinned to one thread either way.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    obs = random_batch(batch, model.config.obs_len) if np.isscalar(batch) else np.asarray(batch)
    B = len(obs)
    if B < 1:
        raise ValueError("batch must hold at least one sample")
    limit = threadpool_limits(1) if threadpool_limits is not None else nullcontext()
    timings = np.empty(iters)
    with limit:
        if threads <= 1:
            run = lambda: model.predict(obs)  # noqa: E731
            pool = None
        else:
            shards = np.array_split(obs, threads)
            pool = ThreadPoolExecutor(max_workers=threads)
            run = lambda: list(pool.map(model.predict, shards))  # noqa: E731
        try:
            for _ in range(warmup):
                run()
            for i in range(iters):
                t0 = time.perf_counter()
                run()
                timings[i] = time.perf_counter() - t0
        finally:
            if pool is not None:
                pool.shutdown()
    return LatencyReport(name or model.kind, B, iters, warmup, max(threads, 1), timings)


def compare(reports, ref: str | None = None) -> list[dict]:
    """Rows with ``speedup`` = reference median / model median."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to compare")
    base = reports[0]
    if ref is not None:
        matches = [r for r in reports if r.model == ref]
        if not matches:
            raise ValueError(f"reference model {ref!r} not among {[r.model for r in reports]}")
        base = matches[0]
    rows = []
    for r in reports:
        row = r.row()
        row["speedup"] = base.median / r.median
        rows.append(row)
    return rows


def to_csv(rows) -> str:
    buf = io.StringIO()
    fields = CSV_FIELDS + (["speedup"] if rows and "speedup" in rows[0] else [])
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def bench_backends(model, batch: int = 32, iters: int = 200, warmup: int = 20) -> list[dict]:
    """Forward latency and one training step per available kernel backend."""
    from . import tensor as tn
    from .train import displacement_targets

    obs = random_batch(batch, model.config.obs_len)
    fut = random_batch(batch, model.config.pred_len, seed=1) + obs[:, -1:]
    tgt = displacement_targets(obs, fut)[:, :model.config.out_steps].astype(model.dtype)
    prev = kernels.active_backend()
    rows = []
    try:
        for name in kernels.available_backends():
            kernels.use_backend(name)
            fwd = bench_inference(model, obs, iters=iters, warmup=warmup, name=f"{model.kind}-{name}")

            def step():
                model.zero_grad()
                loss = tn.mse_loss(model.displacements(model.input_tensor(obs)), tgt)
                tn.backward(loss)

            for _ in range(warmup):
                step()
            t = np.empty(iters)
            for i in range(iters):
                t0 = time.perf_counter()
                step()
                t[i] = time.perf_counter() - t0
            model.zero_grad()
            rows.append({"backend": name, "forward_median_s": fwd.median,
                         "train_step_median_s": float(np.median(t))})
    finally:
        kernels.use_backend(prev)
    return rows
