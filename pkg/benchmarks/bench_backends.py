"""Compiled vs. numpy conv kernels: raw kernel timings and whole-model timings.

    python benchmarks/bench_backends.py [--iters 500]
"""
import argparse
import time

import numpy as np

from trajcnn import _kernels_py, kernels
from trajcnn.bench import bench_backends
from trajcnn.model import ModelConfig, build


def _median(fn, iters):
    for _ in range(max(iters // 10, 1)):
        fn()
    t = np.empty(iters)
    for i in range(iters):
        t0 = time.perf_counter()
        fn()
        t[i] = time.perf_counter() - t0
    return float(np.median(t))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=500)
    args = ap.parse_args()
    if "compiled" not in kernels.available_backends():
        raise SystemExit("compiled extension not built; only the numpy backend is available")
    from trajcnn import _kernels

    rng = np.random.default_rng(0)
    print("kernel    dtype    batch  fwd_py_us  fwd_c_us  bwd_py_us  bwd_c_us  speedup_fwd  speedup_bwd")
    for dtype in (np.float32, np.float64):
        for B in (1, 32, 256):
            x = rng.normal(size=(B, 8, 32)).astype(dtype)
            w = rng.normal(size=(3, 32, 32)).astype(dtype)
            b = rng.normal(size=32).astype(dtype)
            g = rng.normal(size=(B, 8, 32)).astype(dtype)
            fp = _median(lambda: _kernels_py.conv1d_forward(x, w, b, 1), args.iters)
            fc = _median(lambda: _kernels.conv1d_forward(x, w, b, 1), args.iters)
            bp = _median(lambda: _kernels_py.conv1d_backward(x, w, g, 1), args.iters)
            bc = _median(lambda: _kernels.conv1d_backward(x, w, g, 1), args.iters)
            print(f"conv1d    {np.dtype(dtype).name:8s} {B:5d}  {fp * 1e6:9.1f}  {fc * 1e6:8.1f}  "
                  f"{bp * 1e6:9.1f}  {bc * 1e6:8.1f}  {fp / fc:11.2f}  {bp / bc:11.2f}")

    print()
    print("model     batch  backend   forward_ms  train_step_ms")
    model = build(ModelConfig())
    for B in (1, 32, 256):
        for row in bench_backends(model, batch=B, iters=args.iters // 2, warmup=20):
            print(f"cnn       {B:5d}  {row['backend']:8s}  {row['forward_median_s'] * 1e3:10.3f}  "
                  f"{row['train_step_median_s'] * 1e3:13.3f}")


if __name__ == "__main__":
    main()
