import csv
import io
import time
from types import SimpleNamespace

import numpy as np
import pytest

from trajcnn import bench
from trajcnn.baselines import LstmConfig, build_lstm
from trajcnn.bench import LatencyReport, bench_inference, compare, random_batch, to_csv
from trajcnn.model import ModelConfig, build


class SlowStart:
    """Predictor whose first ``slow`` calls sleep, mimicking cold caches."""

    kind = "slow"
    config = SimpleNamespace(obs_len=8)

    def __init__(self, slow):
        self.calls = 0
        self.slow = slow

    def predict(self, obs):
        self.calls += 1
        if self.calls <= self.slow:
            time.sleep(0.05)
        return obs


def _report(name, timings, batch=32):
    return LatencyReport(name, batch, len(timings), 0, 1, np.asarray(timings, float))


def test_warmup_excluded():
    m = SlowStart(slow=3)
    rep = bench_inference(m, batch=4, iters=20, warmup=3)
    assert m.calls == 23
    assert rep.timings.max() < 0.05


def test_mean_is_raw_mean_and_p95_above_median():
    rep = bench_inference(build(ModelConfig()), batch=8, iters=30, warmup=2)
    assert len(rep.timings) == 30 and np.all(rep.timings > 0)
    assert rep.mean == float(np.mean(rep.timings))
    assert rep.p95 >= rep.median


def test_zero_iterations_rejected():
    with pytest.raises(ValueError, match="iters"):
        bench_inference(build(ModelConfig()), iters=0)


def test_random_batch_shape_and_determinism():
    a = random_batch(16)
    assert a.shape == (16, 8, 2)
    np.testing.assert_array_equal(a, random_batch(16))


def test_explicit_batch_array():
    rep = bench_inference(build(ModelConfig()), random_batch(5), iters=3, warmup=0)
    assert rep.batch == 5


def test_threaded_sharding_runs():
    rep = bench_inference(build(ModelConfig()), 32, iters=5, warmup=1, threads=4)
    assert rep.threads == 4


def test_self_compare_is_one():
    r = _report("cnn", [1.0, 2.0, 3.0])
    assert compare([r])[0]["speedup"] == 1.0


def test_speedups_reciprocal():
    a, b = _report("a", [0.002, 0.002, 0.003]), _report("b", [0.009, 0.010, 0.011])
    ab = {r["model"]: r["speedup"] for r in compare([a, b], ref="a")}
    ba = {r["model"]: r["speedup"] for r in compare([a, b], ref="b")}
    assert ab["b"] * ba["a"] == pytest.approx(1.0, rel=0.05)
    assert ba["a"] == pytest.approx(5.0)


def test_compare_errors():
    with pytest.raises(ValueError):
        compare([])
    with pytest.raises(ValueError, match="lstm"):
        compare([_report("cnn", [1.0])], ref="lstm")


def test_csv_columns():
    rows = compare([_report("cnn", [0.1, 0.2]), _report("lstm", [0.4])], ref="lstm")
    text = to_csv(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == bench.CSV_FIELDS + ["speedup"]
    assert float(parsed[0]["speedup"]) == pytest.approx(0.4 / 0.15)
    assert "speedup" not in to_csv([_report("x", [1.0]).row()])


def test_batching_amortises():
    m = build(ModelConfig())
    one = bench_inference(m, 1, iters=100, warmup=10)
    many = bench_inference(m, 32, iters=100, warmup=10)
    assert many.per_sample_us <= one.per_sample_us


def test_cnn_faster_than_lstm():
    cnn = bench_inference(build(ModelConfig()), 32, iters=100, warmup=10)
    lstm = bench_inference(build_lstm(LstmConfig()), 32, iters=100, warmup=10)
    assert cnn.median < lstm.median


def test_backend_table():
    rows = bench.bench_backends(build(ModelConfig()), batch=4, iters=3, warmup=1)
    assert [r["backend"] for r in rows] == sorted(r["backend"] for r in rows)
    assert all(r["forward_median_s"] > 0 and r["train_step_median_s"] > 0 for r in rows)
