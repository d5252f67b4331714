import os
from pathlib import Path

import numpy as np
import pytest

from trajcnn.data import SCENES, SceneDataset, TrajectorySample, write_scene


def numerical_grad(f, arr, eps=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every element of ``arr`` (in place)."""
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = f()
        flat[i] = old - eps
        lo = f()
        flat[i] = old
        gflat[i] = (hi - lo) / (2 * eps)
    return g


def max_rel_error(a, b, floor=1e-6):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def linear_samples(n, rng, obs_len=8, pred_len=12, scene="syn"):
    """Constant-velocity windows with walking speeds of 0.2-0.6 m per step."""
    out = []
    for i in range(n):
        p0 = rng.uniform(-5, 5, 2)
        ang = rng.uniform(0, 2 * np.pi)
        v = rng.uniform(0.2, 0.6) * np.array([np.cos(ang), np.sin(ang)])
        traj = p0 + np.arange(obs_len + pred_len)[:, None] * v
        out.append(TrajectorySample(traj[:obs_len], traj[obs_len:], scene, ("syn", i), 0, 1))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def ethucy_dir():
    d = os.environ.get("TRAJCNN_DATA")
    if not d or not Path(d).is_dir():
        pytest.skip("set TRAJCNN_DATA to the ETH/UCY scene directory")
    return Path(d)


def linear_scene(name, n_peds, rng, length=24):
    """Scene of constant-velocity pedestrians, frames 10 apart."""
    tracks = {}
    for ped in range(n_peds):
        p0 = rng.uniform(-5, 5, 2)
        ang = rng.uniform(0, 2 * np.pi)
        v = rng.uniform(0.2, 0.6) * np.array([np.cos(ang), np.sin(ang)])
        xy = p0 + np.arange(length)[:, None] * v
        tracks[(name, ped)] = np.column_stack([np.arange(length) * 10.0, xy])
    return SceneDataset(name, tracks)


def linear_corpus(rng, n_peds=8):
    return {s: linear_scene(s, n_peds, rng) for s in SCENES}


def write_corpus(root, scenes):
    for name, ds in scenes.items():
        (root / name).mkdir(parents=True, exist_ok=True)
        write_scene(SceneDataset(name, {(name, p): a for (_, p), a in ds.trajectories.items()}),
                    root / name / f"{name}.txt")
    return root
