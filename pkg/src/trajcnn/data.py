"""ETH/UCY-style trajectory files, sliding windows and leave-one-out splits.

File format: UTF-8 text, one observation per line with four whitespace
separated fields ``frame_id pedestrian_id x y`` (meters). Lines starting
with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SCENES = ("eth", "hotel", "univ", "zara1", "zara2")


class DataFormatError(ValueError):
    pass


@dataclass
class SceneDataset:
    """Per-pedestrian tracks of one scene.

    ``trajectories`` maps ``(source, pedestrian_id)`` to an ``(n, 3)`` array of
    ``frame, x, y`` rows sorted by frame. ``source`` is the file stem, which
    keeps ids from different files of the same scene apart.
    """

    scene_name: str
    trajectories: dict = field(default_factory=dict)
    frame_rate: float = 2.5

    def __len__(self):
        return len(self.trajectories)

    def stride(self, key) -> int | None:
        frames = self.trajectories[key][:, 0]
        return int(frames[1] - frames[0]) if len(frames) > 1 else None


@dataclass(frozen=True)
class TrajectorySample:
    observed: np.ndarray
    future: np.ndarray
    scene_name: str
    pedestrian: tuple
    start_frame: int
    frame_stride: int


@dataclass(frozen=True)
class SplitPlan:
    train_scenes: tuple
    test_scene: str
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.test_scene in self.train_scenes:
            raise ValueError(f"test scene {self.test_scene!r} is also a train scene")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in [0, 1), got {self.val_fraction}")


def _parse_int(tok: str, what: str, lineno: int, path) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: non-numeric {what} {tok!r}") from None
    if not v.is_integer():
        raise DataFormatError(f"{path}:{lineno}: {what} must be integral, got {tok!r}")
    return int(v)


def _parse_float(tok: str, what: str, lineno: int, path) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: non-numeric {what} {tok!r}") from None
    if not np.isfinite(v):
        raise DataFormatError(f"{path}:{lineno}: non-finite {what} {tok!r}")
    return v


def parse_lines(lines, source: str, path="<input>") -> dict:
    rows: dict[int, list] = {}
    seen = set()
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        frame = _parse_int(parts[0], "frame id", lineno, path)
        ped = _parse_int(parts[1], "pedestrian id", lineno, path)
        x = _parse_float(parts[2], "x", lineno, path)
        y = _parse_float(parts[3], "y", lineno, path)
        if (frame, ped) in seen:
            raise DataFormatError(f"{path}:{lineno}: duplicate observation of pedestrian {ped} at frame {frame}")
        seen.add((frame, ped))
        rows.setdefault(ped, []).append((frame, x, y))

    tracks = {}
    for ped in sorted(rows):
        arr = np.array(sorted(rows[ped]), dtype=np.float64)
        if len(arr) > 2:
            steps = np.diff(arr[:, 0])
            if not np.all(steps == steps[0]):
                warnings.warn(f"{path}: pedestrian {ped} has irregular frame stride; dropped",
                              stacklevel=3)
                continue
        tracks[(source, ped)] = arr
    return tracks


def load_scene(path, scene_name: str | None = None) -> SceneDataset:
    """Read one trajectory file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    tracks = parse_lines(text.splitlines(), path.stem, path)
    return SceneDataset(scene_name or path.stem, tracks)


def load_scene_dir(directory) -> SceneDataset:
    """All ``*.txt`` files in ``directory`` form one scene named after it."""
    directory = Path(directory)
    files = sorted(directory.glob("*.txt"))
    if not files:
        raise FileNotFoundError(f"no .txt trajectory files in {directory}")
    scene = SceneDataset(directory.name)
    for f in files:
        scene.trajectories.update(load_scene(f).trajectories)
    return scene


def load_data_dir(root, names=SCENES) -> dict:
    root = Path(root)
    missing = [n for n in names if not (root / n).is_dir()]
    if missing:
        raise FileNotFoundError(f"missing scene directories under {root}: {', '.join(missing)}")
    return {n: load_scene_dir(root / n) for n in names}


def write_scene(dataset: SceneDataset, path) -> None:
    """Inverse of :func:`load_scene` for single-source datasets."""
    rows = []
    for (_, ped), arr in dataset.trajectories.items():
        for frame, x, y in arr:
            rows.append((int(frame), ped, float(x), float(y)))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8") as fh:
        for frame, ped, x, y in rows:
            fh.write(f"{frame} {ped} {x!r} {y!r}\n")


def extract_windows(dataset: SceneDataset, obs_len: int = 8, pred_len: int = 12,
                    stride: int = 1, stats: dict | None = None) -> list[TrajectorySample]:
    """Sliding ``obs_len + pred_len`` windows over every pedestrian track."""
    total = obs_len + pred_len
    if total < 2:
        raise ValueError("obs_len + pred_len must be >= 2")
    samples = []
    short = 0
    for key, arr in dataset.trajectories.items():
        n = len(arr)
        if n < total:
            short += 1
            continue
        step = dataset.stride(key)
        for s in range(0, n - total + 1, stride):
            w = arr[s:s + total]
            samples.append(TrajectorySample(
                observed=w[:obs_len, 1:].copy(),
                future=w[obs_len:, 1:].copy(),
                scene_name=dataset.scene_name,
                pedestrian=key,
                start_frame=int(w[0, 0]),
                frame_stride=step,
            ))
    if stats is not None:
        stats.update(pedestrians=len(dataset.trajectories), short=short, windows=len(samples))
    log.debug("%s: %d windows, %d short tracks skipped", dataset.scene_name, len(samples), short)
    return samples


def stack_samples(samples) -> tuple[np.ndarray, np.ndarray]:
    """``(N, obs_len, 2)`` observed and ``(N, pred_len, 2)`` future arrays."""
    if not samples:
        return np.zeros((0, 0, 2)), np.zeros((0, 0, 2))
    return (np.stack([s.observed for s in samples]),
            np.stack([s.future for s in samples]))


def leave_one_out(scenes: dict, held_out: str, seed: int = 0, val_fraction: float = 0.1,
                  obs_len: int = 8, pred_len: int = 12):
    """Windows of the held-out scene as test; the other scenes split into train/val."""
    if held_out not in scenes:
        raise KeyError(f"unknown scene {held_out!r}; have {', '.join(scenes)}")
    plan = SplitPlan(tuple(n for n in scenes if n != held_out), held_out, val_fraction, seed)
    test = extract_windows(scenes[held_out], obs_len, pred_len)
    pool = [s for name in plan.train_scenes
            for s in extract_windows(scenes[name], obs_len, pred_len)]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pool))
    n_val = int(round(val_fraction * len(pool)))
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    return [pool[i] for i in train_idx], [pool[i] for i in val_idx], test
