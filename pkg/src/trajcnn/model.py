"""Convolutional trajectory predictor.

Architecture: a fully connected embedding of each observed step, a stack of
same-length temporal convolutions, a row-major flatten of the final feature
map and a fully connected head that emits every future displacement in one
pass. Absolute positions are rebuilt by cumulative sum from the last
observed position.
"""
from __future__ import annotations

import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as tn
from .tensor import Tensor

DECODE_MODES = ("multi", "sequential")
INPUT_MODES = ("offsets", "absolute")


def receptive_field(num_layers: int, kernel_size: int) -> int:
    """Input steps visible to one output feature of a stride-1 conv stack."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    return 1 + num_layers * (kernel_size - 1)


@dataclass(frozen=True)
class ModelConfig:
    obs_len: int = 8
    pred_len: int = 12
    embed_dim: int = 32
    num_layers: int = 4
    kernel_size: int = 3
    decode_mode: str = "multi"
    input_mode: str = "offsets"
    seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if self.obs_len < 1 or self.pred_len < 1:
            raise ValueError(f"obs_len and pred_len must be >= 1, got {self.obs_len}, {self.pred_len}")
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be >= 1, got {self.embed_dim}")
        if self.decode_mode not in DECODE_MODES:
            raise ValueError(f"decode_mode must be one of {DECODE_MODES}, got {self.decode_mode!r}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}, got {self.input_mode!r}")
        if not 0 <= self.seed < 2**32:
            raise ValueError(f"seed must be an unsigned 32-bit int, got {self.seed}")

    @property
    def out_steps(self) -> int:
        """Steps emitted by the head per forward pass."""
        return 1 if self.decode_mode == "sequential" else self.pred_len

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def parameter_count(config: ModelConfig) -> int:
    E, K = config.embed_dim, config.kernel_size
    embed = 2 * E + E
    convs = config.num_layers * (K * E * E + E)
    head = config.obs_len * E * config.out_steps * 2 + config.out_steps * 2
    return embed + convs + head


def encode_observed(observed: np.ndarray, input_mode: str) -> np.ndarray:
    """Network input for ``(B, obs_len, 2)`` positions; offsets start at (0, 0)."""
    if input_mode == "absolute":
        return observed.copy()
    disp = np.zeros_like(observed)
    disp[:, 1:] = observed[:, 1:] - observed[:, :-1]
    return disp


def _check_observed(observed, obs_len: int) -> tuple[np.ndarray, bool]:
    obs = np.asarray(observed, dtype=np.float64)
    single = obs.ndim == 2
    if single:
        obs = obs[None]
    if obs.ndim != 3 or obs.shape[2] != 2:
        raise ValueError(f"observed must be (obs_len, 2) or (B, obs_len, 2), got {np.shape(observed)}")
    if obs.shape[1] != obs_len:
        raise ValueError(f"expected {obs_len} observed steps, got {obs.shape[1]}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observed trajectory contains non-finite coordinates")
    return obs, single


class TrajCnnModel:
    """Embedding, conv stack and multi-output head with named parameters."""

    kind = "cnn"

    def __init__(self, config: ModelConfig, params: "OrderedDict[str, Tensor]"):
        self.config = config
        self.params = params
        self.pad = (config.kernel_size - 1) // 2

    @property
    def dtype(self):
        return self.params["embed.weight"].dtype

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def features(self, inp: Tensor) -> Tensor:
        """Final conv-layer feature map ``(B, obs_len, embed_dim)``."""
        p = self.params
        h = tn.relu(tn.linear(inp, p["embed.weight"], p["embed.bias"]))
        n = self.config.num_layers
        for i in range(n):
            h = tn.conv1d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"], self.pad)
            if i < n - 1:
                h = tn.relu(h)
        return h

    def displacements(self, inp: Tensor) -> Tensor:
        """Head output reshaped to ``(B, out_steps, 2)``."""
        p = self.params
        flat = tn.concat_flatten(self.features(inp))
        out = tn.linear(flat, p["head.weight"], p["head.bias"])
        return tn.reshape(out, (inp.shape[0], self.config.out_steps, 2))

    def input_tensor(self, observed: np.ndarray) -> Tensor:
        return Tensor(encode_observed(observed, self.config.input_mode).astype(self.dtype))

    def predict(self, observed) -> np.ndarray:
        """Absolute future positions (float64) for one or a batch of windows."""
        if self.config.decode_mode == "sequential":
            return forward_sequential(self, observed)
        return forward(self, observed)


def build(config: ModelConfig, dtype=np.float32) -> TrajCnnModel:
    """Initialise weights uniformly in +-1/sqrt(fan_in) from ``config.seed``; zero biases."""
    if receptive_field(config.num_layers, config.kernel_size) < config.obs_len:
        warnings.warn(
            f"receptive field {receptive_field(config.num_layers, config.kernel_size)} "
            f"does not cover obs_len={config.obs_len}", stacklevel=2)
    rng = np.random.default_rng(config.seed)
    E, K = config.embed_dim, config.kernel_size

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

    params = OrderedDict()
    params["embed.weight"] = uniform((2, E), 2)
    params["embed.bias"] = zeros(E)
    for i in range(config.num_layers):
        params[f"conv{i}.weight"] = uniform((K, E, E), K * E)
        params[f"conv{i}.bias"] = zeros(E)
    out = config.out_steps * 2
    params["head.weight"] = uniform((config.obs_len * E, out), config.obs_len * E)
    params["head.bias"] = zeros(out)
    for name, t in params.items():
        t.name = name
    return TrajCnnModel(config, params)


def forward(model: TrajCnnModel, observed) -> np.ndarray:
    """Predict all ``pred_len`` future positions in one pass."""
    cfg = model.config
    if cfg.out_steps != cfg.pred_len:
        raise ValueError("model head emits a single step; use forward_sequential")
    obs, single = _check_observed(observed, cfg.obs_len)
    with tn.no_grad():
        disp = model.displacements(model.input_tensor(obs)).data
    pred = obs[:, -1:, :] + np.cumsum(disp.astype(np.float64), axis=1)
    return pred[0] if single else pred


def forward_sequential(model: TrajCnnModel, observed) -> np.ndarray:
    """Roll a one-step head forward ``pred_len`` times over a sliding window."""
    cfg = model.config
    if model.params["head.bias"].shape != (2,):
        raise ValueError(
            f"sequential decoding needs a one-step head, got {model.params['head.bias'].shape[0] // 2} steps")
    obs, single = _check_observed(observed, cfg.obs_len)
    window = obs.copy()
    preds = np.empty((obs.shape[0], cfg.pred_len, 2))
    with tn.no_grad():
        for k in range(cfg.pred_len):
            disp = model.displacements(model.input_tensor(window)).data[:, 0, :]
            nxt = window[:, -1, :] + disp.astype(np.float64)
            preds[:, k] = nxt
            window = np.concatenate([window[:, 1:], nxt[:, None, :]], axis=1)
    return preds[0] if single else preds
