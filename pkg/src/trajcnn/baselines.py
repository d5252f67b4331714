"""Comparison predictors: a vanilla LSTM encoder/decoder and per-axis linear regression."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as tn
from .model import _check_observed, encode_observed
from .tensor import DimensionError, Tensor

# order of the gate blocks inside the fused weight matrices
GATES = ("f", "i", "o", "c")


@dataclass(frozen=True)
class LstmConfig:
    obs_len: int = 8
    pred_len: int = 12
    embed_dim: int = 32
    hidden_dim: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 1 or self.embed_dim < 1:
            raise ValueError("hidden_dim and embed_dim must be positive")
        if self.obs_len < 1 or self.pred_len < 1:
            raise ValueError("obs_len and pred_len must be >= 1")
        if not 0 <= self.seed < 2**32:
            raise ValueError(f"seed must be an unsigned 32-bit int, got {self.seed}")

    # the trainer treats both model kinds alike
    decode_mode = "multi"
    input_mode = "offsets"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LstmConfig":
        return cls(**d)


@dataclass
class LstmParams:
    """Per-gate weights; ``W_*`` map input to hidden, ``U_*`` hidden to hidden."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_o: np.ndarray
    U_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    def fused(self):
        W = np.concatenate([getattr(self, f"W_{g}") for g in GATES], axis=1)
        U = np.concatenate([getattr(self, f"U_{g}") for g in GATES], axis=1)
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES])
        return W, U, b

    @classmethod
    def from_fused(cls, W, U, b) -> "LstmParams":
        H = U.shape[0]
        kw = {}
        for k, g in enumerate(GATES):
            sl = slice(k * H, (k + 1) * H)
            kw[f"W_{g}"], kw[f"U_{g}"], kw[f"b_{g}"] = W[:, sl], U[:, sl], b[sl]
        return cls(**kw)


def _cell(x: Tensor, h: Tensor, c: Tensor, W: Tensor, U: Tensor, b: Tensor):
    H = U.shape[0]
    z = tn.add(tn.linear(x, W, b), tn.matmul(h, U))
    f = tn.sigmoid(tn.take(z, (..., slice(0, H))))
    i = tn.sigmoid(tn.take(z, (..., slice(H, 2 * H))))
    o = tn.sigmoid(tn.take(z, (..., slice(2 * H, 3 * H))))
    g = tn.tanh(tn.take(z, (..., slice(3 * H, 4 * H))))
    c_new = tn.add(tn.mul(f, c), tn.mul(i, g))
    h_new = tn.mul(o, tn.tanh(c_new))
    return h_new, c_new


def lstm_cell_step(x_t, h_prev, c_prev, params: LstmParams):
    """One LSTM update; returns ``(h_t, c_t)`` as arrays."""
    W, U, b = params.fused()
    H = U.shape[0]
    x_t, h_prev, c_prev = (np.asarray(a) for a in (x_t, h_prev, c_prev))
    if U.shape != (H, 4 * H) or W.shape[1] != 4 * H or b.shape != (4 * H,):
        raise DimensionError(f"gate blocks disagree: W {W.shape}, U {U.shape}, b {b.shape}")
    if x_t.shape[-1] != W.shape[0]:
        raise DimensionError(f"input {x_t.shape} incompatible with W {W.shape}")
    if h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise DimensionError(f"state {h_prev.shape}/{c_prev.shape} incompatible with hidden size {H}")
    dt = W.dtype
    with tn.no_grad():
        h, c = _cell(Tensor(x_t, dtype=dt), Tensor(h_prev, dtype=dt), Tensor(c_prev, dtype=dt),
                     Tensor(W), Tensor(U), Tensor(b))
    return h.data, c.data


class LstmModel:
    """Embedding -> LSTM encoder over observed offsets -> autoregressive decoder."""

    kind = "lstm"

    def __init__(self, config: LstmConfig, params: "OrderedDict[str, Tensor]"):
        self.config = config
        self.params = params

    @property
    def dtype(self):
        return self.params["embed.weight"].dtype

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def gate_params(self) -> LstmParams:
        p = self.params
        return LstmParams.from_fused(p["lstm.W"].data, p["lstm.U"].data, p["lstm.b"].data)

    def input_tensor(self, observed: np.ndarray) -> Tensor:
        return Tensor(encode_observed(observed, "offsets").astype(self.dtype))

    def displacements(self, inp: Tensor) -> Tensor:
        p = self.params
        B = inp.shape[0]
        H = self.config.hidden_dim
        h = Tensor(np.zeros((B, H), dtype=self.dtype))
        c = Tensor(np.zeros((B, H), dtype=self.dtype))

        def embed(x):
            return tn.relu(tn.linear(x, p["embed.weight"], p["embed.bias"]))

        for t in range(inp.shape[1]):
            h, c = _cell(embed(tn.take(inp, (slice(None), t))), h, c,
                         p["lstm.W"], p["lstm.U"], p["lstm.b"])
        outs = []
        for k in range(self.config.pred_len):
            d = tn.linear(h, p["out.weight"], p["out.bias"])
            outs.append(d)
            if k + 1 < self.config.pred_len:
                h, c = _cell(embed(d), h, c, p["lstm.W"], p["lstm.U"], p["lstm.b"])
        return tn.stack(outs, axis=1)

    def predict(self, observed) -> np.ndarray:
        return lstm_predict(self, observed)


def build_lstm(config: LstmConfig, dtype=np.float32) -> LstmModel:
    rng = np.random.default_rng(config.seed)
    E, H = config.embed_dim, config.hidden_dim

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)

    params = OrderedDict()
    params["embed.weight"] = uniform((2, E), 2)
    params["embed.bias"] = zeros(E)
    params["lstm.W"] = uniform((E, 4 * H), H)
    params["lstm.U"] = uniform((H, 4 * H), H)
    params["lstm.b"] = zeros(4 * H)
    params["out.weight"] = uniform((H, 2), H)
    params["out.bias"] = zeros(2)
    for name, t in params.items():
        t.name = name
    return LstmModel(config, params)


def lstm_predict(model: LstmModel, observed) -> np.ndarray:
    """Absolute future positions from the LSTM baseline."""
    obs, single = _check_observed(observed, model.config.obs_len)
    with tn.no_grad():
        disp = model.displacements(model.input_tensor(obs)).data
    pred = obs[:, -1:, :] + np.cumsum(disp.astype(np.float64), axis=1)
    return pred[0] if single else pred


def linear_predict(observed, pred_len: int = 12) -> np.ndarray:
    """Least-squares line through each coordinate vs. step index, extrapolated."""
    obs = np.asarray(observed, dtype=np.float64)
    single = obs.ndim == 2
    if single:
        obs = obs[None]
    n = obs.shape[1]
    if n < 2:
        raise ValueError(f"linear regression needs at least 2 observed points, got {n}")
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    mean = obs.mean(axis=1, keepdims=True)
    slope = np.einsum("t,btd->bd", tc, obs - mean) / (tc @ tc)
    future_t = np.arange(n, n + pred_len, dtype=np.float64) - t.mean()
    pred = mean + future_t[None, :, None] * slope[:, None, :]
    return pred[0] if single else pred
