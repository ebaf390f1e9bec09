"""Dense MLP stacks with hand-written reverse-mode gradients, Adam, checkpoints.

Three parameter blocks: an encoder (default 4 relu hidden layers, width 256),
a projection head for pretraining (1 relu hidden + 1 linear output), and a
classification head (1 relu hidden + 1 linear logits layer). Everything is a
plain numpy array; float32 for training, float64 when checking gradients.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

CHECKPOINT_VERSION = 1


class NumericError(FloatingPointError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_width: int
    class_count: int
    hidden_width: int = 256
    encoder_hidden_layers: int = 4
    projection_width: int = 256
    activation: str = "relu"

    def __post_init__(self):
        if self.input_width < 1 or self.class_count < 2:
            raise ValueError("input_width >= 1 and class_count >= 2 required")
        if self.encoder_hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("encoder needs at least one hidden layer")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    # layer shape chains; every hidden layer is linear + relu, outputs are linear
    def encoder_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_width] + [self.hidden_width] * self.encoder_hidden_layers
        return list(zip(dims[:-1], dims[1:]))

    def pretrain_head_dims(self) -> list[tuple[int, int]]:
        return [(self.hidden_width, self.hidden_width), (self.hidden_width, self.projection_width)]

    def class_head_dims(self) -> list[tuple[int, int]]:
        return [(self.hidden_width, self.hidden_width), (self.hidden_width, self.class_count)]


# A stack is a flat list [W0, b0, W1, b1, ...]. Hidden layers take relu; the
# encoder's last layer is itself a hidden layer, head outputs stay linear.


def _init_stack(dims: list[tuple[int, int]], rng: np.random.Generator, dtype) -> list[np.ndarray]:
    params: list[np.ndarray] = []
    for d_in, d_out in dims:
        bound = 1.0 / np.sqrt(d_in)
        params.append(rng.uniform(-bound, bound, size=(d_in, d_out)).astype(dtype))
        params.append(rng.uniform(-bound, bound, size=d_out).astype(dtype))
    return params


@dataclass
class ModelParams:
    spec: MlpSpec
    theta_e: list[np.ndarray]
    theta_p: list[np.ndarray]
    theta_c: list[np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.spec,
            [a.copy() for a in self.theta_e],
            [a.copy() for a in self.theta_p],
            [a.copy() for a in self.theta_c],
        )

    def validate(self) -> None:
        for name, stack, dims in (
            ("theta_e", self.theta_e, self.spec.encoder_dims()),
            ("theta_p", self.theta_p, self.spec.pretrain_head_dims()),
            ("theta_c", self.theta_c, self.spec.class_head_dims()),
        ):
            if len(stack) != 2 * len(dims):
                raise ValueError(f"{name}: wrong layer count")
            for k, (d_in, d_out) in enumerate(dims):
                if stack[2 * k].shape != (d_in, d_out) or stack[2 * k + 1].shape != (d_out,):
                    raise ValueError(f"{name}: layer {k} shape mismatch")
                if not (np.isfinite(stack[2 * k]).all() and np.isfinite(stack[2 * k + 1]).all()):
                    raise NumericError(f"{name}: layer {k} holds non-finite entries")


def init_model(spec: MlpSpec, rng: np.random.Generator, dtype=np.float32) -> ModelParams:
    """Fan-in-scaled uniform init, drawn in a fixed block order (e, p, c)."""
    return ModelParams(
        spec,
        _init_stack(spec.encoder_dims(), rng, dtype),
        _init_stack(spec.pretrain_head_dims(), rng, dtype),
        _init_stack(spec.class_head_dims(), rng, dtype),
    )


def _stack_forward(
    stack: list[np.ndarray], x: np.ndarray, relu_mask: list[bool], name: str
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward through linear(+relu) layers; cache holds each layer's input."""
    cache = []
    h = x
    for k in range(len(stack) // 2):
        cache.append(h)
        h = h @ stack[2 * k] + stack[2 * k + 1]
        if relu_mask[k]:
            h = np.maximum(h, 0.0)
        if not np.isfinite(h).all():
            raise NumericError(f"non-finite activations in {name} layer {k}")
    return h, cache


def _stack_backward(
    stack: list[np.ndarray],
    cache: list[np.ndarray],
    out: np.ndarray,
    d_out: np.ndarray,
    relu_mask: list[bool],
) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients for one stack. Recomputes layer outputs from cached inputs."""
    n_layers = len(stack) // 2
    grads: list[Optional[np.ndarray]] = [None] * len(stack)
    d_h = d_out
    h_out = out
    for k in reversed(range(n_layers)):
        x_in = cache[k]
        if relu_mask[k]:
            d_h = d_h * (h_out > 0.0)
        grads[2 * k] = x_in.T @ d_h
        grads[2 * k + 1] = d_h.sum(axis=0)
        d_h = d_h @ stack[2 * k].T
        # the previous layer's output is this layer's cached input
        h_out = x_in
    return grads, d_h  # type: ignore[return-value]


def _relu_mask_encoder(spec: MlpSpec) -> list[bool]:
    return [True] * spec.encoder_hidden_layers


_RELU_MASK_HEAD = [True, False]  # hidden relu, linear output


def forward_encoder(x: np.ndarray, params: ModelParams) -> tuple[np.ndarray, list[np.ndarray]]:
    return _stack_forward(params.theta_e, x, _relu_mask_encoder(params.spec), "encoder")


def forward_head(h: np.ndarray, stack: list[np.ndarray], name: str = "head") -> tuple[np.ndarray, list[np.ndarray]]:
    return _stack_forward(stack, h, _RELU_MASK_HEAD, name)


def encode(x: np.ndarray, params: ModelParams) -> np.ndarray:
    return forward_encoder(x, params)[0]


def predict_logits(x: np.ndarray, params: ModelParams) -> np.ndarray:
    h, _ = forward_encoder(x, params)
    return forward_head(h, params.theta_c, "class_head")[0]


def project(x: np.ndarray, params: ModelParams) -> np.ndarray:
    h, _ = forward_encoder(x, params)
    return forward_head(h, params.theta_p, "pretrain_head")[0]


def backward_encoder_head(
    params: ModelParams,
    head: list[np.ndarray],
    enc_cache: list[np.ndarray],
    h: np.ndarray,
    head_cache: list[np.ndarray],
    out: np.ndarray,
    d_out: np.ndarray,
    freeze_encoder: bool = False,
) -> tuple[Optional[list[np.ndarray]], list[np.ndarray]]:
    """Backprop d_out through a head and (unless frozen) the encoder.

    Returns (encoder grads or None, head grads). With the encoder frozen no
    encoder gradient exists at all, which keeps theta_e bit-identical under
    any optimizer.
    """
    head_grads, d_h = _stack_backward(head, head_cache, out, d_out, _RELU_MASK_HEAD)
    if freeze_encoder:
        return None, head_grads
    enc_grads, _ = _stack_backward(
        params.theta_e, enc_cache, h, d_h, _relu_mask_encoder(params.spec)
    )
    return enc_grads, head_grads


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    z = logits.astype(np.float64)
    z -= z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float((lse - z[np.arange(n), y]).mean())
    g = softmax(z)
    g[np.arange(n), y] -= 1.0
    return loss, (g / n).astype(logits.dtype)


@dataclass
class AdamState:
    """Adaptive-moment state mirroring one flat parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def for_params(params: Iterable[np.ndarray], lr: float = 1e-3) -> "AdamState":
        params = list(params)
        return AdamState(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
        )


def optimizer_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """In-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    # python-float scalars so float32 parameters stay float32 throughout
    step = float(state.lr) * float(np.sqrt(corr2)) / corr1
    eps = float(state.eps) * float(np.sqrt(corr2))
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= (step * m / (np.sqrt(v) + eps)).astype(p.dtype, copy=False)


def save_checkpoint(
    path,
    params: ModelParams,
    epoch: int = 0,
    optimizer: Optional[AdamState] = None,
    rng_state: Optional[dict] = None,
    extra: Optional[dict] = None,
) -> None:
    """Versioned npz container; arrays round-trip bit-exactly."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "epoch": int(epoch),
        "spec": {
            "input_width": params.spec.input_width,
            "class_count": params.spec.class_count,
            "hidden_width": params.spec.hidden_width,
            "encoder_hidden_layers": params.spec.encoder_hidden_layers,
            "projection_width": params.spec.projection_width,
            "activation": params.spec.activation,
        },
        "rng_state": rng_state,
        "extra": extra or {},
        "has_optimizer": optimizer is not None,
    }
    arrays: dict[str, np.ndarray] = {}
    for block, stack in (("e", params.theta_e), ("p", params.theta_p), ("c", params.theta_c)):
        for k, arr in enumerate(stack):
            arrays[f"{block}_{k}"] = arr
    if optimizer is not None:
        meta["optimizer"] = {
            "t": optimizer.t,
            "lr": optimizer.lr,
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
        }
        for k, arr in enumerate(optimizer.m):
            arrays[f"adam_m_{k}"] = arr
        for k, arr in enumerate(optimizer.v):
            arrays[f"adam_v_{k}"] = arr
    arrays["meta_json"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    path = str(path)
    if not path.endswith(".npz"):  # np.savez would append the suffix silently
        path += ".npz"
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, int, Optional[AdamState], Optional[dict], dict]:
    """Returns (params, epoch, optimizer state or None, rng_state or None, extra)."""
    path = str(path)
    if not path.endswith(".npz"):
        path += ".npz"
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        spec = MlpSpec(**meta["spec"])
        blocks = {}
        for block, dims in (
            ("e", spec.encoder_dims()),
            ("p", spec.pretrain_head_dims()),
            ("c", spec.class_head_dims()),
        ):
            blocks[block] = [data[f"{block}_{k}"] for k in range(2 * len(dims))]
        params = ModelParams(spec, blocks["e"], blocks["p"], blocks["c"])
        params.validate()
        opt = None
        if meta.get("has_optimizer"):
            o = meta["optimizer"]
            n = sum(1 for key in data.files if key.startswith("adam_m_"))
            opt = AdamState(
                m=[data[f"adam_m_{k}"] for k in range(n)],
                v=[data[f"adam_v_{k}"] for k in range(n)],
                t=o["t"],
                lr=o["lr"],
                beta1=o["beta1"],
                beta2=o["beta2"],
                eps=o["eps"],
            )
        return params, meta["epoch"], opt, meta.get("rng_state"), meta.get("extra", {})
