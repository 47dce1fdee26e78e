"""Small dense-math toolkit: layers, losses, Adam, gradient checks and seeded RNG streams.

Everything here works on plain numpy arrays. Batched inputs are row-major
(one sample per row); weight matrices are stored ``(out, in)``.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import NumericError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")

_MASK64 = (1 << 64) - 1


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return expit(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "identity":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def activation_derivative(out: np.ndarray, kind: str) -> np.ndarray:
    """Derivative of the activation expressed through its *output*."""
    if kind == "relu":
        return (out > 0.0).astype(out.dtype)
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "identity":
        return np.ones_like(out)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2:
            raise ShapeError("weights must be a 2-d (out, in) array")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match {self.weights.shape[0]} outputs"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def initialized(cls, n_in: int, n_out: int, activation: str, rng: "RngStream") -> "DenseLayer":
        """He-normal init for relu layers, Glorot-uniform otherwise; zero bias."""
        if activation == "relu":
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
        else:
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = (2.0 * rng.uniform(size=(n_out, n_in)) - 1.0) * limit
        return cls(w, np.zeros(n_out), activation)


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """``activation(W x + b)`` for a vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.n_in:
        raise ShapeError(f"input width {x.shape[-1]} != layer input width {layer.n_in}")
    out = activate(x @ layer.weights.T + layer.bias, layer.activation)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite dense layer output")
    return out


def dense_backward(layer: DenseLayer, x: np.ndarray, out: np.ndarray, grad_out: np.ndarray):
    """Backprop through one layer for a batch; returns (grad_x, grad_w, grad_b)."""
    dz = grad_out * activation_derivative(out, layer.activation)
    return dz @ layer.weights, dz.T @ x, dz.sum(axis=0)


def mae_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if pred.shape != target.shape or pred.size == 0:
        raise ShapeError(f"mae_loss needs equal non-empty lengths, got {pred.size} and {target.size}")
    return float(np.mean(np.abs(pred - target)))


def mae_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Subgradient of :func:`mae_loss` w.r.t. ``pred`` (zero at ties)."""
    return np.sign(pred - target) / pred.size


@dataclass
class AdamState:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.alpha > 0 and self.eps > 0 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("invalid Adam hyperparameters")

    @classmethod
    def for_params(cls, params: dict, **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
        return state


def adam_step(params: dict, grads: dict, state: AdamState):
    """One bias-corrected Adam update. ``params`` arrays are modified in place.

    Returns ``(params, state)`` for convenience.
    """
    if set(grads) != set(params):
        raise ShapeError("grads and params have different keys")
    for k, g in grads.items():
        if g.shape != params[k].shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {params[k].shape} for {k}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {k}")
    if not state.m:
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for k, g in grads.items():
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[k] -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def grad_check(loss_fn: Callable, params: dict, eps: float = 1e-5) -> float:
    """Compare analytic gradients with centered finite differences.

    ``loss_fn(params)`` must return ``(loss, grads)``. The returned value is
    ``max |analytic - numeric| / max(1, |analytic|, |numeric|)`` over every entry.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    loss, analytic = loss_fn(params)
    if not np.isfinite(loss):
        raise NumericError("non-finite loss at the check point")
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        a_flat = np.asarray(analytic[name]).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(params)[0]
            flat[i] = orig - eps
            down = loss_fn(params)[0]
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            num = (up - down) / (2.0 * eps)
            err = abs(a_flat[i] - num) / max(1.0, abs(a_flat[i]), abs(num))
            worst = max(worst, err)
    return worst


def stream_id_for(name: str) -> int:
    """Stable 64-bit stream id for a named purpose (kept clear of small profile ids)."""
    return (zlib.crc32(name.encode()) << 32) | 0xFFFF


class RngStream:
    """Counter-based (Philox) random stream keyed by ``(seed, stream_id)``.

    The key fully determines the sequence, so profile ``i`` can be generated
    from ``RngStream(seed, i)`` in any order and on any platform.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, mu: float = 0.0, sigma: float = 1.0, size=None):
        # Box-Muller on two uniforms; 1 - u keeps the log argument in (0, 1].
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        u1 = 1.0 - self._gen.random(size)
        u2 = self._gen.random(size)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return mu + sigma * z

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def choice(self, seq):
        return seq[int(self._gen.integers(0, len(seq)))]

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, name: str) -> "RngStream":
        """Independent child stream derived from this key and a name."""
        return RngStream(self.seed, self.stream_id ^ stream_id_for(name))


def rng_uniform(stream: RngStream) -> float:
    return float(stream.uniform())


def rng_normal(stream: RngStream, mu: float = 0.0, sigma: float = 1.0) -> float:
    return float(stream.normal(mu, sigma))
