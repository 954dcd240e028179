"""Dense MLP engine: forward pass, reverse-mode gradients, forward-mode JVPs.

Conventions used throughout the package:

* batches are row-major float64 arrays of shape (batch, features);
* a network stacks linear layers W (fan_in, fan_out) + bias (fan_out,),
  with ReLU on every hidden layer and raw logits on the last;
* probabilities are the row-softmax of the logits.

Everything here is a pure function of its inputs; parameters and
gradients are never mutated in place.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

CHECKPOINT_MAGIC = b"SFLX1"


def check_matrix(x: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a dense 2-D float64 carrier; returns a C-contiguous view."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


@dataclass
class ModelParams:
    """MLP parameters: ReLU hidden layers, linear output layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up layer by layer")
        if not self.weights:
            raise ValueError("at least one layer required")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: fan-in does not chain from layer {i - 1}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(w.shape[1] for w in self.weights)

    @property
    def param_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "ModelParams":
        return ModelParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass
class ParamGrad:
    """A vector in parameter space, shaped like some ModelParams."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "ParamGrad":
        return cls(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
        )

    def _check_same_shape(self, other: "ParamGrad") -> None:
        shapes_a = [w.shape for w in self.weights] + [b.shape for b in self.biases]
        shapes_b = [w.shape for w in other.weights] + [b.shape for b in other.biases]
        if shapes_a != shapes_b:
            raise ValueError("parameter-vector shapes do not match")

    def dot(self, other: "ParamGrad") -> float:
        self._check_same_shape(other)
        total = 0.0
        for a, b in zip(self.weights, other.weights):
            total += float(np.dot(a.ravel(), b.ravel()))
        for a, b in zip(self.biases, other.biases):
            total += float(np.dot(a, b))
        return total

    def add_scaled(self, other: "ParamGrad", scale: float) -> "ParamGrad":
        """Return self + scale * other."""
        self._check_same_shape(other)
        return ParamGrad(
            [a + scale * b for a, b in zip(self.weights, other.weights)],
            [a + scale * b for a, b in zip(self.biases, other.biases)],
        )

    def scale(self, c: float) -> "ParamGrad":
        return ParamGrad([c * w for w in self.weights], [c * b for b in self.biases])

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


def param_dot(a: ParamGrad, b: ParamGrad) -> float:
    """Euclidean inner product over all parameters."""
    return a.dot(b)


def init_mlp(layer_dims: list[int] | tuple[int, ...], seed: int = 0) -> ModelParams:
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)); biases zero."""
    if len(layer_dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = stream(seed, "init")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases)


@dataclass
class ForwardCache:
    """Intermediate values retained for gradients and JVPs.

    pre_activations holds every layer's pre-nonlinearity output (the last
    entry is the logits); activations holds the post-ReLU hidden outputs.
    Logits are kept even though the model's nominal output is the softmax,
    because downstream directional derivatives are taken at the logit level.
    """

    inputs: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mlp_forward(params: ModelParams, X: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on a batch; returns (probabilities, cache)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != params.input_dim:
        raise ValueError(f"input dim {X.shape[1]} != model input dim {params.input_dim}")
    cache = ForwardCache(inputs=X)
    a = X
    last = params.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = a @ w + b
        cache.pre_activations.append(pre)
        if i < last:
            a = np.maximum(pre, 0.0)
            cache.activations.append(a)
    cache.logits = cache.pre_activations[-1]
    cache.probs = softmax(cache.logits)
    return cache.probs, cache


def mlp_backward(params: ModelParams, cache: ForwardCache, dloss_dlogits: np.ndarray) -> ParamGrad:
    """Reverse-mode gradient of a scalar loss with the given logit gradient.

    The returned gradient is summed over the batch; divide dloss_dlogits
    by the batch size beforehand for a mean-reduced loss.
    """
    d = np.asarray(dloss_dlogits, dtype=np.float64)
    if cache.logits is None or d.shape != cache.logits.shape:
        raise ValueError(
            f"dloss_dlogits shape {d.shape} != logits shape "
            f"{None if cache.logits is None else cache.logits.shape}"
        )
    n = params.n_layers
    d_weights: list = [None] * n
    d_biases: list = [None] * n
    delta = d
    for i in range(n - 1, -1, -1):
        a_in = cache.activations[i - 1] if i > 0 else cache.inputs
        d_weights[i] = a_in.T @ delta
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (cache.pre_activations[i - 1] > 0.0)
    return ParamGrad(d_weights, d_biases)


def jvp_logits(
    params: ModelParams,
    x: np.ndarray,
    tangent: ParamGrad,
    cache: ForwardCache,
) -> np.ndarray:
    """Directional derivative of the logits along a parameter-space tangent.

    One forward pass propagating (value, tangent) pairs; the cache must
    come from mlp_forward on this same single-row input.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if cache.inputs.shape != x.shape or not np.array_equal(cache.inputs, x):
        raise ValueError("cache does not match the given input")
    return jvp_logits_batch(params, tangent, cache)[0]


def jvp_logits_batch(params: ModelParams, tangent: ParamGrad, cache: ForwardCache) -> np.ndarray:
    """Batched logit JVP reusing a forward cache; returns (batch, classes)."""
    if [w.shape for w in tangent.weights] != [w.shape for w in params.weights]:
        raise ValueError("tangent shape does not match parameters")
    a = cache.inputs
    t = None  # tangent of the input is zero, so layer 0 has no t @ W term
    last = params.n_layers - 1
    for i in range(params.n_layers):
        t_pre = a @ tangent.weights[i] + tangent.biases[i]
        if t is not None:
            t_pre += t @ params.weights[i]
        if i < last:
            t = t_pre * (cache.pre_activations[i] > 0.0)
            a = cache.activations[i]
        else:
            return t_pre
    raise AssertionError("unreachable")


def sgd_step(params: ModelParams, grad: ParamGrad, alpha: float) -> ModelParams:
    """One plain gradient-descent update; returns new parameters."""
    if alpha < 0:
        raise ValueError("learning rate must be >= 0")
    return ModelParams(
        [w - alpha * g for w, g in zip(params.weights, grad.weights)],
        [b - alpha * g for b, g in zip(params.biases, grad.biases)],
        params.activation,
    )


def save_checkpoint(params: ModelParams, path: str) -> None:
    """Little-endian binary checkpoint: magic, layer count, dims, f64 blocks."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", params.n_layers))
        for w in params.weights:
            f.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in zip(params.weights, params.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> ModelParams:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: bad magic in {path!r}")
    off = len(CHECKPOINT_MAGIC)
    (n_layers,) = struct.unpack_from("<I", blob, off)
    off += 4
    dims = []
    for _ in range(n_layers):
        dims.append(struct.unpack_from("<II", blob, off))
        off += 8
    expected = off + sum(8 * (fi * fo + fo) for fi, fo in dims)
    if len(blob) != expected:
        raise ValueError(f"truncated checkpoint: expected {expected} bytes, got {len(blob)}")
    weights, biases = [], []
    for fi, fo in dims:
        w = np.frombuffer(blob, dtype="<f8", count=fi * fo, offset=off).reshape(fi, fo)
        off += 8 * fi * fo
        b = np.frombuffer(blob, dtype="<f8", count=fo, offset=off)
        off += 8 * fo
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    return ModelParams(weights, biases)
