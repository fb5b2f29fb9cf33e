# src/voxelbandit/tinynn.py
"""
Small numpy neural-network substrate: MLPs with hand-written backward passes,
Adam / NAdam, cosine learning-rate schedule with linear warmup and a
straight-through estimator. All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ShapeMismatch

Head = Literal["sigmoid", "linear"]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _as_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------

@dataclass
class MlpCache:
    inputs: List[np.ndarray]        # input to each layer
    preacts: List[np.ndarray]       # pre-activation of each layer
    output: np.ndarray


@dataclass
class MlpModel:
    """
    Fully connected network: ReLU hidden layers, sigmoid or linear head.

    weights[l] has shape (layer_sizes[l], layer_sizes[l+1]).
    """
    layer_sizes: List[int]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "relu"
    output_head: Head = "linear"

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2:
            raise ShapeMismatch("layer_sizes needs at least input and output sizes")
        if self.activation != "relu":
            raise ConfigError(f"Unsupported activation {self.activation!r}")
        if self.output_head not in ("sigmoid", "linear"):
            raise ConfigError(f"Unsupported output head {self.output_head!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeMismatch("Parameter count does not match layer_sizes")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ShapeMismatch(
                    f"Layer {l}: weight {w.shape} / bias {b.shape}, expected {expected}"
                )

    @classmethod
    def create(
        cls,
        layer_sizes: Sequence[int],
        seed: int | np.random.Generator | None = None,
        output_head: Head = "linear",
        activation: str = "relu",
    ) -> "MlpModel":
        """Uniform init in +-sqrt(1/fan_in) for weights and biases."""
        rng = _as_rng(seed)
        sizes = [int(s) for s in layer_sizes]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = math.sqrt(1.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases, activation=activation, output_head=output_head)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> List[np.ndarray]:
        """[W0, b0, W1, b1, ...]; the arrays are the live parameters."""
        params: List[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            activation=self.activation,
            output_head=self.output_head,
        )

    def _check_input(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatch(
                f"Expected input of width {self.input_dim}, got shape {x.shape}"
            )
        return x, single

    def forward_cache(self, x: np.ndarray) -> MlpCache:
        x, _ = self._check_input(x)
        inputs, preacts = [], []
        h = x
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            preacts.append(z)
            if l < last:
                h = relu(z)
            elif self.output_head == "sigmoid":
                h = expit(z)
            else:
                h = z
        return MlpCache(inputs=inputs, preacts=preacts, output=h)

    def forward(self, x: np.ndarray) -> np.ndarray:
        _, single = self._check_input(x)
        out = self.forward_cache(x).output
        return out[0] if single else out

    __call__ = forward

    def backward(
        self,
        x: np.ndarray,
        upstream: np.ndarray,
        cache: MlpCache | None = None,
    ) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Gradients of sum(upstream * forward(x)).

        Returns (parameter gradients in parameters() order, input gradient).
        """
        xb, single = self._check_input(x)
        if cache is None:
            cache = self.forward_cache(xb)
        g = np.asarray(upstream, dtype=float)
        if single and g.ndim == 1:
            g = g[None, :]
        if g.shape != cache.output.shape:
            raise ShapeMismatch(
                f"Upstream gradient shape {g.shape} does not match output {cache.output.shape}"
            )

        if self.output_head == "sigmoid":
            s = cache.output
            dz = g * s * (1.0 - s)
        else:
            dz = g

        grads_w: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        grads_b: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            grads_w[l] = cache.inputs[l].T @ dz
            grads_b[l] = dz.sum(axis=0)
            dh = dz @ self.weights[l].T
            if l > 0:
                dz = dh * (cache.preacts[l - 1] > 0)
        grads: List[np.ndarray] = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw, gb])
        return grads, (dh[0] if single else dh)

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    @classmethod
    def from_flat(
        cls,
        layer_sizes: Sequence[int],
        flat: np.ndarray,
        output_head: Head = "linear",
        activation: str = "relu",
    ) -> "MlpModel":
        sizes = [int(s) for s in layer_sizes]
        expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
        flat = np.asarray(flat, dtype=float)
        if flat.size != expected:
            raise ShapeMismatch(f"Expected {expected} parameters, got {flat.size}")
        weights, biases, pos = [], [], 0
        for a, b in zip(sizes[:-1], sizes[1:]):
            weights.append(flat[pos:pos + a * b].reshape(a, b).copy())
            pos += a * b
            biases.append(flat[pos:pos + b].copy())
            pos += b
        return cls(sizes, weights, biases, activation=activation, output_head=output_head)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return model.forward(x)


def backward(
    model: MlpModel, x: np.ndarray, upstream: np.ndarray
) -> Tuple[List[np.ndarray], np.ndarray]:
    return model.backward(x, upstream)


def reinitialize(model: MlpModel, seed: int | np.random.Generator | None) -> MlpModel:
    """Fresh parameters with the same architecture; the caller resets optimizer state."""
    return MlpModel.create(
        model.layer_sizes, seed, output_head=model.output_head, activation=model.activation
    )


def mse_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. pred."""
    diff = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


# ---------------------------------------------------------------------------
# Adam / NAdam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    nesterov: bool = False

    @classmethod
    def zeros_like(
        cls,
        params: Sequence[np.ndarray],
        nesterov: bool = False,
        b1: float = 0.9,
        b2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        return cls(
            m=[np.zeros_like(p, dtype=float) for p in params],
            v=[np.zeros_like(p, dtype=float) for p in params],
            step=0, b1=b1, b2=b2, eps=eps, nesterov=nesterov,
        )

    def reset(self) -> None:
        for m, v in zip(self.m, self.v):
            m.fill(0.0)
            v.fill(0.0)
        self.step = 0


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
) -> Tuple[Sequence[np.ndarray], AdamState]:
    """
    One Adam descent step, updating params and state in place.

    With state.nesterov the first moment uses the NAdam look-ahead
    b1 * m_t / (1 - b1^(t+1)) + (1 - b1) * g / (1 - b1^t).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch(
            f"{len(params)} params, {len(grads)} grads, {len(state.m)} moment arrays"
        )
    state.step += 1
    t = state.step
    b1, b2 = state.b1, state.b2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"Parameter {p.shape} vs gradient {g.shape} vs moment {m.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.nesterov:
            m_hat = b1 * m / (1.0 - b1 ** (t + 1)) + (1.0 - b1) * g / bc1
        else:
            m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# Learning-rate schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LrSchedule:
    """constant, or linear warmup to peak_lr then cosine decay to 0 at total_steps."""
    peak_lr: float
    kind: Literal["constant", "cosine-with-warmup"] = "constant"
    warmup_steps: int = 0
    total_steps: int = 1

    def __post_init__(self) -> None:
        if self.kind == "cosine-with-warmup" and not 0 <= self.warmup_steps <= self.total_steps:
            raise ConfigError(
                f"warmup_steps {self.warmup_steps} must lie in [0, total_steps={self.total_steps}]"
            )

    def __call__(self, step: int) -> float:
        if self.kind == "constant":
            return self.peak_lr
        if step < self.warmup_steps:
            return self.peak_lr * step / self.warmup_steps
        if step >= self.total_steps:
            return 0.0
        decay_len = self.total_steps - self.warmup_steps
        progress = (step - self.warmup_steps) / decay_len
        return self.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# Straight-through estimation
# ---------------------------------------------------------------------------

class StraightThrough:
    """Forward returns the sampled action; backward hands the gradient to prob unchanged."""

    @staticmethod
    def forward(sample: np.ndarray | float, prob: np.ndarray | float) -> np.ndarray:
        p = np.asarray(prob, dtype=float)
        if np.any((p < 0.0) | (p > 1.0)):
            raise ConfigError("prob must lie in [0, 1]")
        s = np.asarray(sample, dtype=float)
        if s.shape != p.shape:
            raise ShapeMismatch(f"sample shape {s.shape} vs prob shape {p.shape}")
        return s.copy()

    @staticmethod
    def backward(upstream: np.ndarray | float) -> np.ndarray:
        return np.array(upstream, dtype=float, copy=True)


def straight_through(sample: np.ndarray | float, prob: np.ndarray | float) -> np.ndarray:
    return StraightThrough.forward(sample, prob)
