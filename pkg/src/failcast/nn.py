"""Minimal neural-network substrate.

Dense layers, batch normalization, LeakyReLU, dropout, reverse-mode
gradients through a recorded tape, Adam, and the pinball / binary
cross-entropy losses. Everything is float64 and deterministic given a
seeded ``numpy.random.Generator``.

Layer stacks are described by a list of :class:`LayerSpec`; parameters live
in a :class:`ParameterSet` keyed ``dense{i}.w`` / ``dense{i}.b`` /
``bn{i}.gamma`` / ``bn{i}.beta`` where ``i`` is the layer index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import kernels
from .errors import DataError, NonFiniteError, ShapeError, TapeError

Array = np.ndarray

LEAKY_SLOPE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.9

LAYER_KINDS = ("dense", "batch_norm", "leaky_relu", "dropout")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of an MLP stack.

    ``width`` is the output width for dense layers and the (unchanged)
    feature width otherwise. ``skip_from``, when set, adds the output of
    that earlier layer elementwise; it must have equal width.
    """

    kind: str
    width: int
    skip_from: Optional[int] = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.width <= 0:
            raise ShapeError(f"layer width must be positive, got {self.width}")


class ParameterSet:
    """Ordered name -> float64 array map with shapes frozen after first set.

    Mutating an entry's values in place is allowed (training does), but the
    holder must call :meth:`mark_mutated` so outstanding tapes become stale.
    ``adam_step`` does this automatically.
    """

    def __init__(self):
        self._entries: dict[str, Array] = {}
        self._version = 0

    def __setitem__(self, name: str, value: Array) -> None:
        value = np.ascontiguousarray(value, dtype=np.float64)
        if name in self._entries and self._entries[name].shape != value.shape:
            raise ShapeError(
                f"parameter {name!r} shape is frozen at "
                f"{self._entries[name].shape}, got {value.shape}"
            )
        self._entries[name] = value
        self._version += 1

    def __getitem__(self, name: str) -> Array:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    @property
    def version(self) -> int:
        return self._version

    def mark_mutated(self) -> None:
        self._version += 1

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, value in self._entries.items():
            out[name] = value.copy()
        return out


@dataclass
class AdamState:
    """Adam moment estimates mirroring a ParameterSet."""

    first_moment: dict[str, Array]
    second_moment: dict[str, Array]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: ParameterSet, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


@dataclass
class BatchNormState:
    """Running statistics and mode for one batch-norm layer.

    Running averages use ``running = momentum*running + (1-momentum)*batch``
    with biased (1/N) batch variance.
    """

    running_mean: Array
    running_var: Array
    epsilon: float = BN_EPS
    momentum: float = BN_MOMENTUM
    mode: str = "train"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DataError(f"batch-norm epsilon must be > 0, got {self.epsilon}")
        if self.mode not in ("train", "infer"):
            raise DataError(f"batch-norm mode must be 'train' or 'infer', got {self.mode!r}")

    @classmethod
    def for_width(cls, width: int, epsilon=BN_EPS, momentum=BN_MOMENTUM):
        return cls(
            running_mean=np.zeros(width),
            running_var=np.ones(width),
            epsilon=epsilon,
            momentum=momentum,
        )

    def copy(self) -> "BatchNormState":
        return BatchNormState(
            running_mean=self.running_mean.copy(),
            running_var=self.running_var.copy(),
            epsilon=self.epsilon,
            momentum=self.momentum,
            mode=self.mode,
        )


def leaky_relu(x: Array, negative_slope: float = LEAKY_SLOPE):
    """Elementwise f(v) = v if v >= 0 else negative_slope*v; shape preserved."""
    if not 0.0 < negative_slope < 1.0:
        raise DataError(f"negative_slope must be in (0, 1), got {negative_slope}")
    x0 = np.asarray(x, dtype=np.float64)
    x2 = np.ascontiguousarray(np.atleast_2d(x0))
    y, bad = kernels.leaky_relu_forward(x2, negative_slope)
    if bad >= 0:
        idx = np.unravel_index(bad, x0.shape) if x0.ndim else (0,)
        raise NonFiniteError(f"non-finite input at index {tuple(int(i) for i in idx)}")
    return float(y[0, 0]) if x0.ndim == 0 else y.reshape(x0.shape)


def batch_norm_forward(x: Array, gamma: Array, beta: Array, state: BatchNormState) -> Array:
    """Batch normalization; training mode also updates the running stats."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch_norm_forward expects a 2-D batch, got ndim={x.ndim}")
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(
            f"gamma/beta must have length {x.shape[1]}, got {gamma.shape}/{beta.shape}"
        )
    if state.mode == "train":
        if x.shape[0] < 2:
            raise DataError("batch normalization in training mode needs a batch of >= 2 rows")
        y, _, mean, var, _ = kernels.batchnorm_train_forward(x, gamma, beta, state.epsilon)
        m = state.momentum
        state.running_mean = m * state.running_mean + (1.0 - m) * mean
        state.running_var = m * state.running_var + (1.0 - m) * var
        return y
    return kernels.batchnorm_infer_forward(
        x, gamma, beta, state.running_mean, state.running_var, state.epsilon
    )


def init_mlp_params(
    layers: list[LayerSpec], input_dim: int, rng: np.random.Generator
) -> tuple[ParameterSet, dict[int, BatchNormState]]:
    """Uniform fan-in init: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0."""
    params = ParameterSet()
    bn_states: dict[int, BatchNormState] = {}
    width = input_dim
    for i, layer in enumerate(layers):
        if layer.kind == "dense":
            lim = 1.0 / np.sqrt(width)
            params[f"dense{i}.w"] = rng.uniform(-lim, lim, size=(width, layer.width))
            params[f"dense{i}.b"] = np.zeros(layer.width)
            width = layer.width
        else:
            if layer.width != width:
                raise ShapeError(
                    f"layer {i} ({layer.kind}) declares width {layer.width} "
                    f"but receives {width}"
                )
            if layer.kind == "batch_norm":
                params[f"bn{i}.gamma"] = np.ones(width)
                params[f"bn{i}.beta"] = np.zeros(width)
                bn_states[i] = BatchNormState.for_width(width)
        if layer.skip_from is not None:
            if not 0 <= layer.skip_from < i:
                raise ShapeError(f"layer {i}: skip_from {layer.skip_from} is not an earlier layer")
            ref = layers[layer.skip_from]
            if ref.width != layer.width:
                raise ShapeError(
                    f"layer {i}: skip_from layer {layer.skip_from} has width "
                    f"{ref.width}, expected {layer.width}"
                )
    return params, bn_states


@dataclass
class Tape:
    """Activation record from a forward pass, consumed by mlp_backward."""

    layers: list[LayerSpec]
    params: ParameterSet
    params_version: int
    input: Array
    outputs: list[Array]
    caches: list[tuple]
    mode: str


@dataclass
class Mlp:
    """A layer stack plus its parameters and batch-norm states."""

    layers: list[LayerSpec]
    params: ParameterSet
    bn_states: dict[int, BatchNormState] = field(default_factory=dict)
    input_dim: int = 0

    @classmethod
    def build(cls, layers: list[LayerSpec], input_dim: int, rng: np.random.Generator) -> "Mlp":
        params, bn_states = init_mlp_params(layers, input_dim, rng)
        return cls(layers=layers, params=params, bn_states=bn_states, input_dim=input_dim)

    def forward(self, x, mode="infer", dropout_rate=0.0, rng=None):
        return mlp_forward(
            self.layers, self.params, x, mode,
            bn_states=self.bn_states, dropout_rate=dropout_rate, rng=rng,
        )

    def predict(self, x: Array) -> Array:
        out, _ = self.forward(x, mode="infer")
        return out


def mlp_forward(
    layers: list[LayerSpec],
    params: ParameterSet,
    x: Array,
    mode: str = "infer",
    *,
    bn_states: Optional[dict[int, BatchNormState]] = None,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Array, Tape]:
    """Run the stack on a (batch, features) matrix.

    Returns the output and a tape sufficient for :func:`mlp_backward`.
    Dropout is inverted (train-time scaling by 1/(1-rate)), so inference is
    deterministic. Skip connections add the referenced layer's output.
    """
    if mode not in ("train", "infer"):
        raise DataError(f"mode must be 'train' or 'infer', got {mode!r}")
    if mode == "train" and dropout_rate > 0.0 and rng is None:
        raise DataError("training-mode dropout requires an rng for mask sampling")
    bn_states = bn_states or {}
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    h = x
    outputs: list[Array] = []
    caches: list[tuple] = []
    for i, layer in enumerate(layers):
        if layer.kind == "dense":
            w = params[f"dense{i}.w"]
            b = params[f"dense{i}.b"]
            if h.shape[1] != w.shape[0]:
                raise ShapeError(
                    f"layer {i} (dense): input width {h.shape[1]} does not match "
                    f"weight shape {w.shape}"
                )
            out = h @ w + b
            cache = (h,)
        elif layer.kind == "batch_norm":
            state = bn_states.get(i)
            if state is None:
                raise ShapeError(f"layer {i} (batch_norm): no BatchNormState provided")
            gamma = params[f"bn{i}.gamma"]
            beta = params[f"bn{i}.beta"]
            if h.shape[1] != gamma.shape[0]:
                raise ShapeError(
                    f"layer {i} (batch_norm): input width {h.shape[1]} does not "
                    f"match gamma length {gamma.shape[0]}"
                )
            if mode == "train":
                if h.shape[0] < 2:
                    raise DataError(
                        f"layer {i} (batch_norm): training mode needs a batch of >= 2 rows"
                    )
                out, xhat, mean, var, inv_std = kernels.batchnorm_train_forward(
                    h, gamma, beta, state.epsilon
                )
                m = state.momentum
                state.running_mean = m * state.running_mean + (1.0 - m) * mean
                state.running_var = m * state.running_var + (1.0 - m) * var
                cache = (xhat, inv_std)
            else:
                out = kernels.batchnorm_infer_forward(
                    h, gamma, beta, state.running_mean, state.running_var, state.epsilon
                )
                cache = (None, None)
        elif layer.kind == "leaky_relu":
            out, bad = kernels.leaky_relu_forward(h, LEAKY_SLOPE)
            if bad >= 0:
                idx = np.unravel_index(bad, h.shape)
                raise NonFiniteError(
                    f"layer {i} (leaky_relu): non-finite input at index "
                    f"{tuple(int(v) for v in idx)}"
                )
            cache = (h,)
        elif layer.kind == "dropout":
            if mode == "train" and dropout_rate > 0.0:
                mask = (rng.random(h.shape) >= dropout_rate) / (1.0 - dropout_rate)
                out = h * mask
                cache = (mask,)
            else:
                out = h
                cache = (None,)
        if layer.skip_from is not None:
            out = out + outputs[layer.skip_from]
        outputs.append(out)
        caches.append(cache)
        h = out
    return h, Tape(
        layers=layers,
        params=params,
        params_version=params.version,
        input=x,
        outputs=outputs,
        caches=caches,
        mode=mode,
    )


def mlp_backward(tape: Tape, upstream: Array) -> tuple[Array, dict[str, Array]]:
    """Reverse-mode gradients through a recorded tape.

    Returns (gradient wrt the input, per-parameter gradients). The tape is
    rejected if the parameters changed since the forward pass.
    """
    if tape.params_version != tape.params.version:
        raise TapeError("tape is stale: parameters were mutated after the forward pass")
    upstream = np.ascontiguousarray(np.atleast_2d(np.asarray(upstream, dtype=np.float64)))
    if upstream.shape != tape.outputs[-1].shape:
        raise ShapeError(
            f"upstream gradient shape {upstream.shape} does not match output "
            f"shape {tape.outputs[-1].shape}"
        )
    layers = tape.layers
    params = tape.params
    grads: dict[str, Array] = {}
    # grad_out[i] accumulates dL/d(output of layer i); skips add here.
    grad_out: list[Optional[Array]] = [None] * len(layers)
    grad_out[-1] = upstream
    input_grad = None
    for i in reversed(range(len(layers))):
        g = grad_out[i]
        if g is None:
            g = np.zeros_like(tape.outputs[i])
        layer = layers[i]
        if layer.skip_from is not None:
            k = layer.skip_from
            grad_out[k] = g if grad_out[k] is None else grad_out[k] + g
        cache = tape.caches[i]
        if layer.kind == "dense":
            (h,) = cache
            w = params[f"dense{i}.w"]
            grads[f"dense{i}.w"] = h.T @ g
            grads[f"dense{i}.b"] = g.sum(axis=0)
            gin = g @ w.T
        elif layer.kind == "batch_norm":
            xhat, inv_std = cache
            if xhat is None:
                raise TapeError("tape from an inference-mode forward cannot be differentiated")
            gamma = params[f"bn{i}.gamma"]
            gin, dgamma, dbeta = kernels.batchnorm_backward(g, xhat, gamma, inv_std)
            grads[f"bn{i}.gamma"] = dgamma
            grads[f"bn{i}.beta"] = dbeta
        elif layer.kind == "leaky_relu":
            (h,) = cache
            gin = kernels.leaky_relu_backward(h, np.ascontiguousarray(g), LEAKY_SLOPE)
        elif layer.kind == "dropout":
            (mask,) = cache
            gin = g if mask is None else g * mask
        if i == 0:
            input_grad = gin
        else:
            grad_out[i - 1] = gin if grad_out[i - 1] is None else grad_out[i - 1] + gin
    return input_grad, grads


def adam_step(
    params: ParameterSet,
    grads: dict[str, Array],
    state: AdamState,
    learning_rate: float,
) -> tuple[ParameterSet, AdamState]:
    """One bias-corrected Adam update, in place; step_count increments by 1."""
    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        if g.shape != p.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter "
                f"{name!r} shape {p.shape}"
            )
        kernels.adam_update(
            p.reshape(-1),
            np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
            state.first_moment[name].reshape(-1),
            state.second_moment[name].reshape(-1),
            learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            t,
        )
    params.mark_mutated()
    return params, state


def pinball_loss(y, y_hat, level: float):
    """max(level*(y-yhat), (level-1)*(y-yhat)); broadcasts over arrays."""
    if not 0.0 < level < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {level}")
    d = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    out = np.where(d >= 0.0, level * d, (level - 1.0) * d)
    return float(out) if out.ndim == 0 else out


def pinball_loss_mean(y: Array, y_hat: Array, level: float) -> float:
    if not 0.0 < level < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {level}")
    y = np.ascontiguousarray(y, dtype=np.float64)
    y_hat = np.ascontiguousarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    return kernels.pinball_loss_sum(y, y_hat, level) / y.size


def pinball_grad(y: Array, y_hat: Array, level: float) -> Array:
    """Subgradient of the summed pinball loss wrt y_hat."""
    if not 0.0 < level < 1.0:
        raise DataError(f"quantile level must be in (0, 1), got {level}")
    return kernels.pinball_grad(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(y_hat, dtype=np.float64),
        level,
    )


BCE_CLAMP = 1e-12


def bce_loss(p, y):
    """-[y ln p + (1-y) ln(1-p)] with p clamped to [1e-12, 1-1e-12]."""
    y_arr = np.asarray(y)
    if not np.isin(y_arr, (0, 1)).all():
        raise DataError(f"labels must be in {{0, 1}}, got {y!r}")
    p_arr = np.clip(np.asarray(p, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    out = -(y_arr * np.log(p_arr) + (1 - y_arr) * np.log1p(-p_arr))
    return float(out) if out.ndim == 0 else out
