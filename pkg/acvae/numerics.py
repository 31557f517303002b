"""Dense kernels, layers with manual backward passes, Adam, and gradient checking."""

import hashlib
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .exceptions import NoCachedForwardError, NonFiniteError, ShapeMismatchError
from .models import AdamConfig
from .types import Tensor

__all__ = [
    "matmul",
    "LayerCache",
    "LinearLayer",
    "linear_forward",
    "linear_backward",
    "tanh_forward",
    "tanh_backward",
    "sigmoid_forward",
    "sigmoid_backward",
    "Tanh",
    "Sigmoid",
    "Mlp",
    "adam_step",
    "gradient_check",
]

logger = logging.getLogger(__name__)


def _ensure_finite(values: Tensor, where: str) -> Tensor:
    if not np.isfinite(values).all():
        raise NonFiniteError(where, f"max |value| = {np.nanmax(np.abs(values))}")
    return values


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors.

    Raises:
        ShapeMismatchError: If a.cols != b.rows
        NonFiniteError: If the product overflows
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(a.shape, b.shape, op="matmul")
    return _ensure_finite(a @ b, "matmul")


@dataclass
class LayerCache:
    """Inputs stored by the most recent forward pass."""

    inputs: Tensor


class LinearLayer:
    """Affine layer y = x W + b with gradient and Adam-moment storage."""

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator | None = None,
        name: str = "linear",
    ) -> None:
        """Initialize a layer.

        Weights are drawn uniformly from +/- sqrt(6 / (in_dim + out_dim)) when an
        rng is given, otherwise zero. Biases start at zero.

        Args:
            in_dim: Input width
            out_dim: Output width
            rng: Generator for the weight draw
            name: Layer name used in diagnostics
        """
        self.name = name
        if rng is None:
            self.weight = np.zeros((in_dim, out_dim), dtype=np.float64)
        else:
            limit = np.sqrt(6.0 / (in_dim + out_dim))
            self.weight = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim, dtype=np.float64)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.m_weight = np.zeros_like(self.weight)
        self.v_weight = np.zeros_like(self.weight)
        self.m_bias = np.zeros_like(self.bias)
        self.v_bias = np.zeros_like(self.bias)
        self.step = 0
        self.cache: LayerCache | None = None

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def parameter_count(self) -> int:
        return int(self.weight.size + self.bias.size)

    def parameters(self) -> list[tuple[Tensor, Tensor]]:
        """(parameter, gradient) pairs, weight first."""
        return [(self.weight, self.grad_weight), (self.bias, self.grad_bias)]

    def zero_grad(self) -> None:
        self.grad_weight.fill(0.0)
        self.grad_bias.fill(0.0)

    def forward(self, x: Tensor, *, cache: bool = True) -> Tensor:
        return linear_forward(self, x, cache=cache)

    def backward(self, grad_out: Tensor) -> Tensor:
        return linear_backward(self, grad_out)


def linear_forward(layer: LinearLayer, x: Tensor, *, cache: bool = True) -> Tensor:
    """x W + b, caching x for the backward pass unless cache is False."""
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeMismatchError(x.shape, layer.weight.shape, op=f"{layer.name}.forward")
    out = matmul(x, layer.weight) + layer.bias
    if cache:
        layer.cache = LayerCache(inputs=x)
    return out


def linear_backward(layer: LinearLayer, grad_out: Tensor) -> Tensor:
    """Accumulate parameter gradients and return the gradient w.r.t. the input."""
    if layer.cache is None:
        raise NoCachedForwardError(layer.name)
    if grad_out.ndim != 2 or grad_out.shape != (layer.cache.inputs.shape[0], layer.out_dim):
        expected = (layer.cache.inputs.shape[0], layer.out_dim)
        raise ShapeMismatchError(grad_out.shape, expected, op=f"{layer.name}.backward")
    layer.grad_weight += matmul(layer.cache.inputs.T, grad_out)
    layer.grad_bias += grad_out.sum(axis=0)
    return matmul(grad_out, layer.weight.T)


def tanh_forward(x: Tensor) -> Tensor:
    return np.tanh(x)


def tanh_backward(y: Tensor, grad_out: Tensor) -> Tensor:
    """Chain rule through tanh given its output y."""
    return grad_out * (1.0 - y * y)


def sigmoid_forward(x: Tensor) -> Tensor:
    """Logistic function, evaluated without overflow for large |x|."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y: Tensor, grad_out: Tensor) -> Tensor:
    """Chain rule through the sigmoid given its output y."""
    return grad_out * y * (1.0 - y)


class _Activation:
    """Elementwise activation caching its own output."""

    name = "activation"

    def __init__(self) -> None:
        self.output: Tensor | None = None

    def _apply(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def _chain(self, y: Tensor, grad_out: Tensor) -> Tensor:
        raise NotImplementedError

    def forward(self, x: Tensor, *, cache: bool = True) -> Tensor:
        y = self._apply(x)
        if cache:
            self.output = y
        return y

    def backward(self, grad_out: Tensor) -> Tensor:
        if self.output is None:
            raise NoCachedForwardError(self.name)
        return self._chain(self.output, grad_out)


class Tanh(_Activation):
    name = "tanh"

    def _apply(self, x: Tensor) -> Tensor:
        return tanh_forward(x)

    def _chain(self, y: Tensor, grad_out: Tensor) -> Tensor:
        return tanh_backward(y, grad_out)


class Sigmoid(_Activation):
    name = "sigmoid"

    def _apply(self, x: Tensor) -> Tensor:
        return sigmoid_forward(x)

    def _chain(self, y: Tensor, grad_out: Tensor) -> Tensor:
        return sigmoid_backward(y, grad_out)


class Mlp:
    """Two-layer perceptron: linear, tanh, linear, optional output activation."""

    def __init__(
        self,
        in_dim: int,
        hidden: int,
        out_dim: int,
        rng: np.random.Generator | None = None,
        name: str = "mlp",
        output_activation: _Activation | None = None,
    ) -> None:
        self.name = name
        self.hidden_layer = LinearLayer(in_dim, hidden, rng, name=f"{name}[0]")
        self.hidden_activation = Tanh()
        self.output_layer = LinearLayer(hidden, out_dim, rng, name=f"{name}[1]")
        self.output_activation = output_activation

    @property
    def layers(self) -> list[LinearLayer]:
        return [self.hidden_layer, self.output_layer]

    @property
    def in_dim(self) -> int:
        return self.hidden_layer.in_dim

    @property
    def out_dim(self) -> int:
        return self.output_layer.out_dim

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def forward(self, x: Tensor, *, cache: bool = True) -> Tensor:
        h = self.hidden_activation.forward(self.hidden_layer.forward(x, cache=cache), cache=cache)
        out = self.output_layer.forward(h, cache=cache)
        if self.output_activation is not None:
            out = self.output_activation.forward(out, cache=cache)
        return out

    def backward(self, grad_out: Tensor) -> Tensor:
        """Backpropagate from the network output to its input."""
        if self.output_activation is not None:
            grad_out = self.output_activation.backward(grad_out)
        grad_h = self.output_layer.backward(grad_out)
        return self.hidden_layer.backward(self.hidden_activation.backward(grad_h))

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def adam_step(self, adam: AdamConfig) -> None:
        for layer in self.layers:
            adam_step(layer, adam.lr, adam.beta1, adam.beta2, adam.eps)
        self.hidden_activation.output = None
        if self.output_activation is not None:
            self.output_activation.output = None

    def checksum(self) -> str:
        """Digest of all parameter bytes, for detecting mutation."""
        digest = hashlib.sha256()
        for layer in self.layers:
            digest.update(layer.weight.tobytes())
            digest.update(layer.bias.tobytes())
        return digest.hexdigest()


def adam_step(
    layer: LinearLayer,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam update to a layer and zero its gradients.

    A parameter block whose gradient is entirely zero is left in place; only its
    moments decay.

    Raises:
        NonFiniteError: If a gradient or an updated parameter is not finite
    """
    for param, grad in layer.parameters():
        if not np.isfinite(grad).all():
            logger.error(f"Non-finite gradient in {layer.name} at step {layer.step + 1}")
            raise NonFiniteError(
                f"gradient of {layer.name}",
                f"max |grad| = {np.nanmax(np.abs(grad))}",
            )

    layer.step += 1
    t = layer.step
    correction1 = 1.0 - beta1**t
    correction2 = 1.0 - beta2**t
    moments = [(layer.m_weight, layer.v_weight), (layer.m_bias, layer.v_bias)]
    for (param, grad), (m, v) in zip(layer.parameters(), moments):
        m *= beta1
        v *= beta2
        if not grad.any():
            continue
        m += (1.0 - beta1) * grad
        v += (1.0 - beta2) * grad * grad
        param -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        _ensure_finite(param, f"parameters of {layer.name}")

    layer.zero_grad()
    layer.cache = None


def gradient_check(
    layers: Sequence[LinearLayer],
    loss: Callable[[bool], float],
    rng: np.random.Generator,
    num_coords: int = 100,
    h: float = 1e-5,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Args:
        layers: Parameterized layers of the composite under test
        loss: Deterministic scalar loss; when called with True it must also
            accumulate analytic gradients into the layers
        rng: Generator choosing the checked coordinates
        num_coords: Number of parameter coordinates to check
        h: Finite-difference step

    Returns:
        max |a - n| / max(|a| + |n|, 1e-8) over the checked coordinates
    """
    for layer in layers:
        layer.zero_grad()
    loss(True)
    params: list[tuple[Tensor, Tensor]] = []
    for layer in layers:
        params.extend((p, g.copy()) for p, g in layer.parameters())
        layer.zero_grad()

    sizes = np.array([p.size for p, _ in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    chosen = rng.choice(total, size=min(num_coords, total), replace=False)

    worst = 0.0
    for flat in np.sort(chosen):
        block = int(np.searchsorted(offsets, flat, side="right") - 1)
        param, grad = params[block]
        idx = np.unravel_index(int(flat - offsets[block]), param.shape)
        original = param[idx]
        param[idx] = original + h
        plus = loss(False)
        param[idx] = original - h
        minus = loss(False)
        param[idx] = original
        numeric = (plus - minus) / (2.0 * h)
        analytic = float(grad[idx])
        error = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8)
        worst = max(worst, error)
    logger.debug(f"Gradient check over {len(chosen)} coordinates: worst error {worst:.3e}")
    return worst
