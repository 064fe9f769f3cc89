"""Layer stacks producing logits: affine / conv3x3 / relu / flatten."""

from __future__ import annotations

import copy

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..rng import stream


class Affine:
    kind = "affine"

    def __init__(self, in_features: int, out_features: int, rng=None):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        bound = 1.0 / np.sqrt(self.in_features)
        if rng is None:
            w = np.zeros((self.in_features, self.out_features))
            b = np.zeros(self.out_features)
        else:
            w = rng.uniform(-bound, bound, size=(self.in_features, self.out_features))
            b = rng.uniform(-bound, bound, size=self.out_features)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(b, requires_grad=True)

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.weight, self.bias)

    def output_shape(self, shape):
        if tuple(shape) != (self.in_features,):
            raise ValueError(f"affine layer expects ({self.in_features},), got {tuple(shape)}")
        return (self.out_features,)

    def config(self):
        return {"type": self.kind, "in": self.in_features, "out": self.out_features}


class Conv2d:
    """3x3, stride 1, zero padding 1 (spatial size preserved)."""

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, rng=None):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        fan_in = self.in_channels * 9
        bound = 1.0 / np.sqrt(fan_in)
        shape = (self.out_channels, self.in_channels, 3, 3)
        if rng is None:
            w, b = np.zeros(shape), np.zeros(self.out_channels)
        else:
            w = rng.uniform(-bound, bound, size=shape)
            b = rng.uniform(-bound, bound, size=self.out_channels)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(b, requires_grad=True)

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, padding=1)

    def output_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.in_channels:
            raise ValueError(f"conv2d expects ({self.in_channels}, h, w), got {tuple(shape)}")
        return (self.out_channels, shape[1], shape[2])

    def config(self):
        return {"type": self.kind, "in": self.in_channels, "out": self.out_channels}


class ReLU:
    kind = "relu"

    def parameters(self):
        return []

    def forward(self, x: Tensor) -> Tensor:
        return ad.relu(x)

    def output_shape(self, shape):
        return tuple(shape)

    def config(self):
        return {"type": self.kind}


class Flatten:
    kind = "flatten"

    def parameters(self):
        return []

    def forward(self, x: Tensor) -> Tensor:
        return x.reshape(x.shape[0], -1)

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def config(self):
        return {"type": self.kind}


def layer_from_config(cfg: dict):
    kind = cfg["type"]
    if kind == "affine":
        return Affine(cfg["in"], cfg["out"])
    if kind == "conv2d":
        return Conv2d(cfg["in"], cfg["out"])
    if kind == "relu":
        return ReLU()
    if kind == "flatten":
        return Flatten()
    raise ValueError(f"unknown layer type {kind!r}")


class Network:
    """A differentiable classifier: ``forward(x)`` returns ``[batch, num_classes]`` logits."""

    def __init__(self, layers, input_shape, seed: int | None = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.seed = seed
        shape = self.input_shape
        if self._flattens_input():
            shape = (int(np.prod(shape)),)
        for layer in self.layers:
            shape = layer.output_shape(shape)
        if len(shape) != 1:
            raise ValueError(f"network must end in a flat logit vector, ends in {shape}")
        self.num_classes = shape[0]

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def _flattens_input(self) -> bool:
        return len(self.input_shape) > 1 and bool(self.layers) and self.layers[0].kind == "affine"

    def _check_input(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ValueError(
                f"input shape {tuple(x.shape[1:])} does not match network input {self.input_shape}"
            )
        return x

    def forward(self, x) -> Tensor:
        h = self._check_input(x)
        if self._flattens_input():
            h = h.reshape(h.shape[0], -1)
        for layer in self.layers:
            h = layer.forward(h)
        return h

    __call__ = forward

    def activations(self, x) -> list[np.ndarray]:
        """Flattened outputs of every ReLU plus the logits, without recording."""
        h = self._check_input(x)
        outs = []
        with ad.no_grad():
            if self._flattens_input():
                h = h.reshape(h.shape[0], -1)
            for layer in self.layers:
                h = layer.forward(h)
                if layer.kind == "relu":
                    outs.append(h.data.reshape(h.shape[0], -1))
        outs.append(h.data)
        return outs

    def logits(self, X) -> np.ndarray:
        with ad.no_grad():
            return self.forward(X).data

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    def get_weights(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def set_weights(self, arrays) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ValueError(f"expected {len(params)} arrays, got {len(arrays)}")
        for p, a in zip(params, arrays):
            a = np.asarray(a, dtype=np.float64)
            if a.shape != p.shape:
                raise ValueError(f"parameter shape {p.shape} does not match {a.shape}")
            p.data = a.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def architecture(self) -> list[dict]:
        return [layer.config() for layer in self.layers]


def build_mlp(input_shape, hidden=(64,), num_classes: int = 2, seed: int = 0) -> Network:
    """Affine/ReLU stack; ``hidden=()`` gives a single affine layer."""
    rng = stream(seed, "models/init")
    d = int(np.prod(input_shape))
    layers = []
    for h in hidden:
        layers += [Affine(d, h, rng), ReLU()]
        d = h
    layers.append(Affine(d, num_classes, rng))
    return Network(layers, input_shape, seed=seed)


def build_cnn(input_shape, channels: int = 4, num_classes: int = 10, hidden: int | None = None, seed: int = 0) -> Network:
    if len(input_shape) != 3:
        raise ValueError(f"CNN needs (channels, height, width) input, got {tuple(input_shape)}")
    rng = stream(seed, "models/init")
    c, h, w = input_shape
    layers = [Conv2d(c, channels, rng), ReLU(), Flatten()]
    d = channels * h * w
    if hidden:
        layers += [Affine(d, hidden, rng), ReLU()]
        d = hidden
    layers.append(Affine(d, num_classes, rng))
    return Network(layers, input_shape, seed=seed)


def network_from_architecture(architecture, input_shape, seed=None) -> Network:
    return Network([layer_from_config(c) for c in architecture], input_shape, seed=seed)
