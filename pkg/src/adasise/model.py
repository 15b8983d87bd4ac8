"""A small inspectable CNN engine.

Provides forward confidence scores, capture of every pooling-layer
activation stack, and exact reverse-mode gradients of a chosen class
logit with respect to those captured maps.

Layer set: 3x3 stride-1 zero-padded convolution, ReLU, 2x2 max/average
pooling, global average pooling, dense (flattens its input row-major),
softmax head. A model is immutable after construction and every call
allocates its own scratch, so one model instance may serve several
threads at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import InvalidClassError, ModelFormatError, ShapeMismatchError

POOLING_KINDS = ("maxpool", "avgpool")


def _require_even(shape, kind, index):
    h, w = shape[0], shape[1]
    if h % 2 or w % 2:
        raise ModelFormatError(
            "layer %d (%s): spatial size %dx%d is not divisible by 2" % (index, kind, h, w)
        )


class Conv3x3:
    kind = "conv"

    def __init__(self, name, weight, bias=None):
        weight = np.ascontiguousarray(weight)
        if weight.ndim != 4 or weight.shape[:2] != (3, 3):
            raise ModelFormatError(
                "conv '%s': weight must be 3x3xCinxCout, got %s" % (name, weight.shape)
            )
        self.name = name
        self.weight = weight
        self.has_bias = bias is not None
        if bias is None:
            bias = np.zeros(weight.shape[3], dtype=weight.dtype)
        bias = np.ascontiguousarray(bias)
        if bias.shape != (weight.shape[3],):
            raise ModelFormatError(
                "conv '%s': bias shape %s does not match %d output channels"
                % (name, bias.shape, weight.shape[3])
            )
        self.bias = bias

    def out_shape(self, s, index):
        if len(s) != 3:
            raise ModelFormatError("layer %d (conv '%s'): needs an HxWxC input" % (index, self.name))
        if s[2] != self.weight.shape[2]:
            raise ModelFormatError(
                "layer %d (conv '%s'): expects %d input channels, got %d"
                % (index, self.name, self.weight.shape[2], s[2])
            )
        return (s[0], s[1], self.weight.shape[3])

    def forward(self, x):
        return backend.conv2d_forward(x, self.weight, self.bias), None

    def input_grad(self, dy, ctx):
        return backend.conv2d_input_grad(dy, self.weight)


class ReLU:
    kind = "relu"

    def out_shape(self, s, index):
        return s

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, x.dtype.type(0)), mask

    def input_grad(self, dy, ctx):
        return np.where(ctx, dy, dy.dtype.type(0))


class MaxPool2:
    kind = "maxpool"

    def out_shape(self, s, index):
        if len(s) != 3:
            raise ModelFormatError("layer %d (maxpool): needs an HxWxC input" % index)
        _require_even(s, "maxpool", index)
        return (s[0] // 2, s[1] // 2, s[2])

    def forward(self, x):
        y, arg = backend.maxpool2_forward(x)
        return y, arg

    def input_grad(self, dy, ctx):
        return backend.maxpool2_backward(dy, ctx)


class AvgPool2:
    kind = "avgpool"

    def out_shape(self, s, index):
        if len(s) != 3:
            raise ModelFormatError("layer %d (avgpool): needs an HxWxC input" % index)
        _require_even(s, "avgpool", index)
        return (s[0] // 2, s[1] // 2, s[2])

    def forward(self, x):
        return backend.avgpool2_forward(x), None

    def input_grad(self, dy, ctx):
        return backend.avgpool2_backward(dy)


class GlobalAvgPool:
    kind = "gap"

    def out_shape(self, s, index):
        if len(s) != 3:
            raise ModelFormatError("layer %d (gap): needs an HxWxC input" % index)
        return (s[2],)

    def forward(self, x):
        h, w, _ = x.shape
        return x.mean(axis=(0, 1)), (h, w)

    def input_grad(self, dy, ctx):
        h, w = ctx
        scale = dy.dtype.type(1.0 / (h * w))
        dx = np.empty((h, w, dy.shape[0]), dtype=dy.dtype)
        dx[:] = dy * scale
        return dx


class Dense:
    kind = "dense"

    def __init__(self, name, weight, bias=None):
        weight = np.ascontiguousarray(weight)
        if weight.ndim != 2:
            raise ModelFormatError("dense '%s': weight must be 2-D, got %s" % (name, weight.shape))
        self.name = name
        self.weight = weight
        self.has_bias = bias is not None
        if bias is None:
            bias = np.zeros(weight.shape[1], dtype=weight.dtype)
        bias = np.ascontiguousarray(bias)
        if bias.shape != (weight.shape[1],):
            raise ModelFormatError(
                "dense '%s': bias shape %s does not match %d outputs"
                % (name, bias.shape, weight.shape[1])
            )
        self.bias = bias

    def out_shape(self, s, index):
        din = int(np.prod(s))
        if din != self.weight.shape[0]:
            raise ModelFormatError(
                "layer %d (dense '%s'): expects %d inputs, got %s (=%d)"
                % (index, self.name, self.weight.shape[0], s, din)
            )
        return (self.weight.shape[1],)

    def forward(self, x):
        shape = x.shape
        return x.reshape(-1) @ self.weight + self.bias, shape

    def input_grad(self, dy, ctx):
        return (self.weight @ dy).reshape(ctx)


class Softmax:
    kind = "softmax"

    def out_shape(self, s, index):
        if len(s) != 1:
            raise ModelFormatError("layer %d (softmax): needs a 1-D input" % index)
        return s

    def forward(self, x):
        z = x - x.max()
        e = np.exp(z)
        return e / e.sum(), None

    def input_grad(self, dy, ctx):
        raise NotImplementedError("gradients are taken at the logits, before softmax")


@dataclass
class CaptureResult:
    """Forward pass outputs plus every pooling layer's activation stack.

    feature_maps[p-1] holds layer p's maps as an (M, h, w) array.
    """

    logits: np.ndarray
    probs: np.ndarray
    feature_maps: list


class InspectableModel:
    def __init__(self, layers, input_shape, num_classes):
        layers = tuple(layers)
        if not layers:
            raise ModelFormatError("model has no layers")
        input_shape = tuple(int(v) for v in input_shape)
        if len(input_shape) != 3 or input_shape[2] != 3:
            raise ModelFormatError("input shape must be HxWx3, got %s" % (input_shape,))
        dtypes = {l.weight.dtype.type for l in layers if hasattr(l, "weight")}
        if len(dtypes) > 1:
            raise ModelFormatError("mixed weight dtypes: %s" % dtypes)
        self.dtype = dtypes.pop() if dtypes else np.float32

        shape = input_shape
        feature_shapes = []
        for i, layer in enumerate(layers):
            if layer.kind == "softmax" and i != len(layers) - 1:
                raise ModelFormatError("softmax must be the final layer")
            shape = layer.out_shape(shape, i)
            if layer.kind in POOLING_KINDS:
                feature_shapes.append(shape)
        if layers[-1].kind != "softmax":
            raise ModelFormatError("model must end with a softmax layer")
        if shape != (num_classes,):
            raise ModelFormatError(
                "head produces %s but the model declares %d classes" % (shape, num_classes)
            )

        self.layers = layers
        self.input_shape = input_shape
        self.num_classes = int(num_classes)
        self.pooling_indices = tuple(
            i for i, l in enumerate(layers) if l.kind in POOLING_KINDS
        )
        if not self.pooling_indices:
            raise ModelFormatError("model needs at least one pooling layer")
        # (h, w, M) per pooling layer, shallow to deep
        self.feature_shapes = tuple(feature_shapes)

    @property
    def num_pooling(self):
        return len(self.pooling_indices)

    def astype(self, dtype):
        """Copy of the model with weights cast to `dtype` (f64 verification mode)."""
        dtype = np.dtype(dtype).type
        layers = []
        for l in self.layers:
            if l.kind == "conv":
                layers.append(
                    Conv3x3(l.name, l.weight.astype(dtype), l.bias.astype(dtype) if l.has_bias else None)
                )
            elif l.kind == "dense":
                layers.append(
                    Dense(l.name, l.weight.astype(dtype), l.bias.astype(dtype) if l.has_bias else None)
                )
            else:
                layers.append(type(l)())
        return InspectableModel(layers, self.input_shape, self.num_classes)

    def _check_image(self, image):
        a = np.ascontiguousarray(np.asarray(image, dtype=self.dtype))
        if a.shape != self.input_shape:
            raise ShapeMismatchError(
                "image shape %s does not match model input %s" % (a.shape, self.input_shape)
            )
        return a

    def _check_class(self, class_index):
        c = int(class_index)
        if not 0 <= c < self.num_classes:
            raise InvalidClassError(
                "class index %d outside [0, %d)" % (c, self.num_classes)
            )
        return c

    def _walk(self, image, want_ctx=False, want_capture=False):
        x = self._check_image(image)
        ctxs = [] if want_ctx else None
        captures = [] if want_capture else None
        pooling = set(self.pooling_indices)
        logits = None
        for i, layer in enumerate(self.layers):
            if layer.kind == "softmax":
                logits = x
            x, ctx = layer.forward(x)
            if want_ctx:
                ctxs.append(ctx)
            if want_capture and i in pooling:
                captures.append(np.ascontiguousarray(x.transpose(2, 0, 1)))
        return x, logits, ctxs, captures

    def forward_capture(self, image) -> CaptureResult:
        probs, logits, _, captures = self._walk(image, want_capture=True)
        return CaptureResult(logits=logits, probs=probs, feature_maps=captures)

    def forward_score(self, image, class_index) -> float:
        """Softmax probability of one class; no capture, the scoring fast path."""
        c = self._check_class(class_index)
        probs, _, _, _ = self._walk(image)
        return float(probs[c])

    def _backward_to_pools(self, logits, ctxs, class_index):
        grads = [None] * self.num_pooling
        g = np.zeros(self.num_classes, dtype=self.dtype)
        g[class_index] = 1  # d logit_c / d logits
        first_pool = self.pooling_indices[0]
        pool_pos = {idx: k for k, idx in enumerate(self.pooling_indices)}
        for i in range(len(self.layers) - 2, -1, -1):
            layer = self.layers[i]
            pos = pool_pos.get(i)
            if pos is not None:
                grads[pos] = np.ascontiguousarray(g.transpose(2, 0, 1))
                if i == first_pool:
                    break
            g = layer.input_grad(g, ctxs[i])
        return grads

    def feature_gradients(self, image, class_index):
        """Exact gradient of the class logit w.r.t. every captured map.

        Returns one (M, h, w) array per pooling layer, shallow to deep.
        """
        c = self._check_class(class_index)
        _, logits, ctxs, _ = self._walk(image, want_ctx=True)
        return self._backward_to_pools(logits, ctxs, c)

    def capture_and_gradients(self, image, class_index):
        """One forward pass serving both capture and gradient extraction."""
        c = self._check_class(class_index)
        probs, logits, ctxs, captures = self._walk(image, want_ctx=True, want_capture=True)
        grads = self._backward_to_pools(logits, ctxs, c)
        return CaptureResult(logits=logits, probs=probs, feature_maps=captures), grads


def forward_capture(model, image):
    return model.forward_capture(image)


def forward_score(model, image, class_index):
    return model.forward_score(image, class_index)


def feature_gradients(model, image, class_index):
    return model.feature_gradients(image, class_index)
