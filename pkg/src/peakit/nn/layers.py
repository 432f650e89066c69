"""Deterministic numpy layers: conv, pooling, batch norm, fully connected.

Activations use the (N, C, H, W) convention. Every layer implements
``forward``/``backward`` with explicit cached state, exposes its trainable
parameters, and serializes itself through a spec dict plus a flat tensor
list in declaration order.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import (
    ConfigInvalid,
    DegenerateBatch,
    OddSpatialDims,
    ShapeMismatch,
)


class Parameter:
    """A trainable tensor with its gradient accumulator."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, value: np.ndarray, name: str):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self):
        self.grad.fill(0.0)


def he_normal(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator,
              dtype) -> np.ndarray:
    """Fan-in-scaled zero-mean Gaussian init, std = sqrt(2 / fan_in)."""
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Layer:
    """Base layer; stateless layers only override forward/backward."""

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> List[Parameter]:
        return []

    def tensors(self) -> List[np.ndarray]:
        """All persisted tensors (parameters plus running buffers)."""
        return [p.value for p in self.params()]

    def set_tensors(self, arrays: Sequence[np.ndarray]) -> None:
        own = self.tensors()
        if len(arrays) != len(own):
            raise ShapeMismatch(f"expected {len(own)} tensors, got {len(arrays)}")
        for dst, src in zip(own, arrays):
            if dst.shape != src.shape:
                raise ShapeMismatch(f"tensor shape {src.shape} != expected {dst.shape}")
            dst[...] = src

    def spec(self) -> dict:
        raise NotImplementedError


def _conv_out_size(extent: int, kernel: int, stride: int, padding: int) -> int:
    # floor semantics: a trailing partial stride is dropped (required for
    # stride-2 3x3 kernels on even extents)
    span = extent + 2 * padding - kernel
    if span < 0:
        raise ShapeMismatch(
            f"kernel {kernel} with padding {padding} exceeds extent {extent}"
        )
    return span // stride + 1


def _im2col(xp: np.ndarray, groups: int, k: int, stride: int,
            oh: int, ow: int) -> np.ndarray:
    """(N, C, Hp, Wp) padded input -> (N, G, Cg*k*k, oh*ow) patch tensor.

    The layout keeps output positions in the last axis so the copy walks
    contiguous image rows and the group GEMMs run as one stacked matmul.
    """
    n, c = xp.shape[:2]
    cg = c // groups
    if k == 1 and stride == 1 and xp.flags.c_contiguous:
        return xp.reshape(n, groups, cg, oh * ow)  # pure view
    sn, sc, sh, sw = xp.strides
    view = as_strided(
        xp,
        shape=(n, groups, cg, k, k, oh, ow),
        strides=(sn, sc * cg, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )
    return np.ascontiguousarray(view).reshape(n, groups, cg * k * k, oh * ow)


class Conv2d(Layer):
    """Grouped 2-D cross-correlation with deterministic reduction order."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, groups: int = 1,
                 bias: bool = True, dtype=np.float32,
                 rng: Optional[np.random.Generator] = None):
        if in_channels % groups or out_channels % groups:
            raise ConfigInvalid(
                f"groups={groups} must divide in_channels={in_channels} "
                f"and out_channels={out_channels}"
            )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        self.groups = groups
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        cg = in_channels // groups
        fan_in = cg * kernel_size * kernel_size
        self.weight = Parameter(
            he_normal((out_channels, cg, kernel_size, kernel_size), fan_in, rng, self.dtype),
            "weight",
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=self.dtype), "bias") if bias else None
        self._x = None

    def params(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def spec(self):
        return {
            "kind": "conv2d",
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
            "stride": self.stride,
            "padding": self.padding,
            "groups": self.groups,
            "bias": self.bias is not None,
        }

    def _pad(self, x: np.ndarray) -> np.ndarray:
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))

    def forward(self, x, train):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ShapeMismatch(f"got {c} input channels, layer expects {self.in_channels}")
        k, s = self.kernel_size, self.stride
        oh = _conv_out_size(h, k, s, self.padding)
        ow = _conv_out_size(w, k, s, self.padding)
        self._x = x
        g = self.groups
        cg = self.in_channels // g
        cog = self.out_channels // g
        cols = _im2col(self._pad(x), g, k, s, oh, ow)
        wmat = self.weight.value.reshape(g, cog, cg * k * k)
        out = np.matmul(wmat[None], cols)  # (N, G, cog, oh*ow)
        out = out.reshape(n, self.out_channels, oh, ow)
        if self.bias is not None:
            out += self.bias.value[None, :, None, None]
        return out

    def backward(self, grad):
        x = self._x
        n, c, h, w = x.shape
        k, s, p = self.kernel_size, self.stride, self.padding
        oh, ow = grad.shape[2], grad.shape[3]
        g = self.groups
        cg = c // g
        cog = self.out_channels // g
        xp = self._pad(x)
        cols = _im2col(xp, g, k, s, oh, ow)
        gmat = grad.reshape(n, g, cog, oh * ow)
        wmat = self.weight.value.reshape(g, cog, cg * k * k)

        # (N, G, cog, ohw) x (N, G, ohw, cgk2) summed over the batch
        dw = np.matmul(gmat, cols.transpose(0, 1, 3, 2)).sum(axis=0)
        self.weight.grad += dw.reshape(self.weight.value.shape)
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=(0, 2, 3))

        dcols = np.matmul(wmat.transpose(0, 2, 1)[None], gmat)  # (N, G, cgk2, ohw)
        if k == 1 and s == 1 and p == 0:
            dx = dcols.reshape(n, c, h, w)
            self._x = None
            return dx
        dxp = np.zeros(xp.shape, dtype=xp.dtype)
        dview = dcols.reshape(n, g, cg, k, k, oh, ow)
        dxp_g = dxp.reshape(n, g, cg, *xp.shape[2:])
        for i in range(k):
            for j in range(k):
                dxp_g[:, :, :, i:i + s * oh:s, j:j + s * ow:s] += dview[:, :, :, i, j]
        self._x = None
        if p:
            return dxp[:, :, p:-p, p:-p]
        return dxp


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; gradient routes to the first max per window."""

    def __init__(self):
        self._argmax = None
        self._shape = None

    def spec(self):
        return {"kind": "maxpool2x2"}

    def forward(self, x, train):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise OddSpatialDims(f"2x2 pooling needs even spatial dims, got {h}x{w}")
        windows = (
            x.reshape(n, c, h // 2, 2, w // 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h // 2, w // 2, 4)
        )
        self._argmax = windows.argmax(axis=-1)  # first max wins ties
        self._shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self._shape
        scatter = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(scatter, self._argmax[..., None], grad[..., None], axis=-1)
        out = (
            scatter.reshape(n, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        self._argmax = None
        return out


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def spec(self):
        return {"kind": "relu"}

    def forward(self, x, train):
        self._mask = x > 0
        return np.where(self._mask, x, x.dtype.type(0))

    def backward(self, grad):
        out = grad * self._mask
        self._mask = None
        return out


class BatchNorm2d(Layer):
    """Per-channel batch normalization with running statistics.

    Train mode normalizes with batch moments (eps 1e-5) and updates the
    running averages with decay 0.9; eval mode applies the fixed affine map
    from the running statistics.
    """

    def __init__(self, channels: int, eps: float = 1e-5, decay: float = 0.9,
                 dtype=np.float32):
        self.channels = channels
        self.eps = eps
        self.decay = decay
        self.dtype = np.dtype(dtype)
        self.gamma = Parameter(np.ones(channels, dtype=self.dtype), "gamma")
        self.beta = Parameter(np.zeros(channels, dtype=self.dtype), "beta")
        self.running_mean = np.zeros(channels, dtype=self.dtype)
        self.running_var = np.ones(channels, dtype=self.dtype)
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def tensors(self):
        return [self.gamma.value, self.beta.value, self.running_mean, self.running_var]

    def spec(self):
        return {"kind": "batchnorm", "channels": self.channels,
                "eps": self.eps, "decay": self.decay}

    def forward(self, x, train):
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"got {x.shape[1]} channels, expected {self.channels}")
        n, c, h, w = x.shape
        if train:
            m = n * h * w
            if m < 2:
                raise DegenerateBatch(f"batch statistics need >= 2 values, got {m}")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            self.running_mean[...] = self.decay * self.running_mean + (1 - self.decay) * mean
            self.running_var[...] = self.decay * self.running_var + (1 - self.decay) * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        # fused affine: out = x * (gamma*inv_std) + (beta - mean*gamma*inv_std)
        scale = self.gamma.value * inv_std
        shift = self.beta.value - mean * scale
        self._cache = (x, mean, inv_std, train)
        return x * scale[None, :, None, None] + shift[None, :, None, None]

    def backward(self, grad):
        x, mean, inv_std, train = self._cache
        self._cache = None
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        dbeta = grad.sum(axis=(0, 2, 3))
        dgamma = (grad * xhat).sum(axis=(0, 2, 3))
        self.beta.grad += dbeta
        self.gamma.grad += dgamma
        gscale = (self.gamma.value * inv_std)[None, :, None, None]
        if not train:
            return grad * gscale
        n, c, h, w = grad.shape
        m = n * h * w
        return (gscale / m) * (
            m * grad
            - dbeta[None, :, None, None]
            - xhat * dgamma[None, :, None, None]
        )


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def spec(self):
        return {"kind": "flatten"}

    def forward(self, x, train):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class FullyConnected(Layer):
    def __init__(self, in_features: int, out_features: int, dtype=np.float32,
                 rng: Optional[np.random.Generator] = None):
        self.in_features = in_features
        self.out_features = out_features
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Parameter(
            he_normal((in_features, out_features), in_features, rng, self.dtype), "weight"
        )
        self.bias = Parameter(np.zeros(out_features, dtype=self.dtype), "bias")
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def spec(self):
        return {"kind": "fc", "in_features": self.in_features,
                "out_features": self.out_features}

    def forward(self, x, train):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeMismatch(
                f"fully connected expects (N, {self.in_features}), got {x.shape}"
            )
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        out = grad @ self.weight.value.T
        self._x = None
        return out


class GlobalAvgPool(Layer):
    def __init__(self):
        self._shape = None

    def spec(self):
        return {"kind": "gap"}

    def forward(self, x, train):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        n, c, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None], self._shape) / (h * w)


class Softmax(Layer):
    """Row softmax as a standalone layer (training fuses it into the loss)."""

    def __init__(self):
        self._p = None

    def spec(self):
        return {"kind": "softmax"}

    def forward(self, x, train):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self._p = e / e.sum(axis=1, keepdims=True)
        return self._p

    def backward(self, grad):
        p = self._p
        self._p = None
        return p * (grad - (grad * p).sum(axis=1, keepdims=True))


class Residual(Layer):
    """Residual composite: out = ReLU(branch(x) + shortcut(x)).

    An empty shortcut list is the identity connection.
    """

    def __init__(self, branch: List[Layer], shortcut: Optional[List[Layer]] = None):
        self.branch = branch
        self.shortcut = shortcut or []
        self._mask = None

    def params(self):
        out = []
        for layer in self.branch + self.shortcut:
            out.extend(layer.params())
        return out

    def tensors(self):
        out = []
        for layer in self.branch + self.shortcut:
            out.extend(layer.tensors())
        return out

    def set_tensors(self, arrays):
        i = 0
        for layer in self.branch + self.shortcut:
            n = len(layer.tensors())
            layer.set_tensors(arrays[i:i + n])
            i += n
        if i != len(arrays):
            raise ShapeMismatch(f"expected {i} tensors, got {len(arrays)}")

    def spec(self):
        return {
            "kind": "residual",
            "branch": [l.spec() for l in self.branch],
            "shortcut": [l.spec() for l in self.shortcut],
        }

    def forward(self, x, train):
        b = x
        for layer in self.branch:
            b = layer.forward(b, train)
        s = x
        for layer in self.shortcut:
            s = layer.forward(s, train)
        if b.shape != s.shape:
            raise ShapeMismatch(
                f"residual branch {b.shape} does not match shortcut {s.shape}"
            )
        pre = b + s
        self._mask = pre > 0
        return np.where(self._mask, pre, pre.dtype.type(0))

    def backward(self, grad):
        g = grad * self._mask
        self._mask = None
        gb = g
        for layer in reversed(self.branch):
            gb = layer.backward(gb)
        gs = g
        for layer in reversed(self.shortcut):
            gs = layer.backward(gs)
        return gb + gs
