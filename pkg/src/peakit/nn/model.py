"""Sequential model container and the versioned checkpoint format.

Checkpoint layout, little-endian: magic ``PEAW``, version u16, spec-JSON
length u32, spec JSON (layer specs with tensor shapes), then every tensor
as raw 32-bit floats in declaration order.
"""

import json
import struct
from typing import List, Sequence

import numpy as np

from ..errors import CorruptRecord, ShapeMismatch
from . import layers as L

MAGIC = b"PEAW"
VERSION = 1

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Debug mode: assert every layer's forward/backward output is finite."""
    global _debug_checks
    _debug_checks = enabled


def _check_finite(array: np.ndarray, layer: L.Layer, direction: str) -> None:
    if not np.isfinite(array).all():
        raise FloatingPointError(
            f"non-finite values after {direction} of {layer.spec()['kind']}"
        )


class Sequential:
    def __init__(self, layer_list: Sequence[L.Layer], dtype=np.float32):
        self.layers = list(layer_list)
        self.dtype = np.dtype(dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        for layer in self.layers:
            x = layer.forward(x, train)
            if _debug_checks:
                _check_finite(x, layer, "forward")
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if _debug_checks:
                _check_finite(grad, layer, "backward")
        return grad

    def params(self) -> List[L.Parameter]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()

    def tensors(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.tensors())
        return out

    def set_tensors(self, arrays: Sequence[np.ndarray]):
        i = 0
        for layer in self.layers:
            n = len(layer.tensors())
            layer.set_tensors(arrays[i:i + n])
            i += n
        if i != len(arrays):
            raise ShapeMismatch(f"model holds {i} tensors, got {len(arrays)}")

    def snapshot(self) -> List[np.ndarray]:
        return [t.copy() for t in self.tensors()]

    def spec(self) -> list:
        return [layer.spec() for layer in self.layers]

    def n_parameters(self) -> int:
        return sum(p.value.size for p in self.params())


def layer_from_spec(spec: dict, dtype) -> L.Layer:
    kind = spec["kind"]
    if kind == "conv2d":
        return L.Conv2d(
            spec["in_channels"], spec["out_channels"], spec["kernel_size"],
            stride=spec["stride"], padding=spec["padding"], groups=spec["groups"],
            bias=spec["bias"], dtype=dtype,
        )
    if kind == "maxpool2x2":
        return L.MaxPool2x2()
    if kind == "relu":
        return L.ReLU()
    if kind == "batchnorm":
        return L.BatchNorm2d(spec["channels"], eps=spec["eps"], decay=spec["decay"],
                             dtype=dtype)
    if kind == "fc":
        return L.FullyConnected(spec["in_features"], spec["out_features"], dtype=dtype)
    if kind == "flatten":
        return L.Flatten()
    if kind == "gap":
        return L.GlobalAvgPool()
    if kind == "softmax":
        return L.Softmax()
    if kind == "residual":
        return L.Residual(
            [layer_from_spec(s, dtype) for s in spec["branch"]],
            [layer_from_spec(s, dtype) for s in spec["shortcut"]],
        )
    raise CorruptRecord(f"unknown layer kind {kind!r}")


def model_from_spec(spec_list: Sequence[dict], dtype=np.float32) -> Sequential:
    return Sequential([layer_from_spec(s, dtype) for s in spec_list], dtype=dtype)


def save_model_bytes(model: Sequential) -> bytes:
    tensors = model.tensors()
    header = {
        "layers": model.spec(),
        "tensor_shapes": [list(t.shape) for t in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(blob)), blob]
    for t in tensors:
        parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(parts)


def load_model_bytes(data: bytes, dtype=np.float32) -> Sequential:
    if data[:4] != MAGIC:
        raise CorruptRecord(f"bad checkpoint magic {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise CorruptRecord(f"unsupported checkpoint version {version}")
    (blob_len,) = struct.unpack_from("<I", data, 6)
    header = json.loads(data[10:10 + blob_len].decode("utf-8"))
    model = model_from_spec(header["layers"], dtype=dtype)
    offset = 10 + blob_len
    arrays = []
    for shape in header["tensor_shapes"]:
        count = int(np.prod(shape)) if shape else 1
        raw = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        if raw.size != count:
            raise CorruptRecord("checkpoint truncated in tensor data")
        arrays.append(raw.reshape(shape).astype(dtype))
        offset += count * 4
    model.set_tensors(arrays)
    return model


def save_model(model: Sequential, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model_bytes(model))


def load_model(path, dtype=np.float32) -> Sequential:
    with open(path, "rb") as fh:
        return load_model_bytes(fh.read(), dtype=dtype)
