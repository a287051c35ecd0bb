"""Small convolutional classifier with hand-written reverse-mode gradients.

Architecture: conv16-relu-pool, conv32-relu-pool, dense128-relu, dense-C.
Inputs are ``(N, H, W, C)`` batches (a single ``(H, W, C)`` image is also
accepted); all arithmetic is float64.
"""

import io
import logging
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadCheckpoint, BadLabel, EmptyDataset, ShapeMismatch, TapeConsumed

log = logging.getLogger(__name__)


def philox(seed, stream=0):
    """Counter-based generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(key=(int(stream) << 64) | int(seed)))


class Conv3x3:
    """3x3 convolution, stride 1, zero 'same' padding."""

    def __init__(self, name, c_in, c_out):
        self.name, self.c_in, self.c_out = name, c_in, c_out

    def param_shapes(self):
        return {f"{self.name}.w": (9 * self.c_in, self.c_out), f"{self.name}.b": (self.c_out,)}

    def fan_in(self):
        return 9 * self.c_in

    def output_shape(self, shape):
        h, w, _ = shape
        return (h, w, self.c_out)

    def forward(self, params, x):
        n, h, w, _ = x.shape
        cols = kernels.im2col3x3(np.ascontiguousarray(x))
        out = cols @ params[f"{self.name}.w"] + params[f"{self.name}.b"]
        return out.reshape(n, h, w, self.c_out), (cols, x.shape)

    def backward(self, params, dout, cache):
        cols, (n, h, w, c) = cache
        dflat = dout.reshape(-1, self.c_out)
        grads = {f"{self.name}.w": cols.T @ dflat, f"{self.name}.b": dflat.sum(axis=0)}
        dcols = dflat @ params[f"{self.name}.w"].T
        return kernels.col2im3x3(dcols, n, h, w, c), grads


class ReLU:
    name = "relu"

    def param_shapes(self):
        return {}

    def output_shape(self, shape):
        return shape

    def forward(self, params, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, params, dout, mask):
        return dout * mask, {}


class MaxPool2:
    name = "pool"

    def param_shapes(self):
        return {}

    def output_shape(self, shape):
        h, w, c = shape
        return (h // 2, w // 2, c)

    def forward(self, params, x):
        out, arg = kernels.maxpool2_forward(np.ascontiguousarray(x))
        return out, (arg, x.shape[1], x.shape[2])

    def backward(self, params, dout, cache):
        arg, h, w = cache
        return kernels.maxpool2_backward(np.ascontiguousarray(dout), arg, h, w), {}


class Dense:
    def __init__(self, name, d_in, d_out):
        self.name, self.d_in, self.d_out = name, d_in, d_out

    def param_shapes(self):
        return {f"{self.name}.w": (self.d_in, self.d_out), f"{self.name}.b": (self.d_out,)}

    def fan_in(self):
        return self.d_in

    def output_shape(self, shape):
        return (self.d_out,)

    def forward(self, params, x):
        flat = x.reshape(x.shape[0], -1)
        return flat @ params[f"{self.name}.w"] + params[f"{self.name}.b"], (flat, x.shape)

    def backward(self, params, dout, cache):
        flat, shape = cache
        grads = {f"{self.name}.w": flat.T @ dout, f"{self.name}.b": dout.sum(axis=0)}
        return (dout @ params[f"{self.name}.w"].T).reshape(shape), grads


class GradientTape:
    """Activations cached by one forward pass; consumed by one backward pass."""

    def __init__(self):
        self.entries = []
        self.consumed = False

    def record(self, layer, cache):
        self.entries.append((layer, cache))

    def take(self):
        if self.consumed:
            raise TapeConsumed("backward pass already ran on this tape")
        self.consumed = True
        entries, self.entries = self.entries, []
        return entries


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


class Classifier:
    def __init__(self, input_shape, num_classes=10, params=None):
        h, w, c = (int(v) for v in input_shape)
        self.input_shape = (h, w, c)
        self.num_classes = int(num_classes)
        flat = (h // 4) * (w // 4) * 32
        self.layers = [
            Conv3x3("conv1", c, 16),
            ReLU(),
            MaxPool2(),
            Conv3x3("conv2", 16, 32),
            ReLU(),
            MaxPool2(),
            Dense("fc1", flat, 128),
            ReLU(),
            Dense("fc2", 128, self.num_classes),
        ]
        self.params = params if params is not None else self.zero_params()

    @property
    def architecture(self):
        h, w, c = self.input_shape
        return f"conv16-relu-pool,conv32-relu-pool,dense128-relu,dense{self.num_classes};input={h}x{w}x{c}"

    def param_shapes(self):
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        return shapes

    def zero_params(self):
        return {name: np.zeros(shape) for name, shape in self.param_shapes().items()}

    @classmethod
    def initialized(cls, input_shape, num_classes=10, seed=0):
        """Kaiming-uniform weights, zero biases."""
        model = cls(input_shape, num_classes)
        stream = 0
        for layer in model.layers:
            for name, shape in layer.param_shapes().items():
                if name.endswith(".w"):
                    bound = np.sqrt(6.0 / layer.fan_in())
                    model.params[name] = philox(seed, stream).uniform(-bound, bound, size=shape)
                stream += 1
        return model

    def copy(self):
        return Classifier(self.input_shape, self.num_classes, {k: v.copy() for k, v in self.params.items()})

    def _batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"model expects {self.input_shape} inputs, got {x.shape}")
        return x, single

    def forward(self, x, tape=None):
        """Logits ``Z(x)``; ``(N, C)`` for a batch or ``(C,)`` for one image."""
        out, single = self._batch(x)
        for layer in self.layers:
            out, cache = layer.forward(self.params, out)
            if tape is not None:
                tape.record(layer, cache)
        return out[0] if single else out

    logits = forward

    def backward(self, tape, dlogits):
        """Propagate ``dlogits`` through a recorded pass.

        Returns ``(input_gradient, param_gradients)``.
        """
        dout = np.asarray(dlogits, dtype=np.float64)
        single = dout.ndim == 1
        if single:
            dout = dout[None]
        grads = {}
        for layer, cache in reversed(tape.take()):
            dout, g = layer.backward(self.params, dout, cache)
            grads.update(g)
        return (dout[0] if single else dout), grads

    def predict(self, x):
        # np.argmax breaks ties toward the lowest index
        return np.argmax(self.forward(x), axis=-1)

    def _labels(self, y, n):
        y = np.asarray(y)
        if y.ndim == 0:
            y = np.full(n, int(y))
        if y.shape != (n,) or not np.issubdtype(y.dtype, np.integer):
            raise BadLabel(f"expected {n} integer labels")
        if np.any((y < 0) | (y >= self.num_classes)):
            raise BadLabel(f"labels must lie in [0, {self.num_classes})")
        return y.astype(np.int64)

    def loss(self, x, y):
        """Cross-entropy ``-log softmax(Z(x))_y``, one value per example."""
        xb, single = self._batch(x)
        yb = self._labels(y, xb.shape[0])
        losses = -log_softmax(self.forward(xb))[np.arange(xb.shape[0]), yb]
        return float(losses[0]) if single else losses

    def loss_and_input_gradient(self, x, y):
        xb, single = self._batch(x)
        yb = self._labels(y, xb.shape[0])
        tape = GradientTape()
        logits = self.forward(xb, tape)
        logp = log_softmax(logits)
        rows = np.arange(xb.shape[0])
        dlogits = np.exp(logp)
        dlogits[rows, yb] -= 1.0
        dx, _ = self.backward(tape, dlogits)
        losses = -logp[rows, yb]
        if single:
            return float(losses[0]), dx[0]
        return losses, dx

    def input_gradient(self, x, y):
        """Gradient of each example's own loss with respect to its pixels."""
        return self.loss_and_input_gradient(x, y)[1]


@dataclass
class TrainConfig:
    epochs: int = 10
    batch: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0


def accuracy(model, images, labels):
    return float(np.mean(model.predict(images) == np.asarray(labels)))


def train(model, images, labels, config=TrainConfig(), test=None):
    """Minibatch SGD with momentum; deterministic given ``config.seed``.

    Returns the trained model (a new object) and a dict with the final
    train and, if ``test=(images, labels)`` is given, test accuracy.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if images.shape[0] == 0 or labels.shape[0] != images.shape[0]:
        raise EmptyDataset("training needs at least one labelled image")
    model = model.copy()
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    shuffler = philox(config.seed, stream=1 << 20)
    n = images.shape[0]
    for epoch in range(config.epochs):
        order = shuffler.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            tape = GradientTape()
            logits = model.forward(images[idx], tape)
            logp = log_softmax(logits)
            rows = np.arange(idx.size)
            total += float(-logp[rows, labels[idx]].sum())
            dlogits = np.exp(logp)
            dlogits[rows, labels[idx]] -= 1.0
            _, grads = model.backward(tape, dlogits / idx.size)
            for name, g in grads.items():
                velocity[name] = config.momentum * velocity[name] - config.lr * g
                model.params[name] = model.params[name] + velocity[name]
        log.info("epoch %d/%d mean loss %.4f", epoch + 1, config.epochs, total / n)
    report = {"train_accuracy": accuracy(model, images, labels)}
    if test is not None:
        report["test_accuracy"] = accuracy(model, *test)
    return model, report


# Checkpoint layout (little endian), documented in docs/checkpoint_format.md
CHECKPOINT_MAGIC = b"BGCK"
CHECKPOINT_VERSION = 1
_DTYPE_TAGS = {np.dtype("<f8"): 1, np.dtype("<f4"): 2}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def _pack_str(text):
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dumps_checkpoint(model):
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    buf.write(_pack_str(model.architecture))
    names = sorted(model.params)
    buf.write(struct.pack("<I", len(names)))
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        buf.write(_pack_str(name))
        buf.write(struct.pack("<BI", _DTYPE_TAGS[arr.dtype], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data):
        self.data, self.pos = data, 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise BadCheckpoint("checkpoint is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise BadCheckpoint("invalid string in checkpoint") from exc


def _parse_architecture(text):
    try:
        layers, shape = text.split(";input=")
        h, w, c = (int(v) for v in shape.split("x"))
        num_classes = int(layers.rsplit("dense", 1)[1])
    except ValueError as exc:
        raise BadCheckpoint(f"unrecognised architecture descriptor {text!r}") from exc
    return (h, w, c), num_classes


def loads_checkpoint(data):
    reader = _Reader(bytes(data))
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise BadCheckpoint("not a basisguard checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise BadCheckpoint(f"unsupported checkpoint version {version}")
    input_shape, num_classes = _parse_architecture(reader.string())
    model = Classifier(input_shape, num_classes)
    expected = model.param_shapes()
    (count,) = reader.unpack("<I")
    params = {}
    for _ in range(count):
        name = reader.string()
        tag, ndim = reader.unpack("<BI")
        if tag not in _TAG_DTYPES:
            raise BadCheckpoint(f"unknown dtype tag {tag}")
        shape = reader.unpack(f"<{ndim}I")
        dtype = _TAG_DTYPES[tag]
        size = int(np.prod(shape)) * dtype.itemsize
        params[name] = np.frombuffer(reader.take(size), dtype=dtype).reshape(shape).astype(np.float64)
    if reader.pos != len(reader.data):
        raise BadCheckpoint("trailing bytes after last tensor")
    if set(params) != set(expected) or any(params[k].shape != tuple(s) for k, s in expected.items()):
        raise BadCheckpoint("tensor set does not match the architecture")
    model.params = params
    return model


def save_checkpoint(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps_checkpoint(model))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads_checkpoint(fh.read())
