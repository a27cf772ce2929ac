"""Layers used by the auto-encoder: FIR convolutions, dense maps, batch
normalization and the pointwise activations, plus thin ``Module`` wrappers
holding their parameters."""

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, add_macs, as_tensor, make

SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805

LAYER_KINDS = ("conv1d", "conv2d-first", "linear", "batchnorm", "selu", "hswish", "sigmoid",
               "softmax", "tanh", "identity", "normalize-power", "skip-add")


@dataclass
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel_len: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kernel_len % 2 == 0:
            raise ValueError("kernel_len must be odd")

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# functional ops
# --------------------------------------------------------------------------

def _im2col(xp, S):
    """(B, C, Lp) -> (B, C*S, Lp - S + 1) patch matrix, row index c*S + s."""
    B, C, Lp = xp.shape
    win = sliding_window_view(xp, S, axis=2)          # (B, C, Lo, S)
    return np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B, C * S, Lp - S + 1)


def conv1d(x, w, b=None, padding=0):
    """Cross-correlation of x (B, C_in, L) with w (C_out, C_in, S).

    ``padding`` zeros are added on both ends; output length is
    L + 2*padding - S + 1.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ValueError(f"conv1d shape mismatch: x{x.shape} w{w.shape}")
    B, C_in, L = x.shape
    C_out, _, S = w.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    Lo = xp.shape[-1] - S + 1
    if Lo < 1:
        raise ValueError("kernel longer than padded input")
    cols = _im2col(xp, S)
    wmat = w.data.reshape(C_out, C_in * S)
    out = np.matmul(wmat, cols)
    add_macs(B * Lo * C_out * C_in * S)
    parents = (x, w)
    if b is not None:
        b = as_tensor(b)
        out += b.data[None, :, None]
        parents = (x, w, b)

    def back(g):
        gw = np.matmul(g, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        gx = None
        if x.requires_grad:
            # input gradient = valid correlation of the padded output gradient
            # with the channel-swapped, time-flipped kernel
            edge = S - 1 - padding
            if edge >= 0:
                gp = np.pad(g, ((0, 0), (0, 0), (edge, edge)))
            else:
                gp = g[:, :, -edge:g.shape[2] + edge]
            wf = w.data[:, :, ::-1].transpose(1, 0, 2).reshape(C_in, C_out * S)
            gx = np.matmul(wf, _im2col(gp, S))
        grads = (gx, gw)
        if b is not None:
            grads += (g.sum(axis=(0, 2)),)
        return grads

    return make(out, parents, back)


def conv2d_first(y, w, b=None, padding=0):
    """2D FIR over a two-row (Re/Im) image whose row axis is consumed.

    y has shape (B, 2, L) and w (C_out, 2, S); each output sequence is the
    sum of the two row correlations, which is a conv1d with two input rows.
    """
    y, w = as_tensor(y), as_tensor(w)
    if y.shape[1] != 2 or w.shape[1] != 2:
        raise ValueError("conv2d_first expects a 2-row input and kernel")
    return conv1d(y, w, b, padding)


def linear(x, w, b=None):
    """x (B, n_in) @ w (n_in, n_out) + b."""
    x, w = as_tensor(x), as_tensor(w)
    add_macs(x.shape[0] * w.shape[0] * w.shape[1])
    out = x.data @ w.data
    parents = (x, w)
    if b is not None:
        b = as_tensor(b)
        out = out + b.data
        parents = (x, w, b)

    def back(g):
        grads = (g @ w.data.T, x.data.T @ g)
        if b is not None:
            grads += (g.sum(axis=0),)
        return grads

    return make(out, parents, back)


def batchnorm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Per-channel normalization of (B, C) or (B, C, L) inputs.

    Training mode normalizes with the batch statistics (population variance)
    and updates the running buffers in place; evaluation mode uses the
    running buffers.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = (0,) if x.ndim == 2 else (0, 2)
    shape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    n = int(np.prod([x.shape[a] for a in axes]))
    if training:
        if x.shape[0] < 2 and x.ndim == 2:
            raise ValueError("batchnorm training needs batch size >= 2")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        running_var *= 1 - momentum
        running_var += momentum * var * n / max(n - 1, 1)
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(shape)) * inv.reshape(shape)
    out = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)

    def back(g):
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        dxhat = g * gamma.data.reshape(shape)
        if training:
            gx = (inv.reshape(shape) / n) * (
                n * dxhat
                - dxhat.sum(axis=axes).reshape(shape)
                - xhat * (dxhat * xhat).sum(axis=axes).reshape(shape)
            )
        else:
            gx = dxhat * inv.reshape(shape)
        return gx, gg, gb

    return make(out, (x, gamma, beta), back)


def selu(x):
    x = as_tensor(x)
    pos = x.data > 0
    ex = np.exp(np.minimum(x.data, 0.0))
    out = SELU_SCALE * np.where(pos, x.data, SELU_ALPHA * (ex - 1.0))
    dydx = SELU_SCALE * np.where(pos, 1.0, SELU_ALPHA * ex)
    return make(out, (x,), lambda g: (g * dydx,))


def hswish(x):
    x = as_tensor(x)
    r = np.clip(x.data + 3.0, 0.0, 6.0)
    out = x.data * r / 6.0
    dydx = np.where(x.data < -3.0, 0.0, np.where(x.data > 3.0, 1.0, (2.0 * x.data + 3.0) / 6.0))
    return make(out, (x,), lambda g: (g * dydx,))


def sigmoid(x):
    x = as_tensor(x)
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return make(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make(out, (x,), lambda g: (g * (1.0 - out**2),))


def softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make(out, (x,), back)


def identity(x):
    return as_tensor(x)


ACTIVATIONS = {"selu": selu, "hswish": hswish, "sigmoid": sigmoid, "tanh": tanh,
               "softmax": softmax, "identity": identity}


# --------------------------------------------------------------------------
# modules
# --------------------------------------------------------------------------

class Module:
    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, v in enumerate(value):
                    if isinstance(v, Module):
                        yield f"{name}.{i}", v

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, value in getattr(self, "buffers", {}).items():
            yield prefix + name, value
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def layer_specs(self):
        specs = [self.spec.to_dict()] if hasattr(self, "spec") else []
        for _, child in self._children():
            specs.extend(child.layer_specs())
        return specs

    def train(self, mode=True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def n_parameters(self):
        return sum(p.data.size for p in self.parameters())


def _fan_in_normal(rng, shape, fan_in):
    return rng.standard_normal(shape) / np.sqrt(fan_in)


class Conv1d(Module):
    def __init__(self, in_channels, out_channels, kernel_len, rng, bias=True):
        self.spec = LayerSpec("conv1d", in_channels, out_channels, kernel_len, (kernel_len - 1) // 2)
        self.weight = Tensor(_fan_in_normal(rng, (out_channels, in_channels, kernel_len),
                                            in_channels * kernel_len), requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, x):
        return conv1d(x, self.weight, self.bias, self.spec.padding)


class Conv2dFirst(Module):
    def __init__(self, out_channels, kernel_len, rng, bias=True):
        self.spec = LayerSpec("conv2d-first", 2, out_channels, kernel_len, (kernel_len - 1) // 2)
        self.weight = Tensor(_fan_in_normal(rng, (out_channels, 2, kernel_len), 2 * kernel_len),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True) if bias else None

    def forward(self, y):
        return conv2d_first(y, self.weight, self.bias, self.spec.padding)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, bias=True, zero=False):
        self.spec = LayerSpec("linear", n_in, n_out)
        w = np.zeros((n_in, n_out)) if zero else _fan_in_normal(rng, (n_in, n_out), n_in)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True) if bias else None

    def forward(self, x):
        return linear(x, self.weight, self.bias)


class BatchNorm(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5):
        self.spec = LayerSpec("batchnorm", channels, channels)
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels)}
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return batchnorm(x, self.gamma, self.beta, self.buffers["running_mean"],
                         self.buffers["running_var"], self.training, self.momentum, self.eps)


class Activation(Module):
    def __init__(self, kind):
        if kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {kind!r}")
        self.spec = LayerSpec(kind)
        self.fn = ACTIVATIONS[kind]

    def forward(self, x):
        return self.fn(x)
