"""Primitive 1-D network layers with explicit forward and backward passes.

Every function works on float64 arrays. Single-sample signatures take
``[T, C]`` inputs; the ``*_batch`` variants used by training take
``[B, T, C]`` and are what the backward passes pair with.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError

PROB_FLOOR = 1e-12  # loss clamp; keeps confident-wrong predictions finite


@dataclass
class ConvParams:
    """1-D convolution parameters: kernel ``[K, C_in, C_out]``, bias ``[C_out]``."""

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernel.ndim != 3:
            raise DimensionError(f"kernel must be [K, C_in, C_out], got shape {self.kernel.shape}")
        if self.bias.shape != (self.kernel.shape[2],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not match C_out={self.kernel.shape[2]}"
            )
        if self.kernel.shape[0] < 1 or self.stride < 1:
            raise DimensionError("kernel size and stride must be >= 1")


@dataclass
class LstmParams:
    """Per-gate LSTM weights. Gate order throughout: input, forget, output, candidate."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    u_i: np.ndarray
    u_f: np.ndarray
    u_o: np.ndarray
    u_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        for name in ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
                     "b_i", "b_f", "b_o", "b_g"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h = self.w_i.shape[1]
        if h < 1:
            raise DimensionError("hidden size must be >= 1")
        for name in ("w_f", "w_o", "w_g"):
            if getattr(self, name).shape != self.w_i.shape:
                raise DimensionError(f"{name} shape differs from w_i")
        for name in ("u_i", "u_f", "u_o", "u_g"):
            if getattr(self, name).shape != (h, h):
                raise DimensionError(f"{name} must be [H, H] with H={h}")
        for name in ("b_i", "b_f", "b_o", "b_g"):
            if getattr(self, name).shape != (h,):
                raise DimensionError(f"{name} must be [H] with H={h}")

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[0]


@dataclass
class DenseParams:
    """Affine layer ``out = activation(x @ weights + bias)``."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str = "none"  # one of: relu, softmax, none

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise DimensionError(f"weights must be [In, Out], got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[1],):
            raise DimensionError("bias length does not match Out")
        if self.activation not in ("relu", "softmax", "none"):
            raise DimensionError(f"unknown activation {self.activation!r}")


def conv1d_forward(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Valid (no padding) 1-D convolution of a single ``[T, C_in]`` sequence."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be [T, C_in], got shape {x.shape}")
    return conv1d_forward_batch(x[None], p)[0]


def conv1d_forward_batch(x: np.ndarray, p: ConvParams) -> np.ndarray:
    """Batched valid convolution: ``[B, T, C_in] -> [B, T', C_out]``."""
    x = np.asarray(x, dtype=np.float64)
    k, c_in, c_out = p.kernel.shape
    b, t, c = x.shape
    if c != c_in:
        raise DimensionError(f"input has {c} channels, kernel expects {c_in}")
    if t < k:
        raise DimensionError(f"input too short: T={t} < kernel size {k}")
    t_out = (t - k) // p.stride + 1
    out = np.broadcast_to(p.bias, (b, t_out, c_out)).copy()
    for kk in range(k):
        # window position t reads x[t*stride + kk]
        out += x[:, kk : kk + (t_out - 1) * p.stride + 1 : p.stride, :] @ p.kernel[kk]
    return out


def conv1d_backward_batch(dout: np.ndarray, x: np.ndarray, p: ConvParams):
    """Gradients of the batched convolution. Returns ``(dx, dkernel, dbias)``."""
    k, _, _ = p.kernel.shape
    t_out = dout.shape[1]
    dx = np.zeros_like(x)
    dkernel = np.zeros_like(p.kernel)
    dbias = dout.sum(axis=(0, 1))
    for kk in range(k):
        sl = slice(kk, kk + (t_out - 1) * p.stride + 1, p.stride)
        dkernel[kk] = np.einsum("bti,bto->io", x[:, sl, :], dout)
        dx[:, sl, :] += dout @ p.kernel[kk].T
    return dx, dkernel, dbias


def maxpool1d_forward(x: np.ndarray, pool_size: int):
    """Non-overlapping max pooling of ``[T, C]``. Returns values and argmax time indices."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be [T, C], got shape {x.shape}")
    out, idx = maxpool1d_forward_batch(x[None], pool_size)
    return out[0], idx[0]


def maxpool1d_forward_batch(x: np.ndarray, pool_size: int):
    """Batched max pooling ``[B, T, C] -> [B, T/P, C]`` plus absolute argmax indices."""
    x = np.asarray(x, dtype=np.float64)
    b, t, c = x.shape
    if pool_size < 1 or t % pool_size != 0:
        raise DimensionError(f"pool_size {pool_size} does not divide T={t}")
    xr = x.reshape(b, t // pool_size, pool_size, c)
    within = xr.argmax(axis=2)  # first index wins ties
    out = np.take_along_axis(xr, within[:, :, None, :], axis=2)[:, :, 0, :]
    idx = within + (np.arange(t // pool_size) * pool_size)[None, :, None]
    return out, idx


def maxpool1d_backward_batch(dout: np.ndarray, idx: np.ndarray, t: int, pool_size: int) -> np.ndarray:
    """Route gradients back to the recorded argmax positions only."""
    b, t_out, c = dout.shape
    dxr = np.zeros((b, t_out, pool_size, c))
    within = idx - (np.arange(t_out) * pool_size)[None, :, None]
    np.put_along_axis(dxr, within[:, :, None, :], dout[:, :, None, :], axis=2)
    return dxr.reshape(b, t, c)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(x: np.ndarray, p: LstmParams, return_sequences: bool = True) -> np.ndarray:
    """Single-sequence LSTM over ``[T, C_in]`` with zero initial state."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be [T, C_in], got shape {x.shape}")
    out, _ = lstm_forward_batch(x[None], p, return_sequences)
    return out[0]


def lstm_forward_batch(x: np.ndarray, p: LstmParams, return_sequences: bool):
    """Batched LSTM. Returns output and the per-step cache needed by backward.

    Recurrence: i, f, o are sigmoid gates, g = tanh candidate,
    c_t = f * c_{t-1} + i * g, h_t = o * tanh(c_t), h_0 = c_0 = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    b, t, c_in = x.shape
    if c_in != p.input_size:
        raise DimensionError(f"input has {c_in} channels, lstm expects {p.input_size}")
    h_dim = p.hidden_size
    h = np.zeros((b, h_dim))
    c = np.zeros((b, h_dim))
    hs = np.empty((b, t, h_dim))
    steps = []
    for tt in range(t):
        xt = x[:, tt, :]
        i = _sigmoid(xt @ p.w_i + h @ p.u_i + p.b_i)
        f = _sigmoid(xt @ p.w_f + h @ p.u_f + p.b_f)
        o = _sigmoid(xt @ p.w_o + h @ p.u_o + p.b_o)
        g = np.tanh(xt @ p.w_g + h @ p.u_g + p.b_g)
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        steps.append((xt, h, c, i, f, o, g, tanh_c))
        h, c = h_new, c_new
        hs[:, tt, :] = h
    out = hs if return_sequences else hs[:, -1, :]
    return out, steps


def lstm_backward_batch(dout: np.ndarray, steps: list, p: LstmParams, return_sequences: bool):
    """Backpropagation through time. Returns ``(dx, grads dict)``."""
    t = len(steps)
    b = steps[0][0].shape[0]
    h_dim = p.hidden_size
    if return_sequences:
        dhs = dout
    else:
        dhs = np.zeros((b, t, h_dim))
        dhs[:, -1, :] = dout
    grads = {name: np.zeros_like(getattr(p, name))
             for name in ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
                          "b_i", "b_f", "b_o", "b_g")}
    dx = np.empty((b, t, p.input_size))
    dh_next = np.zeros((b, h_dim))
    dc_next = np.zeros((b, h_dim))
    for tt in range(t - 1, -1, -1):
        xt, h_prev, c_prev, i, f, o, g, tanh_c = steps[tt]
        dh = dhs[:, tt, :] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        dzo = dh * tanh_c * o * (1.0 - o)
        dzi = dc * g * i * (1.0 - i)
        dzg = dc * i * (1.0 - g**2)
        dzf = dc * c_prev * f * (1.0 - f)
        dc_next = dc * f
        for name_w, name_u, name_b, dz in (
            ("w_i", "u_i", "b_i", dzi),
            ("w_f", "u_f", "b_f", dzf),
            ("w_o", "u_o", "b_o", dzo),
            ("w_g", "u_g", "b_g", dzg),
        ):
            grads[name_w] += xt.T @ dz
            grads[name_u] += h_prev.T @ dz
            grads[name_b] += dz.sum(axis=0)
        dx[:, tt, :] = dzi @ p.w_i.T + dzf @ p.w_f.T + dzo @ p.w_o.T + dzg @ p.w_g.T
        dh_next = dzi @ p.u_i.T + dzf @ p.u_f.T + dzo @ p.u_o.T + dzg @ p.u_g.T
    return dx, grads


def dense_forward(x: np.ndarray, p: DenseParams) -> np.ndarray:
    """Affine map of a single ``[In]`` vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"input must be a vector, got shape {x.shape}")
    return dense_forward_batch(x[None], p)[0]


def dense_forward_batch(x: np.ndarray, p: DenseParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.weights.shape[0]:
        raise DimensionError(
            f"input width {x.shape[-1]} does not match weights In={p.weights.shape[0]}"
        )
    z = x @ p.weights + p.bias
    if p.activation == "relu":
        return np.maximum(z, 0.0)
    if p.activation == "softmax":
        return softmax(z)
    return z


def dense_backward_batch(dout: np.ndarray, x: np.ndarray, z_or_out: np.ndarray, p: DenseParams):
    """Gradients for a dense layer.

    For relu, ``z_or_out`` is the post-activation output (its positive mask equals
    the pre-activation mask). For softmax the caller must supply the gradient
    with respect to the logits already (the fused cross-entropy path).
    """
    if p.activation == "relu":
        dout = dout * (z_or_out > 0.0)
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ p.weights.T
    return dx, dw, db


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-stable softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise DimensionError("softmax of empty vector")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """Negative log likelihood of ``label`` with a 1e-12 probability floor."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise DimensionError("probs must be a vector")
    if not 0 <= label < probs.shape[0]:
        raise IndexError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def cross_entropy_batch(probs: np.ndarray, labels: np.ndarray,
                        sample_weights: np.ndarray | None = None) -> float:
    """Weighted mean cross-entropy over a batch."""
    if probs.ndim != 2:
        raise DimensionError("probs must be [B, C]")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise IndexError("label out of range")
    picked = np.clip(probs[np.arange(len(labels)), labels], PROB_FLOOR, None)
    losses = -np.log(picked)
    if sample_weights is None:
        return float(losses.mean())
    return float((losses * sample_weights).sum() / sample_weights.sum())


def softmax_xent_grad(probs: np.ndarray, labels: np.ndarray,
                      sample_weights: np.ndarray | None = None) -> np.ndarray:
    """Gradient of mean cross-entropy w.r.t. the logits: ``probs - one_hot``."""
    b, c = probs.shape
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    if sample_weights is None:
        return grad / b
    return grad * (sample_weights / sample_weights.sum())[:, None]
