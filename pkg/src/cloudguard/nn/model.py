"""Layer objects and a sequential model graph with reverse-mode gradients.

The graph is a plain list of layers; ``loss_and_gradients`` runs one forward
pass, caches what each layer needs, and walks the list backwards. Parameters
are addressed by ``"<layer index>.<field>"`` so optimizers and checkpoints
can treat the whole model as a flat named dict.
"""

import numpy as np

from ..errors import DimensionError
from . import layers as L


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv1dLayer:
    """Valid 1-D convolution, linear (no activation)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        fan_in = kernel_size * in_channels
        fan_out = kernel_size * out_channels
        self.params = L.ConvParams(
            kernel=_glorot(rng, fan_in, fan_out, (kernel_size, in_channels, out_channels)),
            bias=np.zeros(out_channels),
            stride=stride,
        )

    def forward(self, x: np.ndarray):
        out = L.conv1d_forward_batch(x, self.params)
        return out, x

    def backward(self, dout: np.ndarray, cache):
        dx, dk, db = L.conv1d_backward_batch(dout, cache, self.params)
        return dx, {"kernel": dk, "bias": db}

    def parameters(self) -> dict[str, np.ndarray]:
        return {"kernel": self.params.kernel, "bias": self.params.bias}

    def out_len(self, t: int) -> int:
        k = self.params.kernel.shape[0]
        if t < k:
            raise DimensionError(f"sequence length {t} shorter than kernel {k}")
        return (t - k) // self.params.stride + 1


class MaxPool1dLayer:
    """Non-overlapping temporal max pooling."""

    def __init__(self, pool_size: int):
        self.pool_size = pool_size

    def forward(self, x: np.ndarray):
        out, idx = L.maxpool1d_forward_batch(x, self.pool_size)
        return out, (idx, x.shape[1])

    def backward(self, dout: np.ndarray, cache):
        idx, t = cache
        return L.maxpool1d_backward_batch(dout, idx, t, self.pool_size), {}

    def parameters(self) -> dict[str, np.ndarray]:
        return {}

    def out_len(self, t: int) -> int:
        if t % self.pool_size != 0:
            raise DimensionError(f"pool size {self.pool_size} does not divide length {t}")
        return t // self.pool_size


class LstmLayer:
    """LSTM returning either the full sequence or the last hidden state."""

    def __init__(self, input_size: int, hidden_size: int,
                 return_sequences: bool = False, rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.return_sequences = return_sequences

        def w():
            return _glorot(rng, input_size, hidden_size, (input_size, hidden_size))

        def u():
            return _glorot(rng, hidden_size, hidden_size, (hidden_size, hidden_size))

        self.params = L.LstmParams(
            w_i=w(), w_f=w(), w_o=w(), w_g=w(),
            u_i=u(), u_f=u(), u_o=u(), u_g=u(),
            b_i=np.zeros(hidden_size),
            b_f=np.ones(hidden_size),  # open forget gates at init
            b_o=np.zeros(hidden_size),
            b_g=np.zeros(hidden_size),
        )

    def forward(self, x: np.ndarray):
        out, steps = L.lstm_forward_batch(x, self.params, self.return_sequences)
        return out, steps

    def backward(self, dout: np.ndarray, cache):
        dx, grads = L.lstm_backward_batch(dout, cache, self.params, self.return_sequences)
        return dx, grads

    def parameters(self) -> dict[str, np.ndarray]:
        p = self.params
        return {name: getattr(p, name)
                for name in ("w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g",
                             "b_i", "b_f", "b_o", "b_g")}

    def out_len(self, t: int) -> int:
        return t if self.return_sequences else 1


class DenseLayer:
    """Fully connected layer with optional relu or softmax activation."""

    def __init__(self, in_features: int, out_features: int, activation: str = "none",
                 rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.params = L.DenseParams(
            weights=_glorot(rng, in_features, out_features, (in_features, out_features)),
            bias=np.zeros(out_features),
            activation=activation,
        )

    def forward(self, x: np.ndarray):
        out = L.dense_forward_batch(x, self.params)
        return out, (x, out)

    def backward(self, dout: np.ndarray, cache):
        x, out = cache
        # softmax layers receive d(logits) directly from the fused loss gradient
        dx, dw, db = L.dense_backward_batch(dout, x, out, self.params)
        return dx, {"weights": dw, "bias": db}

    def parameters(self) -> dict[str, np.ndarray]:
        return {"weights": self.params.weights, "bias": self.params.bias}

    def out_len(self, t: int) -> int:
        return t


class ModelGraph:
    """A fixed sequential stack of layers trained with cross-entropy."""

    def __init__(self, layer_list: list):
        if not layer_list:
            raise DimensionError("model needs at least one layer")
        self.layers = list(layer_list)

    def parameters(self) -> dict[str, np.ndarray]:
        """Flat view of every trainable array, keyed ``"<layer index>.<field>"``."""
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.parameters().items():
                out[f"{i}.{name}"] = arr
        return out

    def set_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Copy new values into the existing arrays (shape-checked, in place)."""
        current = self.parameters()
        for key, arr in values.items():
            if key not in current:
                raise DimensionError(f"unknown parameter {key!r}")
            if current[key].shape != arr.shape:
                raise DimensionError(
                    f"parameter {key!r} shape {arr.shape} != expected {current[key].shape}"
                )
            current[key][...] = arr

    def num_params(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities for a batch ``[B, T, C]`` (or ``[B, D]`` for MLPs)."""
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out, _ = layer.forward(out)
        return out

    def loss_and_gradients(self, x: np.ndarray, labels: np.ndarray,
                           sample_weights: np.ndarray | None = None):
        """Mean cross-entropy and gradients for every parameter.

        The final layer must be a softmax DenseLayer; its backward pass is fed
        the fused ``probs - one_hot`` logits gradient, so the softmax Jacobian
        is never materialized.
        """
        last = self.layers[-1]
        if not (isinstance(last, DenseLayer) and last.params.activation == "softmax"):
            raise DimensionError("loss_and_gradients requires a softmax output layer")
        labels = np.asarray(labels)
        out = np.asarray(x, dtype=np.float64)
        caches = []
        for layer in self.layers:
            out, cache = layer.forward(out)
            caches.append(cache)
        probs = out
        loss = L.cross_entropy_batch(probs, labels, sample_weights)
        grad = L.softmax_xent_grad(probs, labels, sample_weights)
        grads: dict[str, np.ndarray] = {}
        for i in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[i].backward(grad, caches[i])
            for name, g in layer_grads.items():
                grads[f"{i}.{name}"] = g
        return loss, grads
