"""Parameter update rules.

Both optimizers mutate the model's parameter arrays in place and raise
TrainingDivergedError the moment a gradient or updated value is non-finite,
so a blown-up run fails loudly instead of writing NaN checkpoints.
"""

import numpy as np

from ..errors import TrainingDivergedError


def _check_finite(name: str, arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise TrainingDivergedError(f"non-finite {what} in parameter {name!r}")


class Sgd:
    """Plain stochastic gradient descent: ``p -= lr * g``."""

    def __init__(self, lr: float = 1e-3):
        if lr < 0:
            raise ValueError("lr must be non-negative")
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, p in params.items():
            g = grads[name]
            _check_finite(name, g, "gradient")
            p -= self.lr * g
            _check_finite(name, p, "parameter")


class Adam:
    """Adam with bias-corrected first and second moments."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr < 0:
            raise ValueError("lr must be non-negative")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            _check_finite(name, g, "gradient")
            m = self._m.setdefault(name, np.zeros_like(p))
            v = self._v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            _check_finite(name, p, "parameter")
