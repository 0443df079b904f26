"""Finite-difference verification of analytic gradients."""

import numpy as np

from . import layers as L


def grad_check(model, x: np.ndarray, labels: np.ndarray, epsilon: float = 1e-5,
               max_entries_per_param: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients against central finite differences.

    Returns the worst relative error over all checked entries, where the
    relative error of analytic ``a`` vs numerical ``n`` is
    ``|a - n| / max(|a|, |n|, 1e-8)``. Sampling a subset of entries per
    parameter keeps large models tractable; by default every entry is checked.
    """

    def loss_only() -> float:
        return L.cross_entropy_batch(model.forward(x), labels)

    _, grads = model.loss_and_gradients(x, labels)
    params = model.parameters()
    worst = 0.0
    for name, p in params.items():
        flat = p.reshape(-1)
        n_entries = flat.size
        if max_entries_per_param is not None and n_entries > max_entries_per_param:
            picker = rng or np.random.default_rng(0)
            entries = picker.choice(n_entries, size=max_entries_per_param, replace=False)
        else:
            entries = range(n_entries)
        gflat = grads[name].reshape(-1)
        for j in entries:
            orig = flat[j]
            flat[j] = orig + epsilon
            loss_plus = loss_only()
            flat[j] = orig - epsilon
            loss_minus = loss_only()
            flat[j] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            analytic = gflat[j]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            err = abs(analytic - numeric) / denom
            if err > worst:
                worst = err
    return worst
