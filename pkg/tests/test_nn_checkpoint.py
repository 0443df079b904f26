"""Checkpoint round trips and corruption handling."""

import numpy as np
import pytest

from cloudguard.errors import CheckpointError
from cloudguard.nn import (
    DenseLayer,
    ModelGraph,
    load_params,
    restore_into,
    save_params,
)


def tiny_model(seed=0):
    rng = np.random.default_rng(seed)
    return ModelGraph([
        DenseLayer(4, 3, activation="relu", rng=rng),
        DenseLayer(3, 2, activation="softmax", rng=rng),
    ])


class TestRoundTrip:
    def test_bit_exact_params_and_meta(self, tmp_path):
        model = tiny_model(seed=8)
        path = str(tmp_path / "model.npz")
        meta = {"classes": ["a", "b"], "feature_dim": 4, "note": "round trip"}
        save_params(path, model.parameters(), meta)
        params, got_meta = load_params(path)
        assert got_meta == meta
        for k, arr in model.parameters().items():
            np.testing.assert_array_equal(params[k], arr)

    def test_restore_reproduces_outputs_exactly(self, tmp_path):
        src = tiny_model(seed=1)
        path = str(tmp_path / "m.npz")
        save_params(path, src.parameters(), {})
        dst = tiny_model(seed=2)
        params, _ = load_params(path)
        restore_into(dst, params, path)
        x = np.random.default_rng(3).normal(size=(5, 4))
        np.testing.assert_array_equal(src.forward(x), dst.forward(x))


class TestFailureModes:
    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError, match="not found"):
            load_params(str(tmp_path / "nope.npz"))

    def test_truncated_archive(self, tmp_path):
        path = tmp_path / "bad.npz"
        model = tiny_model()
        save_params(str(path), model.parameters(), {})
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError):
            load_params(str(path))

    def test_restore_names_missing_field(self, tmp_path):
        model = tiny_model()
        params = dict(model.parameters())
        del params["1.bias"]
        with pytest.raises(CheckpointError, match=r"1\.bias"):
            restore_into(model, params)

    def test_restore_names_unexpected_field(self, tmp_path):
        model = tiny_model()
        params = dict(model.parameters())
        params["9.ghost"] = np.zeros(2)
        with pytest.raises(CheckpointError, match=r"9\.ghost"):
            restore_into(model, params)

    def test_restore_names_shape_mismatch(self, tmp_path):
        model = tiny_model()
        params = {k: v.copy() for k, v in model.parameters().items()}
        params["0.weights"] = np.zeros((4, 9))
        with pytest.raises(CheckpointError, match=r"0\.weights"):
            restore_into(model, params)

    def test_meta_key_reserved(self, tmp_path):
        with pytest.raises(CheckpointError, match="reserved"):
            save_params(str(tmp_path / "x.npz"), {"meta_json": np.zeros(1)}, {})
