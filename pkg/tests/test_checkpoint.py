import numpy as np
import pytest

from divspa.models.Checkpoint import load_checkpoint, save_checkpoint
from divspa.models.Models import CheckpointError
from divspa.models.TwoTower import TENSOR_NAMES, HyperParams, init_params, train_step


class TestCheckpoint:
    """Saved models reload bit for bit; damaged files raise CheckpointError"""

    def test_restores_tensors_adam_state_and_hyper_params(self, tmp_path):
        hp = HyperParams(dim=4, num_negatives=2, lr=0.01, k=7)
        rng = np.random.default_rng(42)
        params = init_params(3, 6, hp, rng)
        train_step(params, [(0, (1,), 2), (1, (), 3)], hp, rng)

        path = str(tmp_path / 'nested' / 'phase1.npz')
        save_checkpoint(path, params, hp)
        loaded, loaded_hp = load_checkpoint(path)

        assert loaded_hp == hp
        assert loaded.adam.step == 1
        for name in TENSOR_NAMES:
            assert np.array_equal(loaded.tensors()[name], params.tensors()[name])
            assert np.array_equal(loaded.adam.m[name], params.adam.m[name])
            assert np.array_equal(loaded.adam.v[name], params.adam.v[name])

    def test_training_resumes_identically(self, tmp_path):
        hp = HyperParams(dim=4, num_negatives=2, lr=0.01)
        params = init_params(3, 6, hp, np.random.default_rng(42))
        path = str(tmp_path / 'ckpt.npz')
        save_checkpoint(path, params, hp)
        loaded, _ = load_checkpoint(path)

        batch = [(0, (1,), 2), (2, (4, 5), 0)]
        a = train_step(params, batch, hp, np.random.default_rng(3))
        b = train_step(loaded, batch, hp, np.random.default_rng(3))

        assert a == b
        assert np.array_equal(params.item_w1, loaded.item_w1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / 'none.npz'))

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / 'bogus.npz'
        np.savez(str(path), something=np.zeros(3))

        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_garbage_bytes(self, tmp_path):
        path = tmp_path / 'garbage.npz'
        path.write_bytes(b'definitely not a zip archive')

        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))
