import numpy as np
import pytest

from rangeflow import error
from rangeflow.core import tensor as T
from rangeflow.core.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from rangeflow.core.optim import Adam, AdamState, adam_step


class TestAdam:

    def test_first_step_moves_by_lr(self):
        params = {'w': np.array([1.0, -2.0])}
        grads = {'w': np.array([0.5, -4.0])}
        updated, state = adam_step(params, grads, AdamState(), lr=0.1)
        # bias-corrected first step is lr * sign(g) up to eps
        np.testing.assert_allclose(updated['w'], [0.9, -1.9], atol=1e-7)
        assert state.step == 1

    def test_state_not_modified(self):
        state = AdamState()
        adam_step({'w': np.ones(2)}, {'w': np.ones(2)}, state)
        assert state.step == 0 and not state.m

    def test_non_finite_gradient_rejects_step(self):
        params = {'a': np.ones(2), 'b': np.ones(2)}
        with pytest.raises(error.NumericalError, match='b'):
            adam_step(params, {'a': np.ones(2), 'b': np.array([1.0, np.nan])}, AdamState())

    def test_mismatched_names(self):
        with pytest.raises(error.InvalidArgument):
            adam_step({'a': np.ones(1)}, {'b': np.ones(1)}, AdamState())

    def test_minimizes_quadratic(self):
        w = T.Tensor(np.array([3.0, -2.0]), requires_grad=True, name='w')
        optimizer = Adam({'w': w}, lr=0.05)
        for _ in range(500):
            optimizer.zero_grad()
            with T.ComputationRecord() as record:
                record.backward((w * w).sum())
            optimizer.step()
        np.testing.assert_allclose(w.data, 0.0, atol=0.1)


class TestCheckpoint:

    def test_round_trip(self, tmp_path):
        tensors = {'b': np.arange(6.0).reshape(2, 3), 'a': np.ones(4, dtype=np.float32)}
        path = str(tmp_path / 'model.ckpt')
        digest = save_checkpoint(path, tensors, {'kind': 'mlp'})
        loaded, metadata, found = load_checkpoint(path)
        assert found == digest
        assert metadata == {'kind': 'mlp'}
        np.testing.assert_array_equal(loaded['b'], tensors['b'])
        assert loaded['a'].dtype == np.float32

    def test_identical_inputs_identical_bytes(self):
        tensors = {'w': np.linspace(0, 1, 5)}
        assert encode_checkpoint(tensors, {'x': 1}) == encode_checkpoint(dict(tensors), {'x': 1})

    def test_bad_magic(self):
        with pytest.raises(error.FormatError, match='byte 0'):
            decode_checkpoint(b'NOTACKPT' + b'\0' * 16)

    def test_truncated_reports_offset(self):
        payload = encode_checkpoint({'w': np.ones(3)})
        with pytest.raises(error.FormatError, match='at byte'):
            decode_checkpoint(payload[:-5])

    def test_trailing_bytes(self):
        payload = encode_checkpoint({'w': np.ones(3)})
        with pytest.raises(error.FormatError, match='trailing'):
            decode_checkpoint(payload + b'\0')

    def test_missing_file(self, tmp_path):
        with pytest.raises(error.DataError):
            load_checkpoint(str(tmp_path / 'absent.ckpt'))
