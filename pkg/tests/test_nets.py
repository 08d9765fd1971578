import numpy as np
import pytest

from rangeflow import error, nets
from rangeflow.core import tensor as T
from rangeflow.lidar import BeamTable
from rangeflow.nets.attention import apply_rope, circular_window_indices, rope_phases, windowed_attention
from rangeflow.nets.hourglass import merge_tokens, patchify, split_tokens, unpatchify
from rangeflow.nets.layers import TimeEmbedding
from rangeflow.nets.velocity_net import batch_times


def _gradcheck(model, x, t, checks, seed=0, eps=1e-6):
    """Compares recorded gradients with central differences on randomly
    chosen parameter entries. Returns the number of entries checked.
    """
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=x.shape)
    model.zero_grad()
    with T.ComputationRecord() as record:
        record.backward((model(x, t) * T.Tensor(weights)).sum())
    params = model.named_parameters()
    names = sorted(params)
    for _ in range(checks):
        param = params[names[rng.integers(len(names))]]
        index = tuple(rng.integers(s) for s in param.shape)
        old = param.data[index]
        values = []
        for delta in (eps, -eps):
            param.data[index] = old + delta
            values.append(float((model.velocity(x, t) * weights).sum()))
        param.data[index] = old
        numeric = (values[0] - values[1]) / (2 * eps)
        np.testing.assert_allclose(param.grad[index], numeric, rtol=1e-4, atol=1e-8)
    return checks


class TestMlp:

    def test_shapes(self, small_mlp):
        x = np.zeros((5, 2))
        assert small_mlp.velocity(x, 0.3).shape == (5, 2)
        assert small_mlp.velocity(np.zeros(2), 0.3).shape == (2,)

    def test_wrong_state_shape(self, small_mlp):
        with pytest.raises(error.ShapeError):
            small_mlp.velocity(np.zeros((5, 3)), 0.0)

    def test_zero_init_is_zero_field(self, zero_mlp):
        np.testing.assert_array_equal(zero_mlp.velocity(np.ones((3, 2)), 0.5), np.zeros((3, 2)))

    def test_spec_rebuilds_identical_model(self, small_mlp):
        clone = nets.make(small_mlp.kind, **small_mlp.spec())
        x = np.random.default_rng(0).normal(size=(4, 2))
        np.testing.assert_array_equal(clone.velocity(x, 0.2), small_mlp.velocity(x, 0.2))

    @pytest.mark.parametrize('seed', [1, 2])
    def test_gradients(self, small_mlp, seed):
        rng = np.random.default_rng(seed)
        x, t = rng.normal(size=(3, 2)), rng.uniform(size=3)
        assert _gradcheck(small_mlp, x, t, checks=50, seed=seed) == 50

    def test_unknown_kind(self):
        with pytest.raises(error.Unregistered):
            nets.make('unet')


class TestLayers:

    def test_time_embedding_bounded(self):
        features = TimeEmbedding(8)(np.linspace(-0.1, 1.1, 13))
        assert features.shape == (13, 8)
        assert np.all(np.abs(features) <= 1.0)

    def test_odd_embedding(self):
        with pytest.raises(error.InvalidArgument):
            TimeEmbedding(7)

    def test_batch_times(self):
        np.testing.assert_array_equal(batch_times(0.5, 3), [0.5, 0.5, 0.5])
        with pytest.raises(error.ShapeError):
            batch_times([0.1, 0.2], 3)


class TestAttentionGeometry:

    def test_window_sizes(self):
        idx = circular_window_indices(8, 32)
        assert idx.shape == (256, 27)
        assert all(len(set(row)) == 27 for row in idx)

    def test_window_wraps_columns(self):
        idx = circular_window_indices(4, 10)
        neighbors = set(idx[0] % 10)
        assert {6, 7, 8, 9, 0, 1, 2, 3, 4} == neighbors

    def test_window_shifted_inward_at_edges(self):
        idx = circular_window_indices(4, 10)
        assert set(idx[0] // 10) == {0, 1, 2}
        assert set(idx[39] // 10) == {1, 2, 3}

    def test_even_window(self):
        with pytest.raises(error.InvalidArgument):
            circular_window_indices(4, 10, (2, 9))

    def test_rope_preserves_relative_dot_products(self):
        rng = np.random.default_rng(0)
        q, k = rng.normal(size=(1, 1, 16)), rng.normal(size=(1, 1, 16))
        base = rng.uniform(-3, 3, size=(2, 8))
        shift = rng.uniform(-3, 3, size=8)

        def dot(phases):
            rq = apply_rope(T.Tensor(q), phases[:1]).data
            rk = apply_rope(T.Tensor(k), phases[1:]).data
            return float((rq * rk).sum())
        assert dot(base) == pytest.approx(dot(base + shift), abs=1e-12)

    def test_rope_phase_layout(self):
        beams = BeamTable.uniform(8)
        phases = rope_phases(beams, 4, 16, 16)
        assert phases.shape == (64, 8)
        np.testing.assert_allclose(phases[1, 0] - phases[0, 0], 2 * np.pi / 16)
        np.testing.assert_allclose(phases[16, 4:], beams.pooled(4)[1] * 16.0 * 2.0 ** np.arange(4))

    def test_attention_output_shape(self):
        tokens = T.Tensor(np.random.default_rng(1).normal(size=(2, 40, 16)))
        phases = rope_phases(BeamTable.uniform(4), 4, 10, 16)
        out = windowed_attention(tokens, phases, circular_window_indices(4, 10))
        assert out.shape == (2, 40, 16)


class TestHourglass:

    def test_patchify_round_trip(self):
        image = np.random.default_rng(0).normal(size=(3, 2, 4, 40))
        tokens = patchify(image)
        assert tokens.shape == (3, 4, 10, 8)
        np.testing.assert_array_equal(unpatchify(tokens, 2), image)

    def test_patchify_width(self):
        with pytest.raises(error.ShapeError):
            patchify(np.zeros((2, 4, 42)))

    def test_merge_split_round_trip(self):
        x = T.Tensor(np.random.default_rng(1).normal(size=(2, 40, 16)))
        merged = merge_tokens(x, 4, 10)
        assert merged.shape == (2, 10, 64)
        np.testing.assert_array_equal(split_tokens(merged, 4, 10).data, x.data)

    def test_output_shape(self, small_hourglass):
        x = np.random.default_rng(2).normal(size=(2, 2, 4, 40))
        assert small_hourglass.velocity(x, [0.0, 1.0]).shape == x.shape

    def test_beam_rows_must_match(self):
        with pytest.raises(error.ShapeError):
            nets.make('hourglass', data_shape=(2, 4, 40), elevations=BeamTable.uniform(8).elevations,
                      widths=(16, 32))

    def test_shift_equivariance_without_ape(self):
        """Rolling by 8 columns, one merged token (4-pixel patches, 2x2
        merging), commutes with the model. Other shifts are not covered.
        """
        model = nets.make('hourglass', data_shape=(2, 4, 40), widths=(16, 32), depth=1, time_dim=8,
                          ape=False, seed=4)
        x = np.random.default_rng(3).normal(size=(1, 2, 4, 40))
        shifted = model.velocity(np.roll(x, 8, axis=-1), 0.4)
        expected = np.roll(model.velocity(x, 0.4), 8, axis=-1)
        assert np.abs(shifted - expected).max() <= 1e-5

    def test_ape_breaks_equivariance(self, small_hourglass):
        x = np.random.default_rng(3).normal(size=(1, 2, 4, 40))
        shifted = small_hourglass.velocity(np.roll(x, 8, axis=-1), 0.4)
        expected = np.roll(small_hourglass.velocity(x, 0.4), 8, axis=-1)
        assert np.abs(shifted - expected).max() > 1e-6

    @pytest.mark.parametrize('seed', [5, 6])
    def test_gradients(self, small_hourglass, seed):
        rng = np.random.default_rng(seed)
        x, t = rng.normal(size=(2, 2, 4, 40)), rng.uniform(size=2)
        assert _gradcheck(small_hourglass, x, t, checks=50, seed=seed) == 50

    def test_spec_round_trip(self, small_hourglass):
        clone = nets.make('hourglass', **small_hourglass.spec())
        clone.load_state_dict(small_hourglass.state_dict())
        x = np.random.default_rng(6).normal(size=(1, 2, 4, 40))
        np.testing.assert_array_equal(clone.velocity(x, 0.5), small_hourglass.velocity(x, 0.5))
