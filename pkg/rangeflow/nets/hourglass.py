import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T
from rangeflow.lidar.beams import BeamTable
from rangeflow.nets import layers
from rangeflow.nets.attention import CircularAttention, circular_window_indices, rope_phases
from rangeflow.nets.velocity_net import VelocityNet

HEAD_DIM = 16


def patchify(image, patch_width=4):
    """Splits a (..., C, H, W) image into (..., H, W / p, C * p) tokens.

    Token (r, c) holds channel-major values of pixels (r, p*c .. p*c + p - 1).
    Accepts a Tensor or an ndarray and returns the same kind.
    """
    as_array = not isinstance(image, T.Tensor)
    x = T.as_tensor(image)
    if x.ndim < 3:
        raise error.ShapeError('patchify expects (..., C, H, W), got {}'.format(x.shape))
    channels, height, width = x.shape[-3:]
    if width % patch_width:
        raise error.ShapeError('image width {} is not divisible by the patch width {}'.format(
            width, patch_width))
    lead = x.shape[:-3]
    n = len(lead)
    cols = width // patch_width
    tokens = x.reshape(lead + (channels, height, cols, patch_width))
    tokens = tokens.transpose(tuple(range(n)) + (n + 1, n + 2, n, n + 3))
    tokens = tokens.reshape(lead + (height, cols, channels * patch_width))
    return tokens.data if as_array else tokens


def unpatchify(tokens, channels, patch_width=4):
    """Inverse of ``patchify``.
    """
    as_array = not isinstance(tokens, T.Tensor)
    x = T.as_tensor(tokens)
    height, cols, dim = x.shape[-3:]
    if dim != channels * patch_width:
        raise error.ShapeError('token size {} does not match {} channels x {} pixels'.format(
            dim, channels, patch_width))
    lead = x.shape[:-3]
    n = len(lead)
    image = x.reshape(lead + (height, cols, channels, patch_width))
    image = image.transpose(tuple(range(n)) + (n + 2, n, n + 1, n + 3))
    image = image.reshape(lead + (channels, height, cols * patch_width))
    return image.data if as_array else image


def skip_fusion(current, skipped, weight):
    """Blends two token grids per channel: w * skipped + (1 - w) * current.
    """
    current, skipped = T.as_tensor(current), T.as_tensor(skipped)
    if current.shape != skipped.shape:
        raise error.ShapeError('cannot fuse tokens of shape {} with skipped tokens of shape {}'.format(
            current.shape, skipped.shape))
    return current + T.as_tensor(weight) * (skipped - current)


def merge_tokens(x, rows, cols):
    """(B, rows*cols, C) -> (B, rows/2 * cols/2, 4C) by 2x2 token merging.
    """
    batch, _, dim = x.shape
    x = x.reshape(batch, rows // 2, 2, cols // 2, 2, dim).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(batch, (rows // 2) * (cols // 2), 4 * dim)


def split_tokens(x, rows, cols):
    """Inverse of ``merge_tokens``: (B, rows/2 * cols/2, 4C) -> (B, rows*cols, C).
    """
    batch, _, dim4 = x.shape
    dim = dim4 // 4
    x = x.reshape(batch, rows // 2, cols // 2, 2, 2, dim).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(batch, rows * cols, dim)


class TransformerBlock(layers.Module):
    """Pre-normalized attention and feed-forward block with additive time
    conditioning.
    """

    def __init__(self, dim, time_hidden, rng, ffn_mult=3):
        super(TransformerBlock, self).__init__()
        self.time_proj = self.add_child('time_proj', layers.Linear(time_hidden, dim, rng))
        self.norm1 = self.add_child('norm1', layers.LayerNorm(dim))
        self.attn = self.add_child('attn', CircularAttention(dim, dim // HEAD_DIM, rng))
        self.norm2 = self.add_child('norm2', layers.LayerNorm(dim))
        self.fc1 = self.add_child('fc1', layers.Linear(dim, ffn_mult * dim, rng))
        self.fc2 = self.add_child('fc2', layers.Linear(ffn_mult * dim, dim, rng))

    def forward(self, h, time_hidden, phases, window_indices):
        batch, _, dim = h.shape
        h = h + self.time_proj(time_hidden).reshape(batch, 1, dim)
        h = h + self.attn(self.norm1(h), phases, window_indices)
        return h + self.fc2(layers.gelu(self.fc1(self.norm2(h))))


class HourglassVelocity(VelocityNet):
    """Miniature hourglass transformer on 2-channel range images.

    One windowed encoder stage, a global-attention bottleneck after 2x2
    token merging, and one windowed decoder stage fused with the encoder
    output through learnable per-channel weights.
    """
    kind = 'hourglass'

    def __init__(self, data_shape=(2, 16, 128), elevations=None, widths=(64, 128), depth=2,
                 patch_width=4, window=(3, 9), ape=True, time_dim=32, ffn_mult=3,
                 rope_vertical_scale=16.0, zero_init_last=False, seed=0):
        """Initializes an hourglass velocity estimator.

        Args:
            data_shape (tuple): (channels, H, W) of one range image
            elevations (list): beam elevations in radians, top row first;
                a uniform table from +3 to -25 degrees if None
            widths (tuple): token widths of the outer stages and the bottleneck
            depth (int): blocks per stage
            patch_width (int): pixels per token along the azimuth
            window (tuple): sliding window of the outer stages, in tokens
            ape (boolean): add a learnable bias per token position
            time_dim (int): size of the sinusoidal time embedding
            ffn_mult (int): feed-forward width multiplier
            rope_vertical_scale (float): multiplier of beam elevations in
                the vertical rotary phases
            zero_init_last (boolean): start the output layer at zero
            seed (int): seed of the parameter initialization
        """
        super(HourglassVelocity, self).__init__(data_shape, seed)
        if len(self.data_shape) != 3:
            raise error.ShapeError('hourglass expects (C, H, W) states, got {}'.format(self.data_shape))
        channels, height, width = self.data_shape
        self.beams = BeamTable(elevations) if elevations is not None else BeamTable.uniform(height)
        if self.beams.height != height:
            raise error.ShapeError('beam table has {} rows, images have {}'.format(self.beams.height, height))
        if width % patch_width:
            raise error.ShapeError('image width {} is not divisible by the patch width {}'.format(
                width, patch_width))
        self.rows, self.cols = height, width // patch_width
        if self.rows % 2 or self.cols % 2:
            raise error.ShapeError('token grid {}x{} cannot be merged 2x2'.format(self.rows, self.cols))
        self.widths = tuple(int(w) for w in widths)
        if any(w % HEAD_DIM for w in self.widths):
            raise error.InvalidArgument('stage widths must be multiples of {}'.format(HEAD_DIM))
        self.depth = depth
        self.patch_width = patch_width
        self.window = tuple(window)
        self.ape = ape
        self.time_dim = time_dim
        self.ffn_mult = ffn_mult
        self.rope_vertical_scale = rope_vertical_scale
        self.zero_init_last = zero_init_last

        self.window_indices = circular_window_indices(self.rows, self.cols, self.window)
        self.outer_phases = rope_phases(self.beams, self.rows, self.cols, HEAD_DIM, rope_vertical_scale)
        self.inner_phases = rope_phases(self.beams, self.rows // 2, self.cols // 2, HEAD_DIM,
                                        rope_vertical_scale)

        rng = np.random.default_rng(seed)
        outer, inner = self.widths
        time_hidden = 4 * time_dim
        self.embedding = layers.TimeEmbedding(time_dim)
        self.time_mlp = self.add_child('time_mlp', layers.Linear(time_dim, time_hidden, rng))
        self.embed = self.add_child('embed', layers.Linear(channels * patch_width, outer, rng))
        if ape:
            self.ape_bias = self.add_param('ape_bias', 0.02 * rng.standard_normal(
                (self.rows * self.cols, outer)))
        self.encoder = [self.add_child('encoder{}'.format(i), TransformerBlock(outer, time_hidden, rng, ffn_mult))
                        for i in range(depth)]
        self.down = self.add_child('down', layers.Linear(4 * outer, inner, rng))
        self.bottleneck = [self.add_child('bottleneck{}'.format(i),
                                          TransformerBlock(inner, time_hidden, rng, ffn_mult))
                           for i in range(depth)]
        self.up = self.add_child('up', layers.Linear(inner, 4 * outer, rng))
        self.fuse_weight = self.add_param('fuse_weight', np.full(outer, 0.5))
        self.decoder = [self.add_child('decoder{}'.format(i), TransformerBlock(outer, time_hidden, rng, ffn_mult))
                        for i in range(depth)]
        self.norm_out = self.add_child('norm_out', layers.LayerNorm(outer))
        self.head = self.add_child('head', layers.Linear(outer, channels * patch_width, rng,
                                                         zero_init=zero_init_last))

    def _velocity(self, x, t):
        batch = x.shape[0]
        channels = self.data_shape[0]
        count = self.rows * self.cols
        time_hidden = layers.gelu(self.time_mlp(T.Tensor(self.embedding(t))))

        h = self.embed(patchify(x, self.patch_width).reshape(batch, count, channels * self.patch_width))
        if self.ape:
            h = h + self.ape_bias
        for block in self.encoder:
            h = block(h, time_hidden, self.outer_phases, self.window_indices)
        skipped = h

        h = self.down(merge_tokens(h, self.rows, self.cols))
        for block in self.bottleneck:
            h = block(h, time_hidden, self.inner_phases, None)
        h = split_tokens(self.up(h), self.rows, self.cols)

        h = skip_fusion(h, skipped, self.fuse_weight)
        for block in self.decoder:
            h = block(h, time_hidden, self.outer_phases, self.window_indices)
        h = self.head(self.norm_out(h)).reshape(batch, self.rows, self.cols, channels * self.patch_width)
        return unpatchify(h, channels, self.patch_width)

    def _spec(self):
        return {'elevations': self.beams.elevations.tolist(), 'widths': list(self.widths),
                'depth': self.depth, 'patch_width': self.patch_width, 'window': list(self.window),
                'ape': self.ape, 'time_dim': self.time_dim, 'ffn_mult': self.ffn_mult,
                'rope_vertical_scale': self.rope_vertical_scale,
                'zero_init_last': self.zero_init_last}
