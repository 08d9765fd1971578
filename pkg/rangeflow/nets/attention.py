"""Self-attention on an equirectangular token grid.

Tokens are stored row-major over a (rows, cols) grid; column indices wrap
around because the grid covers a full turn of azimuth. Outer stages attend
within a sliding 3x9 window whose columns wrap and whose rows are shifted
inward at the top and bottom edges, so every token sees the same number of
neighbors. The bottleneck attends globally.

Relative positions enter through rotary phases. Horizontal phases are
integer harmonics of the token azimuth, which makes every query/key phase
difference exactly periodic over one turn. Vertical phases are the beam
elevations of the token rows, scaled by harmonics.
"""
import math

import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T
from rangeflow.nets.layers import Linear, Module


def circular_window_indices(rows, cols, window=(3, 9)):
    """Neighbor token indices, shape (rows * cols, window_rows * window_cols).

    Columns wrap modulo ``cols``. Rows are clamped by shifting the window
    inside [0, rows), without vertical wrap.
    """
    win_rows, win_cols = window
    if win_rows % 2 == 0 or win_cols % 2 == 0:
        raise error.InvalidArgument('window extents must be odd, got {}'.format(window))
    if cols < win_cols:
        raise error.ShapeError('{} token columns cannot hold a window {} columns wide'.format(
            cols, win_cols))
    span = min(win_rows, rows)
    start = np.clip(np.arange(rows) - win_rows // 2, 0, rows - span)
    row_idx = start[:, None] + np.arange(span)
    offsets = np.arange(-(win_cols // 2), win_cols // 2 + 1)
    col_idx = (np.arange(cols)[:, None] + offsets) % cols
    idx = row_idx[:, None, :, None] * cols + col_idx[None, :, None, :]
    return idx.reshape(rows * cols, span * win_cols)


def harmonics(count):
    """Doubling integer harmonics 1, 2, 4, ...
    """
    return 2.0 ** np.arange(count)


def horizontal_phases(cols, columns, orders):
    """Phase of each column for each harmonic order: order * 2*pi * column / cols.
    """
    columns = np.asarray(columns, dtype=np.float64)
    return 2.0 * np.pi * columns[..., None] / cols * np.asarray(orders)


def rope_phases(beam_table, rows, cols, head_dim, vertical_scale=16.0):
    """Per-token rotation angles, shape (rows * cols, head_dim // 2).

    The first half of the rotation pairs carries horizontal harmonics of the
    azimuth, the second half carries beam elevations (pooled to the token
    rows) scaled by ``vertical_scale`` times the same harmonic sequence.
    """
    if head_dim % 4:
        raise error.InvalidArgument('head dimension must be a multiple of 4, got {}'.format(head_dim))
    pairs = head_dim // 2
    n_horizontal = pairs // 2
    n_vertical = pairs - n_horizontal
    elevations = beam_table.pooled(rows)

    horizontal = horizontal_phases(cols, np.arange(cols), harmonics(n_horizontal))
    vertical = elevations[:, None] * vertical_scale * harmonics(n_vertical)
    phases = np.concatenate([
        np.broadcast_to(horizontal[None, :, :], (rows, cols, n_horizontal)),
        np.broadcast_to(vertical[:, None, :], (rows, cols, n_vertical)),
    ], axis=-1)
    return phases.reshape(rows * cols, pairs)


def apply_rope(x, phases):
    """Rotates channel pairs (i, i + d/2) of a (..., tokens, d) Tensor.
    """
    half = x.shape[-1] // 2
    cos, sin = T.Tensor(np.cos(phases)), T.Tensor(np.sin(phases))
    first, second = x[..., :half], x[..., half:]
    return T.concat([first * cos - second * sin, first * sin + second * cos], axis=-1)


def _split_heads(x, heads):
    batch, tokens, dim = x.shape
    return x.reshape(batch, tokens, heads, dim // heads).transpose(0, 2, 1, 3)


def windowed_attention(tokens, phases, window_indices, heads=1, qkv=None, proj=None):
    """Multi-head self-attention over a (B, tokens, C) Tensor.

    Args:
        tokens (Tensor): token grid flattened row-major
        phases (ndarray): rotary angles, shape (tokens, C // heads // 2)
        window_indices (ndarray or None): neighbor indices per token, or
            None for global attention
        heads (int): number of heads
        qkv (Linear or None): joint query/key/value projection; identity if None
        proj (Linear or None): output projection; identity if None

    Returns:
        Tensor of the input shape
    """
    tokens = T.as_tensor(tokens)
    batch, count, dim = tokens.shape
    if dim % heads:
        raise error.ShapeError('{} channels do not split into {} heads'.format(dim, heads))
    head_dim = dim // heads
    if phases.shape != (count, head_dim // 2):
        raise error.ShapeError('phases of shape {} do not match {} tokens with head dim {}'.format(
            phases.shape, count, head_dim))
    if window_indices is not None and window_indices.shape[0] != count:
        raise error.ShapeError('window index map covers {} tokens, grid has {}'.format(
            window_indices.shape[0], count))

    if qkv is None:
        q = k = v = tokens
    else:
        joint = qkv(tokens)
        q, k, v = joint[..., :dim], joint[..., dim:2 * dim], joint[..., 2 * dim:]
    q = apply_rope(_split_heads(q, heads), phases)
    k = apply_rope(_split_heads(k, heads), phases)
    v = _split_heads(v, heads)
    scale = 1.0 / math.sqrt(head_dim)

    if window_indices is None:
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        out = T.softmax(scores, axis=-1) @ v
    else:
        size = window_indices.shape[1]
        k_near = T.gather(k, window_indices, axis=2)
        v_near = T.gather(v, window_indices, axis=2)
        scores = (q.reshape(batch, heads, count, 1, head_dim) * k_near).sum(axis=-1) * scale
        weights = T.softmax(scores, axis=-1).reshape(batch, heads, count, size, 1)
        out = (weights * v_near).sum(axis=-2)

    out = out.transpose(0, 2, 1, 3).reshape(batch, count, dim)
    if proj is not None:
        out = proj(out)
    if not np.all(np.isfinite(out.data)):
        raise error.NumericalError('non-finite attention output (max |token| {:.3g})'.format(
            float(np.nanmax(np.abs(tokens.data)))))
    return out


class CircularAttention(Module):
    """Multi-head self-attention with rotary phases; windowed when given a
    window index map, global otherwise.
    """

    def __init__(self, dim, heads, rng):
        super(CircularAttention, self).__init__()
        self.heads = heads
        self.qkv = self.add_child('qkv', Linear(dim, 3 * dim, rng))
        self.proj = self.add_child('proj', Linear(dim, dim, rng))

    def forward(self, tokens, phases, window_indices=None):
        return windowed_attention(tokens, phases, window_indices, self.heads, self.qkv, self.proj)
