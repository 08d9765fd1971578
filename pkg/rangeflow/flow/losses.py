"""Velocity regression objectives.

Inputs with a leading batch axis are reduced per sample over every other
axis and then averaged over the batch; a 1-D input is one sample.
"""
import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T

LOSSES = ('l2', 'pseudo-huber')
HUBER_SCALE = 0.00054


def interpolate_state(x0, x1, t):
    """x_t = t * x1 + (1 - t) * x0, with t a scalar or one value per sample.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise error.ShapeError('cannot interpolate between shapes {} and {}'.format(x0.shape, x1.shape))
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise error.InvalidArgument('interpolation time must lie in [0, 1]')
    if t.ndim == 1:
        if t.shape[0] != x0.shape[0]:
            raise error.ShapeError('{} times for a batch of {}'.format(t.shape[0], x0.shape[0]))
        t = t.reshape((-1,) + (1,) * (x0.ndim - 1))
    return t * x1 + (1.0 - t) * x0


def huber_constant(d):
    """c = 0.00054 * sqrt(d) for d scalar elements per sample.
    """
    if d <= 0:
        raise error.InvalidArgument('element count must be positive, got {}'.format(d))
    return HUBER_SCALE * np.sqrt(d)


def squared_residual(v_pred, target):
    """Per-sample squared norm of target - v_pred, as a Tensor of shape (B,)
    (or a scalar for 1-D inputs).
    """
    v_pred = T.as_tensor(v_pred)
    target = np.asarray(target, dtype=v_pred.dtype)
    if v_pred.shape != target.shape:
        raise error.ShapeError('prediction of shape {} does not match target of shape {}'.format(
            v_pred.shape, target.shape))
    residual = T.Tensor(target) - v_pred
    squared = residual * residual
    if squared.ndim <= 1:
        return squared.sum()
    return squared.sum(axis=tuple(range(1, squared.ndim)))


def velocity_loss(v_pred, target, kind='l2', d=None):
    """Batch mean of the squared residual norm ('l2') or of
    sqrt(|r|^2 + c^2) - c ('pseudo-huber').
    """
    sq = squared_residual(v_pred, target)
    if kind == 'l2':
        return sq.mean()
    if kind == 'pseudo-huber':
        if d is None:
            shape = np.shape(target)
            d = int(np.prod(shape[1:])) if len(shape) > 1 else int(np.prod(shape))
        c = huber_constant(d)
        return (T.sqrt(sq + c * c) - c).mean()
    raise error.InvalidArgument('unknown loss {!r}; choose from {}'.format(kind, LOSSES))


def cfm_loss(v_pred, x0, x1):
    """Flow-matching loss against the straight-path target x1 - x0.
    """
    x0, x1 = np.asarray(x0), np.asarray(x1)
    if x0.shape != x1.shape:
        raise error.ShapeError('pair shapes differ: {} and {}'.format(x0.shape, x1.shape))
    return velocity_loss(v_pred, x1 - x0, 'l2')


def pseudo_huber_loss(v_pred, x0, x1, d=None):
    x0, x1 = np.asarray(x0), np.asarray(x1)
    if x0.shape != x1.shape:
        raise error.ShapeError('pair shapes differ: {} and {}'.format(x0.shape, x1.shape))
    if d is not None and d <= 0:
        raise error.InvalidArgument('element count must be positive, got {}'.format(d))
    return velocity_loss(v_pred, x1 - x0, 'pseudo-huber', d)
