import logging

import numpy as np

from rangeflow import error
from rangeflow.ode.solvers import SolverSpec, integrate

logger = logging.getLogger(__name__)


def check_schedule(stage, spec):
    """Rejects solver specs a stage cannot be sampled with: a k-TD model is
    only defined on its own forward k-step Euler grid.
    """
    if stage is None or not stage.distilled:
        return
    if spec.method != 'euler' or spec.steps != stage.k or spec.direction != 'forward':
        raise error.StageError(
            '{} models sample with exactly {} forward Euler steps on the grid {}; got {}'.format(
                stage.label, stage.k, stage.step_grid().tolist(), spec.describe()))


def draw_latents(shape, n, seed):
    return np.random.default_rng(seed).standard_normal((n,) + tuple(shape))


def sample(model, n, spec, seed, stage=None, batch_size=1024):
    """Draws n latents from ``seed`` and integrates them forward.

    Returns (samples, nfe, latents); ``nfe`` holds the evaluation count of
    each sample's integration.
    """
    check_schedule(stage, spec)
    if spec.direction != 'forward':
        raise error.InvalidArgument('sampling integrates forward, got a {} solver'.format(spec.direction))
    if n < 0:
        raise error.InvalidArgument('sample count must be nonnegative, got {}'.format(n))
    latents = draw_latents(model.data_shape, n, seed)
    samples, nfe = generate(model, latents, spec, batch_size=batch_size)
    return samples, nfe, latents


def generate(model, latents, spec, stage=None, batch_size=1024):
    """Integrates given latents forward. Returns (samples, nfe).
    """
    check_schedule(stage, spec)
    if spec.direction != 'forward':
        raise error.InvalidArgument('generation integrates forward, got a {} solver'.format(spec.direction))
    return _integrate_batches(model, np.asarray(latents, dtype=np.float64), spec, batch_size)


def invert(model, x1, spec, stage=None, batch_size=1024):
    """Maps data states to their latent embeddings by reverse integration.

    Returns (x0, nfe).
    """
    if spec.direction != 'reverse':
        raise error.InvalidArgument('inversion needs a reverse solver, got {}'.format(spec.describe()))
    if stage is not None and stage.distilled:
        raise error.StageError('{} models are only defined for forward sampling'.format(stage.label))
    x1 = np.asarray(x1, dtype=np.float64)
    single = x1.shape == model.data_shape
    if single:
        x1 = x1[None]
    x0, nfe = _integrate_batches(model, x1, spec, batch_size)
    return (x0[0], nfe[0]) if single else (x0, nfe)


def _integrate_batches(model, states, spec, batch_size):
    if states.shape[1:] != model.data_shape:
        raise error.ShapeError('{} model expects states of shape {}, got {}'.format(
            model.kind, model.data_shape, states.shape[1:]))
    out = np.empty_like(states)
    nfe = np.zeros(len(states), dtype=np.int64)
    for start in range(0, len(states), batch_size):
        chunk = slice(start, start + batch_size)
        out[chunk], trajectory = integrate(model, states[chunk], spec)
        nfe[chunk] = trajectory.nfe
        logger.debug('integrated %d states with %s: %d evaluations',
                     len(states[chunk]), spec.describe(), trajectory.nfe)
    return out, nfe


def slerp(z0, z1, lam):
    """Spherical linear interpolation between two latents.

    ``lam`` is a scalar in [0, 1] or a 1-D array of them; an array yields one
    latent per entry along a new leading axis.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    if z0.shape != z1.shape:
        raise error.ShapeError('cannot interpolate latents of shapes {} and {}'.format(z0.shape, z1.shape))
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0) or np.any(lam > 1):
        raise error.InvalidArgument('interpolation weights must lie in [0, 1], got {}'.format(lam))
    a, b = z0.ravel(), z1.ravel()
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise error.InvalidArgument('cannot interpolate from a zero latent')
    omega = np.arccos(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))
    if omega >= np.pi - 1e-6:
        raise error.InvalidArgument('latents are antipodal (angle {:.9g})'.format(omega))

    weights = np.atleast_1d(lam)
    if omega < 1e-12:
        out = (1 - weights)[:, None] * a + weights[:, None] * b
    else:
        out = (np.sin((1 - weights) * omega)[:, None] * a + np.sin(weights * omega)[:, None] * b) / np.sin(omega)
    out[weights == 0] = a
    out[weights == 1] = b
    out = out.reshape((len(weights),) + z0.shape)
    return out[0] if lam.ndim == 0 else out


def reverse_spec(spec):
    """Inversion counterpart of a sampling spec."""
    return spec.replace(direction='reverse') if isinstance(spec, SolverSpec) else spec
