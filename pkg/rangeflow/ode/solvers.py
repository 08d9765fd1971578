"""Integrators for dx/dt = v(x, t) over the unit flow interval.

Fixed-step methods run on the uniform grid t_n = n / N (or 1 - n / N in
reverse). ``dopri5`` is the Dormand-Prince 5(4) pair: with ``steps`` it
propagates the 5th-order solution on the uniform grid, without it the
embedded 4th-order solution drives step-size control (local extrapolation,
first-same-as-last stage reuse).

Reverse integration traverses time from 1 to 0 with negative steps; the
field itself is not negated.
"""
import logging

import numpy as np

from rangeflow import error
from rangeflow.ode.trajectory import Trajectory

logger = logging.getLogger(__name__)

METHODS = ('euler', 'midpoint', 'dopri5')
_ALIASES = {'adaptive-rk45': 'dopri5', 'rk45': 'dopri5'}

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th minus embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


class SolverSpec(object):
    """Integration policy.

    Args:
        method ('euler', 'midpoint' or 'dopri5'): integration scheme
        steps (int): step count of a fixed-step run; for dopri5, None
            selects adaptive stepping
        atol (float): absolute tolerance of adaptive stepping
        rtol (float): relative tolerance of adaptive stepping
        direction ('forward' or 'reverse'): 0 -> 1 or 1 -> 0
        record (boolean): keep every accepted (t, state) in the trajectory
        min_step (float): adaptive step-size floor; smaller steps fail
        max_steps (int): cap on accepted adaptive steps
    """

    def __init__(self, method='euler', steps=None, atol=None, rtol=None, direction='forward',
                 record=False, min_step=1e-10, max_steps=100000):
        method = _ALIASES.get(method, method)
        if method not in METHODS:
            raise error.InvalidArgument('unknown solver method {!r}; choose from {}'.format(method, METHODS))
        if direction not in ('forward', 'reverse'):
            raise error.InvalidArgument('direction must be forward or reverse, got {!r}'.format(direction))
        if steps is not None:
            steps = int(steps)
            if steps < 1:
                raise error.InvalidArgument('step count must be at least 1, got {}'.format(steps))
        elif method != 'dopri5':
            raise error.InvalidArgument('{} needs a step count'.format(method))
        if method == 'dopri5' and steps is None:
            atol = 1e-5 if atol is None else float(atol)
            rtol = 1e-5 if rtol is None else float(rtol)
            if atol <= 0 or rtol <= 0:
                raise error.InvalidArgument('adaptive tolerances must be positive, got atol={} rtol={}'.format(
                    atol, rtol))
        self.method = method
        self.steps = steps
        self.atol = atol
        self.rtol = rtol
        self.direction = direction
        self.record = record
        self.min_step = min_step
        self.max_steps = max_steps

    @property
    def adaptive(self):
        return self.method == 'dopri5' and self.steps is None

    @property
    def span(self):
        return (0.0, 1.0) if self.direction == 'forward' else (1.0, 0.0)

    def grid(self, span=None):
        """Fixed-step timestamps, strictly monotone in the integration direction.
        """
        if self.adaptive:
            raise error.InvalidArgument('adaptive solvers have no fixed grid')
        t0, t1 = span or self.span
        if (t0, t1) == (0.0, 1.0):
            return np.arange(self.steps + 1) / self.steps
        if (t0, t1) == (1.0, 0.0):
            return (self.steps - np.arange(self.steps + 1)) / self.steps
        return t0 + (t1 - t0) * np.arange(self.steps + 1) / self.steps

    def replace(self, **changes):
        fields = self.to_dict()
        fields.update(changes)
        return SolverSpec(**fields)

    def reversed(self):
        return self.replace(direction='reverse' if self.direction == 'forward' else 'forward')

    def to_dict(self):
        return {'method': self.method, 'steps': self.steps, 'atol': self.atol, 'rtol': self.rtol,
                'direction': self.direction, 'record': self.record, 'min_step': self.min_step,
                'max_steps': self.max_steps}

    @classmethod
    def from_dict(cls, fields):
        return cls(**fields)

    def describe(self):
        if self.adaptive:
            return '{} atol={:g} rtol={:g} {}'.format(self.method, self.atol, self.rtol, self.direction)
        return '{} steps={} {}'.format(self.method, self.steps, self.direction)

    def __eq__(self, other):
        return isinstance(other, SolverSpec) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'SolverSpec({})'.format(self.describe())


class CountingField(object):
    """Wraps a velocity model (or a plain callable f(x, t)) and counts every
    evaluation.
    """

    def __init__(self, model):
        self.model = model
        self.nfe = 0
        self._evaluate = model.velocity if hasattr(model, 'velocity') else model

    def __call__(self, x, t):
        self.nfe += 1
        v = np.asarray(self._evaluate(x, t), dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise error.NumericalError('non-finite velocity at t={:.6g} (state norm {:.6g})'.format(
                float(t), float(np.linalg.norm(x))))
        return v


def euler_step(model, x, t0, t1):
    """x + (t1 - t0) * v(x, t0); exactly one model evaluation.
    """
    if t0 == t1:
        raise error.InvalidArgument('euler step needs distinct times, got t0 = t1 = {}'.format(t0))
    field = model if isinstance(model, CountingField) else CountingField(model)
    return x + (t1 - t0) * field(x, t0)


def midpoint_step(field, x, t0, t1):
    h = t1 - t0
    k1 = field(x, t0)
    return x + h * field(x + 0.5 * h * k1, t0 + 0.5 * h)


def dopri5_step(field, x, t, h, k1=None, with_error=True):
    """One Dormand-Prince step. Returns (x_next, error_estimate, k_last);
    ``k_last`` is v(x_next, t + h) and starts the next step. Without
    ``with_error`` only the six propagating stages are evaluated.
    """
    k = [field(x, t) if k1 is None else k1]
    for i in range(1, 6):
        dx = sum(a * ki for a, ki in zip(_A[i], k) if a != 0.0)
        k.append(field(x + h * dx, t + _C[i] * h))
    x_next = x + h * sum(b * ki for b, ki in zip(_B5[:6], k) if b != 0.0)
    if not with_error:
        return x_next, None, None
    k.append(field(x_next, t + h))
    err = h * sum(e * ki for e, ki in zip(_E, k) if e != 0.0)
    return x_next, err, k[6]


def _error_norm(err, scale):
    ratio = err / scale
    if ratio.ndim >= 2:
        per_sample = np.sqrt(np.mean(ratio.reshape(ratio.shape[0], -1) ** 2, axis=1))
        return float(per_sample.max()) if per_sample.size else 0.0
    return float(np.sqrt(np.mean(ratio ** 2)))


def integrate(model, x_start, spec, span=None):
    """Integrates from x_start over ``span`` (the spec's unit interval by
    default). Returns (x_end, Trajectory).
    """
    field = CountingField(model)
    x = np.array(x_start, dtype=np.float64)
    t0, t1 = span or spec.span
    trajectory = Trajectory(meta=spec.describe())
    if spec.record:
        trajectory.append(t0, x)

    if spec.adaptive:
        x = _integrate_adaptive(field, x, t0, t1, spec, trajectory)
    else:
        grid = spec.grid((t0, t1))
        for ta, tb in zip(grid[:-1], grid[1:]):
            if spec.method == 'euler':
                x = euler_step(field, x, ta, tb)
            elif spec.method == 'midpoint':
                x = midpoint_step(field, x, ta, tb)
            else:
                x, _, _ = dopri5_step(field, x, ta, tb - ta, with_error=False)
            if not np.all(np.isfinite(x)):
                raise error.SolverError('non-finite state at t={:.6g}'.format(tb), t=ta, state=x)
            if spec.record:
                trajectory.append(tb, x)

    trajectory.nfe = field.nfe
    trajectory.end_time = t1
    return x, trajectory


def _initial_step(field, x, t0, direction, f0, atol, rtol, span_length):
    scale = atol + np.abs(x) * rtol
    d0 = np.sqrt(np.mean((x / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span_length)
    f1 = field(x + direction * h0 * f0, t0 + direction * h0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100 * h0, h1, span_length)


def _integrate_adaptive(field, x, t0, t1, spec, trajectory):
    direction = 1.0 if t1 > t0 else -1.0
    span_length = abs(t1 - t0)
    t = t0
    k1 = field(x, t)
    h = _initial_step(field, x, t, direction, k1, spec.atol, spec.rtol, span_length)
    accepted = rejected = 0
    just_rejected = False

    while direction * (t1 - t) > 0:
        if h < spec.min_step:
            raise error.SolverError('step size underflow ({:.3g} < {:.3g}) at t={:.6g}'.format(
                h, spec.min_step, t), t=t, state=x)
        remaining = abs(t1 - t)
        last = h >= remaining * (1 - 1e-12)
        step = remaining if last else h
        x_new, err, k_last = dopri5_step(field, x, t, direction * step, k1)
        scale = spec.atol + spec.rtol * np.maximum(np.abs(x), np.abs(x_new))
        norm = _error_norm(err, scale) if np.all(np.isfinite(x_new)) else np.inf

        if norm <= 1.0:
            t = t1 if last else t + direction * step
            x, k1 = x_new, k_last
            accepted += 1
            if spec.record:
                trajectory.append(t, x)
            factor = 10.0 if norm == 0 else min(10.0, 0.9 * norm ** -0.2)
            if just_rejected:
                factor = min(1.0, factor)
            just_rejected = False
            if accepted > spec.max_steps:
                raise error.SolverError('exceeded {} adaptive steps'.format(spec.max_steps), t=t, state=x)
        else:
            rejected += 1
            factor = 0.2 if not np.isfinite(norm) else max(0.2, 0.9 * norm ** -0.2)
            just_rejected = True
        h = step * factor

    logger.debug('dopri5 finished: %d accepted, %d rejected, %d evaluations',
                 accepted, rejected, field.nfe)
    return x
