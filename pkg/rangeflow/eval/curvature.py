"""Trajectory curvature.

For a trajectory from x0 with endpoint x1 = Phi(x0, 1), the curvature at
time t is s(t) = |(x1 - x0) - v(Phi(x0, t), t)|^2: the squared deviation of
the instantaneous velocity from the chord. It vanishes for all t exactly
when the trajectory is straight.
"""
import csv
import logging

import numpy as np

from rangeflow import error
from rangeflow.ode.solvers import CountingField, integrate

logger = logging.getLogger(__name__)

TOP_K = 200


class CurvatureProfile(object):
    """Curvature of a set of trajectories on a time grid.

    Args:
        times (ndarray): (T,) evaluation times, increasing
        values (ndarray): (n, T) curvature of each trajectory at each time
        excluded (int): trajectories dropped after integration failures
    """

    def __init__(self, times, values, excluded=0):
        self.times = np.asarray(times, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        assert self.values.ndim == 2 and self.values.shape[1] == self.times.size
        self.excluded = int(excluded)

    def __len__(self):
        return self.values.shape[0]

    @property
    def mean(self):
        return self.values.mean(axis=0) if len(self) else np.zeros_like(self.times)

    def percentile(self, q=95):
        return np.percentile(self.values, q, axis=0) if len(self) else np.zeros_like(self.times)

    def weights(self):
        """Width of the time cell each grid point stands for (up to t = 1).
        """
        edges = np.append(self.times, 1.0)
        return np.diff(edges)

    def integrals(self):
        """Per-trajectory left Riemann sum of s(t) over [0, 1].
        """
        return self.values @ self.weights()

    @property
    def mean_integral(self):
        return float(self.integrals().mean()) if len(self) else 0.0

    def top_k(self, k=TOP_K):
        """Indices of the k most curved trajectories, most curved first.
        """
        order = np.argsort(-self.integrals(), kind='stable')
        return order[:k]

    def write_csv(self, path, digest=''):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['t', 'mean_s', 'p95_s', 'config_digest'])
            for t, mean, p95 in zip(self.times, self.mean, self.percentile(95)):
                writer.writerow(['{!r}'.format(float(t)), '{!r}'.format(float(mean)),
                                 '{!r}'.format(float(p95)), digest])
        return path

    def write_top_k_csv(self, path, k=TOP_K, digest=''):
        """Per-step rows (rank, trajectory, t, s) of the k most curved trajectories.
        """
        integrals = self.integrals()
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['rank', 'trajectory', 'integral', 't', 's', 'config_digest'])
            for rank, index in enumerate(self.top_k(k)):
                for t, s in zip(self.times, self.values[index]):
                    writer.writerow([rank, int(index), '{!r}'.format(float(integrals[index])),
                                     '{!r}'.format(float(t)), '{!r}'.format(float(s)), digest])
        return path


def _integrate_recorded(model, x0, solver, batch_size):
    """Integrates every start state; returns (times, states, ok) with states
    of shape (T, n) + state shape.
    """
    chunks, ok = [], np.ones(len(x0), dtype=bool)
    times = solver.grid()
    for start in range(0, len(x0), batch_size):
        batch = x0[start:start + batch_size]
        try:
            _, trajectory = integrate(model, batch, solver)
            chunks.append(trajectory.state_array())
        except error.NumericalError:
            rows = []
            for i in range(len(batch)):
                try:
                    _, trajectory = integrate(model, batch[i:i + 1], solver)
                    rows.append(trajectory.state_array())
                except error.NumericalError as failure:
                    logger.debug('trajectory %d excluded: %s', start + i, failure)
                    ok[start + i] = False
            if rows:
                chunks.append(np.concatenate(rows, axis=1))
    if not chunks:
        return times, None, ok
    return times, np.concatenate(chunks, axis=1), ok


def curvature(model, x0, solver, time_grid=None, per_element=False, batch_size=1024):
    """Curvature profile of the trajectories started at x0.

    Args:
        model (VelocityNet or callable): velocity field
        x0 (ndarray): (n,) + state shape start states
        solver (SolverSpec): fixed-step forward solver; states are recorded
        time_grid (array_like): evaluation times in [0, 1), a subset of the
            solver grid; defaults to every step's left endpoint
        per_element (boolean): treat every scalar element as a trajectory

    Returns:
        CurvatureProfile
    """
    if solver.adaptive:
        raise error.InvalidArgument('curvature needs a fixed-step solver so all trajectories share a grid')
    if solver.direction != 'forward':
        raise error.InvalidArgument('curvature integrates forward, got {}'.format(solver.describe()))
    solver = solver.replace(record=True)
    x0 = np.asarray(x0, dtype=np.float64)
    grid = solver.grid()[:-1]
    if time_grid is None:
        time_grid = grid
    else:
        time_grid = np.asarray(time_grid, dtype=np.float64)
        if np.any(time_grid < 0) or np.any(time_grid >= 1):
            raise error.InvalidArgument('curvature times must lie in [0, 1)')
        missing = [t for t in time_grid if not np.any(np.abs(grid - t) <= 1e-9)]
        if missing:
            raise error.InvalidArgument('times {} are not on the {} grid'.format(missing, solver.describe()))

    times, states, ok = _integrate_recorded(model, x0, solver, batch_size)
    excluded = int(np.count_nonzero(~ok))
    if excluded:
        logger.warning('excluded %d of %d trajectories after solver failures', excluded, len(x0))
    width = int(np.prod(x0.shape[1:])) if per_element else 1
    if states is None:
        return CurvatureProfile(time_grid, np.zeros((0, len(time_grid))), excluded)

    field = CountingField(model)
    start, end = states[0], states[-1]
    chord = end - start
    columns = []
    for t in time_grid:
        index = int(np.argmin(np.abs(times - t)))
        residual = chord - field(states[index], times[index])
        flat = residual.reshape(residual.shape[0], -1) ** 2
        columns.append(flat.ravel() if per_element else flat.sum(axis=1))
    values = np.stack(columns, axis=1)
    assert values.shape[0] == states.shape[1] * width
    return CurvatureProfile(time_grid, values, excluded)
