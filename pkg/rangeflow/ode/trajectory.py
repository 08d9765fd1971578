import csv

import numpy as np

from rangeflow import error

# states with at most this many elements per sample are exported per dimension
MAX_CSV_DIMS = 16


class Trajectory(object):
    """Ordered (t, state) samples of one integration run.

    ``states`` hold whatever was integrated: a single state or a batch with
    the batch axis first. ``nfe`` is the exact number of velocity
    evaluations the run performed.
    """

    def __init__(self, meta=''):
        self.meta = meta
        self.times = []
        self.states = []
        self.nfe = 0
        self.end_time = None

    def __len__(self):
        return len(self.times)

    def append(self, t, x):
        t = float(t)
        if self.times and len(self.times) > 1:
            direction = np.sign(self.times[1] - self.times[0])
            if np.sign(t - self.times[-1]) != direction:
                raise error.InvalidArgument('trajectory times must stay monotone, got {} after {}'.format(
                    t, self.times[-1]))
        elif self.times and t == self.times[-1]:
            raise error.InvalidArgument('duplicate trajectory time {}'.format(t))
        self.times.append(t)
        self.states.append(np.array(x, copy=True))

    def time_array(self):
        return np.asarray(self.times)

    def state_array(self):
        """Recorded states stacked along a new leading time axis.
        """
        if not self.states:
            return np.zeros((0,))
        return np.stack(self.states)

    def state_at(self, t, atol=1e-12):
        """State recorded at time ``t``; InvalidArgument if none was recorded.
        """
        times = self.time_array()
        hits = np.flatnonzero(np.abs(times - t) <= atol)
        if hits.size == 0:
            raise error.InvalidArgument('no state recorded at t={:.6g}'.format(t))
        return self.states[hits[0]]

    def to_csv(self, path, batched=True):
        """Writes columns (t, sample, state dims) for small states or
        (t, sample, norm, max_abs) otherwise, then an ``nfe`` footer row.
        """
        states = self.state_array()
        if not batched:
            states = states[:, None]
        batch = states.shape[1] if states.ndim > 1 else 0
        flat = states.reshape(len(self.times), batch, -1) if batch else states
        per_dim = batch and flat.shape[-1] <= MAX_CSV_DIMS
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            if per_dim:
                writer.writerow(['t', 'sample'] + ['x{}'.format(i) for i in range(flat.shape[-1])])
            else:
                writer.writerow(['t', 'sample', 'norm', 'max_abs'])
            for t, rows in zip(self.times, flat):
                for i, row in enumerate(rows):
                    if per_dim:
                        writer.writerow(['{!r}'.format(t), i] + ['{!r}'.format(float(v)) for v in row])
                    else:
                        writer.writerow(['{!r}'.format(t), i, '{!r}'.format(float(np.linalg.norm(row))),
                                         '{!r}'.format(float(np.abs(row).max()))])
            writer.writerow(['nfe', self.nfe])
        return path
