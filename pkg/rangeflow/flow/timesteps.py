import numpy as np

from rangeflow import error

KINDS = ('uniform', 'u-shaped')


class TimeDist(object):
    """Training-time distribution on [0, 1].

    The u-shaped kind has density a * cosh(a * (t - 1/2)) / (2 * sinh(a / 2)),
    symmetric about 1/2 and heaviest at both endpoints. It is sampled by
    its closed-form inverse CDF.

    Args:
        kind ('uniform' or 'u-shaped'): distribution family
        a (float): shape parameter of the u-shaped family
    """

    def __init__(self, kind='uniform', a=4.0):
        if kind not in KINDS:
            raise error.InvalidArgument('unknown time distribution {!r}; choose from {}'.format(kind, KINDS))
        if kind == 'u-shaped' and not a > 0:
            raise error.InvalidArgument('u-shaped shape parameter must be positive, got {}'.format(a))
        self.kind = kind
        self.a = float(a)

    def density(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.kind == 'uniform':
            return np.where((t >= 0) & (t <= 1), 1.0, 0.0)
        a = self.a
        inside = (t >= 0) & (t <= 1)
        return np.where(inside, a * np.cosh(a * (t - 0.5)) / (2.0 * np.sinh(a / 2.0)), 0.0)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        if self.kind == 'uniform':
            return t
        a = self.a
        return (np.sinh(a * (t - 0.5)) + np.sinh(a / 2.0)) / (2.0 * np.sinh(a / 2.0))

    def inverse_cdf(self, f):
        f = np.asarray(f, dtype=np.float64)
        if np.any(f < 0) or np.any(f > 1):
            raise error.InvalidArgument('probabilities must lie in [0, 1]')
        if self.kind == 'uniform':
            return f
        a = self.a
        return np.clip(0.5 + np.arcsinh((2.0 * f - 1.0) * np.sinh(a / 2.0)) / a, 0.0, 1.0)

    def sample(self, rng, size=None):
        return self.inverse_cdf(rng.random(size))

    def to_dict(self):
        return {'kind': self.kind, 'a': self.a}

    def __repr__(self):
        if self.kind == 'uniform':
            return 'TimeDist(uniform)'
        return 'TimeDist(u-shaped, a={:g})'.format(self.a)


def sample_timestep(dist, rng, size=None):
    """Draws training times from ``dist``.
    """
    return dist.sample(rng, size)
