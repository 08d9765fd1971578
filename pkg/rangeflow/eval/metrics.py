"""Distribution metrics: Jensen-Shannon divergence between histograms,
kernel MMD and sliced 2-Wasserstein distance between sample sets.
"""
import logging

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import rel_entr
from scipy.stats import ortho_group

from rangeflow import error
from rangeflow.ode.sampling import sample
from rangeflow.ode.solvers import SolverSpec

logger = logging.getLogger(__name__)


def _mass(histogram):
    return histogram.mass if hasattr(histogram, 'mass') else np.asarray(histogram, dtype=np.float64)


def jsd(p, q):
    """Jensen-Shannon divergence in nats, with 0 log 0 = 0.
    """
    p, q = _mass(p), _mass(q)
    if p.shape != q.shape:
        raise error.ShapeError('histogram grids differ: {} and {}'.format(p.shape, q.shape))
    if np.any(p < 0) or np.any(q < 0):
        raise error.InvalidArgument('histograms must be nonnegative')
    if not (np.isclose(p.sum(), 1.0) and np.isclose(q.sum(), 1.0)):
        raise error.InvalidArgument('histograms must be normalized (sums {} and {})'.format(p.sum(), q.sum()))
    m = 0.5 * (p + q)
    value = 0.5 * rel_entr(p, m).sum() + 0.5 * rel_entr(q, m).sum()
    return float(np.clip(value, 0.0, np.log(2.0)))


def gaussian_kernel(x, y, bandwidth):
    return np.exp(-0.5 * cdist(x, y, 'sqeuclidean') / bandwidth ** 2)


def median_bandwidth(x, y):
    """Median pairwise distance of the pooled sets; 1 when all points coincide.
    """
    distances = pdist(np.concatenate([x, y]))
    median = float(np.median(distances)) if distances.size else 0.0
    return median if median > 0 else 1.0


def _flatten_set(values, name):
    values = np.asarray([_mass(v) for v in values] if isinstance(values, (list, tuple)) else values,
                        dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    values = values.reshape(values.shape[0], -1)
    if values.shape[0] < 2:
        raise error.InvalidArgument('set {} has {} members; MMD needs at least 2'.format(name, values.shape[0]))
    return values


def _mmd_from_kernel(kernel, a, b, biased):
    kaa = kernel[np.ix_(a, a)]
    kbb = kernel[np.ix_(b, b)]
    kab = kernel[np.ix_(a, b)]
    if biased:
        return kaa.mean() + kbb.mean() - 2.0 * kab.mean()
    m, n = len(a), len(b)
    within_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    within_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    if m == n:
        # paired sets: cross pairs (i, i) are dropped as well
        cross = (kab.sum() - np.trace(kab)) / (m * (m - 1))
    else:
        cross = kab.mean()
    return within_a + within_b - 2.0 * cross


def mmd(a, b, bandwidth=None, biased=False):
    """Squared MMD with a Gaussian kernel between two sets of vectors (or
    histograms, flattened).

    The unbiased estimator drops the diagonal of the within-set kernel
    matrices, and of the cross matrix for sets of equal size; the bandwidth
    defaults to the median pairwise distance.
    """
    x, y = _flatten_set(a, 'A'), _flatten_set(b, 'B')
    if x.shape[1] != y.shape[1]:
        raise error.ShapeError('set dimensions differ: {} and {}'.format(x.shape[1], y.shape[1]))
    bandwidth = bandwidth or median_bandwidth(x, y)
    pooled = np.concatenate([x, y])
    index = np.arange(len(pooled))
    kernel = gaussian_kernel(pooled, pooled, bandwidth)
    return float(_mmd_from_kernel(kernel, index[:len(x)], index[len(x):], biased))


def mmd_permutation_test(a, b, n_permutations=200, seed=0, bandwidth=None):
    """Unbiased MMD^2 and its permutation null.

    Returns:
        (statistic, null mean, null standard deviation)
    """
    x, y = _flatten_set(a, 'A'), _flatten_set(b, 'B')
    bandwidth = bandwidth or median_bandwidth(x, y)
    pooled = np.concatenate([x, y])
    kernel = gaussian_kernel(pooled, pooled, bandwidth)
    m = len(x)
    index = np.arange(len(pooled))
    statistic = _mmd_from_kernel(kernel, index[:m], index[m:], biased=False)
    rng = np.random.default_rng(seed)
    null = np.empty(n_permutations)
    for i in range(n_permutations):
        perm = rng.permutation(index)
        null[i] = _mmd_from_kernel(kernel, perm[:m], perm[m:], biased=False)
    return float(statistic), float(null.mean()), float(null.std(ddof=1))


def wasserstein2_1d(a, b):
    """Exact 2-Wasserstein distance between two empirical 1-D measures with
    uniform weights, via their quantile functions.
    """
    a, b = np.sort(np.ravel(a)), np.sort(np.ravel(b))
    n, m = len(a), len(b)
    if n == m:
        return float(np.sqrt(np.mean((a - b) ** 2)))
    levels = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    widths = np.diff(np.concatenate([[0.0], levels]))
    mids = levels - widths / 2.0
    ia = np.minimum((mids * n).astype(np.int64), n - 1)
    ib = np.minimum((mids * m).astype(np.int64), m - 1)
    return float(np.sqrt(np.sum(widths * (a[ia] - b[ib]) ** 2)))


def projection_directions(dim, count, rng):
    """``count`` unit directions drawn as rows of random orthogonal matrices.
    """
    if dim == 1:
        return np.ones((count, 1))
    blocks = []
    while sum(len(b) for b in blocks) < count:
        blocks.append(ortho_group.rvs(dim, random_state=rng))
    return np.concatenate(blocks)[:count]


def sliced_w2(a, b, projections=64, seed=0):
    """Mean over random unit projections of the 1-D 2-Wasserstein distance.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.ndim == 1:
        x, y = x[:, None], y.reshape(-1, 1)
    x, y = x.reshape(len(x), -1), y.reshape(len(y), -1)
    if len(x) == 0 or len(y) == 0:
        raise error.InvalidArgument('sliced W2 needs nonempty sets')
    if x.shape[1] != y.shape[1]:
        raise error.ShapeError('set dimensions differ: {} and {}'.format(x.shape[1], y.shape[1]))
    if projections < 1:
        raise error.InvalidArgument('need at least one projection, got {}'.format(projections))
    if x.shape[1] == 1:
        return wasserstein2_1d(x, y)
    directions = projection_directions(x.shape[1], projections, np.random.default_rng(seed))
    px, py = x @ directions.T, y @ directions.T
    return float(np.mean([wasserstein2_1d(px[:, i], py[:, i]) for i in range(projections)]))


def bootstrap_stderr(metric, a, b, n_boot=100, seed=0):
    """Standard error of ``metric(a, b)`` from resampling both sets with
    replacement.
    """
    a, b = np.asarray(a), np.asarray(b)
    rng = np.random.default_rng(seed)
    values = np.empty(n_boot)
    for i in range(n_boot):
        values[i] = metric(a[rng.integers(len(a), size=len(a))], b[rng.integers(len(b), size=len(b))])
    return float(values.std(ddof=1))


def nfe_sweep(model, data, steps=(1, 2, 4, 8, 16, 32, 64, 128, 256), n=2000, seed=0, stage=None,
              method='euler', projections=64):
    """Sliced W2 between model samples and ``data`` at several step counts.

    Distilled models are only evaluated at their own step count.

    Returns:
        list of (nfe, sliced W2)
    """
    if stage is not None and stage.distilled:
        steps, method = [stage.k], 'euler'
    rows = []
    for count in steps:
        spec = SolverSpec(method, steps=count)
        samples, nfe, _ = sample(model, n, spec, seed, stage)
        value = sliced_w2(samples.reshape(n, -1), np.asarray(data).reshape(len(data), -1), projections, seed)
        rows.append((int(nfe[0]) if n else 0, value))
        logger.info('%s: sliced W2 %.5g at %d evaluations', spec.describe(), value, rows[-1][0])
    return rows
