import numpy as np

from rangeflow import error

DEFAULT_EXTENT = (-50.0, 50.0)
DEFAULT_BINS = 100


class BevHistogram(object):
    """Bird's-eye-view occupancy of a point cloud on a square grid.

    ``mass`` sums to 1 when any point fell inside the extent; otherwise it
    is all zero and ``normalized`` is False.
    """

    def __init__(self, mass, extent=DEFAULT_EXTENT, normalized=True):
        self.mass = np.asarray(mass, dtype=np.float64)
        self.extent = tuple(float(e) for e in extent)
        self.normalized = bool(normalized)

    @property
    def bins(self):
        return self.mass.shape[0]

    @property
    def shape(self):
        return self.mass.shape

    def vector(self):
        return self.mass.ravel()


def bev_histogram(cloud, extent=DEFAULT_EXTENT, bins=DEFAULT_BINS):
    """Counts points into a bins x bins grid over extent x extent in (x, y)
    and normalizes; points outside the extent are ignored.
    """
    if bins < 1:
        raise error.InvalidArgument('need at least one bin, got {}'.format(bins))
    low, high = extent
    if not high > low:
        raise error.InvalidArgument('empty extent {}'.format(extent))
    xyz = cloud.xyz if hasattr(cloud, 'xyz') else np.asarray(cloud, dtype=np.float64)[:, :3]
    counts, _, _ = np.histogram2d(xyz[:, 0], xyz[:, 1], bins=bins, range=[extent, extent])
    total = counts.sum()
    if total == 0:
        return BevHistogram(counts, extent, normalized=False)
    return BevHistogram(counts / total, extent)


def mean_histogram(histograms):
    """Average of normalized histograms sharing one grid.
    """
    histograms = [h for h in histograms if h.normalized]
    if not histograms:
        raise error.DataError('no nonempty histograms to average')
    shapes = {(h.shape, h.extent) for h in histograms}
    if len(shapes) > 1:
        raise error.ShapeError('histograms use different grids: {}'.format(sorted(shapes)))
    return BevHistogram(np.mean([h.mass for h in histograms], axis=0), histograms[0].extent)
