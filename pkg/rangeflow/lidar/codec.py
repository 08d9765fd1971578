"""Log-range encoding and the model-space view of range images.

Range images have two channels in [0, 1]: the log-encoded range
log(r + 1) / log(x_max + 1) and the reflectance. Model space maps both
affinely to [-1, 1] and marks raydrop pixels with -1 in both channels.
"""
import logging

import numpy as np

from rangeflow import error
from rangeflow.lidar.beams import BeamTable

logger = logging.getLogger(__name__)

DEFAULT_X_MAX = 80.0
RAYDROP_EPS = 2.0 / 255.0
SENTINEL = -1.0


class ClampCounter(object):
    """Counts values clamped into range during one run.
    """

    def __init__(self):
        self.count = 0

    def add(self, n, what):
        n = int(n)
        if n:
            self.count += n
            logger.debug('clamped %d %s values', n, what)

    def report(self, what='range'):
        if self.count:
            logger.warning('%d %s values were out of range and clamped', self.count, what)


def _clamp(values, low, high, counter, what):
    values = np.asarray(values, dtype=np.float64)
    outside = (values < low) | (values > high)
    if counter is not None:
        counter.add(np.count_nonzero(outside), what)
    return np.clip(values, low, high)


def encode_log(x_range, x_max=DEFAULT_X_MAX, counter=None):
    """log(r + 1) / log(x_max + 1); ranges outside [0, x_max] are clamped.
    """
    if not x_max > 0:
        raise error.InvalidArgument('x_max must be positive, got {}'.format(x_max))
    x_range = _clamp(x_range, 0.0, x_max, counter, 'range')
    return np.log1p(x_range) / np.log1p(x_max)


def decode_log(x_log, x_max=DEFAULT_X_MAX, counter=None):
    """Inverse of ``encode_log``; codes outside [0, 1] are clamped.
    """
    if not x_max > 0:
        raise error.InvalidArgument('x_max must be positive, got {}'.format(x_max))
    x_log = _clamp(x_log, 0.0, 1.0, counter, 'log-range')
    return np.expm1(x_log * np.log1p(x_max))


class PointCloud(object):
    """Points as an (N, 4) array of x, y, z in meters and reflectance in [0, 1].
    """

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.size == 0:
            points = points.reshape(0, 4)
        if points.ndim != 2 or points.shape[1] != 4:
            raise error.ShapeError('point clouds are (N, 4) arrays, got {}'.format(points.shape))
        if not np.all(np.isfinite(points)):
            raise error.DataError('point cloud holds non-finite values')
        if np.any(points[:, 3] < 0) or np.any(points[:, 3] > 1):
            raise error.DataError('reflectance must lie in [0, 1]')
        self.points = points

    def __len__(self):
        return self.points.shape[0]

    @property
    def xyz(self):
        return self.points[:, :3]

    @property
    def reflectance(self):
        return self.points[:, 3]

    def ranges(self):
        return np.linalg.norm(self.xyz, axis=1)


class RangeImage(object):
    """Two-channel equirectangular image of one sweep.

    Args:
        log_range (ndarray): (H, W) log-encoded range in [0, 1]
        reflectance (ndarray): (H, W) reflectance in [0, 1]
        mask (ndarray): (H, W) boolean, True where the ray dropped
        beams (BeamTable): elevation of each row
        x_max (float): range encoded as 1
    """

    def __init__(self, log_range, reflectance, mask, beams, x_max=DEFAULT_X_MAX):
        log_range = np.asarray(log_range, dtype=np.float64)
        reflectance = np.asarray(reflectance, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if log_range.ndim != 2 or log_range.shape != reflectance.shape or log_range.shape != mask.shape:
            raise error.ShapeError('channels {}, {} and mask {} must share one (H, W) shape'.format(
                log_range.shape, reflectance.shape, mask.shape))
        if not isinstance(beams, BeamTable):
            beams = BeamTable(beams)
        if beams.height != log_range.shape[0]:
            raise error.ShapeError('beam table has {} rows, image has {}'.format(beams.height, log_range.shape[0]))
        valid = ~mask
        for name, channel in (('log-range', log_range), ('reflectance', reflectance)):
            if np.any(channel[valid] < 0) or np.any(channel[valid] > 1):
                raise error.DataError('{} channel leaves [0, 1] at unmasked pixels'.format(name))
        self.log_range = np.where(mask, 0.0, log_range)
        self.reflectance = np.where(mask, 0.0, reflectance)
        self.mask = mask
        self.beams = beams
        self.x_max = float(x_max)

    @property
    def shape(self):
        return self.log_range.shape

    @property
    def height(self):
        return self.shape[0]

    @property
    def width(self):
        return self.shape[1]

    @classmethod
    def empty(cls, beams, width, x_max=DEFAULT_X_MAX):
        shape = (beams.height, width)
        return cls(np.zeros(shape), np.zeros(shape), np.ones(shape, dtype=bool), beams, x_max)

    def ranges(self, counter=None):
        """Decoded ranges in meters, zero at raydrop pixels.
        """
        return np.where(self.mask, 0.0, decode_log(self.log_range, self.x_max, counter))


def to_model_space(image):
    """(2, H, W) array in [-1, 1]; raydrop pixels are -1 in both channels.
    """
    out = 2.0 * np.stack([image.log_range, image.reflectance]) - 1.0
    out[:, image.mask] = SENTINEL
    return out


def from_model_space(values, beams, x_max=DEFAULT_X_MAX, counter=None):
    """Reads a (2, H, W) model-space array back into a RangeImage.

    Pixels whose range channel is below -1 + 2/255 are raydrop; the rest are
    clamped to [-1, 1].
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[0] != 2:
        raise error.ShapeError('model-space images are (2, H, W), got {}'.format(values.shape))
    mask = values[0] < SENTINEL + RAYDROP_EPS
    kept = values[:, ~mask]
    if counter is not None:
        counter.add(np.count_nonzero((kept < -1) | (kept > 1)), 'model-space')
    unit = (np.clip(values, -1.0, 1.0) + 1.0) / 2.0
    return RangeImage(unit[0], unit[1], mask, beams, x_max)
