import logging

import numpy as np

from rangeflow import error
from rangeflow.lidar.codec import DEFAULT_X_MAX, PointCloud, RangeImage, encode_log

logger = logging.getLogger(__name__)


def azimuth_columns(azimuth, width):
    """Column of each azimuth: floor((pi - phi) / (2 pi) * W) mod W.
    """
    cols = np.floor((np.pi - np.asarray(azimuth)) / (2.0 * np.pi) * width).astype(np.int64)
    return np.mod(cols, width)


def project(cloud, beams, width, x_max=DEFAULT_X_MAX, counter=None):
    """Spherical projection of a point cloud onto a range image.

    Rows are the nearest beam elevation, columns the azimuth bin. When
    several points share a pixel the nearest one is kept. Pixels without a
    point are raydrop.
    """
    if width < 1:
        raise error.InvalidArgument('image width must be positive, got {}'.format(width))
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    image = RangeImage.empty(beams, width, x_max)
    ranges = cloud.ranges()
    keep = ranges > 0
    if not np.all(keep):
        logger.debug('dropping %d points at the sensor origin', np.count_nonzero(~keep))
    points, ranges = cloud.points[keep], ranges[keep]
    if not len(points):
        return image

    azimuth = np.arctan2(points[:, 1], points[:, 0])
    elevation = np.arcsin(np.clip(points[:, 2] / ranges, -1.0, 1.0))
    rows = beams.nearest_rows(elevation)
    cols = azimuth_columns(azimuth, width)
    pixel = rows * width + cols

    order = np.lexsort((ranges, pixel))
    _, first = np.unique(pixel[order], return_index=True)
    chosen = order[first]

    log_range = image.log_range.ravel().copy()
    reflectance = image.reflectance.ravel().copy()
    mask = image.mask.ravel().copy()
    log_range[pixel[chosen]] = encode_log(ranges[chosen], x_max, counter)
    reflectance[pixel[chosen]] = points[chosen, 3]
    mask[pixel[chosen]] = False
    shape = image.shape
    return RangeImage(log_range.reshape(shape), reflectance.reshape(shape), mask.reshape(shape),
                      beams, x_max)


def pixel_directions(beams, width):
    """Unit ray direction of every pixel, shape (H, W, 3).
    """
    elevation = beams.elevations[:, None]
    azimuth = beams.azimuth_centers(width)[None, :]
    return np.stack(np.broadcast_arrays(
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation)), axis=-1)


def unproject(image, counter=None):
    """One point per unmasked pixel, along the beam elevation and column-center
    azimuth at the decoded range.
    """
    directions = pixel_directions(image.beams, image.width)
    valid = ~image.mask
    ranges = image.ranges(counter)[valid]
    xyz = directions[valid] * ranges[:, None]
    return PointCloud(np.column_stack([xyz, image.reflectance[valid]]))
