"""Point-cloud and range-image files.

Point clouds are flat little-endian float32 (x, y, z, reflectance)
quadruplets, as in KITTI ``.bin`` scans.

Range-image layout (little-endian):
    magic          8 bytes  b'RFLOWRIM'
    H, W           u32, u32
    channels       u32 (2)
    x_max          f32
    config digest  u32 length + utf-8 (may be empty)
    channels       channels x H x W float32, row-major (log-range, reflectance)
    raydrop mask   ceil(H * W / 8) bytes, packed bits, row-major, 1 = raydrop
    elevations     H float64, radians, top row first
"""
import os

import numpy as np

from rangeflow import error
from rangeflow.lidar.beams import BeamTable
from rangeflow.lidar.codec import PointCloud, RangeImage
from rangeflow.utils import ByteReader, ByteWriter, sha256_hex

MAGIC = b'RFLOWRIM'
CHANNELS = 2


def _read_bytes(path, what):
    if not os.path.exists(path):
        raise error.DataError('{} {} does not exist'.format(what, path))
    with open(path, 'rb') as f:
        return f.read()


def write_point_cloud(path, cloud):
    payload = np.ascontiguousarray(cloud.points, dtype='<f4').tobytes()
    with open(path, 'wb') as f:
        f.write(payload)
    return sha256_hex(payload)


def read_point_cloud(path):
    payload = _read_bytes(path, 'point cloud')
    if len(payload) % 16:
        whole = len(payload) - len(payload) % 16
        raise error.FormatError('{} is not a whole number of (x, y, z, reflectance) records'.format(path),
                                whole)
    points = np.frombuffer(payload, dtype='<f4').reshape(-1, 4).astype(np.float64)
    return PointCloud(points)


def encode_range_image(image, digest=''):
    writer = ByteWriter()
    writer.raw(MAGIC)
    writer.u32(image.height)
    writer.u32(image.width)
    writer.u32(CHANNELS)
    writer.f32(image.x_max)
    writer.string(digest)
    writer.array(np.stack([image.log_range, image.reflectance]), np.float32)
    writer.raw(np.packbits(image.mask.ravel()).tobytes())
    writer.array(image.beams.elevations, np.float64)
    return writer.getvalue()


def decode_range_image(payload, source='<bytes>'):
    """Returns (RangeImage, config digest).
    """
    reader = ByteReader(payload, source)
    reader.expect(MAGIC)
    height = reader.u32('height')
    width = reader.u32('width')
    offset = reader.offset
    channels = reader.u32('channel count')
    if channels != CHANNELS:
        raise error.FormatError('expected {} channels, got {}'.format(CHANNELS, channels), offset)
    offset = reader.offset
    x_max = reader.f32('x_max')
    if not x_max > 0:
        raise error.FormatError('x_max must be positive, got {}'.format(x_max), offset)
    digest = reader.string('config digest')
    channel_offset = reader.offset
    values = reader.array(np.float32, CHANNELS * height * width, 'channels')
    values = values.reshape(CHANNELS, height, width).astype(np.float64)
    count = height * width
    mask = np.unpackbits(np.frombuffer(reader.read((count + 7) // 8, 'raydrop mask'), dtype=np.uint8))
    mask = mask[:count].reshape(height, width).astype(bool)
    offset = reader.offset
    elevations = reader.array(np.float64, height, 'elevations')
    if reader.remaining():
        raise error.FormatError('trailing bytes after the elevations', reader.offset)
    try:
        beams = BeamTable(elevations)
    except error.InvalidArgument as e:
        raise error.FormatError(str(e), offset)
    try:
        image = RangeImage(values[0], values[1], mask, beams, float(x_max))
    except (error.DataError, error.ShapeError) as e:
        raise error.FormatError(str(e), channel_offset)
    return image, digest


def write_range_image(path, image, digest=''):
    payload = encode_range_image(image, digest)
    with open(path, 'wb') as f:
        f.write(payload)
    return sha256_hex(payload)


def read_range_image(path):
    return decode_range_image(_read_bytes(path, 'range image'), path)


def read_range_image_dir(directory):
    """All ``*.rimg`` files of a directory, sorted by name.

    Returns:
        list of RangeImage
    """
    if not os.path.isdir(directory):
        raise error.DataError('range-image directory {} does not exist'.format(directory))
    names = sorted(n for n in os.listdir(directory) if n.endswith('.rimg'))
    if not names:
        raise error.DataError('no .rimg files in {}'.format(directory))
    return [read_range_image(os.path.join(directory, n))[0] for n in names]
