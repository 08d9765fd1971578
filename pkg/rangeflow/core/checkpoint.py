"""Flat binary checkpoints of named tensors.

Layout (little-endian):
    magic        8 bytes  b'RFLOWCKP'
    version      u32
    metadata     u32 length + utf-8 JSON
    count        u32
    per tensor:  u32 name length + name bytes, u8 float width (4|8),
                 u32 rank, rank x u64 extents, values
"""
import json
import os

import numpy as np

from rangeflow import error
from rangeflow.utils import ByteReader, ByteWriter, float_dtype_for_width, sha256_hex

MAGIC = b'RFLOWCKP'
VERSION = 1


def encode_checkpoint(tensors, metadata=None):
    writer = ByteWriter()
    writer.raw(MAGIC)
    writer.u32(VERSION)
    writer.string(json.dumps(metadata or {}, sort_keys=True))
    writer.u32(len(tensors))
    for name in sorted(tensors):
        values = np.asarray(tensors[name])
        width = 4 if values.dtype == np.float32 else 8
        writer.string(name)
        writer.u8(width)
        writer.u32(values.ndim)
        for extent in values.shape:
            writer.u64(extent)
        writer.array(values, np.float32 if width == 4 else np.float64)
    return writer.getvalue()


def decode_checkpoint(payload, source='<bytes>'):
    reader = ByteReader(payload, source)
    reader.expect(MAGIC)
    offset = reader.offset
    version = reader.u32('version')
    if version != VERSION:
        raise error.FormatError('unsupported checkpoint version {}'.format(version), offset)
    offset = reader.offset
    try:
        metadata = json.loads(reader.string('metadata'))
    except ValueError:
        raise error.FormatError('metadata is not valid JSON', offset)
    count = reader.u32('tensor count')
    tensors = {}
    for _ in range(count):
        name = reader.string('tensor name')
        offset = reader.offset
        dtype = float_dtype_for_width(reader.u8('float width'), offset)
        rank = reader.u32('rank')
        shape = tuple(reader.u64('extent') for _ in range(rank))
        tensors[name] = reader.array(dtype, int(np.prod(shape, dtype=np.int64)), name).reshape(shape)
    if reader.remaining():
        raise error.FormatError('trailing bytes after last tensor', reader.offset)
    return tensors, metadata


def save_checkpoint(path, tensors, metadata=None):
    """Writes a checkpoint and returns the SHA-256 digest of its bytes.
    """
    payload = encode_checkpoint(tensors, metadata)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(payload)
    return sha256_hex(payload)


def load_checkpoint(path):
    """Returns (tensors, metadata, digest).
    """
    if not os.path.exists(path):
        raise error.DataError('checkpoint {} does not exist'.format(path))
    with open(path, 'rb') as f:
        payload = f.read()
    tensors, metadata = decode_checkpoint(payload, path)
    return tensors, metadata, sha256_hex(payload)
