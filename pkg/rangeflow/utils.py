import csv
import hashlib
import os
import struct

import numpy as np

from rangeflow import error


def sha256_hex(payload):
    """Returns the hex SHA-256 digest of a bytes payload.
    """
    return hashlib.sha256(payload).hexdigest()


def file_digest(path):
    with open(path, 'rb') as f:
        return sha256_hex(f.read())


def canonical_config(mapping):
    """Renders a flat configuration as sorted ``key=value`` lines.
    """
    lines = []
    for key in sorted(mapping):
        value = mapping[key]
        if isinstance(value, (list, tuple)):
            value = ','.join(str(v) for v in value)
        lines.append('{}={}'.format(key, value))
    return '\n'.join(lines)


def config_digest(mapping):
    return sha256_hex(canonical_config(mapping).encode('utf-8'))


class ByteWriter(object):
    """Accumulates little-endian binary fields.
    """

    def __init__(self):
        self.parts = []

    def raw(self, payload):
        self.parts.append(bytes(payload))

    def u8(self, value):
        self.parts.append(struct.pack('<B', value))

    def u32(self, value):
        self.parts.append(struct.pack('<I', value))

    def u64(self, value):
        self.parts.append(struct.pack('<Q', value))

    def f32(self, value):
        self.parts.append(struct.pack('<f', value))

    def string(self, text):
        payload = text.encode('utf-8')
        self.u32(len(payload))
        self.parts.append(payload)

    def array(self, values, dtype):
        self.parts.append(np.ascontiguousarray(values, dtype=np.dtype(dtype).newbyteorder('<')).tobytes())

    def getvalue(self):
        return b''.join(self.parts)


class ByteReader(object):
    """Reads little-endian binary fields, reporting the byte offset of any
    malformed or truncated field.
    """

    def __init__(self, payload, source='<bytes>'):
        self.payload = payload
        self.source = source
        self.offset = 0

    def read(self, count, what):
        if count < 0 or self.offset + count > len(self.payload):
            raise error.FormatError('truncated {} in {}'.format(what, self.source), self.offset)
        chunk = self.payload[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def expect(self, magic, what='magic'):
        start = self.offset
        found = self.read(len(magic), what)
        if found != magic:
            raise error.FormatError('bad {} {!r} in {} (expected {!r})'.format(
                what, found, self.source, magic), start)

    def u8(self, what):
        return struct.unpack('<B', self.read(1, what))[0]

    def u32(self, what):
        return struct.unpack('<I', self.read(4, what))[0]

    def u64(self, what):
        return struct.unpack('<Q', self.read(8, what))[0]

    def f32(self, what):
        return struct.unpack('<f', self.read(4, what))[0]

    def string(self, what, limit=1 << 20):
        start = self.offset
        length = self.u32(what + ' length')
        if length > limit:
            raise error.FormatError('implausible {} length {} in {}'.format(what, length, self.source), start)
        try:
            return self.read(length, what).decode('utf-8')
        except UnicodeDecodeError:
            raise error.FormatError('{} is not utf-8 in {}'.format(what, self.source), start)

    def array(self, dtype, count, what):
        dtype = np.dtype(dtype).newbyteorder('<')
        chunk = self.read(int(count) * dtype.itemsize, what)
        return np.frombuffer(chunk, dtype=dtype).astype(dtype.newbyteorder('='))

    def remaining(self):
        return len(self.payload) - self.offset


def float_dtype_for_width(width, offset):
    if width == 4:
        return np.float32
    if width == 8:
        return np.float64
    raise error.FormatError('unsupported float width {}'.format(width), offset)


def write_manifest(out_dir, rows):
    """Appends (file, kind, config digest) rows to ``manifest.csv`` in out_dir.
    """
    path = os.path.join(out_dir, 'manifest.csv')
    new = not os.path.exists(path)
    with open(path, 'a', newline='') as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(['file', 'kind', 'config_digest'])
        for row in rows:
            writer.writerow(row)
    return path


def write_states_csv(path, states, nfe=None, digest=''):
    """Writes one row per flat state: (sample, x0 .. x{d-1}[, nfe], config_digest).
    """
    states = np.asarray(states)
    flat = states.reshape(len(states), -1)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        header = ['sample'] + ['x{}'.format(i) for i in range(flat.shape[1])]
        writer.writerow(header + (['nfe'] if nfe is not None else []) + ['config_digest'])
        for i, row in enumerate(flat):
            extra = [int(nfe[i])] if nfe is not None else []
            writer.writerow([i] + ['{!r}'.format(float(v)) for v in row] + extra + [digest])
    return path


def read_states_csv(path):
    """Reads the x-columns written by ``write_states_csv`` as an (n, d) array.
    """
    if not os.path.exists(path):
        raise error.DataError('state file {} does not exist'.format(path))
    with open(path, newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise error.DataError('state file {} is empty'.format(path))
        columns = [i for i, name in enumerate(header) if name.startswith('x') and name[1:].isdigit()]
        if not columns:
            raise error.DataError('state file {} has no x0, x1, ... columns'.format(path))
        rows = []
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append([float(row[i]) for i in columns])
            except (IndexError, ValueError):
                raise error.DataError('{}:{}: malformed state row'.format(path, lineno))
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(columns))
