"""Latent/data pair sets for reflow and distillation.

Pair file layout (little-endian):
    magic            8 bytes  b'RFLOWPRS'
    version          u32
    count            u64
    rank             u32, rank x u64 extents of one state
    float width      u8 (4|8)
    kind             u32 length + utf-8 ('independent' | 'ode-coupled')
    solver           u32 length + utf-8 JSON of the generating solver
    seed             u64
    parent digest    u32 length + utf-8 (may be empty)
    config digest    u32 length + utf-8 (may be empty)
    skipped          u64
    content digest   u32 length + utf-8 SHA-256 of the pair values
    pairs            count x (x0 values, x1 values)
"""
import json
import logging
import os

import numpy as np
from tqdm import tqdm

from rangeflow import error
from rangeflow.ode.sampling import draw_latents
from rangeflow.ode.solvers import SolverSpec, integrate
from rangeflow.utils import ByteReader, ByteWriter, config_digest, float_dtype_for_width, sha256_hex

logger = logging.getLogger(__name__)

MAGIC = b'RFLOWPRS'
VERSION = 1
KINDS = ('independent', 'ode-coupled')


class PairDataset(object):
    """Pairs (x0, x1) with the metadata needed to regenerate them.

    Args:
        x0 (ndarray): latents, shape (count,) + state shape
        x1 (ndarray): data-side endpoints of the same shape
        kind ('independent' or 'ode-coupled'): how the pairs were formed
        solver (dict): SolverSpec fields of the generating integration
        seed (int): seed of the latent draw
        parent_digest (str): digest of the generating checkpoint
        skipped (int): latents dropped after solver failures
        config_digest (str): digest of the producing configuration
    """

    def __init__(self, x0, x1, kind='ode-coupled', solver=None, seed=0, parent_digest='',
                 skipped=0, config_digest=''):
        x0 = np.asarray(x0)
        x1 = np.asarray(x1)
        if x0.shape != x1.shape:
            raise error.ShapeError('pair sides differ in shape: {} and {}'.format(x0.shape, x1.shape))
        if x0.ndim < 2:
            raise error.ShapeError('pairs need a leading count axis, got shape {}'.format(x0.shape))
        if kind not in KINDS:
            raise error.InvalidArgument('unknown pairing kind {!r}'.format(kind))
        self.x0 = x0
        self.x1 = x1
        self.kind = kind
        self.solver = dict(solver or {})
        self.seed = int(seed)
        self.parent_digest = parent_digest or ''
        self.skipped = int(skipped)
        self.config_digest = config_digest or ''

    def __len__(self):
        return self.x0.shape[0]

    @property
    def data_shape(self):
        return self.x0.shape[1:]

    @property
    def coupled(self):
        return self.kind == 'ode-coupled'

    @classmethod
    def independent(cls, x1, seed):
        """Pairs data with fresh standard-normal latents.
        """
        x1 = np.asarray(x1, dtype=np.float64)
        return cls(draw_latents(x1.shape[1:], x1.shape[0], seed), x1, kind='independent', seed=seed)

    @property
    def generator_digest(self):
        """Identifies how the pairs were generated, independently of the values.
        """
        return generator_digest(self.parent_digest, len(self) + self.skipped, self.solver, self.seed,
                                self.data_shape)

    def content_digest(self):
        values = np.stack([self.x0, self.x1], axis=1)
        return sha256_hex(np.ascontiguousarray(values, dtype=values.dtype.newbyteorder('<')).tobytes())

    def encode(self):
        writer = ByteWriter()
        writer.raw(MAGIC)
        writer.u32(VERSION)
        writer.u64(len(self))
        writer.u32(len(self.data_shape))
        for extent in self.data_shape:
            writer.u64(extent)
        width = 4 if self.x0.dtype == np.float32 else 8
        writer.u8(width)
        writer.string(self.kind)
        writer.string(json.dumps(self.solver, sort_keys=True))
        writer.u64(self.seed)
        writer.string(self.parent_digest)
        writer.string(self.config_digest)
        writer.u64(self.skipped)
        writer.string(self.content_digest())
        writer.array(np.stack([self.x0, self.x1], axis=1), np.float32 if width == 4 else np.float64)
        return writer.getvalue()

    def save(self, path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        payload = self.encode()
        with open(path, 'wb') as f:
            f.write(payload)
        logger.info('wrote %d %s pairs to %s', len(self), self.kind, path)
        return sha256_hex(payload)

    @classmethod
    def decode(cls, payload, source='<bytes>'):
        reader = ByteReader(payload, source)
        reader.expect(MAGIC)
        offset = reader.offset
        version = reader.u32('version')
        if version != VERSION:
            raise error.FormatError('unsupported pair file version {}'.format(version), offset)
        count = reader.u64('pair count')
        rank = reader.u32('rank')
        shape = tuple(reader.u64('extent') for _ in range(rank))
        offset = reader.offset
        dtype = float_dtype_for_width(reader.u8('float width'), offset)
        offset = reader.offset
        kind = reader.string('pairing kind')
        if kind not in KINDS:
            raise error.FormatError('unknown pairing kind {!r}'.format(kind), offset)
        offset = reader.offset
        try:
            solver = json.loads(reader.string('solver metadata'))
        except ValueError:
            raise error.FormatError('solver metadata is not valid JSON', offset)
        seed = reader.u64('seed')
        parent_digest = reader.string('parent digest')
        run_digest = reader.string('config digest')
        skipped = reader.u64('skipped count')
        stored = reader.string('content digest')
        size = 2 * count * int(np.prod(shape, dtype=np.int64))
        values = reader.array(dtype, size, 'pair values').reshape((count, 2) + shape)
        if reader.remaining():
            raise error.FormatError('trailing bytes after the last pair', reader.offset)
        pairs = cls(values[:, 0], values[:, 1], kind, solver, seed, parent_digest, skipped, run_digest)
        found = pairs.content_digest()
        if found != stored:
            raise error.DigestMismatch('pair values in {} have digest {}, header records {}'.format(
                source, found[:12], stored[:12]))
        return pairs

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise error.DataError('pair file {} does not exist'.format(path))
        with open(path, 'rb') as f:
            return cls.decode(f.read(), path)


def generator_digest(parent_digest, count, solver, seed, data_shape):
    return config_digest({'parent': parent_digest, 'count': count, 'seed': seed,
                          'solver': json.dumps(solver, sort_keys=True),
                          'shape': list(data_shape)})


def generate_reflow_pairs(model, count, solver, seed, stage=None, parent_digest='', batch_size=1024,
                          max_skip_fraction=0.01, progress=False, config_digest=''):
    """Integrates ``count`` seeded latents through the parent model.

    Latents whose integration fails are retried one by one; those that still
    fail are skipped and counted. More than ``max_skip_fraction`` skips
    aborts the run.

    Returns:
        PairDataset of ode-coupled pairs
    """
    if stage is not None and stage.distilled:
        raise error.StageError('reflow pairs come from a 1-RF or 2-RF parent, got {}'.format(stage.label))
    if solver.direction != 'forward':
        raise error.InvalidArgument('pair generation integrates forward, got {}'.format(solver.describe()))
    if not solver.adaptive and solver.steps < 64:
        logger.warning('generating pairs with a coarse %s; endpoints carry its discretization error',
                       solver.describe())
    solver = solver.replace(record=False)
    latents = draw_latents(model.data_shape, count, seed)
    endpoints = np.empty_like(latents)
    ok = np.ones(count, dtype=bool)

    starts = range(0, count, batch_size)
    for start in tqdm(starts, desc='pairs', disable=not progress):
        chunk = slice(start, min(start + batch_size, count))
        try:
            endpoints[chunk], _ = integrate(model, latents[chunk], solver)
        except error.NumericalError as e:
            logger.debug('batch at %d failed (%s); retrying its latents one by one', start, e)
            for i in range(chunk.start, chunk.stop):
                try:
                    endpoints[i:i + 1], _ = integrate(model, latents[i:i + 1], solver)
                except error.NumericalError as failure:
                    logger.debug('latent %d skipped: %s', i, failure)
                    ok[i] = False

    skipped = int(count - ok.sum())
    if skipped:
        logger.warning('skipped %d of %d reflow pairs after solver failures', skipped, count)
    if count and skipped > max_skip_fraction * count:
        raise error.NumericalError('{} of {} pair integrations failed (limit {:.0%})'.format(
            skipped, count, max_skip_fraction))
    fields = solver.to_dict()
    fields['batch_size'] = batch_size
    return PairDataset(latents[ok], endpoints[ok], 'ode-coupled', fields, seed, parent_digest,
                       skipped, config_digest)


def solver_from_metadata(fields):
    """SolverSpec recorded in a pair file.
    """
    fields = dict(fields)
    fields.pop('batch_size', None)
    return SolverSpec.from_dict(fields)
