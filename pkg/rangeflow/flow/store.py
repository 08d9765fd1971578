"""Model checkpoints with stage metadata."""
import logging
import os

from rangeflow import error, nets
from rangeflow.core.checkpoint import load_checkpoint, save_checkpoint
from rangeflow.flow.stage import FlowStage
from rangeflow.utils import file_digest

logger = logging.getLogger(__name__)


def save_model(path, model, stage, extra=None):
    """Writes the model weights with kind, spec and stage metadata; returns
    the checkpoint digest.
    """
    metadata = {'kind': model.kind, 'spec': model.spec(), 'stage': stage.to_dict()}
    metadata.update(extra or {})
    digest = save_checkpoint(path, model.state_dict(), metadata)
    logger.info('saved %s checkpoint %s (%s)', stage.label, path, digest[:12])
    return digest


def load_model(path):
    """Returns (model, stage, digest, metadata).
    """
    tensors, metadata, digest = load_checkpoint(path)
    for key in ('kind', 'spec', 'stage'):
        if key not in metadata:
            raise error.DataError('checkpoint {} lacks {!r} metadata'.format(path, key))
    model = nets.make(metadata['kind'], **metadata['spec'])
    model.load_state_dict(tensors)
    return model, FlowStage.from_dict(metadata['stage']), digest, metadata


def check_lineage(stage, parent_path):
    """Verifies that ``parent_path`` is the checkpoint ``stage`` records as
    its parent.
    """
    if stage.parent_digest is None:
        return
    if not os.path.exists(parent_path):
        raise error.StageError('parent checkpoint {} of the {} model does not exist'.format(
            parent_path, stage.label))
    found = file_digest(parent_path)
    if found != stage.parent_digest:
        raise error.StageError('{} records parent {} but {} has digest {}'.format(
            stage.label, stage.parent_digest[:12], parent_path, found[:12]))
