import numpy as np

from rangeflow import error

TAGS = ('1-RF', '2-RF', 'k-TD')


class FlowStage(object):
    """Position of a checkpoint in the training pipeline.

    Args:
        tag ('1-RF', '2-RF' or 'k-TD'): training stage
        k (int): step count of a distilled stage
        parent_digest (str): SHA-256 of the parent checkpoint file
        parent_tag (str): stage label of the parent
        config_digest (str): digest of the training configuration
    """

    def __init__(self, tag, k=None, parent_digest=None, parent_tag=None, config_digest=None):
        if tag not in TAGS:
            raise error.StageError('unknown stage {!r}; choose from {}'.format(tag, TAGS))
        if tag == 'k-TD':
            if k is None or int(k) < 1:
                raise error.StageError('a distilled stage needs k >= 1, got {}'.format(k))
            k = int(k)
        elif k is not None:
            raise error.StageError('{} stages have no step count'.format(tag))
        if tag == '1-RF' and parent_digest is not None:
            raise error.StageError('1-RF stages have no parent')
        if tag == '2-RF' and parent_tag != '1-RF':
            raise error.StageError('2-RF must descend from a 1-RF parent, got {}'.format(parent_tag))
        if tag == 'k-TD' and parent_tag not in ('1-RF', '2-RF'):
            raise error.StageError('{}-TD must descend from a 2-RF or 1-RF parent, got {}'.format(k, parent_tag))
        if tag != '1-RF' and not parent_digest:
            raise error.StageError('{} stages must reference their parent checkpoint'.format(tag))
        self.tag = tag
        self.k = k
        self.parent_digest = parent_digest
        self.parent_tag = parent_tag
        self.config_digest = config_digest

    @classmethod
    def initial(cls, config_digest=None):
        return cls('1-RF', config_digest=config_digest)

    def child(self, tag, parent_digest, k=None, config_digest=None):
        """Stage of a model trained from a checkpoint of this stage.
        """
        return FlowStage(tag, k=k, parent_digest=parent_digest, parent_tag=self.label,
                         config_digest=config_digest)

    @property
    def label(self):
        return '{}-TD'.format(self.k) if self.distilled else self.tag

    @property
    def distilled(self):
        return self.tag == 'k-TD'

    def step_grid(self):
        """Training and sampling timesteps {0, 1/k, ..., (k-1)/k} of a
        distilled stage.
        """
        if not self.distilled:
            raise error.StageError('{} models have no fixed timestep grid'.format(self.label))
        return np.arange(self.k) / self.k

    def to_dict(self):
        fields = {'tag': self.tag, 'k': self.k, 'parent_digest': self.parent_digest,
                  'parent_tag': self.parent_tag, 'config_digest': self.config_digest}
        if self.distilled:
            fields['step_grid'] = self.step_grid().tolist()
        return fields

    @classmethod
    def from_dict(cls, fields):
        return cls(fields['tag'], k=fields.get('k'), parent_digest=fields.get('parent_digest'),
                   parent_tag=fields.get('parent_tag'), config_digest=fields.get('config_digest'))

    def __eq__(self, other):
        return isinstance(other, FlowStage) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'FlowStage({})'.format(self.label)
