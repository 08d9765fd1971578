import importlib
import logging

from rangeflow import error

logger = logging.getLogger(__name__)


def load(name):
    """Resolves a ``'module.path:attribute'`` entry point.
    """
    module_name, _, attr = name.partition(':')
    module = importlib.import_module(module_name)
    return getattr(module, attr)


class DatasetSpec(object):
    """A specification for a particular dataset generator. Used to draw
    samples with fixed keyword defaults.

    Args:
        id (str): the dataset name, e.g. 'eight-gaussians'
        entry_point (str): the python entry point of the generator
            (e.g. 'rangeflow.data.toy:eight_gaussians')
        data_shape (tuple): shape of one sample with default kwargs
        kwargs (dict): default keyword arguments of the generator
    """

    def __init__(self, id, entry_point, data_shape, kwargs=None):
        self.id = id
        self.entry_point = entry_point
        self.data_shape = tuple(data_shape)
        self._kwargs = {} if kwargs is None else kwargs

    def make(self, count, seed, **kwargs):
        """Draws ``count`` samples from the generator with the given seed.
        """
        _kwargs = self._kwargs.copy()
        _kwargs.update(kwargs)
        generator = load(self.entry_point)
        samples = generator(count, seed, **_kwargs)
        logger.debug('drew %d samples from %s (seed %d)', count, self.id, seed)
        return samples

    def __repr__(self):
        return "DatasetSpec({})".format(self.id)


class DatasetRegistry(object):
    """Register a dataset by ID."""

    def __init__(self):
        self.dataset_specs = {}

    def make(self, id, count, seed, **kwargs):
        return self.spec(id).make(count, seed, **kwargs)

    def all(self):
        return self.dataset_specs.values()

    def spec(self, id):
        try:
            return self.dataset_specs[id]
        except KeyError:
            raise error.Unregistered('no dataset registered as {!r}; choose from {}'.format(
                id, sorted(self.dataset_specs)))

    def register(self, id, **kwargs):
        if id in self.dataset_specs:
            raise error.Error('cannot re-register id: {}'.format(id))
        self.dataset_specs[id] = DatasetSpec(id, **kwargs)


# Have a global registry
registry = DatasetRegistry()


def register(id, **kwargs):
    return registry.register(id, **kwargs)


def make(id, count, seed, **kwargs):
    return registry.make(id, count, seed, **kwargs)


def spec(id):
    return registry.spec(id)
