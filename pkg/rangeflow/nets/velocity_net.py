import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T
from rangeflow.nets.layers import Module


class VelocityNet(Module):
    """Superclass for all velocity estimators v(x_t, t).
    """
    kind = None

    def __init__(self, data_shape, seed):
        """Initializes a velocity estimator.

        Args:
            data_shape (tuple): shape of one state, without the batch axis
            seed (int): seed of the parameter initialization
        """
        super(VelocityNet, self).__init__()
        self.data_shape = tuple(int(s) for s in data_shape)
        self.seed = seed

    @property
    def data_size(self):
        return int(np.prod(self.data_shape))

    # VelocityNet methods
    # ----------------------------

    def forward(self, x, t):
        """Evaluates the velocity at a batch of states.

        ``x`` has shape (B,) + data_shape, or data_shape for a single state.
        ``t`` is a scalar or a length-B vector. The output has x's shape.
        """
        x = T.as_tensor(x)
        single = x.shape == self.data_shape
        if single:
            x = x.reshape((1,) + self.data_shape)
        if x.shape[1:] != self.data_shape:
            raise error.ShapeError('{} model expects states of shape {}, got {}'.format(
                self.kind, self.data_shape, x.shape))
        t = batch_times(t, x.shape[0])
        v = self._velocity(x, t)
        assert v.shape == x.shape
        if single:
            v = v.reshape(self.data_shape)
        return v

    def velocity(self, x, t):
        """Evaluates the velocity without recording, returning an ndarray.
        """
        with T.no_record():
            return self.forward(x, t).data

    def spec(self):
        """Returns the keyword arguments that rebuild this model via
        ``rangeflow.nets.make(kind, **spec)``.
        """
        spec = {'data_shape': list(self.data_shape), 'seed': self.seed}
        spec.update(self._spec())
        return spec

    # Extension methods
    # ----------------------------

    def _velocity(self, x, t):
        """Maps a (B,) + data_shape Tensor and a length-B time vector to a
        Tensor of the same shape as x.
        """
        raise NotImplementedError()

    def _spec(self):
        """Model-specific hyperparameters for ``spec``.
        """
        raise NotImplementedError()


def batch_times(t, batch):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return np.full(batch, float(t))
    t = t.ravel()
    if t.size != batch:
        raise error.ShapeError('got {} times for a batch of {}'.format(t.size, batch))
    return t
