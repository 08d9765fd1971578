import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T
from rangeflow.nets import layers
from rangeflow.nets.velocity_net import VelocityNet


class MlpVelocity(VelocityNet):
    """Multilayer perceptron on the concatenation of the flattened state and
    the time embedding, for low-dimensional experiments.
    """
    kind = 'mlp'

    def __init__(self, data_shape=(2,), widths=(128, 128, 128), activation='tanh',
                 time_dim=32, zero_init_last=False, seed=0):
        """Initializes an MLP velocity estimator.

        Args:
            data_shape (tuple): shape of one state
            widths (tuple): hidden layer widths
            activation ('tanh' or 'gelu'): hidden nonlinearity
            time_dim (int): size of the sinusoidal time embedding
            zero_init_last (boolean): start the output layer at zero, so the
                initial field vanishes everywhere
            seed (int): seed of the parameter initialization
        """
        super(MlpVelocity, self).__init__(data_shape, seed)
        if activation not in layers.ACTIVATIONS:
            raise error.InvalidArgument('unknown activation {!r}'.format(activation))
        self.widths = tuple(int(w) for w in widths)
        self.activation = activation
        self.time_dim = time_dim
        self.zero_init_last = zero_init_last
        self.embedding = layers.TimeEmbedding(time_dim)

        rng = np.random.default_rng(seed)
        sizes = (self.data_size + time_dim,) + self.widths
        self.hidden = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.hidden.append(self.add_child('hidden{}'.format(i), layers.Linear(fan_in, fan_out, rng)))
        self.out = self.add_child('out', layers.Linear(sizes[-1], self.data_size, rng,
                                                       zero_init=zero_init_last))

    def _velocity(self, x, t):
        batch = x.shape[0]
        h = T.concat([x.reshape(batch, self.data_size), T.Tensor(self.embedding(t))], axis=1)
        act = layers.ACTIVATIONS[self.activation]
        for layer in self.hidden:
            h = act(layer(h))
        return self.out(h).reshape((batch,) + self.data_shape)

    def _spec(self):
        return {'widths': list(self.widths), 'activation': self.activation,
                'time_dim': self.time_dim, 'zero_init_last': self.zero_init_last}
