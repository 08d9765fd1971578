import math
from collections import OrderedDict

import numpy as np

from rangeflow import error
from rangeflow.core import tensor as T


class Module(object):
    """Container of named parameters and child modules.
    """

    def __init__(self):
        self._params = OrderedDict()
        self._children = OrderedDict()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError()

    def add_param(self, name, value):
        param = T.Tensor(value, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def add_child(self, name, module):
        self._children[name] = module
        return module

    def named_parameters(self, prefix=''):
        params = OrderedDict()
        for name, param in self._params.items():
            params[prefix + name] = param
        for name, child in self._children.items():
            params.update(child.named_parameters(prefix + name + '.'))
        return params

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for param in self.parameters():
            param.grad = None

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters().items())

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = sorted(set(params) ^ set(state))
        if missing:
            raise error.InvalidArgument('state and model parameters differ: {}'.format(missing))
        for name, param in params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise error.ShapeError('parameter {} has shape {}, state has {}'.format(
                    name, param.shape, value.shape))
            param.data = value.astype(param.data.dtype, copy=True)

    def num_parameters(self):
        return int(sum(p.size for p in self.parameters()))


class Linear(Module):
    """Affine map over the last axis, ``x @ weight + bias``.
    """

    def __init__(self, in_features, out_features, rng, zero_init=False, bias=True):
        super(Linear, self).__init__()
        self.in_features = in_features
        self.out_features = out_features
        if zero_init:
            weight = np.zeros((in_features, out_features))
        else:
            bound = 1.0 / math.sqrt(in_features)
            weight = rng.uniform(-bound, bound, size=(in_features, out_features))
        self.weight = self.add_param('weight', weight)
        self.bias = self.add_param('bias', np.zeros(out_features)) if bias else None

    def forward(self, x):
        x = T.as_tensor(x)
        if x.shape[-1] != self.in_features:
            raise error.ShapeError('linear layer expects {} input features, got shape {}'.format(
                self.in_features, x.shape))
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):

    def __init__(self, dim, eps=1e-5):
        super(LayerNorm, self).__init__()
        self.eps = eps
        self.gain = self.add_param('gain', np.ones(dim))
        self.shift = self.add_param('shift', np.zeros(dim))

    def forward(self, x):
        centered = x - x.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / T.sqrt(var + self.eps) * self.gain + self.shift


def gelu(x):
    # tanh approximation
    x = T.as_tensor(x)
    inner = (x + 0.044715 * x ** 3) * math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + T.tanh(inner))


ACTIVATIONS = {
    'tanh': T.tanh,
    'gelu': gelu,
}


class TimeEmbedding(object):
    """Sinusoidal features of the flow time at geometric frequencies.

    Entries are sines and cosines, so they are bounded by one. Times outside
    [0, 1] are accepted because adaptive solvers may probe slightly past the
    end of the interval.

    Args:
        dim (int): embedding size (even)
        base (float): ratio between the highest and lowest frequency
        scale (float): highest angular frequency
    """

    def __init__(self, dim=32, base=16.0, scale=16.0):
        if dim < 2 or dim % 2:
            raise error.InvalidArgument('time embedding dimension must be even, got {}'.format(dim))
        self.dim = dim
        self.base = base
        self.scale = scale
        half = dim // 2
        self.frequencies = scale * base ** (-np.arange(half) / half)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        angles = t[..., None] * self.frequencies
        return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def embed_time(t, dim=32, base=16.0, scale=16.0):
    return TimeEmbedding(dim, base, scale)(t)
