import numpy as np

from rangeflow import error


class AdamState(object):
    """First and second moment estimates keyed by parameter name.
    """

    def __init__(self, step=0, m=None, v=None):
        self.step = step
        self.m = dict(m or {})
        self.v = dict(v or {})

    def copy(self):
        return AdamState(self.step,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Applies one bias-corrected Adam update.

    Args:
        params (dict): parameter name -> ndarray
        grads (dict): parameter name -> ndarray of the same shape
        state (AdamState): moments from the previous step (not modified)

    Returns:
        (dict, AdamState): updated parameters and moments

    A non-finite gradient rejects the whole step before anything is updated.
    """
    if set(params) != set(grads):
        raise error.InvalidArgument('parameter and gradient names differ: {}'.format(
            sorted(set(params) ^ set(grads))))
    for name in sorted(params):
        if params[name].shape != grads[name].shape:
            raise error.ShapeError('gradient for {} has shape {}, parameter has {}'.format(
                name, grads[name].shape, params[name].shape))
        if not np.all(np.isfinite(grads[name])):
            raise error.NumericalError('non-finite gradient for parameter {}'.format(name))

    step = state.step + 1
    new_state = AdamState(step)
    new_params = {}
    for name in sorted(params):
        g = grads[name]
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        new_params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_state.m[name] = m
        new_state.v[name] = v
    return new_params, new_state


class Adam(object):
    """Adam over named tensors, updated in place after ``backward``.

    Args:
        named_params (dict): parameter name -> Tensor (tracked leaves)
        lr (float): learning rate
        betas (tuple): exponential decay rates of the moment estimates
        eps (float): denominator offset
    """

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(named_params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self):
        for tensor in self.params.values():
            tensor.grad = None

    def step(self):
        values = {name: t.data for name, t in self.params.items()}
        grads = {}
        for name, t in self.params.items():
            grads[name] = t.grad if t.grad is not None else np.zeros_like(t.data)
        updated, self.state = adam_step(values, grads, self.state, self.lr,
                                        self.betas[0], self.betas[1], self.eps)
        for name, t in self.params.items():
            t.data = updated[name].astype(t.data.dtype, copy=False)

    def metadata(self):
        return {'optimizer': 'adam', 'lr': self.lr, 'beta1': self.betas[0],
                'beta2': self.betas[1], 'eps': self.eps}
