import numpy as np
import pytest

from rangeflow import data, nets
from rangeflow.core import tensor as T
from rangeflow.flow import distill, generate_reflow_pairs, train_1rf, train_reflow
from rangeflow.ode import SolverSpec


@pytest.fixture(autouse=True)
def float64_tensors():
    T.set_default_dtype(np.float64)
    yield
    T.set_default_dtype(np.float64)


def numerical_grad(f, x, eps=1e-6):
    """Central differences of a scalar function f() with respect to the
    entries of x, which is perturbed in place.
    """
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=['multi_index'])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        grad[i] = (up - down) / (2 * eps)
    return grad


class LinearField(object):
    """v(x, t) = A x, a field with closed-form flow exp(A t)."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.data_shape = (self.matrix.shape[0],)

    def velocity(self, x, t):
        return np.asarray(x) @ self.matrix.T


class ConstantField(object):

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.data_shape = self.value.shape

    def velocity(self, x, t):
        return np.broadcast_to(self.value, np.shape(x)).copy()


@pytest.fixture
def rotation_field():
    return LinearField([[0.0, -1.0], [1.0, 0.0]])


@pytest.fixture
def constant_field():
    return ConstantField([1.0, -2.0])


@pytest.fixture
def zero_mlp():
    return nets.make('mlp', data_shape=(2,), widths=(16,), zero_init_last=True, seed=0)


@pytest.fixture
def small_mlp():
    return nets.make('mlp', data_shape=(2,), widths=(16, 16), seed=3)


@pytest.fixture
def small_hourglass():
    return nets.make('hourglass', data_shape=(2, 4, 40), widths=(16, 32), depth=1, time_dim=8, seed=1)


@pytest.fixture(scope='session')
def toy_data():
    return data.make('eight-gaussians', 8000, seed=0)


@pytest.fixture(scope='session')
def held_out():
    return data.make('eight-gaussians', 2000, seed=99)


@pytest.fixture(scope='session')
def toy_flows(toy_data):
    """1-RF, 2-RF and 2-RF+1-TD models trained on the eight-Gaussian ring.

    Returns:
        dict of label -> (model, stage)
    """
    options = {'batch_size': 256, 'lr': 2e-3, 'progress': False, 'log_every': 0}
    model = nets.make('mlp', data_shape=(2,), widths=(64, 64, 64), seed=0)
    model, first, _ = train_1rf(model, toy_data, steps=6000, seed=1, **options)
    flows = {'1-RF': (model, first)}
    first_weights = model.state_dict()

    pairs = generate_reflow_pairs(model, 4000, SolverSpec('dopri5'), seed=2, stage=first,
                                  parent_digest='a' * 64)
    second = nets.make('mlp', **model.spec())
    second.load_state_dict(first_weights)
    second, second_stage, _ = train_reflow(second, pairs, first, 'a' * 64, steps=6000, seed=3, **options)
    flows['2-RF'] = (second, second_stage)

    coupled = generate_reflow_pairs(second, 4000, SolverSpec('dopri5'), seed=4, stage=second_stage,
                                    parent_digest='b' * 64)
    student = nets.make('mlp', **second.spec())
    student.load_state_dict(second.state_dict())
    student, td_stage, _ = distill(student, 1, coupled, second_stage, 'b' * 64, steps=3000, seed=5,
                                   **options)
    flows['1-TD'] = (student, td_stage)
    return flows
