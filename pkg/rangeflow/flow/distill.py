"""k-step timestep distillation.

For a pair (x0, x1) and the grid t_i = i / k, the parent trajectory
states s_i = Phi(x0, t_i) are integrated segment by segment, with the
stored x1 as the final state. The student learns v(s_i, t_i) =
k * (s_{i+1} - s_i), so k Euler steps from x0 land on x1.
"""
import logging

import numpy as np
from tqdm import tqdm

from rangeflow import error, nets
from rangeflow.flow.trainer import FlowTrainer
from rangeflow.ode.solvers import SolverSpec, integrate

logger = logging.getLogger(__name__)


def distillation_targets(parent, pairs, k, solver=None, batch_size=1024, progress=False):
    """Returns (states, targets), both of shape (count, k) + state shape.

    ``parent`` may be None when k = 1, where the target is x1 - x0.
    """
    if k < 1:
        raise error.InvalidArgument('distillation needs k >= 1, got {}'.format(k))
    count = len(pairs)
    states = np.empty((count, k + 1) + pairs.data_shape)
    states[:, 0] = pairs.x0
    states[:, k] = pairs.x1
    if k > 1:
        if parent is None:
            raise error.InvalidArgument('k > 1 needs the parent model for intermediate states')
        solver = (solver or SolverSpec('dopri5', atol=1e-5, rtol=1e-5)).replace(record=False)
        grid = np.arange(k + 1) / k
        for start in tqdm(range(0, count, batch_size), desc='targets', disable=not progress):
            chunk = slice(start, start + batch_size)
            x = pairs.x0[chunk]
            for i in range(1, k):
                x, _ = integrate(parent, x, solver, span=(grid[i - 1], grid[i]))
                states[chunk, i] = x
    targets = k * (states[:, 1:] - states[:, :-1])
    return states[:, :-1], targets


class DistillTrainer(FlowTrainer):
    """Regression only at the grid times {0, 1/k, ..., (k-1)/k}.
    """
    loss_kind = 'pseudo-huber'

    def __init__(self, model, k, states, targets, **kwargs):
        super(DistillTrainer, self).__init__(model, **kwargs)
        if states.shape != targets.shape or states.shape[1] != k:
            raise error.ShapeError('states {} and targets {} do not cover a {}-step grid'.format(
                states.shape, targets.shape, k))
        if states.shape[0] == 0:
            raise error.DataError('pair set is empty')
        self.k = k
        self.stage_tag = '{}-TD'.format(k)
        self.states = states
        self.targets = targets
        self.grid = np.arange(k) / k

    def _sample_batch(self, rng, size):
        idx = rng.integers(self.states.shape[0], size=size)
        step = rng.integers(self.k, size=size)
        return self.states[idx, step], self.grid[step], self.targets[idx, step]


def distill(model, k, pairs, parent_stage, parent_digest, parent=None, solver=None, config_digest=None,
            **kwargs):
    """Distills ``model`` (holding the parent weights) to k steps.

    The parent's trajectories come from ``parent``, or from a frozen copy of
    ``model`` taken before training when None.

    Returns:
        (model, FlowStage, DistillTrainer)
    """
    if k < 1:
        raise error.InvalidArgument('distillation needs k >= 1, got {}'.format(k))
    if not pairs.coupled:
        raise error.StageError('distillation trains on ode-coupled pairs from the parent')
    if pairs.parent_digest and pairs.parent_digest != parent_digest:
        raise error.StageError('pairs were generated by {} but the parent is {}'.format(
            pairs.parent_digest[:12], parent_digest[:12]))
    stage = parent_stage.child('k-TD', parent_digest, k=k, config_digest=config_digest)
    if parent is None and k > 1:
        parent = nets.make(model.kind, **model.spec())
        parent.load_state_dict(model.state_dict())
    states, targets = distillation_targets(parent, pairs, k, solver, progress=kwargs.get('progress', False))
    logger.info('distilling to %d steps on the grid %s', k, stage.step_grid().tolist())
    trainer = DistillTrainer(model, k, states, targets, **kwargs)
    trainer.train()
    return model, stage, trainer
