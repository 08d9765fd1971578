import csv
import logging

import numpy as np
from tqdm import trange

from rangeflow import error
from rangeflow.core.optim import Adam
from rangeflow.core.tensor import ComputationRecord, no_record
from rangeflow.flow.losses import velocity_loss

logger = logging.getLogger(__name__)


class FlowTrainer(object):
    """Superclass for all velocity-regression training loops.
    """
    loss_kind = 'l2'
    stage_tag = None

    def __init__(self, model, steps=20000, batch_size=256, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 seed=0, log_every=500, progress=True):
        """Initializes a training loop.

        Args:
            model (VelocityNet): model trained in place
            steps (int): optimizer steps
            batch_size (int): samples per step
            lr (float): Adam learning rate
            betas (tuple): Adam moment decay rates
            eps (float): Adam denominator offset
            seed (int): seed of batch and time sampling
            log_every (int): steps between loss log lines
            progress (boolean): show a progress bar
        """
        if steps < 0 or batch_size < 1:
            raise error.InvalidArgument('need steps >= 0 and batch_size >= 1, got {} and {}'.format(
                steps, batch_size))
        self.model = model
        self.steps = steps
        self.batch_size = batch_size
        self.seed = seed
        self.log_every = log_every
        self.progress = progress
        self.optimizer = Adam(model.named_parameters(), lr, betas, eps)
        self.rng = np.random.default_rng(seed)
        self.losses = []

    # FlowTrainer methods
    # ----------------------------

    def train(self):
        """Runs the configured number of steps and returns the model.
        """
        bar = trange(self.steps, desc=self.stage_tag or 'train', disable=not self.progress)
        for step in bar:
            x_t, t, target = self._sample_batch(self.rng, self.batch_size)
            self.optimizer.zero_grad()
            with ComputationRecord() as record:
                loss = self._loss(self.model(x_t, t), target)
                value = loss.item()
                if not np.isfinite(value):
                    raise error.NumericalError('non-finite loss at step {}'.format(step))
                record.backward(loss)
            try:
                self.optimizer.step()
            except error.NumericalError as e:
                raise error.NumericalError('step {}: {}'.format(step, e))
            self.losses.append(value)
            if self.log_every and (step + 1) % self.log_every == 0:
                logger.info('%s step %d/%d: loss %.6g', self.stage_tag, step + 1, self.steps,
                            np.mean(self.losses[-self.log_every:]))
                bar.set_postfix(loss='{:.4g}'.format(value))
        return self.model

    def evaluate_loss(self, x_t, t, target):
        """Loss of the current model on a fixed batch, without recording.
        """
        with no_record():
            return self._loss(self.model(x_t, t), target).item()

    def smoothed_losses(self, decay=0.99):
        """Bias-corrected exponential moving average of the loss curve.
        """
        smoothed, average = [], 0.0
        for i, value in enumerate(self.losses):
            average = decay * average + (1 - decay) * value
            smoothed.append(average / (1 - decay ** (i + 1)))
        return smoothed

    def write_loss_csv(self, path, digest=''):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['step', 'loss', 'smoothed', 'config_digest'])
            for step, (value, smooth) in enumerate(zip(self.losses, self.smoothed_losses())):
                writer.writerow([step, '{!r}'.format(value), '{!r}'.format(smooth), digest])
        return path

    def metadata(self):
        fields = {'steps': self.steps, 'batch_size': self.batch_size, 'seed': self.seed,
                  'loss': self.loss_kind}
        fields.update(self.optimizer.metadata())
        return fields

    # Extension methods
    # ----------------------------

    def _sample_batch(self, rng, size):
        """Returns (x_t, t, target) for one optimizer step.
        """
        raise NotImplementedError()

    def _loss(self, v_pred, target):
        return velocity_loss(v_pred, target, self.loss_kind)
