import numpy as np

from rangeflow import error
from rangeflow.flow.losses import interpolate_state
from rangeflow.flow.stage import FlowStage
from rangeflow.flow.timesteps import TimeDist
from rangeflow.flow.trainer import FlowTrainer


def standard_normal(rng, shape):
    return rng.standard_normal(shape)


class RectifiedFlowTrainer(FlowTrainer):
    """Initial flow matching on independent (latent, data) pairs with
    uniform times.
    """
    loss_kind = 'l2'
    stage_tag = '1-RF'

    def __init__(self, model, data, latent_sampler=standard_normal, **kwargs):
        """Args:
            model (VelocityNet): model trained in place
            data (ndarray): data samples, shape (N,) + model.data_shape
            latent_sampler (callable): (rng, shape) -> latent array
            **kwargs: FlowTrainer options
        """
        super(RectifiedFlowTrainer, self).__init__(model, **kwargs)
        data = np.asarray(data, dtype=np.float64)
        if data.ndim < 2 or data.shape[0] == 0:
            raise error.DataError('training data is empty')
        if data.shape[1:] != model.data_shape:
            raise error.ShapeError('data of shape {} does not match the model shape {}'.format(
                data.shape[1:], model.data_shape))
        self.data = data
        self.latent_sampler = latent_sampler
        self.time_dist = TimeDist('uniform')

    def _sample_batch(self, rng, size):
        x1 = self.data[rng.integers(len(self.data), size=size)]
        x0 = self.latent_sampler(rng, x1.shape)
        t = self.time_dist.sample(rng, size)
        return interpolate_state(x0, x1, t), t, x1 - x0


def train_1rf(model, data, config_digest=None, **kwargs):
    """Trains a 1-RF model on ``data``.

    Returns:
        (model, FlowStage, RectifiedFlowTrainer)
    """
    trainer = RectifiedFlowTrainer(model, data, **kwargs)
    trainer.train()
    return model, FlowStage.initial(config_digest), trainer
