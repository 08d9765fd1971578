from rangeflow import error
from rangeflow.flow.losses import interpolate_state
from rangeflow.flow.timesteps import TimeDist
from rangeflow.flow.trainer import FlowTrainer


class ReflowTrainer(FlowTrainer):
    """Straightening on ODE-coupled pairs with pseudo-Huber loss and
    u-shaped times. The model starts from the parent weights.
    """
    loss_kind = 'pseudo-huber'
    stage_tag = '2-RF'

    def __init__(self, model, pairs, time_dist=None, **kwargs):
        """Args:
            model (VelocityNet): model holding the parent weights, trained in place
            pairs (PairDataset): ode-coupled pairs from the parent
            time_dist (TimeDist): defaults to u-shaped with a = 4
            **kwargs: FlowTrainer options
        """
        super(ReflowTrainer, self).__init__(model, **kwargs)
        if not pairs.coupled:
            raise error.StageError('reflow trains on ode-coupled pairs; independent pairs would '
                                   'repeat 1-RF training')
        if len(pairs) == 0:
            raise error.DataError('pair set is empty')
        if pairs.data_shape != model.data_shape:
            raise error.ShapeError('pairs of shape {} do not match the model shape {}'.format(
                pairs.data_shape, model.data_shape))
        self.pairs = pairs
        self.time_dist = time_dist or TimeDist('u-shaped', 4.0)

    def _sample_batch(self, rng, size):
        idx = rng.integers(len(self.pairs), size=size)
        x0, x1 = self.pairs.x0[idx], self.pairs.x1[idx]
        t = self.time_dist.sample(rng, size)
        return interpolate_state(x0, x1, t), t, x1 - x0


def train_reflow(model, pairs, parent_stage, parent_digest, config_digest=None, **kwargs):
    """Trains a 2-RF model from parent weights already loaded into ``model``.

    Returns:
        (model, FlowStage, ReflowTrainer)
    """
    stage = parent_stage.child('2-RF', parent_digest, config_digest=config_digest)
    if pairs.parent_digest and pairs.parent_digest != parent_digest:
        raise error.StageError('pairs were generated by {} but the parent is {}'.format(
            pairs.parent_digest[:12], parent_digest[:12]))
    trainer = ReflowTrainer(model, pairs, **kwargs)
    trainer.train()
    return model, stage, trainer
