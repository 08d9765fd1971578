from rangeflow import error
from rangeflow.nets.velocity_net import VelocityNet
from rangeflow.nets.mlp import MlpVelocity
from rangeflow.nets.hourglass import HourglassVelocity

registry = {
    MlpVelocity.kind: MlpVelocity,
    HourglassVelocity.kind: HourglassVelocity,
}


def make(kind, **spec):
    """Builds a velocity estimator from its kind and ``spec()`` keywords.
    """
    if kind not in registry:
        raise error.Unregistered('no velocity model registered as {!r}'.format(kind))
    return registry[kind](**spec)
