import numpy as np


def eight_gaussians(count, seed, radius=4.0, std=0.2):
    """Mixture of eight isotropic Gaussians evenly spaced on a circle.
    """
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * rng.integers(8, size=count) / 8.0
    centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return centers + std * rng.standard_normal((count, 2))
