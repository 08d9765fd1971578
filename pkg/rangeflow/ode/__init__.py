from rangeflow.ode.trajectory import Trajectory
from rangeflow.ode.solvers import (
    METHODS, SolverSpec, CountingField, euler_step, midpoint_step, dopri5_step, integrate,
)
from rangeflow.ode.sampling import check_schedule, draw_latents, sample, generate, invert, slerp, reverse_spec
