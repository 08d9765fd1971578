import numpy as np

'''
Rotations
=========

Conventions
-----------
    - Sensor frame: x forward, y left, z up (right-handed)
    - All functions accept batches as well as individual rotations
    - All angles are in radians
    - Euler angles are (roll, pitch, yaw), applied about the fixed x, y and
      z axes in that order, so R = Rz(yaw) @ Ry(pitch) @ Rx(roll)
    - Positive yaw turns points counter-clockwise seen from above, which
      increases their azimuth atan2(y, x)
'''


def euler2mat(euler):
    """ Convert (roll, pitch, yaw) to rotation matrices, batched over leading axes """
    euler = np.asarray(euler, dtype=np.float64)
    assert euler.shape[-1] == 3, "Invalid shaped euler {}".format(euler)

    sr, sp, sy = np.sin(euler[..., 0]), np.sin(euler[..., 1]), np.sin(euler[..., 2])
    cr, cp, cy = np.cos(euler[..., 0]), np.cos(euler[..., 1]), np.cos(euler[..., 2])

    mat = np.empty(euler.shape[:-1] + (3, 3), dtype=np.float64)
    mat[..., 0, 0] = cy * cp
    mat[..., 0, 1] = cy * sp * sr - sy * cr
    mat[..., 0, 2] = cy * sp * cr + sy * sr
    mat[..., 1, 0] = sy * cp
    mat[..., 1, 1] = sy * sp * sr + cy * cr
    mat[..., 1, 2] = sy * sp * cr - cy * sr
    mat[..., 2, 0] = -sp
    mat[..., 2, 1] = cp * sr
    mat[..., 2, 2] = cp * cr
    return mat


def yaw2mat(yaw):
    yaw = np.asarray(yaw, dtype=np.float64)
    zeros = np.zeros_like(yaw)
    return euler2mat(np.stack([zeros, zeros, yaw], axis=-1))


def rotate_points(points, mat):
    """Rotates the xyz columns of an (N, 3+k) array; extra columns are kept.
    """
    points = np.asarray(points, dtype=np.float64)
    out = points.copy()
    out[:, :3] = points[:, :3] @ np.asarray(mat).T
    return out


def normalize_angles(angles):
    '''Puts angles in [-pi, pi) range.'''
    angles = np.array(angles, dtype=np.float64)
    if angles.size > 0:
        angles = (angles + np.pi) % (2 * np.pi) - np.pi
        assert -np.pi - 1e-6 <= angles.min() and angles.max() <= np.pi + 1e-6
    return angles
