"""Synthetic sweeps: yawed boxes on a ground plane, ray-cast along the exact
pixel directions of a beam table.
"""
import numpy as np

from rangeflow.lidar.beams import BeamTable
from rangeflow.lidar.codec import DEFAULT_X_MAX, PointCloud, to_model_space
from rangeflow.lidar.projection import pixel_directions, project
from rangeflow.lidar.rotations import yaw2mat


class Box(object):
    """Box standing on the ground, yawed about z.

    Args:
        center (tuple): (x, y) of the footprint center in meters
        size (tuple): (length, width, height) in meters
        yaw (float): rotation about z in radians
        reflectance (float): surface reflectance in [0, 1]
    """

    def __init__(self, center, size, yaw, reflectance):
        self.center = np.asarray(center, dtype=np.float64)
        self.size = np.asarray(size, dtype=np.float64)
        self.yaw = float(yaw)
        self.reflectance = float(reflectance)

    def hit_distance(self, directions, ground_z):
        """Ray parameter of the first hit for rays from the origin, inf on a miss.
        """
        rot = yaw2mat(self.yaw)
        center = np.array([self.center[0], self.center[1], ground_z + self.size[2] / 2.0])
        origin = -rot.T @ center
        local = directions @ rot
        half = self.size / 2.0
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 = (-half - origin) / local
            t2 = (half - origin) / local
        near = np.where(np.isnan(t1), -np.inf, np.minimum(t1, t2)).max(axis=-1)
        far = np.where(np.isnan(t2), np.inf, np.maximum(t1, t2)).min(axis=-1)
        hit = (far >= near) & (near > 0)
        return np.where(hit, near, np.inf)


def random_boxes(rng, count, distance=(5.0, 30.0)):
    boxes = []
    for _ in range(count):
        radius = rng.uniform(*distance)
        angle = rng.uniform(-np.pi, np.pi)
        boxes.append(Box(center=(radius * np.cos(angle), radius * np.sin(angle)),
                         size=(rng.uniform(1.5, 5.0), rng.uniform(1.5, 3.0), rng.uniform(1.0, 3.0)),
                         yaw=rng.uniform(-np.pi, np.pi),
                         reflectance=rng.uniform(0.3, 0.9)))
    return boxes


def ray_cast(boxes, beams, width, sensor_height=1.73, x_max=DEFAULT_X_MAX, ground_reflectance=0.2):
    """Returns (ranges, reflectance), each (H, W); range is inf where the ray
    hits nothing within x_max.
    """
    directions = pixel_directions(beams, width)
    ranges = np.full(directions.shape[:2], np.inf)
    reflectance = np.zeros(directions.shape[:2])

    down = directions[..., 2] < 0
    ground = np.where(down, -sensor_height / np.where(down, directions[..., 2], -1.0), np.inf)
    closer = ground < ranges
    ranges[closer] = ground[closer]
    reflectance[closer] = ground_reflectance

    for box in boxes:
        t = box.hit_distance(directions, -sensor_height)
        closer = t < ranges
        ranges[closer] = t[closer]
        reflectance[closer] = box.reflectance
    ranges[ranges > x_max] = np.inf
    return ranges, reflectance


def generate_scene(rng, beams=None, width=128, x_max=DEFAULT_X_MAX, boxes=(2, 6), raydrop=0.02,
                   sensor_height=1.73):
    """Draws one synthetic sweep as a PointCloud whose points lie exactly on
    pixel directions, at most one per pixel.

    Args:
        rng (Generator): numpy random generator
        beams (BeamTable): defaults to 16 uniform beams from +3 to -25 degrees
        width (int): azimuth bins
        x_max (float): maximum range
        boxes (tuple): inclusive range of the box count
        raydrop (float): probability of dropping a hit
        sensor_height (float): sensor height above the ground in meters
    """
    if beams is None:
        beams = BeamTable.uniform(16)
    scene = random_boxes(rng, rng.integers(boxes[0], boxes[1] + 1))
    ranges, reflectance = ray_cast(scene, beams, width, sensor_height, x_max)
    reflectance = np.clip(reflectance + rng.normal(0.0, 0.02, size=reflectance.shape), 0.0, 1.0)
    hit = np.isfinite(ranges) & (rng.random(ranges.shape) >= raydrop)
    xyz = pixel_directions(beams, width)[hit] * ranges[hit][:, None]
    return PointCloud(np.column_stack([xyz, reflectance[hit]]))


def mini_lidar(count, seed, height=16, width=128, x_max=DEFAULT_X_MAX, **kwargs):
    """``count`` model-space sweeps, shape (count, 2, height, width).
    """
    rng = np.random.default_rng(seed)
    beams = BeamTable.uniform(height)
    images = [to_model_space(project(generate_scene(rng, beams, width, x_max, **kwargs), beams, width, x_max))
              for _ in range(count)]
    return np.stack(images) if images else np.zeros((0, 2, height, width))
