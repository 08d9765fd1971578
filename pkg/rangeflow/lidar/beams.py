import os

import numpy as np

from rangeflow import error
from rangeflow.lidar.rotations import normalize_angles


class BeamTable(object):
    """Per-row elevation angles of a spinning LiDAR.

    Rows run top to bottom, so elevations are strictly decreasing. Columns
    are W uniform azimuth bins; column ``c`` is centered at
    ``pi - (c + 0.5) * 2 * pi / W`` (azimuth decreases with the column index).

    Args:
        elevations (array_like): elevation per row in radians, top row first
    """

    def __init__(self, elevations):
        elevations = np.asarray(elevations, dtype=np.float64).ravel()
        if elevations.size == 0:
            raise error.InvalidArgument('beam table is empty')
        if not np.all(np.isfinite(elevations)):
            raise error.InvalidArgument('beam table holds non-finite angles')
        if np.any(np.diff(elevations) >= 0):
            raise error.InvalidArgument('beam elevations must be strictly decreasing from top to bottom')
        self.elevations = elevations

    def __len__(self):
        return self.elevations.size

    def __eq__(self, other):
        return isinstance(other, BeamTable) and np.array_equal(self.elevations, other.elevations)

    @property
    def height(self):
        return self.elevations.size

    @classmethod
    def uniform(cls, height=64, top_deg=3.0, bottom_deg=-25.0):
        return cls(np.deg2rad(np.linspace(top_deg, bottom_deg, height)))

    @classmethod
    def from_file(cls, path):
        """Reads one elevation angle in degrees per line, top row first.
        """
        if not os.path.exists(path):
            raise error.DataError('beam table {} does not exist'.format(path))
        degrees = []
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith('#'):
                    continue
                try:
                    degrees.append(float(line))
                except ValueError:
                    raise error.DataError('{}:{}: not an angle: {!r}'.format(path, lineno, line))
        return cls(np.deg2rad(degrees))

    def to_file(self, path):
        with open(path, 'w') as f:
            for angle in np.rad2deg(self.elevations):
                f.write('{!r}\n'.format(float(angle)))

    def azimuth_centers(self, width):
        """Azimuth of each column center in radians, wrapped to [-pi, pi).
        """
        step = 2.0 * np.pi / width
        return normalize_angles(np.pi - (np.arange(width) + 0.5) * step)

    def nearest_rows(self, elevation):
        """Index of the beam whose angle is nearest to each elevation.
        """
        elevation = np.asarray(elevation, dtype=np.float64)
        return np.abs(elevation[..., None] - self.elevations).argmin(axis=-1)

    def pooled(self, rows):
        """Mean elevation of consecutive beam groups, one group per token row.
        """
        if rows < 1 or self.height % rows:
            raise error.ShapeError('beam table of height {} cannot cover {} token rows'.format(
                self.height, rows))
        return self.elevations.reshape(rows, -1).mean(axis=1)

