from rangeflow.lidar.beams import BeamTable
from rangeflow.lidar.codec import (
    DEFAULT_X_MAX, RAYDROP_EPS, ClampCounter, PointCloud, RangeImage,
    encode_log, decode_log, to_model_space, from_model_space,
)
from rangeflow.lidar.projection import azimuth_columns, project, unproject, pixel_directions
from rangeflow.lidar.files import (
    read_point_cloud, write_point_cloud, read_range_image, write_range_image, read_range_image_dir,
)
from rangeflow.lidar.scenes import Box, generate_scene, mini_lidar
