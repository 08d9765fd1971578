import struct

import numpy as np
import pytest

from rangeflow import error
from rangeflow.lidar import (
    BeamTable, ClampCounter, PointCloud, RangeImage, azimuth_columns, decode_log, encode_log,
    from_model_space, generate_scene, mini_lidar, pixel_directions, project, read_point_cloud,
    read_range_image, read_range_image_dir, to_model_space, unproject, write_point_cloud, write_range_image,
)
from rangeflow.lidar.files import decode_range_image, encode_range_image
from rangeflow.lidar.rotations import euler2mat, normalize_angles, rotate_points, yaw2mat
from rangeflow.lidar.scenes import Box


def _grid_cloud(beams, width, seed=0, fill=0.6):
    """Points exactly on pixel directions, in row-major pixel order."""
    rng = np.random.default_rng(seed)
    directions = pixel_directions(beams, width)
    hit = rng.random(directions.shape[:2]) < fill
    ranges = rng.uniform(1.0, 79.0, size=directions.shape[:2])
    xyz = directions[hit] * ranges[hit][:, None]
    return PointCloud(np.column_stack([xyz, rng.uniform(0, 1, size=len(xyz))])), hit


class TestBeamTable:

    def test_uniform(self):
        beams = BeamTable.uniform(16)
        assert beams.height == 16
        assert beams.elevations[0] == pytest.approx(np.deg2rad(3.0))
        assert beams.elevations[-1] == pytest.approx(np.deg2rad(-25.0))

    def test_must_decrease(self):
        with pytest.raises(error.InvalidArgument):
            BeamTable([0.1, 0.2])
        with pytest.raises(error.InvalidArgument):
            BeamTable([])

    def test_file_round_trip(self, tmp_path):
        beams = BeamTable.uniform(8)
        path = str(tmp_path / 'beams.txt')
        beams.to_file(path)
        np.testing.assert_allclose(BeamTable.from_file(path).elevations, beams.elevations, rtol=1e-15)

    def test_bad_file(self, tmp_path):
        path = tmp_path / 'beams.txt'
        path.write_text('# degrees\n2.0\nup\n')
        with pytest.raises(error.DataError, match=':3:'):
            BeamTable.from_file(str(path))
        with pytest.raises(error.DataError):
            BeamTable.from_file(str(tmp_path / 'absent.txt'))

    def test_azimuth_centers(self):
        np.testing.assert_allclose(BeamTable.uniform(2).azimuth_centers(4),
                                   [0.75 * np.pi, 0.25 * np.pi, -0.25 * np.pi, -0.75 * np.pi])

    def test_pooled(self):
        beams = BeamTable([0.3, 0.1, -0.1, -0.3])
        np.testing.assert_allclose(beams.pooled(2), [0.2, -0.2])
        with pytest.raises(error.ShapeError):
            beams.pooled(3)

    def test_nearest_rows(self):
        beams = BeamTable([0.3, 0.1, -0.1, -0.3])
        np.testing.assert_array_equal(beams.nearest_rows([0.5, 0.09, -0.25, -1.0]), [0, 1, 3, 3])


class TestCodec:

    def test_log_round_trip(self):
        ranges = np.random.default_rng(0).uniform(0.01, 80.0, size=1000000)
        decoded = decode_log(encode_log(ranges))
        assert np.max(np.abs(decoded - ranges) / ranges) <= 1e-6

    def test_log_endpoints(self):
        np.testing.assert_allclose(encode_log([0.0, 80.0]), [0.0, 1.0])
        assert encode_log(20.0, x_max=20.0) == pytest.approx(1.0)

    def test_clamped_values_are_counted(self):
        counter = ClampCounter()
        np.testing.assert_allclose(encode_log([-1.0, 100.0, 5.0], counter=counter)[:2], [0.0, 1.0])
        assert counter.count == 2

    def test_bad_x_max(self):
        with pytest.raises(error.InvalidArgument):
            encode_log(1.0, x_max=0.0)

    def test_point_cloud_validation(self):
        with pytest.raises(error.ShapeError):
            PointCloud(np.zeros((3, 3)))
        with pytest.raises(error.DataError):
            PointCloud([[1.0, 0.0, 0.0, 1.5]])
        assert len(PointCloud(np.zeros(0))) == 0

    def test_image_channels_in_unit_range(self):
        beams = BeamTable.uniform(2)
        with pytest.raises(error.DataError):
            RangeImage(np.full((2, 3), 1.2), np.zeros((2, 3)), np.zeros((2, 3), dtype=bool), beams)
        image = RangeImage(np.full((2, 3), 1.2), np.zeros((2, 3)), np.ones((2, 3), dtype=bool), beams)
        assert np.all(image.log_range == 0.0)

    def test_image_beam_rows(self):
        with pytest.raises(error.ShapeError):
            RangeImage(np.zeros((3, 8)), np.zeros((3, 8)), np.zeros((3, 8), dtype=bool), BeamTable.uniform(4))

    def test_model_space_sentinel(self):
        beams = BeamTable.uniform(2)
        mask = np.array([[True, False], [False, False]])
        image = RangeImage(np.full((2, 2), 0.5), np.full((2, 2), 0.25), mask, beams)
        values = to_model_space(image)
        np.testing.assert_array_equal(values[:, 0, 0], [-1.0, -1.0])
        np.testing.assert_allclose(values[:, 1, 1], [0.0, -0.5])
        back = from_model_space(values, beams)
        np.testing.assert_array_equal(back.mask, mask)
        np.testing.assert_allclose(back.log_range[~mask], 0.5)

    def test_raydrop_threshold(self):
        beams = BeamTable.uniform(1)
        values = np.full((2, 1, 3), 0.0)
        values[0, 0] = [-1.0 + 1.0 / 255.0, -1.0 + 3.0 / 255.0, 1.4]
        counter = ClampCounter()
        image = from_model_space(values, beams, counter=counter)
        np.testing.assert_array_equal(image.mask[0], [True, False, False])
        assert image.log_range[0, 2] == 1.0
        assert counter.count == 1

    def test_model_space_shape(self):
        with pytest.raises(error.ShapeError):
            from_model_space(np.zeros((3, 2, 2)), BeamTable.uniform(2))


class TestProjection:

    def test_azimuth_columns(self):
        np.testing.assert_array_equal(azimuth_columns(np.array([np.pi - 1e-9, 0.0, -np.pi]), 4), [0, 2, 0])

    def test_grid_round_trip(self):
        beams = BeamTable.uniform(16)
        cloud, hit = _grid_cloud(beams, 128)
        image = project(cloud, beams, 128)
        np.testing.assert_array_equal(~image.mask, hit)
        back = unproject(image)
        assert np.abs(back.xyz - cloud.xyz).max() <= 1e-4
        np.testing.assert_allclose(back.reflectance, cloud.reflectance)

    def test_nearest_point_wins(self):
        beams = BeamTable([0.0, -0.2])
        points = np.array([[10.0, 0.0, 0.0, 0.9], [5.0, 0.0, 0.0, 0.1], [7.0, 0.0, 0.0, 0.5]])
        image = project(points, beams, 8)
        assert (~image.mask).sum() == 1
        assert image.ranges()[~image.mask][0] == pytest.approx(5.0)
        assert image.reflectance[~image.mask][0] == pytest.approx(0.1)

    def test_origin_points_dropped(self):
        image = project(np.zeros((2, 4)), BeamTable.uniform(2), 4)
        assert image.mask.all()

    def test_long_ranges_clamped(self):
        counter = ClampCounter()
        image = project([[200.0, 0.0, 0.0, 0.5]], BeamTable([0.0, -0.1]), 4, counter=counter)
        assert image.log_range.max() == 1.0 and counter.count == 1

    @pytest.mark.parametrize('shift', [1, 5, 64])
    def test_yaw_rolls_columns(self, shift):
        beams = BeamTable.uniform(16)
        cloud, _ = _grid_cloud(beams, 128, seed=2)
        image = project(cloud, beams, 128)
        turned = project(rotate_points(cloud.points, yaw2mat(2 * np.pi * shift / 128)), beams, 128)
        np.testing.assert_array_equal(turned.mask, np.roll(image.mask, -shift, axis=-1))
        np.testing.assert_allclose(turned.log_range, np.roll(image.log_range, -shift, axis=-1), atol=1e-12)
        np.testing.assert_array_equal(turned.reflectance, np.roll(image.reflectance, -shift, axis=-1))


class TestFiles:

    def test_point_cloud_round_trip(self, tmp_path):
        cloud, _ = _grid_cloud(BeamTable.uniform(4), 16)
        path = str(tmp_path / 'scan.bin')
        write_point_cloud(path, cloud)
        np.testing.assert_allclose(read_point_cloud(path).points, cloud.points, rtol=1e-6, atol=1e-5)

    def test_partial_record(self, tmp_path):
        path = tmp_path / 'scan.bin'
        path.write_bytes(b'\0' * 20)
        with pytest.raises(error.FormatError, match='byte 16'):
            read_point_cloud(str(path))

    def test_range_image_round_trip(self, tmp_path):
        beams = BeamTable.uniform(16)
        cloud, _ = _grid_cloud(beams, 64, seed=1)
        image = project(cloud, beams, 64)
        path = str(tmp_path / 'scan.rimg')
        write_range_image(path, image, digest='d' * 64)
        loaded, digest = read_range_image(path)
        assert digest == 'd' * 64
        assert loaded.beams == beams
        np.testing.assert_array_equal(loaded.mask, image.mask)
        assert np.abs(unproject(loaded).xyz - cloud.xyz).max() <= 1e-4

    def test_bad_magic(self):
        with pytest.raises(error.FormatError, match='byte 0'):
            decode_range_image(b'NOTANIMG' + b'\0' * 32)

    def test_bad_channel_count(self):
        payload = bytearray(encode_range_image(RangeImage.empty(BeamTable.uniform(2), 4)))
        payload[16] = 3
        with pytest.raises(error.FormatError, match='byte 16'):
            decode_range_image(bytes(payload))

    def test_channel_out_of_range(self):
        image = project([[10.0, 0.0, 0.0, 0.5]], BeamTable([0.0, -0.1]), 4)
        payload = bytearray(encode_range_image(image))
        # empty digest: channels start after 24 header bytes and a 4-byte length
        pixel = int(np.flatnonzero(~image.mask.ravel())[0])
        at = 28 + 4 * (image.mask.size + pixel)
        payload[at:at + 4] = struct.pack('<f', 1.5)
        with pytest.raises(error.FormatError, match=r'reflectance.*byte 28\)'):
            decode_range_image(bytes(payload))

    def test_truncated_and_trailing(self):
        payload = encode_range_image(RangeImage.empty(BeamTable.uniform(2), 4))
        with pytest.raises(error.FormatError, match='truncated'):
            decode_range_image(payload[:-3])
        with pytest.raises(error.FormatError, match='trailing'):
            decode_range_image(payload + b'\0')

    def test_directory(self, tmp_path):
        beams = BeamTable.uniform(2)
        for name in ('b.rimg', 'a.rimg'):
            write_range_image(str(tmp_path / name), RangeImage.empty(beams, 4))
        assert len(read_range_image_dir(str(tmp_path))) == 2
        with pytest.raises(error.DataError):
            read_range_image_dir(str(tmp_path / 'missing'))


class TestRotations:

    def test_orthonormal(self):
        mats = euler2mat(np.random.default_rng(0).uniform(-np.pi, np.pi, size=(5, 3)))
        for mat in mats:
            np.testing.assert_allclose(mat @ mat.T, np.eye(3), atol=1e-12)
            assert np.linalg.det(mat) == pytest.approx(1.0)

    def test_yaw_turns_counter_clockwise(self):
        np.testing.assert_allclose(yaw2mat(np.pi / 2) @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)

    def test_rotate_points_keeps_reflectance(self):
        points = np.array([[1.0, 0.0, 0.0, 0.7]])
        np.testing.assert_allclose(rotate_points(points, yaw2mat(np.pi)), [[-1.0, 0.0, 0.0, 0.7]], atol=1e-12)

    def test_normalize_angles(self):
        np.testing.assert_allclose(normalize_angles([np.pi, 3 * np.pi / 2, -np.pi]),
                                   [-np.pi, -np.pi / 2, -np.pi])


class TestScenes:

    def test_box_hit(self):
        box = Box(center=(10.0, 0.0), size=(2.0, 2.0, 2.0), yaw=0.0, reflectance=0.5)
        t = box.hit_distance(np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]), ground_z=-1.0)
        assert t[0] == pytest.approx(9.0)
        assert np.isinf(t[1])

    def test_scene_points_on_pixels(self):
        beams = BeamTable.uniform(16)
        cloud = generate_scene(np.random.default_rng(0), beams, width=64)
        assert 0 < len(cloud) <= 16 * 64
        image = project(cloud, beams, 64)
        assert (~image.mask).sum() == len(cloud)

    def test_mini_lidar(self):
        images = mini_lidar(3, seed=4, height=8, width=32)
        assert images.shape == (3, 2, 8, 32)
        assert images.min() >= -1.0 and images.max() <= 1.0
        np.testing.assert_array_equal(images, mini_lidar(3, seed=4, height=8, width=32))
