from rangeflow.data import register

register(
    id='eight-gaussians',
    entry_point='rangeflow.data.toy:eight_gaussians',
    data_shape=(2,),
    kwargs={'radius': 4.0, 'std': 0.2},
)

for height, width in [(16, 128), (32, 256)]:
    suffix = '' if height == 16 else '-{}x{}'.format(height, width)
    register(
        id='mini-lidar{}'.format(suffix),
        entry_point='rangeflow.lidar.scenes:mini_lidar',
        data_shape=(2, height, width),
        kwargs={'height': height, 'width': width},
    )
