import numpy as np
import pytest

from superframe.functional import ProtocolConfig, protocol_crop, select_frames


def coded(h, w):
    return np.arange(h * w, dtype=np.float64).reshape(h, w, 1)


@pytest.mark.parametrize("size, expected", [(200, 160), (288, 256), (272, 256), (201, 160)])
def test_protocol_crop_hr(size, expected):
    assert protocol_crop(coded(size, size)).shape == (expected, expected, 1)


def test_protocol_crop_centering():
    frame = coded(200, 201)
    cropped = protocol_crop(frame)
    # 184 -> 160 leaves 12 px per side; 185 -> 160 puts the odd pixel right
    assert cropped.shape == (160, 160, 1)
    assert cropped[0, 0, 0] == frame[20, 20, 0]
    assert cropped[-1, -1, 0] == frame[179, 179, 0]


def test_protocol_crop_lr():
    assert protocol_crop(coded(50, 72), scale="lr").shape == (40, 64, 1)
    cfg = ProtocolConfig(border_at="lr")
    assert protocol_crop(coded(50, 72), cfg, scale="lr").shape == (32, 56, 1)
    assert protocol_crop(coded(200, 288), cfg).shape == (128, 224, 1)


def test_protocol_crop_lr_dims_divisible():
    for h, w in [(576, 704), (480, 720), (240, 360), (144, 180)]:
        cropped = protocol_crop(coded(h, w))
        assert cropped.shape[0] % 32 == 0
        assert cropped.shape[1] % 32 == 0


def test_protocol_crop_idempotent_on_conforming():
    frame = coded(160, 160)
    cfg = ProtocolConfig(border=0)
    assert np.array_equal(protocol_crop(frame, cfg), frame)


def test_protocol_crop_batched():
    frames = np.zeros((2, 5, 200, 200, 3))
    assert protocol_crop(frames).shape == (2, 5, 160, 160, 3)


def test_protocol_crop_empty():
    with pytest.raises(ValueError):
        protocol_crop(coded(40, 40))


def test_select_frames():
    assert select_frames(10, "spatial") == [2, 3, 4, 5, 6, 7]
    assert select_frames(10, "temporal") == [3, 4, 5, 6, 7]
    assert select_frames(5, "spatial") == [2]
    with pytest.raises(ValueError, match="minimum of 6"):
        select_frames(5, "temporal")
    with pytest.raises(ValueError):
        select_frames(10, "both")


def test_protocol_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(border=-1)
    with pytest.raises(ValueError):
        ProtocolConfig(divisor=0)
    with pytest.raises(ValueError):
        ProtocolConfig(spatial_skip=(1,))
    with pytest.raises(ValueError):
        ProtocolConfig(border_at="both")
