import numpy as np
import pytest
from PIL import Image as PILImage

from cdce.core import MotionField
from cdce.errors import ParseError, UnsupportedFormat
from cdce.io import (load_ground_truth, load_image, read_motion_csv, resample_bilinear, save_image,
                     write_motion_csv)


def test_pgm_bytes_decode_exactly(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 10, 20]))
    img = load_image(p)
    assert img.dtype == np.float64
    assert img.tolist() == [[0.0, 255.0], [10.0, 20.0]]


def test_pgm_header_comments_and_whitespace(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n3  1\n# max\n255\n" + bytes([1, 2, 3]))
    assert load_image(p).tolist() == [[1.0, 2.0, 3.0]]


def test_truncated_pgm(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(ParseError):
        load_image(p)


def test_malformed_pgm_header(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\nfour 4\n255\n" + bytes(16))
    with pytest.raises(ParseError):
        load_image(p)


def test_pgm_16bit_unsupported(tmp_path):
    p = tmp_path / "w.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n\x00\x01")
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_colour_png_rejected(tmp_path):
    p = tmp_path / "rgb.png"
    PILImage.fromarray(np.zeros((3, 3, 3), np.uint8), mode="RGB").save(p)
    with pytest.raises(UnsupportedFormat):
        load_image(p)


def test_ppm_is_not_a_supported_format(tmp_path):
    p = tmp_path / "x.ppm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(UnsupportedFormat):
        load_image(p)


@pytest.mark.parametrize("fmt", ["pgm", "png"])
def test_round_trip(tmp_path, rng, fmt):
    img = rng.integers(0, 256, (5, 9)).astype(float)
    p = tmp_path / f"r.{fmt}"
    save_image(p, img)
    assert np.array_equal(load_image(p), img)


def test_save_rounds_and_clamps(tmp_path):
    p = tmp_path / "c.pgm"
    save_image(p, np.array([[-4.0, 12.6, 300.0]]))
    assert load_image(p).tolist() == [[0.0, 13.0, 255.0]]


def test_ground_truth_loader(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n3 1\n255\n" + bytes([0, 16, 48]))
    gt = load_ground_truth(p, scale_divisor=16)
    assert gt.mh.tolist() == [[0.0, 1.0, 3.0]]
    assert gt.unknown.tolist() == [[True, False, False]]


@pytest.mark.parametrize("block", [1, 3])
def test_motion_csv_round_trip(tmp_path, rng, block):
    shape = (7, 8)
    f0 = MotionField.zeros(shape, block=block)
    mh = rng.integers(-3, 4, f0.grid_shape)
    mv = rng.integers(-2, 3, f0.grid_shape)
    f = MotionField(mh, mv, shape, (3, 2), block)
    p = tmp_path / "f.csv"
    write_motion_csv(p, f)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("granularity,block,wx,wy")
    assert lines[2] == "row,col,mh,mv"
    g = read_motion_csv(p)
    assert g.block == block and g.window == (3, 2) and g.image_shape == shape
    assert np.array_equal(g.mh, f.mh) and np.array_equal(g.mv, f.mv)


def test_motion_csv_garbage(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("granularity,block\npixel,x\n")
    with pytest.raises(ParseError):
        read_motion_csv(p)


def test_bilinear_resample_shape_and_constant():
    out = resample_bilinear(np.full((240, 320), 77.0), 120, 160)
    assert out.shape == (120, 160)
    assert np.allclose(out, 77.0)
