import hashlib

import numpy as np
import pytest

from ifs_lab import render
from ifs_lab.attractor import compute_attractor
from ifs_lab.errors import DimensionError
from ifs_lab.ifs_core import sierpinski
from ifs_lab.metric import BoxDomain

UNIT2 = BoxDomain([0.0, 0.0], [1.0, 1.0])

SIERPINSKI_512_SHA = "297ae286fd3bfce7b466ece046803ef593abc0b73db73ba0399540108e6de537"
SIERPINSKI_512_PPM_SHA = "1da6efda648c3ac155737c5330ba0e033e227011c02978b7a751f832c244dd79"


def test_single_point_lights_one_pixel():
    img = render.points_image([[0.5, 0.5]], 3, 3, UNIT2)
    lit = np.argwhere(img.any(axis=2))
    assert lit.tolist() == [[1, 1]]
    assert tuple(img[1, 1]) == render.FOREGROUND


def test_y_axis_points_up():
    img = render.points_image([[0.1, 0.9]], 4, 4, UNIT2)
    assert np.argwhere(img.any(axis=2)).tolist() == [[0, 0]]


def test_equal_weights_equal_gray():
    img = render.measure_image([[0.1, 0.1], [0.9, 0.9]], [0.5, 0.5], 8, 8, UNIT2)
    lit = img[img.any(axis=2)]
    assert len(lit) == 2
    assert np.all(lit == 255)


def test_heavier_atom_is_brighter():
    img = render.measure_image([[0.1, 0.1], [0.9, 0.9]], [0.25, 0.75], 8, 8, UNIT2)
    assert sorted(img[img.any(axis=2)][:, 0].tolist()) == [85, 255]


def test_three_dimensions_rejected():
    with pytest.raises(DimensionError, match="dimension 3"):
        render.rasterize([[0.0, 0.0, 0.0]], width=4)


def test_one_dimensional_strip():
    img = render.points_image([[0.0], [1.0]], 10, 3, ([0.0], [1.0]))
    cols = np.argwhere(img[:, :, 0].all(axis=0)).ravel().tolist()
    assert cols == [0, 9]
    assert img[:, 1:9].max() == 0


def test_degenerate_extent_is_widened():
    grid = render.rasterize([[2.0, 2.0]], width=5)
    assert grid[2, 2] == 1.0 and grid.sum() == 1.0


def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (7, 5, 3), dtype=np.uint8)
    render.write_ppm(tmp_path / "a.ppm", img)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n5 7\n255\n")
    assert np.array_equal(render.read_ppm(tmp_path / "a.ppm"), img)


def test_overlay_color_wins():
    img = render.overlay_image([[0.5, 0.5]], [[0.5, 0.5]], 3, 3, UNIT2)
    assert tuple(img[1, 1]) == render.OVERLAY


def test_sierpinski_checksum(tmp_path):
    f = sierpinski()
    cloud = compute_attractor(f, tol=2e-3).cloud
    img = render.points_image(cloud, 512, None, f.domain)
    assert hashlib.sha256(img.tobytes()).hexdigest() == SIERPINSKI_512_SHA
    render.render_points(tmp_path / "s.ppm", cloud, 512, None, f.domain)
    assert hashlib.sha256((tmp_path / "s.ppm").read_bytes()).hexdigest() == SIERPINSKI_512_PPM_SHA
