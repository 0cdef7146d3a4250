import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from sonarsim.imaging import (
    DimensionMismatchError,
    DisplayImage,
    PolarImage,
    fanshape_lookup,
    form_acoustic_image,
    normalize_image,
    polar_cell,
    range_bins,
    read_csv,
    read_pgm,
    to_fanshape,
    write_csv,
    write_pgm,
    write_png,
)
from sonarsim.raytracer import NO_HIT, RayBuffers, SonarIntrinsics


def intr(m=4, n=3, **kw):
    base = dict(n_beams=m, n_elev_samples=n, azimuth_fov=math.radians(30), elevation_fov=math.radians(10),
                r_min=1.0, r_max=2.0, r_res=0.01)
    base.update(kw)
    return SonarIntrinsics(**base)


def buffers(distances, intensities):
    return RayBuffers(np.asarray(distances, float), np.asarray(intensities, float))


def test_first_bin_and_window_edges():
    bins, valid = range_bins(np.array([1.0, 1.00999, 0.999, 2.0, 1.999, NO_HIT]), intr())
    assert bins[:2].tolist() == [0, 0]
    assert valid.tolist() == [True, True, False, False, True, False]
    assert bins[4] == 99


def test_single_ray_lands_in_its_bin():
    i = intr(m=1, n=1)
    img = form_acoustic_image(buffers([[1.234]], [[0.7]]), i)
    assert img.values[0, 23] == 0.7
    assert img.values.sum() == 0.7


def test_rays_in_same_cell_sum():
    i = intr(m=2, n=2)
    img = form_acoustic_image(buffers([[1.5, 1.505], [NO_HIT, 3.0]], [[0.2, 0.3], [0.0, 0.9]]), i)
    assert img.values[0, 50] == pytest.approx(0.5)
    assert img.values[1].sum() == 0.0


def test_buffer_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        form_acoustic_image(buffers(np.ones((3, 3)), np.ones((3, 3))), intr(m=4, n=3))
    with pytest.raises(DimensionMismatchError):
        PolarImage(np.zeros((2, 2)), intr())
    with pytest.raises(DimensionMismatchError):
        PolarImage.zeros(intr()) + PolarImage.zeros(intr(m=5))


def test_normalize_examples():
    i = intr(m=1, n=1, r_max=1.02)
    assert normalize_image(PolarImage([[0.5, 1.0]], i)).pixels.tolist() == [[128, 255]]
    assert normalize_image(PolarImage([[0.0, 0.0]], i)).pixels.tolist() == [[0, 0]]
    assert normalize_image(PolarImage([[0.5, 3.0]], i), gain=100).pixels.tolist() == [[50, 255]]


def test_polar_cell_examples():
    i = intr(m=4)
    beam, rbin, inside = polar_cell(i, 1.0 + 0.5 * i.r_res, 0.0)
    assert (int(beam), int(rbin), bool(inside)) == (2, 0, True)
    assert not polar_cell(i, 2.5, 0.0)[2]
    assert not polar_cell(i, 1.5 * math.cos(0.3), 1.5 * math.sin(0.3))[2]


def test_fanshape_of_uniform_image():
    i = intr(m=16, n=3)
    fan = to_fanshape(PolarImage(np.full(i.shape, 2.0), i), pixel_pitch=0.01)
    _, _, inside = fanshape_lookup(i, 0.01)
    assert fan.geometry == "fanshape"
    assert np.all(fan.pixels[inside] == 255) and np.all(fan.pixels[~inside] == 0)
    assert inside.mean() > 0.3
    # rows run far to near: the apex (near range) sits at the bottom centre
    assert inside[0].sum() > inside[-1].sum()


def test_fanshape_picks_the_right_beam():
    i = intr(m=16, n=3)
    values = np.zeros(i.shape)
    values[15] = 1.0  # beam at the +y edge
    fan = to_fanshape(PolarImage(values, i), pixel_pitch=0.01).pixels
    lit = np.argwhere(fan > 0)
    assert lit.size and np.all(lit[:, 1] > fan.shape[1] // 2)


ray_buffers = st.integers(1, 5).flatmap(lambda m: st.integers(1, 6).map(lambda n: (m, n)))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_energy_conservation_and_linearity(data):
    m, n = data.draw(ray_buffers)
    i = intr(m=m, n=n, r_min=1.0, r_max=3.0, r_res=0.05)
    d = data.draw(hnp.arrays(float, (m, n), elements=st.floats(0.5, 3.5)))
    w = data.draw(hnp.arrays(float, (m, n), elements=st.floats(0.0, 1.0)))
    w2 = data.draw(hnp.arrays(float, (m, n), elements=st.floats(0.0, 1.0)))
    a = data.draw(st.floats(0.0, 4.0))
    img = form_acoustic_image(buffers(d, w), i)
    in_window = (d >= i.r_min) & (np.floor((d - i.r_min) / i.r_res) < i.n_range_bins)
    assert img.values.sum() == pytest.approx(w[in_window].sum(), abs=1e-12)
    combined = form_acoustic_image(buffers(d, w + a * w2), i)
    separate = img + form_acoustic_image(buffers(d, w2), i).scaled(a)
    np.testing.assert_allclose(combined.values, separate.values, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 3), st.integers(0, 99), st.floats(0.0, 0.999999), st.floats(0.01, 5.0))
def test_ray_touches_only_its_cell(p, k, frac, weight):
    i = intr(m=4, n=2)
    d = np.full((4, 2), NO_HIT)
    w = np.zeros((4, 2))
    d[p, 1] = i.r_min + (k + frac) * i.r_res
    w[p, 1] = weight
    img = form_acoustic_image(buffers(d, w), i)
    nz = np.argwhere(img.values)
    assert len(nz) == 1 and nz[0, 0] == p and abs(nz[0, 1] - k) <= 1


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    img = DisplayImage(rng.integers(0, 256, (5, 7), dtype=np.uint8), "polar")
    write_pgm(img, tmp_path / "a.pgm")
    back = read_pgm(tmp_path / "a.pgm")
    np.testing.assert_array_equal(back.pixels, img.pixels)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n7 5\n255\n")
    write_pgm(img, tmp_path / "t.pgm", range_rows=True)
    np.testing.assert_array_equal(read_pgm(tmp_path / "t.pgm").pixels, img.pixels.T)


def test_png_and_csv_round_trip(tmp_path):
    from PIL import Image

    i = intr(m=3, n=2)
    rng = np.random.default_rng(5)
    polar = PolarImage(rng.random(i.shape) / 3.0, i)
    write_csv(polar, tmp_path / "p.csv")
    np.testing.assert_array_equal(read_csv(tmp_path / "p.csv", i).values, polar.values)
    disp = normalize_image(polar)
    write_png(disp, tmp_path / "p.png")
    np.testing.assert_array_equal(np.asarray(Image.open(tmp_path / "p.png")), disp.pixels)
