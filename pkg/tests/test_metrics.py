import csv
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from sonarsim.imaging import DimensionMismatchError, DisplayImage
from sonarsim.metrics import CSV_HEADER, mse, psnr, psnr_from_mse, report, write_reports


def img(pixels, geometry="polar"):
    return DisplayImage(np.asarray(pixels, np.uint8), geometry)


def test_mse_examples():
    zeros = img(np.zeros((2, 2)))
    assert mse(zeros, zeros) == 0.0
    assert mse(img([[255, 0], [0, 0]]), zeros) == 16256.25
    assert psnr(zeros, zeros) == math.inf


def test_psnr_example():
    # uniform error of 10 grey levels
    a, b = img(np.full((3, 4), 100)), img(np.full((3, 4), 110))
    assert mse(a, b) == 100.0
    assert psnr(a, b) == pytest.approx(28.13, abs=0.01)


def test_no_uint8_wraparound():
    assert mse(img([[0]]), img([[255]])) == 255.0 ** 2


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        mse(img(np.zeros((2, 2))), img(np.zeros((2, 3))))


def test_report_tag_and_csv(tmp_path):
    rep = report(img([[1, 2]], "fanshape"), img([[1, 4]], "fanshape"))
    assert rep.coordinate_tag == "fanshape" and rep.mse == 2.0
    write_reports(tmp_path / "m.csv", [("tank", "full", rep)])
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1][:3] == ["tank", "full", "fanshape"]
    assert float(rows[1][3]) == pytest.approx(psnr_from_mse(2.0), abs=1e-6)


pairs = st.integers(1, 8).flatmap(lambda h: st.integers(1, 8).flatmap(lambda w: st.tuples(
    hnp.arrays(np.uint8, (h, w)), hnp.arrays(np.uint8, (h, w)))))


@settings(max_examples=200, deadline=None)
@given(pairs)
def test_mse_symmetric_and_non_negative(ab):
    a, b = img(ab[0]), img(ab[1])
    assert mse(a, b) == mse(b, a) >= 0.0
    assert (mse(a, b) == 0.0) == np.array_equal(ab[0], ab[1])


@settings(max_examples=200, deadline=None)
@given(pairs, st.integers(-50, 50))
def test_mse_shift_invariant(ab, shift):
    a, b = ab[0].astype(int), ab[1].astype(int)
    assume(min(a.min(), b.min()) + shift >= 0 and max(a.max(), b.max()) + shift <= 255)
    assert mse(img(a + shift), img(b + shift)) == mse(img(a), img(b))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 65025.0), st.floats(1e-6, 65025.0))
def test_psnr_strictly_decreasing(m1, m2):
    if m1 < m2:
        assert psnr_from_mse(m1) > psnr_from_mse(m2)
