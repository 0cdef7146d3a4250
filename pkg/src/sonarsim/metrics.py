"""MSE / PSNR on 8-bit display images."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .imaging import DimensionMismatchError, DisplayImage

PEAK = 255.0
PSNR_IDENTICAL = math.inf  # reported when the images are identical


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    coordinate_tag: str  # "polar" or "fanshape"


def _pixels(img) -> np.ndarray:
    return np.asarray(img.pixels if isinstance(img, DisplayImage) else img, dtype=np.float64)


def mse(a: DisplayImage, b: DisplayImage) -> float:
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(f"cannot compare images of shape {pa.shape} and {pb.shape}")
    diff = pa - pb
    return float(np.mean(diff * diff))


def psnr_from_mse(value: float) -> float:
    if value == 0.0:
        return PSNR_IDENTICAL
    return 10.0 * math.log10(PEAK * PEAK / value)


def psnr(a: DisplayImage, b: DisplayImage) -> float:
    return psnr_from_mse(mse(a, b))


def report(a: DisplayImage, b: DisplayImage, coordinate_tag: str | None = None) -> MetricReport:
    value = mse(a, b)
    tag = coordinate_tag or (a.geometry if isinstance(a, DisplayImage) else "polar")
    return MetricReport(value, psnr_from_mse(value), tag)


CSV_HEADER = ("scene_id", "mode", "coordinate_tag", "psnr", "mse")


def write_reports(path, rows) -> None:
    """Write ``(scene_id, mode, MetricReport)`` tuples as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for scene_id, mode, rep in rows:
            writer.writerow([scene_id, mode, rep.coordinate_tag, f"{rep.psnr:.6f}", f"{rep.mse:.6f}"])
