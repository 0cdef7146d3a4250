"""Polar acoustic image formation, display normalisation and fan-shape rasterisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raytracer import RayBuffers, SonarIntrinsics


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolarImage:
    """Beam x range-bin intensities; row ``p`` is beam ``p``, column ``d`` range bin ``d``."""

    values: np.ndarray
    intrinsics: SonarIntrinsics

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.intrinsics.shape:
            raise DimensionMismatchError(
                f"image shape {values.shape} does not match intrinsics {self.intrinsics.shape}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def zeros(cls, intr: SonarIntrinsics) -> PolarImage:
        return cls(np.zeros(intr.shape), intr)

    def __add__(self, other: PolarImage) -> PolarImage:
        _check_same_shape(self, other)
        return PolarImage(self.values + other.values, self.intrinsics)

    def scaled(self, factor: float) -> PolarImage:
        return PolarImage(self.values * factor, self.intrinsics)


@dataclass(frozen=True, eq=False)
class DisplayImage:
    pixels: np.ndarray  # uint8
    geometry: str  # "polar" or "fanshape"

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def _check_same_shape(a, b) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def range_bins(r: np.ndarray, intr: SonarIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Range-bin index ``floor((r - r_min) / r_res)`` and a mask of bins inside ``[0, l)``.

    Non-finite ranges (no hit) are always masked out.
    """
    r = np.asarray(r, float)
    finite = np.isfinite(r)
    rel = np.where(finite, (r - intr.r_min) / intr.r_res, -1.0)
    bins = np.floor(rel)
    valid = finite & (bins >= 0) & (bins < intr.n_range_bins)
    return np.where(valid, bins, 0).astype(np.int64), valid


def accumulate(rows: np.ndarray, ranges: np.ndarray, weights: np.ndarray, intr: SonarIntrinsics) -> np.ndarray:
    """Sum ``weights`` into a beam x bin matrix at ``(rows, bin(ranges))``, in input order."""
    bins, valid = range_bins(ranges, intr)
    m, l = intr.shape
    flat = np.asarray(rows, np.int64)[valid] * l + bins[valid]
    return np.bincount(flat, weights=np.asarray(weights, float)[valid], minlength=m * l).reshape(m, l)


def form_acoustic_image(buffers: RayBuffers, intr: SonarIntrinsics) -> PolarImage:
    """Fold ``M x L`` ray buffers into the ``M x l`` polar image.

    Every ray of row ``p`` adds its intensity to bin
    ``floor((D - r_min) / r_res)`` of beam ``p``; out-of-window hits are dropped.
    """
    m, n = buffers.shape
    if (m, n) != (intr.n_beams, intr.n_elev_samples):
        raise DimensionMismatchError(
            f"buffers are {m}x{n}, intrinsics expect {intr.n_beams}x{intr.n_elev_samples}")
    rows = np.broadcast_to(np.arange(m)[:, None], (m, n))
    return PolarImage(accumulate(rows.ravel(), buffers.distances.ravel(),
                                 buffers.intensities.ravel(), intr), intr)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def display_gain(img: PolarImage) -> float:
    peak = float(img.values.max()) if img.values.size else 0.0
    return 255.0 / peak if peak > 0 else 0.0


def normalize_image(img: PolarImage, gain: float | None = None) -> DisplayImage:
    """Linear map to 8 bits: ``value * 255 / max`` (or ``value * gain``), clamped and rounded half-up."""
    g = display_gain(img) if gain is None else gain
    scaled = np.clip(_round_half_up(img.values * g), 0, 255)
    return DisplayImage(scaled.astype(np.uint8), "polar")


def fanshape_extent(intr: SonarIntrinsics) -> tuple[float, float, float, float]:
    """Bounding box ``(x_min, x_max, y_min, y_max)`` of the fan in the sonar x-y plane."""
    half = 0.5 * intr.azimuth_fov
    x_min = intr.r_min * math.cos(half)
    y_max = intr.r_max * math.sin(half)
    return x_min, intr.r_max, -y_max, y_max


def polar_cell(intr: SonarIntrinsics, x, y):
    """Polar cell ``(beam, bin)`` containing plane point ``(x, y)`` and whether it lies in the fan."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    half = 0.5 * intr.azimuth_fov
    inside = (r >= intr.r_min) & (r <= intr.r_max) & (theta >= -half) & (theta <= half)
    beam = np.clip(np.floor((theta + half) / (intr.azimuth_fov / intr.n_beams)), 0, intr.n_beams - 1)
    rbin = np.clip(np.floor((r - intr.r_min) / intr.r_res), 0, intr.n_range_bins - 1)
    return beam.astype(np.int64), rbin.astype(np.int64), inside


def fanshape_lookup(intr: SonarIntrinsics, pixel_pitch: float):
    """Nearest polar cell for every fan pixel centre.

    Rows run from far range (top) to near range; columns from -y to +y.
    """
    if not pixel_pitch > 0:
        raise ValueError("pixel_pitch must be positive")
    x_min, x_max, y_min, y_max = fanshape_extent(intr)
    n_rows = max(1, math.ceil((x_max - x_min) / pixel_pitch))
    n_cols = max(1, math.ceil((y_max - y_min) / pixel_pitch))
    x = x_max - (np.arange(n_rows) + 0.5) * pixel_pitch
    y = y_min + (np.arange(n_cols) + 0.5) * pixel_pitch
    xx, yy = np.meshgrid(x, y, indexing="ij")
    return polar_cell(intr, xx, yy)


def to_fanshape(img: PolarImage, pixel_pitch: float, gain: float | None = None) -> DisplayImage:
    """Euclidean (fan-shape) raster of the normalised polar image, nearest-neighbour sampled."""
    polar = normalize_image(img, gain).pixels
    beam, rbin, inside = fanshape_lookup(img.intrinsics, pixel_pitch)
    out = np.where(inside, polar[beam, rbin], 0).astype(np.uint8)
    return DisplayImage(out, "fanshape")


# --- files -------------------------------------------------------------------


def write_pgm(img: DisplayImage, path, range_rows: bool = False) -> None:
    """Binary PGM (P5, maxval 255). ``range_rows`` transposes a polar image to range x beam."""
    pix = img.pixels.T if (range_rows and img.geometry == "polar") else img.pixels
    pix = np.ascontiguousarray(pix, dtype=np.uint8)
    h, w = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path, geometry: str = "polar") -> DisplayImage:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: only binary PGM (P5) is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace after maxval
    pix = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return DisplayImage(pix.reshape(h, w).copy(), geometry)


def write_png(img: DisplayImage, path, range_rows: bool = False) -> None:
    from PIL import Image

    pix = img.pixels.T if (range_rows and img.geometry == "polar") else img.pixels
    Image.fromarray(np.ascontiguousarray(pix, dtype=np.uint8), mode="L").save(path)


def write_csv(img: PolarImage, path) -> None:
    """Raw polar values, one row per beam, full double precision."""
    np.savetxt(path, img.values, delimiter=",", fmt="%.17g")


def read_csv(path, intr: SonarIntrinsics) -> PolarImage:
    return PolarImage(np.loadtxt(path, delimiter=",", ndmin=2), intr)
