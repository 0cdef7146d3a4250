"""Matplotlib figures for rendered components and mode comparisons (written to files)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .imaging import DisplayImage, PolarImage, fanshape_extent, normalize_image  # noqa: E402

_RC = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "image.cmap": "gray",
    "savefig.dpi": 150,
}


def _polar_extent(intr):
    half = math.degrees(0.5 * intr.azimuth_fov)
    return [-half, half, intr.r_min, intr.r_min + intr.n_range_bins * intr.r_res]


def _show(ax, img: DisplayImage, intr):
    if img.geometry == "polar":
        # beams are rows internally; show range upward, azimuth across
        ax.imshow(img.pixels.T, origin="lower", aspect="auto", vmin=0, vmax=255,
                  extent=_polar_extent(intr), interpolation="nearest")
        ax.set_xlabel("azimuth [deg]")
        ax.set_ylabel("range [m]")
    else:
        x_min, x_max, y_min, y_max = fanshape_extent(intr)
        ax.imshow(img.pixels, vmin=0, vmax=255, extent=[y_min, y_max, x_min, x_max],
                  interpolation="nearest")
        ax.set_xlabel("y [m]")
        ax.set_ylabel("x [m]")


def plot_components(components, path, title: str | None = None) -> None:
    """One panel per echo component, each normalised by the composed image's peak."""
    items = components.items()
    gain = 255.0 / max(float(components.composed.values.max()), 1e-300)
    intr = components.composed.intrinsics
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(items), figsize=(1.6 * len(items), 3.2), sharey=True)
        for ax, (name, img) in zip(axes, items):
            _show(ax, normalize_image(img, gain), intr)
            ax.set_title(name)
            if ax is not axes[0]:
                ax.set_ylabel("")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_modes(displays: dict[str, DisplayImage], intr, path, reference: DisplayImage | None = None,
               scores: dict[str, float] | None = None) -> None:
    """Side-by-side display images per bounce mode, optionally with the reference first."""
    panels = ([("reference", reference)] if reference is not None else []) + list(displays.items())
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(panels), figsize=(2.2 * len(panels), 3.0), squeeze=False)
        for ax, (name, img) in zip(axes[0], panels):
            _show(ax, img, intr)
            label = name
            if scores and name in scores:
                label += f"\nPSNR {scores[name]:.2f} dB"
            ax.set_title(label)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_range_profile(images: dict[str, PolarImage], beam: int, path) -> None:
    """Intensity along range for one beam, one line per image."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 2.6))
        for name, img in images.items():
            intr = img.intrinsics
            r = intr.r_min + (np.arange(intr.n_range_bins) + 0.5) * intr.r_res
            ax.plot(r, img.values[beam], lw=0.8, label=name)
        ax.set_xlabel("range [m]")
        ax.set_ylabel("intensity")
        ax.set_title(f"beam {beam}")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
