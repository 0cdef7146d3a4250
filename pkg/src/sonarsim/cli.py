"""Command line front end: render a JSON scene, write images and metric reports."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import imaging, metrics
from .echo import BounceMode, compose_ground_echo, require_ground
from .raytracer import SonarIntrinsics, aris3000_like, set_threads
from .scene import MeshParseError, DegenerateTriangleError, MissingGroundError, SceneConfigError, load_scene_file

log = logging.getLogger("sonarsim")

FORMATS = ("pgm", "png", "csv")

# JSON / command-line intrinsics keys -> (field name, converter)
_INTRINSIC_KEYS = {
    "n_beams": ("n_beams", int),
    "n_elev_samples": ("n_elev_samples", int),
    "azimuth_fov_deg": ("azimuth_fov", lambda v: math.radians(float(v))),
    "elevation_fov_deg": ("elevation_fov", lambda v: math.radians(float(v))),
    "azimuth_fov": ("azimuth_fov", float),
    "elevation_fov": ("elevation_fov", float),
    "r_min": ("r_min", float),
    "r_max": ("r_max", float),
    "r_res": ("r_res", float),
    "tvg": ("tvg_enabled", lambda v: v if isinstance(v, bool) else str(v).lower() in ("1", "on", "true", "yes")),
}


@dataclass
class RunConfig:
    scene: Path
    out: Path
    mode: BounceMode = BounceMode.SINGLE
    formats: tuple[str, ...] = ("pgm",)
    fanshape_pitch: float | None = None
    reference: Path | None = None
    dump_components: bool = False
    figures: bool = False
    threads: int = 0
    tvg: bool | None = None
    intrinsics: dict = field(default_factory=dict)
    range_rows: bool = False

    def __post_init__(self):
        if not str(self.scene):
            raise SceneConfigError("scene", "path must be non-empty")
        if not str(self.out):
            raise SceneConfigError("out", "path must be non-empty")
        if self.fanshape_pitch is not None and not self.fanshape_pitch > 0:
            raise SceneConfigError("fanshape_pitch", "must be positive")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise SceneConfigError("formats", f"unknown format(s) {bad}; choose from {FORMATS}")


def build_intrinsics(overrides: dict, tvg: bool | None = None) -> SonarIntrinsics:
    """Default profile with JSON-style overrides; ``n_range_bins`` sets ``r_max``."""
    kwargs = {}
    overrides = dict(overrides)
    n_bins = overrides.pop("n_range_bins", None)
    for key, value in overrides.items():
        if key not in _INTRINSIC_KEYS:
            raise SceneConfigError(f"intrinsics.{key}", "unknown intrinsics key")
        name, conv = _INTRINSIC_KEYS[key]
        try:
            kwargs[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise SceneConfigError(f"intrinsics.{key}", str(exc)) from None
    if tvg is not None:
        kwargs["tvg_enabled"] = tvg
    try:
        intr = aris3000_like(**kwargs)
        if n_bins is not None:
            intr = intr.with_overrides(r_max=intr.r_min + int(n_bins) * intr.r_res)
    except (TypeError, ValueError) as exc:
        raise SceneConfigError("intrinsics", str(exc)) from None
    return intr


def _write_display(img: imaging.DisplayImage, stem: Path, formats, range_rows: bool) -> list[Path]:
    written = []
    if "pgm" in formats:
        imaging.write_pgm(img, stem.with_suffix(".pgm"), range_rows)
        written.append(stem.with_suffix(".pgm"))
    if "png" in formats:
        imaging.write_png(img, stem.with_suffix(".png"), range_rows)
        written.append(stem.with_suffix(".png"))
    return written


def run(config: RunConfig) -> list[Path]:
    """Render one scene per ``config``; returns the files written. Raises on any error."""
    desc = load_scene_file(config.scene)
    overrides = {**desc.intrinsics, **config.intrinsics}
    intr = build_intrinsics(overrides, config.tvg)
    require_ground(desc.scene, config.mode)
    threads = set_threads(config.threads)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = desc.scene_id

    log.info("scene %s: %d triangles, %dx%d image, L=%d, mode=%s, threads=%d", stem,
             desc.scene.n_triangles, *intr.shape, intr.n_elev_samples, config.mode.value, threads)
    t0 = time.perf_counter()
    parts = compose_ground_echo(desc.scene, desc.pose, intr, config.mode)
    elapsed = time.perf_counter() - t0
    log.info("render time %.3f s", elapsed)

    files: list[Path] = []
    mode_tag = "triple" if config.mode is BounceMode.SINGLE_TRIPLE else config.mode.value
    base = out / f"{stem}_{mode_tag}"
    files += _write_display(imaging.normalize_image(parts.composed), base, config.formats, config.range_rows)
    if "csv" in config.formats:
        imaging.write_csv(parts.composed, base.with_suffix(".csv"))
        files.append(base.with_suffix(".csv"))
    if config.fanshape_pitch:
        fan = imaging.to_fanshape(parts.composed, config.fanshape_pitch)
        files += _write_display(fan, out / f"{stem}_{mode_tag}_fan", config.formats, False)

    if config.dump_components:
        for name, img in parts.items():
            path = out / f"{stem}_{name}"
            imaging.write_csv(img, path.with_suffix(".csv"))
            imaging.write_pgm(imaging.normalize_image(img), path.with_suffix(".pgm"), config.range_rows)
            files += [path.with_suffix(".csv"), path.with_suffix(".pgm")]

    modes = [BounceMode.SINGLE] if desc.scene.ground is None else list(BounceMode)
    if config.reference is not None:
        files += _report(config, parts, modes, intr, stem, out)
    elif config.figures:
        from . import plotting

        path = out / f"{stem}_components.png"
        plotting.plot_components(parts, path, title=stem)
        displays = {m.value: _display(parts.compose(m), config.fanshape_pitch) for m in modes}
        plotting.plot_modes(displays, intr, out / f"{stem}_modes.png")
        files += [path, out / f"{stem}_modes.png"]
    return files


def _display(img, pitch):
    return imaging.to_fanshape(img, pitch) if pitch else imaging.normalize_image(img)


def _report(config: RunConfig, parts, modes, intr, stem: str, out: Path) -> list[Path]:
    polar_shape = intr.shape
    fan_shape = (imaging.fanshape_lookup(intr, config.fanshape_pitch)[0].shape
                 if config.fanshape_pitch else None)
    raw = imaging.read_pgm(config.reference)
    if raw.shape == polar_shape:
        reference = raw
    elif config.range_rows and raw.shape == polar_shape[::-1]:
        reference = imaging.DisplayImage(raw.pixels.T.copy(), "polar")
    elif fan_shape is not None and raw.shape == fan_shape:
        reference = imaging.DisplayImage(raw.pixels, "fanshape")
    else:
        expected = f"{polar_shape} (polar)" + (f" or {fan_shape} (fanshape)" if fan_shape else "")
        raise imaging.DimensionMismatchError(
            f"reference image {config.reference} is {raw.shape}, expected {expected}")

    rows, displays, scores = [], {}, {}
    for mode in modes:
        img = parts.compose(mode)
        disp = (imaging.normalize_image(img) if reference.geometry == "polar"
                else imaging.to_fanshape(img, config.fanshape_pitch))
        rep = metrics.report(disp, reference, reference.geometry)
        rows.append((stem, mode.value, rep))
        displays[mode.value], scores[mode.value] = disp, rep.psnr
        log.info("%-14s %s PSNR %.3f dB  MSE %.3f", mode.value, rep.coordinate_tag, rep.psnr, rep.mse)
    path = out / f"{stem}_metrics.csv"
    metrics.write_reports(path, rows)
    files = [path]
    if config.figures:
        from . import plotting

        plotting.plot_components(parts, out / f"{stem}_components.png", title=stem)
        plotting.plot_modes(displays, intr, out / f"{stem}_modes.png", reference, scores)
        files += [out / f"{stem}_components.png", out / f"{stem}_modes.png"]
    return files


def _key_value(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sonarsim", description=__doc__)
    p.add_argument("--scene", required=True, type=Path, help="JSON scene description")
    p.add_argument("--mode", choices=["single", "triple", "full"], default="single",
                   help="bounce mode; 'triple' means single + triple bounces")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--formats", default="pgm", help="comma-separated subset of pgm,png,csv")
    p.add_argument("--fanshape-pitch", type=float, default=None, metavar="METRES",
                   help="also write a fan-shape image with this pixel size")
    p.add_argument("--reference", type=Path, default=None, help="8-bit PGM to score against (PSNR/MSE)")
    p.add_argument("--dump-components", action="store_true", help="write every echo component as CSV + PGM")
    p.add_argument("--figures", action="store_true", help="render matplotlib summary figures")
    p.add_argument("--threads", type=int, default=0, help="render threads (0 = all)")
    p.add_argument("--tvg", choices=["on", "off"], default=None, help="time-variant gain (default: on)")
    p.add_argument("--intrinsic", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                   help="override a sensor parameter, e.g. n_beams=64 or elevation_fov_deg=20")
    p.add_argument("--range-rows", action="store_true",
                   help="write polar images with range as rows and beams as columns")
    p.add_argument("--seed", type=int, default=None, help="reserved; rendering is deterministic")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        config = RunConfig(
            scene=args.scene,
            out=args.out,
            mode=BounceMode.parse(args.mode),
            formats=tuple(f.strip() for f in args.formats.split(",") if f.strip()),
            fanshape_pitch=args.fanshape_pitch,
            reference=args.reference,
            dump_components=args.dump_components,
            figures=args.figures,
            threads=args.threads,
            tvg=None if args.tvg is None else args.tvg == "on",
            intrinsics=dict(args.intrinsic),
            range_rows=args.range_rows,
        )
        if not config.scene.exists():
            raise FileNotFoundError(f"scene file not found: {config.scene}")
        if config.reference is not None and not config.reference.exists():
            raise FileNotFoundError(f"reference image not found: {config.reference}")
        files = run(config)
    except (SceneConfigError, MeshParseError, DegenerateTriangleError, MissingGroundError,
            imaging.DimensionMismatchError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
