"""Ten-band reflectance stacks at a uniform 10 m per pixel.

Input format is deliberately plain: one binary 16-bit PGM (P5, maxval
65535, big-endian) per band plus a JSON manifest mapping band names to
file paths. Digital numbers are scaled to reflectance by dividing by
10000. 20 m bands are upsampled x2 to the 10 m grid on load.

Manifest schema::

    {
      "bands": {"B2": "b02.pgm", ..., "B12": "b12.pgm"},
      "geo": {"origin_easting": 500000.0,
              "origin_northing": 4680000.0,
              "crs": "EPSG:32629"}          # optional
    }

Relative band paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DimensionError, ManifestError, PgmError

__all__ = [
    "BandId",
    "FEATURE_ORDER",
    "GeoRef",
    "BandStack",
    "read_pgm16",
    "write_pgm16",
    "load_band_stack",
    "save_band_stack",
    "resample_plane",
    "crop",
]

DN_SCALE = 10000.0
PIXEL_SIZE_M = 10.0


class BandId(str, Enum):
    """The ten Sentinel-2 bands with 10 m or 20 m native resolution.

    The 60 m bands (B1, B9, B10) are intentionally unrepresentable.
    """

    B2 = "B2"
    B3 = "B3"
    B4 = "B4"
    B5 = "B5"
    B6 = "B6"
    B7 = "B7"
    B8 = "B8"
    B8A = "B8A"
    B11 = "B11"
    B12 = "B12"

    @property
    def native_resolution_m(self) -> int:
        return 10 if self in _TEN_METER else 20


_TEN_METER = frozenset({BandId.B2, BandId.B3, BandId.B4, BandId.B8})

# Fixed classifier feature ordering; serialized with every model.
FEATURE_ORDER: tuple[BandId, ...] = tuple(BandId)


@dataclass(frozen=True)
class GeoRef:
    """Top-left corner of pixel (0, 0) in a projected CRS, meters."""

    origin_easting: float
    origin_northing: float
    crs: str


@dataclass(frozen=True)
class BandStack:
    """Ten co-registered reflectance planes on a common 10 m grid.

    Planes are float64 arrays of shape (height, width), row-major,
    finite and non-negative. Treat instances as immutable.
    """

    width: int
    height: int
    pixel_size: float
    planes: dict[BandId, np.ndarray]
    geo: GeoRef | None = None

    def __post_init__(self):
        missing = [b.value for b in BandId if b not in self.planes]
        if missing:
            raise ManifestError(f"missing band planes: {', '.join(missing)}")
        for band, plane in self.planes.items():
            if plane.shape != (self.height, self.width):
                raise DimensionError(
                    f"band {band.value} has shape {plane.shape}, "
                    f"expected {(self.height, self.width)}"
                )
            if not np.isfinite(plane).all() or (plane < 0).any():
                raise ValueError(f"band {band.value} has non-finite or negative values")

    def features(self, rows, cols, order: tuple[BandId, ...] = FEATURE_ORDER) -> np.ndarray:
        """N x 10 feature matrix for the given pixel coordinates."""
        return np.stack([self.planes[b][rows, cols] for b in order], axis=1)

    def plane_stack(self, order: tuple[BandId, ...] = FEATURE_ORDER) -> np.ndarray:
        """All planes as one (height, width, 10) array in feature order."""
        return np.stack([self.planes[b] for b in order], axis=-1)


def read_pgm16(path) -> np.ndarray:
    """Read a binary PGM (P5) with maxval 65535 into a uint16 array."""
    data = Path(path).read_bytes()
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise PgmError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise PgmError(f"{path}: bad header field") from exc
    if width <= 0 or height <= 0:
        raise PgmError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 65535:
        raise PgmError(f"{path}: maxval must be 65535, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 2
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise PgmError(f"{path}: expected {expected} raster bytes, got {len(raster)}")
    return np.frombuffer(raster, dtype=">u2").reshape(height, width).astype(np.uint16)


def write_pgm16(path, values: np.ndarray) -> None:
    """Write a uint16 array as binary PGM (P5, maxval 65535, big-endian)."""
    a = np.asarray(values)
    if a.ndim != 2:
        raise DimensionError(f"PGM data must be 2-D, got shape {a.shape}")
    if a.dtype != np.uint16:
        if (a < 0).any() or (a > 65535).any():
            raise ValueError("PGM sample values must be within [0, 65535]")
        a = a.astype(np.uint16)
    h, w = a.shape
    header = f"P5\n{w} {h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + a.astype(">u2").tobytes())


def resample_plane(p: np.ndarray, factor: int, method: str = "bilinear") -> np.ndarray:
    """Upsample a plane by an integer factor.

    ``nearest`` replicates each pixel into a factor x factor block.
    ``bilinear`` aligns pixel centers: output center (i + 0.5) / factor
    maps to input coordinate (i + 0.5) / factor - 0.5, clamped to the
    valid range so edges extend rather than shrink.
    """
    if factor < 1:
        raise ValueError(f"resample factor must be >= 1, got {factor}")
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise DimensionError(f"plane must be 2-D, got shape {p.shape}")
    if factor == 1:
        return p.copy()
    if method == "nearest":
        return np.repeat(np.repeat(p, factor, axis=0), factor, axis=1)
    if method != "bilinear":
        raise ValueError(f"unknown resample method {method!r}")

    h, w = p.shape

    def axis_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = (np.arange(n_out) + 0.5) / factor - 0.5
        x = np.clip(x, 0.0, n_in - 1.0)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    r0, r1, fy = axis_coords(h * factor, h)
    c0, c1, fx = axis_coords(w * factor, w)
    fy = fy[:, None]
    fx = fx[None, :]
    top = p[r0][:, c0] * (1 - fx) + p[r0][:, c1] * fx
    bot = p[r1][:, c0] * (1 - fx) + p[r1][:, c1] * fx
    return top * (1 - fy) + bot * fy


def load_band_stack(manifest_path) -> BandStack:
    """Load, scale, and resample a ten-band stack described by a manifest.

    Digital numbers are divided by 10000; 20 m bands are brought to the
    10 m grid with bilinear resampling. 20 m planes must be exactly half
    the 10 m dimensions.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc

    bands_entry = manifest.get("bands")
    if not isinstance(bands_entry, dict):
        raise ManifestError(f"manifest {manifest_path} lacks a 'bands' object")
    missing = [b.value for b in BandId if b.value not in bands_entry]
    if missing:
        raise ManifestError(f"missing band entries: {', '.join(missing)}")

    raw: dict[BandId, np.ndarray] = {}
    for band in BandId:
        band_path = Path(bands_entry[band.value])
        if not band_path.is_absolute():
            band_path = manifest_path.parent / band_path
        try:
            dn = read_pgm16(band_path)
        except OSError as exc:
            raise ManifestError(f"cannot read band {band.value}: {exc}") from exc
        raw[band] = dn.astype(np.float64) / DN_SCALE

    ref10 = raw[BandId.B2].shape
    for band in BandId:
        shape = raw[band].shape
        if band.native_resolution_m == 10:
            if shape != ref10:
                raise DimensionError(
                    f"10 m band {band.value} is {shape[1]}x{shape[0]}, "
                    f"expected {ref10[1]}x{ref10[0]} (as B2)"
                )
        else:
            want = (ref10[0] // 2, ref10[1] // 2)
            if ref10[0] % 2 or ref10[1] % 2 or shape != want:
                raise DimensionError(
                    f"20 m band {band.value} is {shape[1]}x{shape[0]}, "
                    f"expected exactly half of the 10 m grid "
                    f"{ref10[1]}x{ref10[0]}"
                )

    planes = {
        band: (plane if band.native_resolution_m == 10 else resample_plane(plane, 2))
        for band, plane in raw.items()
    }

    geo = None
    geo_entry = manifest.get("geo")
    if geo_entry is not None:
        try:
            geo = GeoRef(
                origin_easting=float(geo_entry["origin_easting"]),
                origin_northing=float(geo_entry["origin_northing"]),
                crs=str(geo_entry["crs"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"manifest geo block is malformed: {exc}") from exc

    return BandStack(
        width=ref10[1],
        height=ref10[0],
        pixel_size=PIXEL_SIZE_M,
        planes=planes,
        geo=geo,
    )


def save_band_stack(stack: BandStack, out_dir) -> Path:
    """Write a stack as band PGMs plus manifest.json; returns manifest path.

    Bands are written at their native resolutions: 10 m bands as-is,
    20 m bands reduced to half dimensions by 2x2 block averaging (their
    manifest representation). Reflectances are converted back to digital
    numbers (x10000, rounded, clipped to the 16-bit range), so a
    save/load round trip quantizes 10 m values to 1e-4 and smooths the
    20 m bands. Stack dimensions must be even.
    """
    if stack.width % 2 or stack.height % 2:
        raise DimensionError(
            f"cannot export a {stack.width}x{stack.height} stack: dimensions "
            f"must be even so 20 m bands can be written at half resolution"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bands_entry = {}
    for band in BandId:
        plane = stack.planes[band]
        if band.native_resolution_m == 20:
            h, w = plane.shape
            plane = plane.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
        dn = np.clip(np.rint(plane * DN_SCALE), 0, 65535).astype(np.uint16)
        name = f"{band.value.lower()}.pgm"
        write_pgm16(out_dir / name, dn)
        bands_entry[band.value] = name
    manifest: dict = {"bands": bands_entry}
    if stack.geo is not None:
        manifest["geo"] = {
            "origin_easting": stack.geo.origin_easting,
            "origin_northing": stack.geo.origin_northing,
            "crs": stack.geo.crs,
        }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def crop(s: BandStack, x0: int, y0: int, w: int, h: int) -> BandStack:
    """Crop all planes to the rectangle (x0, y0, w, h), shifting geo origin."""
    if w < 1 or h < 1:
        raise DimensionError(f"crop size must be positive, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > s.width or y0 + h > s.height:
        raise DimensionError(
            f"crop rectangle ({x0},{y0},{w},{h}) exceeds stack bounds "
            f"{s.width}x{s.height}"
        )
    planes = {b: p[y0 : y0 + h, x0 : x0 + w].copy() for b, p in s.planes.items()}
    geo = s.geo
    if geo is not None:
        geo = replace(
            geo,
            origin_easting=geo.origin_easting + x0 * s.pixel_size,
            origin_northing=geo.origin_northing - y0 * s.pixel_size,
        )
    return BandStack(width=w, height=h, pixel_size=s.pixel_size, planes=planes, geo=geo)
