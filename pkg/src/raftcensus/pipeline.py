"""Two-stage census: water mask, platform classification, blob vetting.

Stages, in order: build the water mask (NDWI+Otsu or MLP), clean it
with the fixed morphology chain, classify water pixels with the
platform network, lightly close the platform mask so a raft split by a
missed pixel stays one solid blob, then label, measure, and filter
blobs. Accepted blobs become census records ordered by centroid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .bandstack import BandStack
from .blobs import BlobFilter, compute_features, filter_blobs, label_components
from .errors import DegenerateHistogramError, DimensionError, RaftCensusError
from .mlp import MlpModel
from .morphology import StructElem, closing, square
from .waterdetect import (
    NdwiOtsu,
    WaterMethod,
    _batched_scores,
    clean_water_mask,
    water_mask_mlp,
    water_mask_ndwi,
)

__all__ = [
    "PLATFORM_THRESHOLD_DEFAULT",
    "CensusConfig",
    "CensusRecord",
    "Census",
    "PipelineArtifacts",
    "platform_mask",
    "run_pipeline",
    "run_census",
    "census_to_csv",
    "census_to_geojson",
]

PLATFORM_THRESHOLD_DEFAULT = 0.5
_PLATFORM_LAYERS = (10, 2, 1)


@dataclass(frozen=True)
class CensusConfig:
    """Everything run_census needs besides the stack itself."""

    water_method: WaterMethod
    platform_model: MlpModel
    platform_threshold: float = PLATFORM_THRESHOLD_DEFAULT
    water_se: StructElem = field(default_factory=lambda: square(3))
    coast_erode_se: StructElem = field(default_factory=lambda: square(5))
    platform_close_se: StructElem = field(default_factory=lambda: square(3))
    blob_filter: BlobFilter = field(default_factory=BlobFilter)
    workers: int = 1

    def __post_init__(self):
        if self.platform_model.layer_sizes != _PLATFORM_LAYERS:
            raise ValueError(
                f"platform model must have layers {list(_PLATFORM_LAYERS)}, "
                f"got {list(self.platform_model.layer_sizes)}"
            )
        if not 0.0 < self.platform_threshold < 1.0:
            raise ValueError("platform_threshold must be in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def digest(self) -> str:
        """Short stable hash of the configuration, model included."""
        h = hashlib.sha256()
        desc = {
            "water_method": _water_method_desc(self.water_method),
            "platform_threshold": self.platform_threshold,
            "water_se": sorted(self.water_se.offsets),
            "coast_erode_se": sorted(self.coast_erode_se.offsets),
            "platform_close_se": sorted(self.platform_close_se.offsets),
            "blob_filter": [
                self.blob_filter.max_area,
                self.blob_filter.max_equivalent_diameter,
                self.blob_filter.min_solidity,
                self.blob_filter.required_euler,
            ],
        }
        h.update(json.dumps(desc, sort_keys=True).encode())
        for w, b in zip(self.platform_model.weights, self.platform_model.biases):
            h.update(w.tobytes())
            h.update(b.tobytes())
        return h.hexdigest()[:16]


def _water_method_desc(method: WaterMethod):
    if isinstance(method, NdwiOtsu):
        return ["ndwi"]
    desc = ["mlp", method.water_class_index, method.threshold]
    for w, b in zip(method.model.weights, method.model.biases):
        desc.append(hashlib.sha256(w.tobytes() + b.tobytes()).hexdigest()[:16])
    return desc


@dataclass(frozen=True)
class CensusRecord:
    """One accepted platform."""

    id: int
    centroid_px: tuple[float, float]  # (row, col)
    area_px: int
    bbox: tuple[int, int, int, int]  # (r0, c0, r1, c1) inclusive
    centroid_geo: tuple[float, float] | None = None  # (easting, northing)


@dataclass(frozen=True)
class Census:
    records: tuple[CensusRecord, ...]
    count: int
    source: str
    config_digest: str

    def __post_init__(self):
        if self.count != len(self.records):
            raise ValueError("census count must equal number of records")


def platform_mask(s: BandStack, water: np.ndarray, cfg: CensusConfig) -> np.ndarray:
    """Platform pixels: water-true AND platform score >= threshold.

    Non-water pixels are never evaluated by the network.
    """
    water = np.asarray(water).astype(bool, copy=False)
    if water.shape != (s.height, s.width):
        raise DimensionError(
            f"water mask shape {water.shape} does not match stack "
            f"{(s.height, s.width)}"
        )
    out = np.zeros_like(water)
    rows, cols = np.nonzero(water)
    if len(rows) == 0:
        return out
    features = s.features(rows, cols, cfg.platform_model.feature_order)
    scores = _batched_scores(cfg.platform_model, features, 0, cfg.workers)
    hits = scores >= cfg.platform_threshold
    out[rows[hits], cols[hits]] = True
    return out


def _build_water_mask(s: BandStack, cfg: CensusConfig) -> np.ndarray:
    if isinstance(cfg.water_method, NdwiOtsu):
        try:
            return water_mask_ndwi(s)
        except DegenerateHistogramError as exc:
            raise RaftCensusError(f"no water found: {exc}") from exc
    return water_mask_mlp(
        s,
        cfg.water_method.model,
        cfg.water_method.water_class_index,
        cfg.water_method.threshold,
        cfg.workers,
    )


@dataclass(frozen=True)
class PipelineArtifacts:
    """Census plus the intermediate masks, for inspection or rendering."""

    water_mask: np.ndarray  # cleaned
    platform_mask: np.ndarray  # after the merging closing
    census: Census


def run_census(s: BandStack, cfg: CensusConfig, source: str = "") -> Census:
    """Run the full detection pipeline on one stack."""
    return run_pipeline(s, cfg, source).census


def run_pipeline(s: BandStack, cfg: CensusConfig, source: str = "") -> PipelineArtifacts:
    """Like run_census, but also returns the water and platform masks."""
    water = _build_water_mask(s, cfg)
    cleaned = clean_water_mask(water, cfg.water_se, cfg.coast_erode_se)
    pmask = platform_mask(s, cleaned, cfg)
    pmask = closing(pmask, cfg.platform_close_se)

    blobs = label_components(pmask)
    # Oversized blobs fail the area gate first; skip their (expensive)
    # hull and hole features.
    small = [b for b in blobs if b.area < cfg.blob_filter.max_area]
    accepted, _ = filter_blobs([compute_features(b) for b in small], cfg.blob_filter)

    accepted.sort(key=lambda b: b.centroid)
    records = []
    for i, b in enumerate(accepted, start=1):
        geo = None
        if s.geo is not None:
            geo = (
                s.geo.origin_easting + (b.centroid[1] + 0.5) * s.pixel_size,
                s.geo.origin_northing - (b.centroid[0] + 0.5) * s.pixel_size,
            )
        records.append(
            CensusRecord(
                id=i,
                centroid_px=b.centroid,
                area_px=b.area,
                bbox=b.bbox,
                centroid_geo=geo,
            )
        )
    census = Census(
        records=tuple(records),
        count=len(records),
        source=source,
        config_digest=cfg.digest(),
    )
    return PipelineArtifacts(water_mask=cleaned, platform_mask=pmask, census=census)


def census_to_csv(census: Census) -> str:
    """CSV text: id,row,col,area_px and easting,northing when georeferenced."""
    has_geo = any(rec.centroid_geo is not None for rec in census.records)
    header = "id,row,col,area_px" + (",easting,northing" if has_geo else "")
    lines = [header]
    for rec in census.records:
        line = f"{rec.id},{rec.centroid_px[0]!r},{rec.centroid_px[1]!r},{rec.area_px}"
        if has_geo:
            line += f",{rec.centroid_geo[0]!r},{rec.centroid_geo[1]!r}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def census_to_geojson(census: Census, crs: str | None = None) -> str:
    """GeoJSON FeatureCollection of Point features (easting, northing)."""
    features = []
    for rec in census.records:
        if rec.centroid_geo is None:
            raise RaftCensusError(
                "census has records without geographic centroids; "
                "load the stack with a geo block to export GeoJSON"
            )
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [rec.centroid_geo[0], rec.centroid_geo[1]],
                },
                "properties": {
                    "id": rec.id,
                    "area_px": rec.area_px,
                    "bbox": list(rec.bbox),
                },
            }
        )
    payload = {
        "type": "FeatureCollection",
        "features": features,
        "properties": {
            "count": census.count,
            "source": census.source,
            "config_digest": census.config_digest,
            **({"crs": crs} if crs else {}),
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
