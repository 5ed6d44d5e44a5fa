"""Great-circle distance and rectangular zone grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

EARTH_RADIUS_KM = 6371.0088


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def haversine_km(a, b) -> float:
    lat1, lon1 = a
    lat2, lon2 = b
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    # h can drift a hair above 1 for antipodal points
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if self.lat_min > self.lat_max or self.lon_min > self.lon_max:
            raise ValueError(f"inverted bounding box: {self}")

    def contains(self, p) -> bool:
        lat, lon = p
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def as_list(self) -> list[float]:
        return [self.lat_min, self.lat_max, self.lon_min, self.lon_max]


def fit_bbox(points: Iterable) -> BoundingBox:
    lats, lons = [], []
    for lat, lon in points:
        lats.append(lat)
        lons.append(lon)
    if not lats:
        raise ValueError("empty point set")
    return BoundingBox(min(lats), max(lats), min(lons), max(lons))


@dataclass(frozen=True)
class ZoneGrid:
    """Uniform rows x cols partition of a bounding box.

    Zones are numbered 1..n row-major from the southwest corner: west to
    east along a row, then rows south to north. Cells are half-open, so a
    point on an interior grid line belongs to the higher-index cell.
    """

    bbox: BoundingBox
    rows: int = 3
    cols: int = 3

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def no_charge_label(self) -> int:
        return self.n + 1

    def cell_of(self, p) -> tuple[int, int]:
        lat, lon = p
        b = self.bbox
        return (_axis_index(lat, b.lat_min, b.lat_max, self.rows),
                _axis_index(lon, b.lon_min, b.lon_max, self.cols))

    def cell_bounds(self, zone: int) -> BoundingBox:
        """Geographic extent of zone ``zone`` (1-based)."""
        if not 1 <= zone <= self.n:
            raise ValueError(f"zone {zone} outside 1..{self.n}")
        r, c = divmod(zone - 1, self.cols)
        b = self.bbox
        dlat = (b.lat_max - b.lat_min) / self.rows
        dlon = (b.lon_max - b.lon_min) / self.cols
        return BoundingBox(b.lat_min + r * dlat, b.lat_min + (r + 1) * dlat,
                           b.lon_min + c * dlon, b.lon_min + (c + 1) * dlon)


def _axis_index(x: float, lo: float, hi: float, k: int) -> int:
    if hi <= lo:
        return 0
    step = (hi - lo) / k
    i = math.floor((x - lo) / (hi - lo) * k)
    # agree with the gridlines cell_bounds reports, whatever the division rounded to
    if 0 <= i < k - 1 and x >= lo + (i + 1) * step:
        i += 1
    elif 0 < i < k and x < lo + i * step:
        i -= 1
    return min(max(i, 0), k - 1)


def zone_of(grid: ZoneGrid, p) -> int:
    """Zone id in 1..n; points outside the box are clamped to the nearest cell."""
    r, c = grid.cell_of(p)
    return r * grid.cols + c + 1
