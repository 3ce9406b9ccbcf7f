"""Geographic primitives: points, regions, great-circle distance, grid cells."""

from __future__ import annotations

import math
from dataclasses import dataclass

from pervadia.errors import MalformedRegionError

EARTH_RADIUS_M = 6_371_000.0

# ~111 m at the equator; city-scale granularity for pervasive play.
DEFAULT_CELL_SIZE_DEG = 0.001


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 < self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6 371 000 m."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class CircleRegion:
    center: GeoPoint
    radius_m: float

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise MalformedRegionError(f"circle radius must be > 0, got {self.radius_m}")

    def contains(self, p: GeoPoint) -> bool:
        # Closed region: boundary points are inside.
        return haversine_m(self.center, p) <= self.radius_m


@dataclass(frozen=True)
class PolygonRegion:
    vertices: tuple[GeoPoint, ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise MalformedRegionError("polygon needs at least 3 vertices")
        if _self_intersects(self.vertices):
            raise MalformedRegionError("polygon is self-intersecting")

    def contains(self, p: GeoPoint) -> bool:
        """Planar even-odd winding test (desk scale); boundary counts as inside."""
        n = len(self.vertices)
        x, y = p.lon, p.lat
        inside = False
        for i in range(n):
            a = self.vertices[i]
            b = self.vertices[(i + 1) % n]
            if _on_segment(a.lon, a.lat, b.lon, b.lat, x, y):
                return True
            if (a.lat > y) != (b.lat > y):
                x_cross = a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
                if x < x_cross:
                    inside = not inside
        return inside


Region = CircleRegion | PolygonRegion


def _on_segment(ax: float, ay: float, bx: float, by: float, px: float, py: float) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > 1e-12:
        return False
    return min(ax, bx) - 1e-12 <= px <= max(ax, bx) + 1e-12 and min(ay, by) - 1e-12 <= py <= max(ay, by) + 1e-12


def _segments_cross(p1: GeoPoint, p2: GeoPoint, p3: GeoPoint, p4: GeoPoint) -> bool:
    def orient(a: GeoPoint, b: GeoPoint, c: GeoPoint) -> float:
        return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _self_intersects(vertices: tuple[GeoPoint, ...]) -> bool:
    n = len(vertices)
    for i in range(n):
        for j in range(i + 1, n):
            # Skip adjacent edges (they share a vertex).
            if abs(i - j) in (1, n - 1):
                continue
            if _segments_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]):
                return True
    return False


def cell_of(p: GeoPoint, cell_size_deg: float = DEFAULT_CELL_SIZE_DEG) -> tuple[int, int]:
    """Quantize a point to its grid cell key."""
    return (math.floor(p.lat / cell_size_deg), math.floor(p.lon / cell_size_deg))
