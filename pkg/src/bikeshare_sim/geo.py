"""Geographic primitives and the default offline router.

All distances are meters, times seconds, velocities m/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

WALK = "walk"
CYCLE = "cycle"
MODES = (WALK, CYCLE)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")

    def to_json(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}

    @classmethod
    def from_json(cls, obj: dict) -> GeoPoint:
        return cls(float(obj["lat"]), float(obj["lon"]))


@dataclass(frozen=True)
class BoundingBox:
    top_left: GeoPoint
    bottom_right: GeoPoint

    def __post_init__(self):
        if self.top_left.lat < self.bottom_right.lat:
            raise ValueError("bounding box top-left must be north of bottom-right")
        if self.top_left.lon > self.bottom_right.lon:
            raise ValueError("bounding box top-left must be west of bottom-right")

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.bottom_right.lat <= p.lat <= self.top_left.lat
            and self.top_left.lon <= p.lon <= self.bottom_right.lon
        )


@dataclass(frozen=True)
class Route:
    waypoints: tuple[GeoPoint, ...]
    total_distance: float
    mode: str

    def point_at(self, fraction: float) -> GeoPoint:
        """Position after covering ``fraction`` of the route (linear in lat/lon)."""
        fraction = min(max(fraction, 0.0), 1.0)
        a, b = self.waypoints[0], self.waypoints[-1]
        return GeoPoint(a.lat + (b.lat - a.lat) * fraction, a.lon + (b.lon - a.lon) * fraction)


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance in meters."""
    if a == b:
        return 0.0
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def compute_route(a: GeoPoint, b: GeoPoint, mode: str, circuity: float = 1.0) -> Route:
    if mode not in MODES:
        raise ValueError(f"unknown travel mode {mode!r}")
    if circuity < 1.0:
        raise ValueError(f"circuity must be >= 1.0, got {circuity}")
    return Route((a, b), great_circle_distance(a, b) * circuity, mode)


def travel_time(route: Route, velocity: float) -> float:
    if not velocity > 0:
        raise ValueError(f"velocity must be positive, got {velocity}")
    return route.total_distance / velocity


def offset_point(center: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """Shift a point by local metric offsets (equirectangular approximation)."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(center.lat))))
    return GeoPoint(center.lat + dlat, center.lon + dlon)


class GreatCircleRouter:
    """Straight-line router with a per-mode circuity factor.

    Stands in for a street-network route server; deterministic and offline.
    """

    name = "great_circle"

    def __init__(self, circuity_walk: float = 1.0, circuity_cycle: float = 1.0):
        for c in (circuity_walk, circuity_cycle):
            if c < 1.0:
                raise ValueError(f"circuity must be >= 1.0, got {c}")
        self.circuity = {WALK: circuity_walk, CYCLE: circuity_cycle}

    def route(self, a: GeoPoint, b: GeoPoint, mode: str) -> Route:
        return compute_route(a, b, mode, self.circuity[mode])

    def distance(self, a: GeoPoint, b: GeoPoint, mode: str) -> float:
        return great_circle_distance(a, b) * self.circuity[mode]

    def travel_time(self, route: Route, velocity: float) -> float:
        return travel_time(route, velocity)


ROUTERS = {GreatCircleRouter.name: GreatCircleRouter}
