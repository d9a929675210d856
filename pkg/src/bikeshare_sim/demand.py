"""User demand generation.

Two sources: entry points (Poisson arrivals, positions uniform in a
circle) and recorded trip logs, where each trip's hour and stations are
jittered into a concrete appearance time and origin/destination points.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path


from .config import ConfigError, GlobalConfig, _POINT, _schema_problems
from .fleet import Station
from .geo import BoundingBox, GeoPoint, offset_point
from .users import USER_TYPES, UserConfig

log = logging.getLogger(__name__)

TRIP_JITTER_RADIUS_M = 200.0

_PARAM_NAMES = {
    "walkingVelocity": "walking_velocity",
    "cyclingVelocity": "cycling_velocity",
    "minRentalAttempts": "min_rental_attempts",
    "maxDistanceToRentBike": "max_distance_to_rent_bike",
}

ENTRY_POINTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["entryPoints"],
    "properties": {
        "entryPoints": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["position", "radius", "ratePerHour", "userType"],
                "properties": {
                    "position": _POINT,
                    "radius": {"type": "number", "minimum": 0},
                    "ratePerHour": {"type": "number", "minimum": 0},
                    "userType": {"type": "string"},
                    "userParameters": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "walkingVelocity": {"type": "number", "exclusiveMinimum": 0},
                            "cyclingVelocity": {"type": "number", "exclusiveMinimum": 0},
                            "minRentalAttempts": {"type": "integer", "minimum": 1},
                            "maxDistanceToRentBike": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    "destinationPlace": {"oneOf": [_POINT, {"type": "null"}]},
                    "destinationRadius": {"type": "number", "minimum": 0},
                    "timeWindow": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["start", "end"],
                        "properties": {"start": {"type": "number", "minimum": 0}, "end": {"type": "number"}},
                    },
                },
            },
        }
    },
}


@dataclass
class EntryPoint:
    position: GeoPoint
    radius: float
    rate_per_hour: float
    user_type: str
    user_parameters: dict = field(default_factory=dict)
    # None: destinations uniform over the whole bounding box.
    destination: GeoPoint | None = None
    destination_radius: float = 0.0
    start_time: float = 0.0
    end_time: float | None = None

    def __post_init__(self):
        if self.radius < 0 or self.destination_radius < 0:
            raise ValueError("entry point radii must be >= 0")
        if self.rate_per_hour < 0:
            raise ValueError("ratePerHour must be >= 0")
        if self.end_time is not None and self.end_time < self.start_time:
            raise ValueError("entry point time window ends before it starts")


@dataclass(frozen=True)
class TripRecord:
    hour: int
    origin_station: int
    destination_station: int
    cycling_velocity: float | None = None


def generate_arrival_times(rate_per_hour: float, start: float, end: float, rng: random.Random) -> list[float]:
    """Homogeneous Poisson process on [start, end): exponential gaps, mean 3600/rate s."""
    if rate_per_hour <= 0 or end <= start:
        return []
    rate = rate_per_hour / 3600.0
    times = []
    t = start + rng.expovariate(rate)
    while t < end:
        times.append(t)
        t += rng.expovariate(rate)
    return times


def sample_point_in_circle(center: GeoPoint, radius: float, rng: random.Random) -> GeoPoint:
    """Uniform by area inside a circle of ``radius`` meters."""
    if radius <= 0:
        return center
    r = radius * math.sqrt(rng.random())
    bearing = rng.uniform(0.0, 2.0 * math.pi)
    return offset_point(center, r * math.cos(bearing), r * math.sin(bearing))


def sample_point_in_box(bbox: BoundingBox, rng: random.Random) -> GeoPoint:
    return GeoPoint(
        rng.uniform(bbox.bottom_right.lat, bbox.top_left.lat),
        rng.uniform(bbox.top_left.lon, bbox.bottom_right.lon),
    )


def _user_kwargs(params: dict) -> dict:
    return {_PARAM_NAMES[k]: v for k, v in params.items()}


def generate_users(entry_points: list[EntryPoint], global_config: GlobalConfig, rng: random.Random,
                   rate_per_hour: float | None = None) -> list[UserConfig]:
    """One user per Poisson arrival at each entry point, sorted by appearance time.

    ``rate_per_hour`` overrides every entry point's rate (used by rate sweeps).
    """
    bbox = global_config.bounding_box
    for i, ep in enumerate(entry_points):
        if not bbox.contains(ep.position):
            raise ConfigError([f"entryPoints/{i}/position: entry point lies outside the bounding box"])
        if ep.user_type.upper() not in USER_TYPES:
            raise ConfigError([f"entryPoints/{i}/userType: unknown user type {ep.user_type!r}"])

    users = []
    for ep in entry_points:
        rate = ep.rate_per_hour if rate_per_hour is None else rate_per_hour
        end = global_config.total_simulation_time if ep.end_time is None else ep.end_time
        for t in generate_arrival_times(rate, ep.start_time, end, rng):
            position = sample_point_in_circle(ep.position, ep.radius, rng)
            if ep.destination is None:
                destination = sample_point_in_box(bbox, rng)
            else:
                destination = sample_point_in_circle(ep.destination, ep.destination_radius, rng)
            users.append(UserConfig(
                user_type=ep.user_type.upper(),
                position=position,
                destination_place=destination,
                time_instant=t,
                **_user_kwargs(ep.user_parameters),
            ))
    users.sort(key=lambda u: u.time_instant)
    for i, u in enumerate(users):
        u.id = i
    return users


def parse_entry_points(obj, source: str = "entry points") -> list[EntryPoint]:
    problems = _schema_problems(obj, ENTRY_POINTS_SCHEMA, source)
    if problems:
        raise ConfigError(problems)
    eps = []
    for i, e in enumerate(obj["entryPoints"]):
        dest = e.get("destinationPlace")
        window = e.get("timeWindow")
        try:
            eps.append(EntryPoint(
                position=GeoPoint.from_json(e["position"]),
                radius=float(e["radius"]),
                rate_per_hour=float(e["ratePerHour"]),
                user_type=e["userType"],
                user_parameters=dict(e.get("userParameters", {})),
                destination=None if dest is None else GeoPoint.from_json(dest),
                destination_radius=float(e.get("destinationRadius", 0.0)),
                start_time=float(window["start"]) if window else 0.0,
                end_time=float(window["end"]) if window else None,
            ))
        except ValueError as exc:
            problems.append(f"{source}: entryPoints/{i}: {exc}")
    if problems:
        raise ConfigError(problems)
    return eps


def load_entry_points(path) -> list[EntryPoint]:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: cannot read entry points: {exc}"]) from exc
    return parse_entry_points(obj, str(path))


def entry_points_to_json(entry_points: list[EntryPoint]) -> dict:
    out = []
    for ep in entry_points:
        e = {
            "position": ep.position.to_json(),
            "radius": ep.radius,
            "ratePerHour": ep.rate_per_hour,
            "userType": ep.user_type,
            "userParameters": dict(ep.user_parameters),
            "destinationPlace": None if ep.destination is None else ep.destination.to_json(),
            "destinationRadius": ep.destination_radius,
        }
        if ep.end_time is not None:
            e["timeWindow"] = {"start": ep.start_time, "end": ep.end_time}
        out.append(e)
    return {"entryPoints": out}


# -- trip logs -------------------------------------------------------------

def read_trip_log(path) -> list[TripRecord]:
    """CSV with header ``hour,origin_station,destination_station[,cycling_velocity_mps]``."""
    trips = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"hour", "origin_station", "destination_station"} - set(reader.fieldnames or [])
        if missing:
            raise ConfigError([f"{path}: trip log lacks columns {sorted(missing)}"])
        for line, row in enumerate(reader, start=2):
            try:
                vel = row.get("cycling_velocity_mps")
                trips.append(TripRecord(
                    int(row["hour"]), int(row["origin_station"]), int(row["destination_station"]),
                    float(vel) if vel not in (None, "") else None,
                ))
            except ValueError as exc:
                raise ConfigError([f"{path}: line {line}: {exc}"]) from exc
    return trips


def users_from_trip_log(trips: list[TripRecord], stations: list[Station], rng: random.Random, user_type: str,
                        user_parameters: dict | None = None,
                        radius: float = TRIP_JITTER_RADIUS_M) -> tuple[list[UserConfig], int]:
    """Turn recorded trips into users; returns (users, number of skipped trips).

    Appearance time is uniform within the trip's hour; origin and
    destination are uniform within ``radius`` of the recorded stations.
    A per-trip cycling velocity overrides the parameter default.
    """
    if user_type.upper() not in USER_TYPES:
        raise ConfigError([f"unknown user type {user_type!r}"])
    by_id = {s.id: s for s in stations}
    params = _user_kwargs(user_parameters or {})
    users, skipped = [], 0
    for i, trip in enumerate(trips):
        origin, dest = by_id.get(trip.origin_station), by_id.get(trip.destination_station)
        if origin is None or dest is None:
            log.warning("trip %d references unknown station (%s -> %s); skipped",
                        i, trip.origin_station, trip.destination_station)
            skipped += 1
            continue
        t = trip.hour * 3600.0 + rng.uniform(0.0, 3600.0)
        if t >= (trip.hour + 1) * 3600.0:
            t = math.nextafter((trip.hour + 1) * 3600.0, 0.0)
        kwargs = dict(params)
        if trip.cycling_velocity is not None:
            kwargs["cycling_velocity"] = trip.cycling_velocity
        users.append(UserConfig(
            user_type=user_type.upper(),
            position=sample_point_in_circle(origin.position, radius, rng),
            destination_place=sample_point_in_circle(dest.position, radius, rng),
            time_instant=t,
            **kwargs,
        ))
    users.sort(key=lambda u: u.time_instant)
    for i, u in enumerate(users):
        u.id = i
    return users, skipped
