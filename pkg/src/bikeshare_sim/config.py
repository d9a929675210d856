"""The three experiment input files: global, stations and users.

Parsing is strict: unknown fields are rejected so that a typo in a
strategy parameter fails loudly instead of silently running the default.
Every problem is reported as ``file: field/path: message``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .fleet import Station
from .geo import ROUTERS, BoundingBox, GeoPoint
from .recommenders import RECOMMENDERS
from .users import USER_TYPES, UserConfig

log = logging.getLogger(__name__)

DEFAULT_RESERVATION_TIME = 1200.0
DEFAULT_RETURN_RETRY_WAIT = 60.0


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


@dataclass(frozen=True)
class RecommenderConfig:
    type_name: str
    parameters: dict = field(default_factory=dict)


@dataclass
class GlobalConfig:
    total_simulation_time: float
    bounding_box: BoundingBox
    reservation_time: float = DEFAULT_RESERVATION_TIME
    random_seed: int | None = None
    map_path: str | None = None
    output_path: str = "output"
    recommender: RecommenderConfig | None = None
    router: str = "great_circle"
    circuity_walk: float = 1.0
    circuity_cycle: float = 1.0
    return_retry_wait: float = DEFAULT_RETURN_RETRY_WAIT


@dataclass
class Experiment:
    global_config: GlobalConfig
    stations: list[Station]
    users: list[UserConfig]

    def digests(self) -> dict[str, str]:
        return {
            "global": digest(global_to_json(self.global_config)),
            "stations": digest(stations_to_json(self.stations)),
            "users": digest(users_to_json(self.users)),
        }


# -- schemas -------------------------------------------------------------

_POINT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lat", "lon"],
    "properties": {
        "lat": {"type": "number", "minimum": -90, "maximum": 90},
        "lon": {"type": "number", "minimum": -180, "maximum": 180},
    },
}

GLOBAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["totalSimulationTime", "boundingBox"],
    "properties": {
        "reservationTime": {"type": "number", "exclusiveMinimum": 0},
        "totalSimulationTime": {"type": "number", "exclusiveMinimum": 0},
        "randomSeed": {"type": ["integer", "null"]},
        "boundingBox": {
            "type": "object",
            "additionalProperties": False,
            "required": ["topLeft", "bottomRight"],
            "properties": {"topLeft": _POINT, "bottomRight": _POINT},
        },
        "map": {"type": ["string", "null"]},
        "outputPath": {"type": "string"},
        "recommendationSystemType": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["typeName"],
            "properties": {"typeName": {"type": "string"}, "parameters": {"type": "object"}},
        },
        "router": {"type": "string"},
        "circuityWalk": {"type": "number", "minimum": 1},
        "circuityCycle": {"type": "number", "minimum": 1},
        "returnRetryWait": {"type": "number", "exclusiveMinimum": 0},
    },
}

STATIONS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["stations"],
    "properties": {
        "stations": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "position", "capacity", "initialBikes"],
                "properties": {
                    "id": {"type": "integer"},
                    "position": _POINT,
                    "capacity": {"type": "integer", "minimum": 1},
                    "initialBikes": {"type": "integer", "minimum": 0},
                },
            },
        }
    },
}

USER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["userType", "position", "destinationPlace", "timeInstant"],
    "properties": {
        "id": {"type": "integer"},
        "userType": {"type": "string"},
        "position": _POINT,
        "destinationPlace": _POINT,
        "timeInstant": {"type": "number", "minimum": 0},
        "walkingVelocity": {"type": "number", "exclusiveMinimum": 0},
        "cyclingVelocity": {"type": "number", "exclusiveMinimum": 0},
        "minRentalAttempts": {"type": "integer", "minimum": 1},
        "maxDistanceToRentBike": {"type": "number", "exclusiveMinimum": 0},
        "intermediatePosition": {"oneOf": [_POINT, {"type": "null"}]},
    },
}

USERS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["users"],
    "properties": {"users": {"type": "array", "items": USER_SCHEMA}},
}


def _schema_problems(obj, schema, source: str) -> list[str]:
    validator = jsonschema.Draft202012Validator(schema)
    problems = []
    for err in sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.absolute_path))):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        problems.append(f"{source}: {path}: {err.message}")
    return problems


def _read_json(path) -> object:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read: {exc.strerror}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON: {exc}"]) from exc


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# -- parsing -------------------------------------------------------------

def _point(obj) -> GeoPoint:
    return GeoPoint(float(obj["lat"]), float(obj["lon"]))


def parse_global(obj, source: str = "global") -> GlobalConfig:
    problems = _schema_problems(obj, GLOBAL_SCHEMA, source)
    if problems:
        raise ConfigError(problems)
    bb = obj["boundingBox"]
    try:
        bbox = BoundingBox(_point(bb["topLeft"]), _point(bb["bottomRight"]))
    except ValueError as exc:
        problems.append(f"{source}: boundingBox: {exc}")
    rec = obj.get("recommendationSystemType")
    recommender = None
    if rec is not None:
        if rec["typeName"] not in RECOMMENDERS:
            problems.append(
                f"{source}: recommendationSystemType/typeName: unknown recommender {rec['typeName']!r}"
                f" (known: {', '.join(sorted(RECOMMENDERS))})"
            )
        else:
            try:
                RECOMMENDERS[rec["typeName"]](**rec.get("parameters", {}))
            except (TypeError, ValueError) as exc:
                problems.append(f"{source}: recommendationSystemType/parameters: {exc}")
        recommender = RecommenderConfig(rec["typeName"], dict(rec.get("parameters", {})))
    router = obj.get("router", "great_circle")
    if router not in ROUTERS:
        problems.append(f"{source}: router: unknown router {router!r} (known: {', '.join(sorted(ROUTERS))})")
    if problems:
        raise ConfigError(problems)
    return GlobalConfig(
        total_simulation_time=float(obj["totalSimulationTime"]),
        bounding_box=bbox,
        reservation_time=float(obj.get("reservationTime", DEFAULT_RESERVATION_TIME)),
        random_seed=obj.get("randomSeed"),
        map_path=obj.get("map"),
        output_path=obj.get("outputPath", "output"),
        recommender=recommender,
        router=router,
        circuity_walk=float(obj.get("circuityWalk", 1.0)),
        circuity_cycle=float(obj.get("circuityCycle", 1.0)),
        return_retry_wait=float(obj.get("returnRetryWait", DEFAULT_RETURN_RETRY_WAIT)),
    )


def parse_stations(obj, bbox: BoundingBox | None = None, source: str = "stations") -> list[Station]:
    problems = _schema_problems(obj, STATIONS_SCHEMA, source)
    if problems:
        raise ConfigError(problems)
    stations, seen = [], set()
    for i, entry in enumerate(obj["stations"]):
        sid, where = entry["id"], f"{source}: stations/{i}"
        if sid in seen:
            problems.append(f"{where}/id: duplicate station id {sid}")
        seen.add(sid)
        if entry["initialBikes"] > entry["capacity"]:
            problems.append(
                f"{where}/initialBikes: station {sid} has initialBikes {entry['initialBikes']}"
                f" > capacity {entry['capacity']}"
            )
            continue
        pos = _point(entry["position"])
        if bbox is not None and not bbox.contains(pos):
            problems.append(f"{where}/position: station {sid} lies outside the bounding box")
        stations.append(Station.with_bikes(sid, pos, entry["capacity"], entry["initialBikes"]))
    if problems:
        raise ConfigError(problems)
    return stations


def parse_users(obj, total_simulation_time: float | None = None, source: str = "users") -> list[UserConfig]:
    problems = _schema_problems(obj, USERS_SCHEMA, source)
    if problems:
        raise ConfigError(problems)
    users, seen = [], set()
    for i, entry in enumerate(obj["users"]):
        where = f"{source}: users/{i}"
        if entry["userType"].upper() not in USER_TYPES:
            problems.append(f"{where}/userType: unknown user type {entry['userType']!r}")
            continue
        uid = entry.get("id", i)
        if uid in seen:
            problems.append(f"{where}/id: duplicate user id {uid}")
        seen.add(uid)
        if total_simulation_time is not None and entry["timeInstant"] > total_simulation_time:
            log.warning("%s: timeInstant %s exceeds totalSimulationTime %s; the user will be skipped",
                        where, entry["timeInstant"], total_simulation_time)
        inter = entry.get("intermediatePosition")
        kwargs = {
            k: entry[j]
            for j, k in (
                ("walkingVelocity", "walking_velocity"),
                ("cyclingVelocity", "cycling_velocity"),
                ("minRentalAttempts", "min_rental_attempts"),
                ("maxDistanceToRentBike", "max_distance_to_rent_bike"),
            )
            if j in entry
        }
        users.append(UserConfig(
            user_type=entry["userType"].upper(),
            position=_point(entry["position"]),
            destination_place=_point(entry["destinationPlace"]),
            time_instant=float(entry["timeInstant"]),
            intermediate_position=None if inter is None else _point(inter),
            id=uid,
            **kwargs,
        ))
    if problems:
        raise ConfigError(problems)
    return users


def load_global(path) -> GlobalConfig:
    return parse_global(_read_json(path), str(path))


def load_stations(path, bbox: BoundingBox | None = None) -> list[Station]:
    return parse_stations(_read_json(path), bbox, str(path))


def load_users(path, total_simulation_time: float | None = None) -> list[UserConfig]:
    return parse_users(_read_json(path), total_simulation_time, str(path))


def load_and_validate(global_path, stations_path, users_path) -> Experiment:
    """Load all three files, collecting problems across files before failing."""
    problems: list[str] = []
    g = stations = users = None
    try:
        g = load_global(global_path)
    except ConfigError as exc:
        problems.extend(exc.problems)
    try:
        stations = load_stations(stations_path, g.bounding_box if g else None)
    except ConfigError as exc:
        problems.extend(exc.problems)
    try:
        users = load_users(users_path, g.total_simulation_time if g else None)
    except ConfigError as exc:
        problems.extend(exc.problems)
    if g is not None and users is not None and g.recommender is None:
        for u in users:
            if USER_TYPES[u.user_type].uses_recommender:
                problems.append(
                    f"{users_path}: user {u.id} of type {u.user_type} needs recommendationSystemType in {global_path}"
                )
    if problems:
        raise ConfigError(problems)
    return Experiment(g, stations, users)


# -- serialization -------------------------------------------------------

def global_to_json(g: GlobalConfig) -> dict:
    out = {
        "reservationTime": g.reservation_time,
        "totalSimulationTime": g.total_simulation_time,
        "randomSeed": g.random_seed,
        "boundingBox": {"topLeft": g.bounding_box.top_left.to_json(),
                        "bottomRight": g.bounding_box.bottom_right.to_json()},
        "map": g.map_path,
        "outputPath": g.output_path,
        "recommendationSystemType": None if g.recommender is None else {
            "typeName": g.recommender.type_name, "parameters": dict(g.recommender.parameters)},
        "router": g.router,
        "circuityWalk": g.circuity_walk,
        "circuityCycle": g.circuity_cycle,
        "returnRetryWait": g.return_retry_wait,
    }
    return out


def stations_to_json(stations: list[Station]) -> dict:
    return {"stations": [
        {"id": s.id, "position": s.position.to_json(), "capacity": s.capacity, "initialBikes": s.docked_bikes}
        for s in stations
    ]}


def user_to_json(u: UserConfig) -> dict:
    out = {
        "userType": u.user_type,
        "position": u.position.to_json(),
        "destinationPlace": u.destination_place.to_json(),
        "timeInstant": u.time_instant,
        "walkingVelocity": u.walking_velocity,
        "cyclingVelocity": u.cycling_velocity,
        "minRentalAttempts": u.min_rental_attempts,
        "maxDistanceToRentBike": u.max_distance_to_rent_bike,
    }
    if u.id is not None:
        out = {"id": u.id, **out}
    if u.intermediate_position is not None:
        out["intermediatePosition"] = u.intermediate_position.to_json()
    return out


def users_to_json(users: list[UserConfig]) -> dict:
    return {"users": [user_to_json(u) for u in users]}


def write_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
