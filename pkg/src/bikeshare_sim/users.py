"""User behaviour models.

Every user type answers the same eight decision hooks the engine invokes
along the rental/return life cycle. The first four pick how to get a bike
(or give up), ``decide_after_getting_bike`` picks between a ride and a
return, and the last three pick a return station; a user holding a bike
can never leave.

Types are registered by name; the users config refers to them through
``userType`` (case-insensitive).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .fleet import Reservation, Station
from .geo import WALK, GeoPoint

DEFAULT_WALKING_VELOCITY = 1.4
DEFAULT_CYCLING_VELOCITY = 6.0
DEFAULT_MIN_RENTAL_ATTEMPTS = 2
DEFAULT_MAX_DISTANCE_TO_RENT_BIKE = 600.0


# Decisions ---------------------------------------------------------------

@dataclass(frozen=True)
class GoToStation:
    station_id: int


@dataclass(frozen=True)
class ReserveBikeAt:
    station_id: int


@dataclass(frozen=True)
class LeaveSystem:
    pass


@dataclass(frozen=True)
class GoToReturnStation:
    station_id: int


@dataclass(frozen=True)
class ReserveSlotAt:
    station_id: int


@dataclass(frozen=True)
class RideToIntermediate:
    position: GeoPoint


RentalDecision = Union[GoToStation, ReserveBikeAt, LeaveSystem]
ReturnDecision = Union[GoToReturnStation, ReserveSlotAt]
AfterBikeDecision = Union[GoToReturnStation, ReserveSlotAt, RideToIntermediate]


def decision_to_json(decision) -> dict:
    if isinstance(decision, (GoToStation, GoToReturnStation)):
        return {"action": "go", "station": decision.station_id}
    if isinstance(decision, (ReserveBikeAt, ReserveSlotAt)):
        return {"action": "reserve", "station": decision.station_id}
    if isinstance(decision, RideToIntermediate):
        return {"action": "ride", "to": [decision.position.lat, decision.position.lon]}
    return {"action": "leave"}


# Configuration and runtime state -------------------------------------------

@dataclass
class UserConfig:
    user_type: str
    position: GeoPoint
    destination_place: GeoPoint
    time_instant: float
    walking_velocity: float = DEFAULT_WALKING_VELOCITY
    cycling_velocity: float = DEFAULT_CYCLING_VELOCITY
    min_rental_attempts: int = DEFAULT_MIN_RENTAL_ATTEMPTS
    max_distance_to_rent_bike: float = DEFAULT_MAX_DISTANCE_TO_RENT_BIKE
    intermediate_position: GeoPoint | None = None
    id: int | None = None

    def __post_init__(self):
        if not (self.walking_velocity > 0 and self.cycling_velocity > 0):
            raise ValueError("velocities must be positive")
        if self.min_rental_attempts < 1:
            raise ValueError("minRentalAttempts must be >= 1")
        if not self.max_distance_to_rent_bike > 0:
            raise ValueError("maxDistanceToRentBike must be positive")
        if self.time_instant < 0:
            raise ValueError("timeInstant must be >= 0")


@dataclass
class Leg:
    """Current movement: used to place a user when a reservation times out."""

    origin: GeoPoint
    target: GeoPoint
    start: float
    end: float

    def position_at(self, t: float) -> GeoPoint:
        if self.end <= self.start:
            return self.target
        f = min(max((t - self.start) / (self.end - self.start), 0.0), 1.0)
        return GeoPoint(
            self.origin.lat + (self.target.lat - self.origin.lat) * f,
            self.origin.lon + (self.target.lon - self.origin.lon) * f,
        )


@dataclass
class UserRuntime:
    position: GeoPoint
    state: str = "created"
    failed_rental_attempts: int = 0
    failed_return_attempts: int = 0
    tried_stations: set[int] = field(default_factory=set)
    tried_return_stations: set[int] = field(default_factory=set)
    has_bike: bool = False
    reservation: Reservation | None = None
    leg: Leg | None = None
    pending_decision: object = None
    return_retry: bool = False
    appear_time: float | None = None
    take_time: float | None = None
    return_time: float | None = None
    arrival_time: float | None = None
    left: bool = False

    @property
    def time_breakdown(self) -> tuple[float, float, float] | None:
        """(origin-station, ride, final-walk) seconds, for users who hired."""
        if None in (self.appear_time, self.take_time, self.return_time, self.arrival_time):
            return None
        return (
            self.take_time - self.appear_time,
            self.return_time - self.take_time,
            self.arrival_time - self.return_time,
        )


# User types -----------------------------------------------------------------

USER_TYPES: dict[str, type[User]] = {}


class UnknownUserTypeError(ValueError):
    pass


def register_user_type(cls):
    USER_TYPES[cls.type_name.upper()] = cls
    return cls


def user_type_class(name: str) -> type[User]:
    try:
        return USER_TYPES[name.upper()]
    except KeyError:
        raise UnknownUserTypeError(f"unknown user type {name!r}; known: {sorted(USER_TYPES)}") from None


def make_user(config: UserConfig, user_id: int) -> User:
    return user_type_class(config.user_type)(config, user_id)


def _nearest(stations: Iterable[Station], point: GeoPoint, world) -> list[tuple[float, Station]]:
    ranked = [(world.router.distance(point, s.position, WALK), s) for s in stations]
    ranked.sort(key=lambda pair: (pair[0], pair[1].id))
    return ranked


class User:
    """Base user: shared attempt bookkeeping around per-type station choices.

    Subclasses supply ``choose_rental_station`` and ``choose_return_station``;
    ``reserves`` switches between walking straight to a station and
    reserving first.
    """

    type_name = "abstract"
    reserves = False
    uses_recommender = False

    def __init__(self, config: UserConfig, user_id: int):
        self.id = user_id
        self.config = config
        self.runtime = UserRuntime(position=config.position)

    def __repr__(self):
        return f"{type(self).__name__}(id={self.id})"

    # policy hooks, per type
    def choose_rental_station(self, world) -> Station | None:
        raise NotImplementedError

    def choose_return_station(self, candidates: list[Station], world) -> Station | None:
        raise NotImplementedError

    # helpers
    def _rental_candidates(self, world) -> list[tuple[float, Station]]:
        """Untried stations within walking range, nearest first."""
        untried = [s for s in world.stations.values() if s.id not in self.runtime.tried_stations]
        limit = self.config.max_distance_to_rent_bike
        return [(d, s) for d, s in _nearest(untried, self.runtime.position, world) if d <= limit]

    def _rental_decision(self, world) -> RentalDecision:
        if self.runtime.failed_rental_attempts >= self.config.min_rental_attempts:
            return LeaveSystem()
        station = self.choose_rental_station(world)
        if station is None:
            return LeaveSystem()
        return ReserveBikeAt(station.id) if self.reserves else GoToStation(station.id)

    def _return_decision(self, world) -> ReturnDecision:
        rt = self.runtime
        candidates = [s for s in world.stations.values() if s.id not in rt.tried_return_stations]
        if not candidates:
            # Every station failed once: start over, the bike must be docked somewhere.
            rt.tried_return_stations.clear()
            rt.return_retry = True
            candidates = list(world.stations.values())
        station = self.choose_return_station(candidates, world)
        if station is None:
            station = _nearest(candidates, self.config.destination_place, world)[0][1]
        return ReserveSlotAt(station.id) if self.reserves else GoToReturnStation(station.id)

    # the eight decision hooks
    def decide_after_appearing(self, world) -> RentalDecision:
        return self._rental_decision(world)

    def decide_after_failed_rental(self, world) -> RentalDecision:
        return self._rental_decision(world)

    def decide_after_failed_bike_reservation(self, world) -> RentalDecision:
        return self._rental_decision(world)

    def decide_after_bike_reservation_timeout(self, world) -> RentalDecision:
        return self._rental_decision(world)

    def decide_after_getting_bike(self, world) -> AfterBikeDecision:
        if self.config.intermediate_position is not None:
            return RideToIntermediate(self.config.intermediate_position)
        return self._return_decision(world)

    def decide_after_failed_return(self, world) -> ReturnDecision:
        return self._return_decision(world)

    def decide_after_finishing_ride(self, world) -> ReturnDecision:
        return self._return_decision(world)

    def decide_after_failed_slot_reservation(self, world) -> ReturnDecision:
        return self._return_decision(world)


@register_user_type
class Uninformed(User):
    """Nearest station, with no knowledge of bikes or slots there."""

    type_name = "UNINFORMED"

    def choose_rental_station(self, world):
        untried = [s for s in world.stations.values() if s.id not in self.runtime.tried_stations]
        ranked = _nearest(untried, self.runtime.position, world)
        if not ranked or ranked[0][0] > self.config.max_distance_to_rent_bike:
            return None
        return ranked[0][1]

    def choose_return_station(self, candidates, world):
        return _nearest(candidates, self.config.destination_place, world)[0][1]


@register_user_type
class Informed(User):
    """Closest station with a free bike; closest-to-destination with a free slot."""

    type_name = "INFORMED"

    def choose_rental_station(self, world):
        for _, s in self._rental_candidates(world):
            if s.available_bikes > 0:
                return s
        return None

    def choose_return_station(self, candidates, world):
        for _, s in _nearest(candidates, self.config.destination_place, world):
            if s.available_slots > 0:
                return s
        return None


@register_user_type
class Obedient(User):
    """Follows the configured recommender's first feasible suggestion."""

    type_name = "OBEDIENT"
    uses_recommender = True

    def choose_rental_station(self, world):
        in_range = {s.id for _, s in self._rental_candidates(world)}
        for s in world.recommender.recommend_station_to_rent_bike(self.runtime.position, world):
            if s.id in in_range:
                return s
        return None

    def choose_return_station(self, candidates, world):
        allowed = {s.id for s in candidates}
        recommended = world.recommender.recommend_station_to_return_bike(
            self.runtime.position, self.config.destination_place, world
        )
        for s in recommended:
            if s.id in allowed:
                return s
        return None


@register_user_type
class UninformedR(Uninformed):
    type_name = "UNINFORMED_R"
    reserves = True


@register_user_type
class InformedR(Informed):
    type_name = "INFORMED_R"
    reserves = True


@register_user_type
class ObedientR(Obedient):
    type_name = "OBEDIENT_R"
    reserves = True
