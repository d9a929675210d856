"""Station recommendation systems used by obedient users.

A recommender returns an ordered list of stations for renting or for
returning a bike. Stations without the requested resource are never
listed. Implementations register under a type name so the global config
can select them.
"""

from __future__ import annotations

from typing import Callable

from .fleet import Station
from .geo import CYCLE, WALK, GeoPoint

MIN_RATIO_DISTANCE_M = 1.0

RECOMMENDERS: dict[str, type[Recommender]] = {}


class UnknownRecommenderError(ValueError):
    pass


def register_recommender(cls):
    RECOMMENDERS[cls.type_name] = cls
    return cls


def make_recommender(type_name: str, parameters: dict | None = None) -> Recommender:
    try:
        cls = RECOMMENDERS[type_name]
    except KeyError:
        raise UnknownRecommenderError(
            f"unknown recommendation system {type_name!r}; known: {sorted(RECOMMENDERS)}"
        ) from None
    return cls(**(parameters or {}))


def _ranked(stations, key: Callable[[Station], float]) -> list[Station]:
    # Descending key, ascending id on ties.
    return sorted(stations, key=lambda s: (-key(s), s.id))


class Recommender:
    """Base class; ``maxDistance`` (meters, optional) limits candidates to
    stations within walking distance of the user (renting) or of the
    destination (returning)."""

    type_name = "abstract"

    def __init__(self, maxDistance: float | None = None):
        if maxDistance is not None and not maxDistance > 0:
            raise ValueError(f"maxDistance must be positive, got {maxDistance!r}")
        self.max_distance = maxDistance

    def _near(self, stations, point: GeoPoint, world) -> list[Station]:
        if self.max_distance is None:
            return list(stations)
        return [s for s in stations if world.router.distance(point, s.position, WALK) <= self.max_distance]

    def _rentable(self, position, world) -> list[Station]:
        return [s for s in self._near(world.stations.values(), position, world) if s.available_bikes > 0]

    def _returnable(self, destination, world) -> list[Station]:
        return [s for s in self._near(world.stations.values(), destination, world) if s.available_slots > 0]

    def recommend_station_to_rent_bike(self, position: GeoPoint, world) -> list[Station]:
        raise NotImplementedError

    def recommend_station_to_return_bike(self, position: GeoPoint, destination: GeoPoint, world) -> list[Station]:
        raise NotImplementedError


@register_recommender
class AvailableResources(Recommender):
    """Most available bikes (or slots) first; distance is ignored."""

    type_name = "AVAILABLE_RESOURCES"

    def recommend_station_to_rent_bike(self, position, world):
        return _ranked(self._rentable(position, world), lambda s: s.available_bikes)

    def recommend_station_to_return_bike(self, position, destination, world):
        return _ranked(self._returnable(destination, world), lambda s: s.available_slots)


@register_recommender
class AvailableResourcesRatio(Recommender):
    """Best ratio of available resources to distance first.

    ``returnDistance`` picks the distance used when returning: ``"destination"``
    (station to the user's destination, on foot) or ``"user"`` (user to the
    station, by bike).
    """

    type_name = "AVAILABLE_RESOURCES_RATIO"

    def __init__(self, returnDistance: str = "destination", maxDistance: float | None = None):
        super().__init__(maxDistance)
        if returnDistance not in ("destination", "user"):
            raise ValueError(f"returnDistance must be 'destination' or 'user', got {returnDistance!r}")
        self.return_distance = returnDistance

    def recommend_station_to_rent_bike(self, position, world):
        def ratio(s: Station) -> float:
            d = world.router.distance(position, s.position, WALK)
            return s.available_bikes / max(d, MIN_RATIO_DISTANCE_M)

        return _ranked(self._rentable(position, world), ratio)

    def recommend_station_to_return_bike(self, position, destination, world):
        def ratio(s: Station) -> float:
            if self.return_distance == "destination":
                d = world.router.distance(s.position, destination, WALK)
            else:
                d = world.router.distance(position, s.position, CYCLE)
            return s.available_slots / max(d, MIN_RATIO_DISTANCE_M)

        return _ranked(self._returnable(destination, world), ratio)
