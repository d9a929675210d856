"""Station inventory and reservation bookkeeping.

A station's capacity is split four ways: available bikes, reserved bikes,
available slots and reserved slots. Every mutation keeps the sum equal to
the capacity. Reserved bikes and slots are hard holds and are never
visible to walk-up users.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .geo import GeoPoint


class FleetError(RuntimeError):
    """Internal accounting fault; indicates an engine bug."""


class ReservationKind(str, enum.Enum):
    BIKE = "bike"
    SLOT = "slot"


class ReservationState(str, enum.Enum):
    ACTIVE = "active"
    FULFILLED = "fulfilled"
    EXPIRED = "expired"


@dataclass
class Station:
    id: int
    position: GeoPoint
    capacity: int
    available_bikes: int
    reserved_bikes: int = 0
    available_slots: int = -1
    reserved_slots: int = 0

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError(f"station {self.id}: capacity must be positive")
        if self.available_slots < 0:
            self.available_slots = self.capacity - self.available_bikes - self.reserved_bikes - self.reserved_slots
        self.check()

    @classmethod
    def with_bikes(cls, id: int, position: GeoPoint, capacity: int, bikes: int) -> Station:
        if not 0 <= bikes <= capacity:
            raise ValueError(f"station {id}: initial bikes {bikes} outside [0, {capacity}]")
        return cls(id, position, capacity, bikes, 0, capacity - bikes, 0)

    def snapshot(self) -> tuple[int, int, int, int]:
        return (self.available_bikes, self.reserved_bikes, self.available_slots, self.reserved_slots)

    @property
    def docked_bikes(self) -> int:
        return self.available_bikes + self.reserved_bikes

    def check(self) -> None:
        counts = self.snapshot()
        if min(counts) < 0 or sum(counts) != self.capacity:
            raise FleetError(f"station {self.id}: inconsistent inventory {counts} for capacity {self.capacity}")

    def try_rent_bike(self) -> bool:
        if self.available_bikes == 0:
            return False
        self.available_bikes -= 1
        self.available_slots += 1
        return True

    def try_return_bike(self) -> bool:
        if self.available_slots == 0:
            return False
        self.available_slots -= 1
        self.available_bikes += 1
        return True


@dataclass
class Reservation:
    id: int
    user_id: int
    station_id: int
    kind: ReservationKind
    start_time: float
    expiry_time: float
    state: ReservationState = ReservationState.ACTIVE

    @property
    def active(self) -> bool:
        return self.state is ReservationState.ACTIVE


class ReservationBook:
    """Creates reservations against stations and tracks their life cycle."""

    def __init__(self, reservation_time: float):
        if not reservation_time > 0:
            raise ValueError("reservation time must be positive")
        self.reservation_time = reservation_time
        self.reservations: dict[int, Reservation] = {}
        self._next_id = 0

    def _create(self, station: Station, user_id: int, now: float, kind: ReservationKind) -> Reservation:
        res = Reservation(self._next_id, user_id, station.id, kind, now, now + self.reservation_time)
        self._next_id += 1
        self.reservations[res.id] = res
        return res

    def try_reserve_bike(self, station: Station, user_id: int, now: float) -> Reservation | None:
        if station.available_bikes == 0:
            return None
        station.available_bikes -= 1
        station.reserved_bikes += 1
        return self._create(station, user_id, now, ReservationKind.BIKE)

    def try_reserve_slot(self, station: Station, user_id: int, now: float) -> Reservation | None:
        if station.available_slots == 0:
            return None
        station.available_slots -= 1
        station.reserved_slots += 1
        return self._create(station, user_id, now, ReservationKind.SLOT)

    def active(self) -> list[Reservation]:
        return [r for r in self.reservations.values() if r.active]


def _require_active(res: Reservation, station: Station, action: str) -> None:
    if not res.active:
        raise FleetError(f"cannot {action} reservation {res.id}: state is {res.state.value}")
    if res.station_id != station.id:
        raise FleetError(f"reservation {res.id} belongs to station {res.station_id}, not {station.id}")


def fulfill_reservation(res: Reservation, station: Station) -> None:
    """User picks up the reserved bike, or docks into the reserved slot."""
    _require_active(res, station, "fulfill")
    if res.kind is ReservationKind.BIKE:
        station.reserved_bikes -= 1
        station.available_slots += 1
    else:
        station.reserved_slots -= 1
        station.available_bikes += 1
    res.state = ReservationState.FULFILLED
    station.check()


def expire_reservation(res: Reservation, station: Station) -> None:
    """Release the hold back to the pool it came from."""
    _require_active(res, station, "expire")
    if res.kind is ReservationKind.BIKE:
        station.reserved_bikes -= 1
        station.available_bikes += 1
    else:
        station.reserved_slots -= 1
        station.available_slots += 1
    res.state = ReservationState.EXPIRED
    station.check()
