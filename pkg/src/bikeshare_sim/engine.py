"""Event-driven simulation core.

Events sit in a priority queue ordered by (time, insertion seq). Each
dispatched event mutates the world, emits one history record and
schedules its successor(s) according to the user life cycle. The run ends
when the queue is empty: users who appeared before the horizon always
finish their trip.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import logging
import random
import secrets
from dataclasses import dataclass, field

from . import __version__
from .fleet import ReservationBook, Station, expire_reservation, fulfill_reservation
from .geo import CYCLE, WALK, ROUTERS
from .recommenders import Recommender, make_recommender
from .users import (
    GoToReturnStation,
    GoToStation,
    LeaveSystem,
    Leg,
    ReserveBikeAt,
    ReserveSlotAt,
    RideToIntermediate,
    User,
    UserConfig,
    decision_to_json,
    make_user,
)

log = logging.getLogger(__name__)


class EventKind(str, enum.Enum):
    USER_APPEARS = "UserAppears"
    USER_DECIDES_RENTAL = "UserDecidesRental"
    USER_ARRIVES_AT_STATION_TO_RENT = "UserArrivesAtStationToRent"
    USER_TRIES_TO_RESERVE_BIKE = "UserTriesToReserveBike"
    USER_HAS_BIKE_RESERVATION = "UserHasBikeReservation"
    BIKE_RESERVATION_TIMEOUT = "BikeReservationTimeout"
    USER_TAKES_BIKE = "UserTakesBike"
    USER_FINISHES_RIDE = "UserFinishesRide"
    USER_DECIDES_RETURN = "UserDecidesReturn"
    USER_ARRIVES_AT_STATION_TO_RETURN = "UserArrivesAtStationToReturn"
    USER_TRIES_TO_RESERVE_SLOT = "UserTriesToReserveSlot"
    USER_HAS_SLOT_RESERVATION = "UserHasSlotReservation"
    SLOT_RESERVATION_TIMEOUT = "SlotReservationTimeout"
    USER_RETURNS_BIKE = "UserReturnsBike"
    USER_ARRIVES_AT_DESTINATION = "UserArrivesAtDestination"
    USER_LEAVES_SYSTEM = "UserLeavesSystem"


K = EventKind

STATION_KINDS = frozenset({
    K.USER_ARRIVES_AT_STATION_TO_RENT, K.USER_TRIES_TO_RESERVE_BIKE, K.USER_HAS_BIKE_RESERVATION,
    K.BIKE_RESERVATION_TIMEOUT, K.USER_TAKES_BIKE, K.USER_ARRIVES_AT_STATION_TO_RETURN,
    K.USER_TRIES_TO_RESERVE_SLOT, K.USER_HAS_SLOT_RESERVATION, K.SLOT_RESERVATION_TIMEOUT,
    K.USER_RETURNS_BIKE,
})

# Legal successor kinds in a single user's event sequence.
LIFE_CYCLE = {
    K.USER_APPEARS: {K.USER_DECIDES_RENTAL},
    K.USER_DECIDES_RENTAL: {K.USER_ARRIVES_AT_STATION_TO_RENT, K.USER_TRIES_TO_RESERVE_BIKE, K.USER_LEAVES_SYSTEM},
    K.USER_TRIES_TO_RESERVE_BIKE: {K.USER_HAS_BIKE_RESERVATION, K.USER_DECIDES_RENTAL},
    K.USER_HAS_BIKE_RESERVATION: {K.USER_TAKES_BIKE, K.BIKE_RESERVATION_TIMEOUT},
    K.BIKE_RESERVATION_TIMEOUT: {K.USER_DECIDES_RENTAL},
    K.USER_ARRIVES_AT_STATION_TO_RENT: {K.USER_TAKES_BIKE, K.USER_DECIDES_RENTAL},
    K.USER_TAKES_BIKE: {K.USER_FINISHES_RIDE, K.USER_DECIDES_RETURN},
    K.USER_FINISHES_RIDE: {K.USER_DECIDES_RETURN},
    K.USER_DECIDES_RETURN: {K.USER_ARRIVES_AT_STATION_TO_RETURN, K.USER_TRIES_TO_RESERVE_SLOT},
    K.USER_TRIES_TO_RESERVE_SLOT: {K.USER_HAS_SLOT_RESERVATION, K.USER_DECIDES_RETURN},
    K.USER_HAS_SLOT_RESERVATION: {K.USER_RETURNS_BIKE, K.SLOT_RESERVATION_TIMEOUT},
    K.SLOT_RESERVATION_TIMEOUT: {K.USER_DECIDES_RETURN},
    K.USER_ARRIVES_AT_STATION_TO_RETURN: {K.USER_RETURNS_BIKE, K.USER_DECIDES_RETURN},
    K.USER_RETURNS_BIKE: {K.USER_ARRIVES_AT_DESTINATION},
    K.USER_ARRIVES_AT_DESTINATION: {K.USER_LEAVES_SYSTEM},
    K.USER_LEAVES_SYSTEM: set(),
}

# Decision contexts carried by UserDecidesRental / UserDecidesReturn events.
APPEARED = "appeared"
FAILED_RENTAL = "failed_rental"
FAILED_BIKE_RESERVATION = "failed_bike_reservation"
BIKE_RESERVATION_TIMEOUT = "bike_reservation_timeout"
GOT_BIKE = "got_bike"
FINISHED_RIDE = "finished_ride"
FAILED_RETURN = "failed_return"
FAILED_SLOT_RESERVATION = "failed_slot_reservation"
SLOT_RESERVATION_TIMEOUT = "slot_reservation_timeout"

RENTAL_HOOKS = {
    APPEARED: "decide_after_appearing",
    FAILED_RENTAL: "decide_after_failed_rental",
    FAILED_BIKE_RESERVATION: "decide_after_failed_bike_reservation",
    BIKE_RESERVATION_TIMEOUT: "decide_after_bike_reservation_timeout",
}
RETURN_HOOKS = {
    FINISHED_RIDE: "decide_after_finishing_ride",
    FAILED_RETURN: "decide_after_failed_return",
    FAILED_SLOT_RESERVATION: "decide_after_failed_slot_reservation",
    # There is no dedicated hook for slot timeouts; they re-decide like a failed slot reservation.
    SLOT_RESERVATION_TIMEOUT: "decide_after_failed_slot_reservation",
}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind
    user_id: int
    station_id: int | None = None
    reservation_id: int | None = None
    context: str | None = None

    def __post_init__(self):
        if self.time < 0:
            raise SimulationError(f"negative event time {self.time}")
        if self.kind in STATION_KINDS and self.station_id is None:
            raise SimulationError(f"{self.kind.value} event for user {self.user_id} lacks a station")


class EventQueue:
    """Min-heap on (time, seq); seq is a monotone insertion counter."""

    def __init__(self):
        self._heap: list[tuple[float, int, SimEvent]] = []
        self._seq = itertools.count()
        self.clock = 0.0

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)

    def schedule(self, time: float, kind: EventKind, user_id: int, **extra) -> SimEvent:
        if time < self.clock:
            raise SimulationError(
                f"cannot schedule {kind.value} for user {user_id} at t={time} before clock t={self.clock}"
            )
        event = SimEvent(time, next(self._seq), kind, user_id, **extra)
        heapq.heappush(self._heap, (event.time, event.seq, event))
        return event

    def pop(self) -> SimEvent:
        _, _, event = heapq.heappop(self._heap)
        self.clock = event.time
        return event

    def peek(self) -> SimEvent | None:
        return self._heap[0][2] if self._heap else None


@dataclass
class RunSummary:
    seed: int
    users: int = 0
    successful_hires: int = 0
    failed_hires: int = 0
    failed_hires_of_hirers: int = 0
    successful_returns: int = 0
    failed_returns: int = 0
    abandoned: int = 0
    events: int = 0
    horizon: float = 0.0


@dataclass
class World:
    stations: dict[int, Station]
    users: dict[int, User]
    reservations: ReservationBook
    router: object
    recommender: Recommender | None
    rng: random.Random
    seed: int
    return_retry_wait: float = 60.0
    clock: float = 0.0
    failed_hires: dict[int, int] = field(default_factory=dict)


class NullSink:
    def write_header(self, header: dict) -> None:
        pass

    def append(self, record: dict) -> None:
        pass

    def close(self) -> None:
        pass


class Simulation:
    """One simulation run: world state, event queue and history sink."""

    def __init__(self, world: World, queue: EventQueue, sink=None, header: dict | None = None):
        self.world = world
        self.queue = queue
        self.sink = sink if sink is not None else NullSink()
        self.header = header or {}
        self.summary = RunSummary(seed=world.seed, users=0)
        self._handlers = {
            K.USER_APPEARS: self._user_appears,
            K.USER_DECIDES_RENTAL: self._decides_rental,
            K.USER_TRIES_TO_RESERVE_BIKE: self._tries_to_reserve_bike,
            K.USER_HAS_BIKE_RESERVATION: self._has_bike_reservation,
            K.BIKE_RESERVATION_TIMEOUT: self._bike_reservation_timeout,
            K.USER_ARRIVES_AT_STATION_TO_RENT: self._arrives_to_rent,
            K.USER_TAKES_BIKE: self._takes_bike,
            K.USER_FINISHES_RIDE: self._finishes_ride,
            K.USER_DECIDES_RETURN: self._decides_return,
            K.USER_TRIES_TO_RESERVE_SLOT: self._tries_to_reserve_slot,
            K.USER_HAS_SLOT_RESERVATION: self._has_slot_reservation,
            K.SLOT_RESERVATION_TIMEOUT: self._slot_reservation_timeout,
            K.USER_ARRIVES_AT_STATION_TO_RETURN: self._arrives_to_return,
            K.USER_RETURNS_BIKE: self._returns_bike,
            K.USER_ARRIVES_AT_DESTINATION: self._arrives_at_destination,
            K.USER_LEAVES_SYSTEM: self._leaves_system,
        }

    # -- loop -----------------------------------------------------------

    def run(self) -> RunSummary:
        self.sink.write_header(self.header)
        try:
            while self.queue:
                event = self.queue.pop()
                self.world.clock = event.time
                try:
                    record = self.dispatch(event)
                except SimulationError:
                    raise
                except Exception as exc:
                    raise SimulationError(
                        f"dispatch of {event.kind.value} for user {event.user_id} at t={event.time} failed: {exc}"
                    ) from exc
                self.sink.append(record)
                self.summary.events += 1
                self.summary.horizon = event.time
        finally:
            self.sink.close()
        return self.summary

    def schedule(self, time: float, kind: EventKind, user_id: int, **extra) -> SimEvent:
        return self.queue.schedule(time, kind, user_id, **extra)

    def dispatch(self, event: SimEvent) -> dict:
        user = self.world.users[event.user_id]
        if user.runtime.left:
            raise SimulationError(f"{event.kind.value} dispatched for user {user.id} after they left")
        record = {"t": event.time, "seq": event.seq, "kind": event.kind.value, "user": event.user_id}
        if event.station_id is not None:
            record["station"] = event.station_id
        if event.reservation_id is not None:
            record["reservation"] = event.reservation_id
        if event.context is not None:
            record["context"] = event.context
        self._handlers[event.kind](event, user, record)
        if "station" in record:
            record["state"] = list(self.world.stations[record["station"]].snapshot())
        return record

    # -- helpers --------------------------------------------------------

    def _station(self, station_id: int) -> Station:
        try:
            return self.world.stations[station_id]
        except KeyError:
            raise SimulationError(f"decision refers to unknown station {station_id}") from None

    def _move(self, user: User, target, mode: str, depart: float) -> float:
        """Start a leg toward ``target``; returns the arrival time."""
        velocity = user.config.walking_velocity if mode == WALK else user.config.cycling_velocity
        route = self.world.router.route(user.runtime.position, target, mode)
        arrival = depart + self.world.router.travel_time(route, velocity)
        user.runtime.leg = Leg(user.runtime.position, target, depart, arrival)
        return arrival

    def _reservation(self, event: SimEvent):
        return self.world.reservations.reservations[event.reservation_id]

    # -- handlers -------------------------------------------------------

    def _user_appears(self, ev, user, record):
        rt = user.runtime
        rt.appear_time = ev.time
        rt.state = "appeared"
        self.summary.users += 1
        record["user_type"] = user.type_name
        record["position"] = [rt.position.lat, rt.position.lon]
        self.schedule(ev.time, K.USER_DECIDES_RENTAL, user.id, context=APPEARED)

    def _decides_rental(self, ev, user, record):
        decision = getattr(user, RENTAL_HOOKS[ev.context])(self.world)
        record["decision"] = decision_to_json(decision)
        if isinstance(decision, LeaveSystem):
            self.schedule(ev.time, K.USER_LEAVES_SYSTEM, user.id)
            return
        station = self._station(decision.station_id)
        record["decision"]["state"] = list(station.snapshot())
        if isinstance(decision, GoToStation):
            arrival = self._move(user, station.position, WALK, ev.time)
            self.schedule(arrival, K.USER_ARRIVES_AT_STATION_TO_RENT, user.id, station_id=station.id)
        elif isinstance(decision, ReserveBikeAt):
            self.schedule(ev.time, K.USER_TRIES_TO_RESERVE_BIKE, user.id, station_id=station.id)
        else:
            raise SimulationError(f"invalid rental decision {decision!r}")

    def _rental_failed(self, ev, user, context):
        rt = user.runtime
        rt.failed_rental_attempts += 1
        rt.tried_stations.add(ev.station_id)
        self.schedule(ev.time, K.USER_DECIDES_RENTAL, user.id, context=context)

    def _tries_to_reserve_bike(self, ev, user, record):
        station = self._station(ev.station_id)
        res = self.world.reservations.try_reserve_bike(station, user.id, ev.time)
        record["success"] = res is not None
        if res is None:
            self._rental_failed(ev, user, FAILED_BIKE_RESERVATION)
            return
        user.runtime.reservation = res
        record["reservation"] = res.id
        record["expiry"] = res.expiry_time
        self.schedule(ev.time, K.USER_HAS_BIKE_RESERVATION, user.id, station_id=station.id, reservation_id=res.id)

    def _has_bike_reservation(self, ev, user, record):
        res = self._reservation(ev)
        station = self._station(ev.station_id)
        arrival = self._move(user, station.position, WALK, ev.time)
        if arrival <= res.expiry_time:
            self.schedule(arrival, K.USER_TAKES_BIKE, user.id, station_id=station.id, reservation_id=res.id)
        else:
            self.schedule(res.expiry_time, K.BIKE_RESERVATION_TIMEOUT, user.id,
                          station_id=station.id, reservation_id=res.id)

    def _bike_reservation_timeout(self, ev, user, record):
        res = self._reservation(ev)
        if not res.active:
            record["noop"] = True
            return
        expire_reservation(res, self._station(ev.station_id))
        rt = user.runtime
        rt.reservation = None
        rt.position = rt.leg.position_at(ev.time)
        self._rental_failed(ev, user, BIKE_RESERVATION_TIMEOUT)

    def _arrives_to_rent(self, ev, user, record):
        station = self._station(ev.station_id)
        user.runtime.position = station.position
        ok = station.try_rent_bike()
        record["success"] = ok
        if ok:
            self.schedule(ev.time, K.USER_TAKES_BIKE, user.id, station_id=station.id)
        else:
            self.summary.failed_hires += 1
            self.world.failed_hires[user.id] = self.world.failed_hires.get(user.id, 0) + 1
            self._rental_failed(ev, user, FAILED_RENTAL)

    def _takes_bike(self, ev, user, record):
        rt = user.runtime
        station = self._station(ev.station_id)
        if ev.reservation_id is not None:
            res = self._reservation(ev)
            if ev.time > res.expiry_time:
                raise SimulationError(f"reservation {res.id} used after expiry")
            fulfill_reservation(res, station)
            rt.reservation = None
        rt.position = station.position
        rt.has_bike = True
        rt.take_time = ev.time
        rt.state = "riding"
        self.summary.successful_hires += 1
        self.summary.failed_hires_of_hirers += self.world.failed_hires.get(user.id, 0)
        decision = user.decide_after_getting_bike(self.world)
        record["decision"] = decision_to_json(decision)
        if isinstance(decision, RideToIntermediate):
            arrival = self._move(user, decision.position, CYCLE, ev.time)
            self.schedule(arrival, K.USER_FINISHES_RIDE, user.id)
        else:
            rt.pending_decision = decision
            self.schedule(ev.time, K.USER_DECIDES_RETURN, user.id, context=GOT_BIKE)

    def _finishes_ride(self, ev, user, record):
        user.runtime.position = user.runtime.leg.target
        self.schedule(ev.time, K.USER_DECIDES_RETURN, user.id, context=FINISHED_RIDE)

    def _decides_return(self, ev, user, record):
        rt = user.runtime
        if ev.context == GOT_BIKE:
            decision, rt.pending_decision = rt.pending_decision, None
        else:
            decision = getattr(user, RETURN_HOOKS[ev.context])(self.world)
        record["decision"] = decision_to_json(decision)
        station = self._station(decision.station_id)
        record["decision"]["state"] = list(station.snapshot())
        depart = ev.time
        if rt.return_retry:
            # All stations failed once; wait before trying again so the clock advances.
            depart += self.world.return_retry_wait
            rt.return_retry = False
            record["decision"]["wait"] = self.world.return_retry_wait
        if isinstance(decision, GoToReturnStation):
            arrival = self._move(user, station.position, CYCLE, depart)
            self.schedule(arrival, K.USER_ARRIVES_AT_STATION_TO_RETURN, user.id, station_id=station.id)
        elif isinstance(decision, ReserveSlotAt):
            self.schedule(depart, K.USER_TRIES_TO_RESERVE_SLOT, user.id, station_id=station.id)
        else:
            raise SimulationError(f"invalid return decision {decision!r}")

    def _return_failed(self, ev, user, context):
        user.runtime.tried_return_stations.add(ev.station_id)
        self.schedule(ev.time, K.USER_DECIDES_RETURN, user.id, context=context)

    def _tries_to_reserve_slot(self, ev, user, record):
        station = self._station(ev.station_id)
        res = self.world.reservations.try_reserve_slot(station, user.id, ev.time)
        record["success"] = res is not None
        if res is None:
            self._return_failed(ev, user, FAILED_SLOT_RESERVATION)
            return
        user.runtime.reservation = res
        record["reservation"] = res.id
        record["expiry"] = res.expiry_time
        self.schedule(ev.time, K.USER_HAS_SLOT_RESERVATION, user.id, station_id=station.id, reservation_id=res.id)

    def _has_slot_reservation(self, ev, user, record):
        res = self._reservation(ev)
        station = self._station(ev.station_id)
        arrival = self._move(user, station.position, CYCLE, ev.time)
        if arrival <= res.expiry_time:
            self.schedule(arrival, K.USER_RETURNS_BIKE, user.id, station_id=station.id, reservation_id=res.id)
        else:
            self.schedule(res.expiry_time, K.SLOT_RESERVATION_TIMEOUT, user.id,
                          station_id=station.id, reservation_id=res.id)

    def _slot_reservation_timeout(self, ev, user, record):
        res = self._reservation(ev)
        if not res.active:
            record["noop"] = True
            return
        expire_reservation(res, self._station(ev.station_id))
        rt = user.runtime
        rt.reservation = None
        rt.position = rt.leg.position_at(ev.time)
        self._return_failed(ev, user, SLOT_RESERVATION_TIMEOUT)

    def _arrives_to_return(self, ev, user, record):
        station = self._station(ev.station_id)
        user.runtime.position = station.position
        ok = station.try_return_bike()
        record["success"] = ok
        if ok:
            self.schedule(ev.time, K.USER_RETURNS_BIKE, user.id, station_id=station.id)
        else:
            self.summary.failed_returns += 1
            user.runtime.failed_return_attempts += 1
            self._return_failed(ev, user, FAILED_RETURN)

    def _returns_bike(self, ev, user, record):
        rt = user.runtime
        station = self._station(ev.station_id)
        if ev.reservation_id is not None:
            res = self._reservation(ev)
            if ev.time > res.expiry_time:
                raise SimulationError(f"reservation {res.id} used after expiry")
            fulfill_reservation(res, station)
            rt.reservation = None
        rt.position = station.position
        rt.has_bike = False
        rt.return_time = ev.time
        rt.state = "walking_home"
        self.summary.successful_returns += 1
        arrival = self._move(user, user.config.destination_place, WALK, ev.time)
        self.schedule(arrival, K.USER_ARRIVES_AT_DESTINATION, user.id)

    def _arrives_at_destination(self, ev, user, record):
        rt = user.runtime
        rt.position = user.config.destination_place
        rt.arrival_time = ev.time
        self.schedule(ev.time, K.USER_LEAVES_SYSTEM, user.id)

    def _leaves_system(self, ev, user, record):
        rt = user.runtime
        if rt.has_bike:
            raise SimulationError(f"user {user.id} tried to leave while holding a bike")
        rt.left = True
        rt.state = "left"
        if rt.take_time is None:
            self.summary.abandoned += 1


# -- construction ---------------------------------------------------------

def initialize(global_config, stations: list[Station], users: list[UserConfig], sink=None,
               header_extra: dict | None = None) -> Simulation:
    """Build the world and seed the queue with one UserAppears per user."""
    seed = global_config.random_seed
    if seed is None:
        seed = secrets.randbits(63)
        log.info("no random seed configured; drew %d", seed)
    rng = random.Random(seed)

    router = ROUTERS[global_config.router](global_config.circuity_walk, global_config.circuity_cycle)
    recommender = None
    if global_config.recommender is not None:
        recommender = make_recommender(global_config.recommender.type_name, global_config.recommender.parameters)

    station_map: dict[int, Station] = {}
    for s in stations:
        if s.id in station_map:
            raise SimulationError(f"duplicate station id {s.id}")
        # The world owns its own copies so callers can reuse the inputs.
        station_map[s.id] = Station(s.id, s.position, s.capacity, *s.snapshot())

    queue = EventQueue()
    user_map: dict[int, User] = {}
    for idx, cfg in enumerate(users):
        uid = cfg.id if cfg.id is not None else idx
        if uid in user_map:
            raise SimulationError(f"duplicate user id {uid}")
        if cfg.time_instant > global_config.total_simulation_time:
            log.warning("user %s appears at t=%s after the simulation time %s; skipped",
                        uid, cfg.time_instant, global_config.total_simulation_time)
            continue
        user = make_user(cfg, uid)
        if user.uses_recommender and recommender is None:
            raise SimulationError(f"user {uid} of type {cfg.user_type} needs a recommendationSystemType")
        user_map[uid] = user
        queue.schedule(cfg.time_instant, K.USER_APPEARS, uid)

    world = World(
        stations=station_map,
        users=user_map,
        reservations=ReservationBook(global_config.reservation_time),
        router=router,
        recommender=recommender,
        rng=rng,
        seed=seed,
        return_retry_wait=global_config.return_retry_wait,
    )
    header = {
        "type": "header",
        "version": __version__,
        "seed": seed,
        "reservationTime": global_config.reservation_time,
        "totalSimulationTime": global_config.total_simulation_time,
        "recommender": None if recommender is None else {
            "typeName": global_config.recommender.type_name,
            "parameters": dict(global_config.recommender.parameters),
        },
        "users": len(user_map),
        "stations": [
            {"id": s.id, "lat": s.position.lat, "lon": s.position.lon, "capacity": s.capacity,
             "state": list(s.snapshot())}
            for s in sorted(station_map.values(), key=lambda s: s.id)
        ],
    }
    if header_extra:
        header.update(header_extra)
    return Simulation(world, queue, sink, header)


def run_simulation(global_config, stations, users, sink=None, header_extra=None) -> RunSummary:
    return initialize(global_config, stations, users, sink, header_extra).run()
