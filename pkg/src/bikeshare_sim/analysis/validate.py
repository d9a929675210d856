"""Consistency checks over a recorded history.

Each check returns a list of human-readable violations; an empty list
means the history passed.
"""

from __future__ import annotations

from collections import defaultdict

from ..engine import LIFE_CYCLE, EventKind

RESERVING_TYPES = frozenset({"UNINFORMED_R", "INFORMED_R", "OBEDIENT_R"})

_BIKE_OUT = {("UserArrivesAtStationToRent", True), ("UserTakesBike", "reserved")}
_BIKE_IN = {("UserArrivesAtStationToReturn", True), ("UserReturnsBike", "reserved")}


def _flow_key(r: dict):
    if r["kind"] in ("UserTakesBike", "UserReturnsBike"):
        return (r["kind"], "reserved" if "reservation" in r else None)
    return (r["kind"], r.get("success"))


def check_conservation(header: dict, records: list[dict]) -> list[str]:
    """Capacity identity per station, and docked + in-use bikes = initial total."""
    problems = []
    capacity = {s["id"]: s["capacity"] for s in header["stations"]}
    docked = {s["id"]: s["state"][0] + s["state"][1] for s in header["stations"]}
    total = sum(docked.values())
    in_use = 0
    for r in records:
        key = _flow_key(r)
        if key in _BIKE_OUT:
            in_use += 1
        elif key in _BIKE_IN:
            in_use -= 1
        if "state" in r:
            state = r["state"]
            if min(state) < 0 or sum(state) != capacity[r["station"]]:
                problems.append(f"seq {r['seq']}: station {r['station']} state {state} breaks capacity identity")
            docked[r["station"]] = state[0] + state[1]
        if sum(docked.values()) + in_use != total:
            problems.append(f"seq {r['seq']}: {sum(docked.values())} docked + {in_use} in use != {total}")
    return problems


def validate_life_cycles(records: list[dict]) -> list[str]:
    """Every user follows a legal path from UserAppears to UserLeavesSystem."""
    problems = []
    paths: dict[int, list[dict]] = defaultdict(list)
    for r in records:
        paths[r["user"]].append(r)
    for uid, path in paths.items():
        if path[0]["kind"] != EventKind.USER_APPEARS.value:
            problems.append(f"user {uid}: path starts with {path[0]['kind']}")
        if path[-1]["kind"] != EventKind.USER_LEAVES_SYSTEM.value:
            problems.append(f"user {uid}: path ends with {path[-1]['kind']}")
        holding = False
        for prev, cur in zip(path, path[1:]):
            if EventKind(cur["kind"]) not in LIFE_CYCLE[EventKind(prev["kind"])]:
                problems.append(f"user {uid}: illegal transition {prev['kind']} -> {cur['kind']}")
            if cur["t"] < prev["t"]:
                problems.append(f"user {uid}: time goes backwards at seq {cur['seq']}")
        for r in path:
            if r["kind"] == "UserTakesBike":
                holding = True
            elif r["kind"] == "UserReturnsBike":
                holding = False
            elif r["kind"] == "UserLeavesSystem" and holding:
                problems.append(f"user {uid}: left the system holding a bike")
    return problems


def check_reservations(header: dict, records: list[dict]) -> list[str]:
    """Reservations are used before expiry, time out exactly on schedule, and end once."""
    problems = []
    hold = header["reservationTime"]
    created: dict[int, float] = {}
    ended: dict[int, str] = {}
    for r in records:
        kind = r["kind"]
        if kind in ("UserTriesToReserveBike", "UserTriesToReserveSlot") and r["success"]:
            created[r["reservation"]] = r["t"]
            if r["expiry"] != r["t"] + hold:
                problems.append(f"reservation {r['reservation']}: expiry {r['expiry']} != {r['t']} + {hold}")
            continue
        rid = r.get("reservation")
        if rid is None:
            continue
        if kind in ("UserTakesBike", "UserReturnsBike", "BikeReservationTimeout", "SlotReservationTimeout"):
            if rid not in created:
                problems.append(f"reservation {rid}: {kind} before creation")
                continue
            if rid in ended:
                problems.append(f"reservation {rid}: {kind} after it already ended ({ended[rid]})")
            ended[rid] = kind
            if kind.endswith("Timeout") and r["t"] != created[rid] + hold:
                problems.append(f"reservation {rid}: timeout at {r['t']}, expected {created[rid] + hold}")
            if not kind.endswith("Timeout") and r["t"] > created[rid] + hold:
                problems.append(f"reservation {rid}: fulfilled at {r['t']} after expiry {created[rid] + hold}")
    for rid in created:
        if rid not in ended:
            problems.append(f"reservation {rid}: never fulfilled nor expired")
    return problems


def check_reserving_users(records: list[dict]) -> list[str]:
    """Reserving user types only take or return bikes through a reservation."""
    problems = []
    user_type = {}
    for r in records:
        if r["kind"] == "UserAppears":
            user_type[r["user"]] = r["user_type"]
        elif user_type.get(r["user"]) in RESERVING_TYPES:
            if r["kind"] in ("UserTakesBike", "UserReturnsBike") and "reservation" not in r:
                problems.append(f"user {r['user']}: {r['kind']} at seq {r['seq']} without a reservation")
            if r["kind"] in ("UserArrivesAtStationToRent", "UserArrivesAtStationToReturn"):
                problems.append(f"user {r['user']}: walk-up {r['kind']} at seq {r['seq']}")
    return problems


def check_informed_decisions(records: list[dict]) -> list[str]:
    """Informed users never head for a station that had no bike (or slot) when they chose it."""
    problems = []
    user_type = {}
    for r in records:
        if r["kind"] == "UserAppears":
            user_type[r["user"]] = r["user_type"]
            continue
        if user_type.get(r["user"]) not in ("INFORMED", "INFORMED_R"):
            continue
        decision = r.get("decision")
        if not decision or "state" not in decision:
            continue
        if r["kind"] == "UserDecidesRental" and decision["state"][0] == 0:
            problems.append(f"user {r['user']}: chose station {decision['station']} with no bikes (seq {r['seq']})")
    return problems


def check_history(header: dict, records: list[dict]) -> list[str]:
    problems = []
    last = None
    for r in records:
        key = (r["t"], r["seq"])
        if last is not None and key <= last:
            problems.append(f"seq {r['seq']}: records out of (time, seq) order")
        last = key
    return (problems + check_conservation(header, records) + validate_life_cycles(records)
            + check_reservations(header, records) + check_reserving_users(records)
            + check_informed_decisions(records))
