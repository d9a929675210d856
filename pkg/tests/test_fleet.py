import pytest
from hypothesis import given
from hypothesis import strategies as st

from bikeshare_sim.fleet import (
    FleetError,
    ReservationBook,
    ReservationKind,
    ReservationState,
    Station,
    expire_reservation,
    fulfill_reservation,
)
from bikeshare_sim.geo import GeoPoint

P = GeoPoint(40.4, -3.7)


def st4(ab, rb, avs, rs):
    return Station(1, P, ab + rb + avs + rs, ab, rb, avs, rs)


def test_rent_success_and_failure():
    s = Station.with_bikes(1, P, 20, 10)
    assert s.try_rent_bike()
    assert s.available_bikes == 9
    assert s.snapshot() == (9, 0, 11, 0)
    empty = Station.with_bikes(2, P, 20, 0)
    assert not empty.try_rent_bike()
    assert empty.snapshot() == (0, 0, 20, 0)


def test_reserved_bikes_are_not_rentable():
    s = st4(0, 3, 7, 0)
    assert not s.try_rent_bike()
    assert s.snapshot() == (0, 3, 7, 0)


def test_return_success_and_failure():
    s = st4(5, 0, 5, 0)
    assert s.try_return_bike()
    assert s.snapshot() == (6, 0, 4, 0)
    full = st4(10, 0, 0, 0)
    assert not full.try_return_bike()
    blocked = st4(8, 0, 0, 2)
    assert not blocked.try_return_bike()
    assert blocked.snapshot() == (8, 0, 0, 2)


def test_reserve_bike():
    book = ReservationBook(1200)
    s = st4(1, 0, 9, 0)
    res = book.try_reserve_bike(s, user_id=4, now=0)
    assert res is not None
    assert (s.available_bikes, s.reserved_bikes) == (0, 1)
    assert res.expiry_time == 1200
    assert res.kind is ReservationKind.BIKE and res.active
    assert book.try_reserve_bike(s, 5, 10) is None


def test_reserve_slot():
    book = ReservationBook(1200)
    s = st4(9, 0, 1, 0)
    res = book.try_reserve_slot(s, 3, 50)
    assert res is not None and res.expiry_time == 1250
    assert s.snapshot() == (9, 0, 0, 1)
    assert sum(s.snapshot()) == s.capacity
    assert book.try_reserve_slot(s, 4, 60) is None


def test_fulfill_bike_reservation():
    book = ReservationBook(1200)
    s = st4(4, 0, 6, 0)
    res = book.try_reserve_bike(s, 1, 0)
    assert s.snapshot() == (3, 1, 6, 0)
    fulfill_reservation(res, s)
    assert s.snapshot() == (3, 0, 7, 0)
    assert res.state is ReservationState.FULFILLED


def test_fulfill_slot_reservation():
    book = ReservationBook(1200)
    s = st4(3, 0, 7, 0)
    res = book.try_reserve_slot(s, 1, 0)
    assert s.snapshot() == (3, 0, 6, 1)
    fulfill_reservation(res, s)
    assert s.snapshot() == (4, 0, 6, 0)


def test_expire_bike_reservation():
    book = ReservationBook(1200)
    s = st4(1, 0, 9, 0)
    res = book.try_reserve_bike(s, 1, 0)
    assert s.snapshot() == (0, 1, 9, 0)
    expire_reservation(res, s)
    assert s.snapshot() == (1, 0, 9, 0)
    assert res.state is ReservationState.EXPIRED
    with pytest.raises(FleetError):
        fulfill_reservation(res, s)


def test_expire_slot_reservation():
    book = ReservationBook(1200)
    s = st4(9, 0, 1, 0)
    res = book.try_reserve_slot(s, 1, 0)
    expire_reservation(res, s)
    assert s.snapshot() == (9, 0, 1, 0)
    with pytest.raises(FleetError):
        expire_reservation(res, s)


def test_reservation_on_wrong_station_rejected():
    book = ReservationBook(1200)
    a, b = st4(2, 0, 8, 0), Station(2, P, 10, 2, 0, 8, 0)
    res = book.try_reserve_bike(a, 1, 0)
    with pytest.raises(FleetError):
        fulfill_reservation(res, b)


def test_initial_bikes_bounds():
    with pytest.raises(ValueError):
        Station.with_bikes(1, P, 20, 25)
    with pytest.raises(ValueError):
        Station.with_bikes(1, P, 0, 0)


ops = st.lists(st.sampled_from(["rent", "return", "rb", "rs", "fulfill", "expire"]), max_size=200)


@given(st.integers(1, 30), st.data(), ops)
def test_capacity_identity_under_random_operations(capacity, data, sequence):
    bikes = data.draw(st.integers(0, capacity))
    s = Station.with_bikes(1, P, capacity, bikes)
    book = ReservationBook(1200)
    active = []
    docked_plus_out = s.docked_bikes
    out = 0
    for i, op in enumerate(sequence):
        if op == "rent" and s.try_rent_bike():
            out += 1
        elif op == "return" and out and s.try_return_bike():
            out -= 1
        elif op == "rb":
            r = book.try_reserve_bike(s, i, i)
            if r:
                active.append(r)
        elif op == "rs" and out:
            r = book.try_reserve_slot(s, i, i)
            if r:
                active.append(r)
        elif op in ("fulfill", "expire") and active:
            r = active.pop(0)
            if op == "fulfill":
                fulfill_reservation(r, s)
                out += 1 if r.kind is ReservationKind.BIKE else -1
            else:
                expire_reservation(r, s)
        assert sum(s.snapshot()) == capacity
        assert min(s.snapshot()) >= 0
        assert s.docked_bikes + out == docked_plus_out
