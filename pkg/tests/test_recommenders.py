import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bikeshare_sim.fleet import Station
from bikeshare_sim.geo import GreatCircleRouter
from bikeshare_sim.recommenders import (
    AvailableResources,
    AvailableResourcesRatio,
    UnknownRecommenderError,
    make_recommender,
)

from conftest import at


class FakeWorld:
    def __init__(self, stations, router=None):
        self.stations = {s.id: s for s in stations}
        self.router = router or GreatCircleRouter()


def ids(stations):
    return [s.id for s in stations]


def test_avr_orders_by_available_bikes():
    w = FakeWorld([Station.with_bikes(1, at(0, 100), 20, 5), Station.with_bikes(2, at(0, 200), 20, 2),
                   Station.with_bikes(3, at(0, 300), 20, 8)])
    assert ids(AvailableResources().recommend_station_to_rent_bike(at(), w)) == [3, 1, 2]


def test_avr_dist_orders_by_ratio():
    # 4 bikes at 200 m (0.020/m) beats 6 bikes at 600 m (0.010/m).
    w = FakeWorld([Station.with_bikes(1, at(0, 200), 20, 4), Station.with_bikes(2, at(0, -600), 20, 6)])
    assert ids(AvailableResourcesRatio().recommend_station_to_rent_bike(at(), w)) == [1, 2]


def test_empty_stations_yield_empty_list():
    w = FakeWorld([Station.with_bikes(1, at(0, 200), 20, 0), Station.with_bikes(2, at(0, 400), 20, 0)])
    assert AvailableResources().recommend_station_to_rent_bike(at(), w) == []
    assert AvailableResourcesRatio().recommend_station_to_rent_bike(at(), w) == []


def test_avr_return_orders_by_slots():
    w = FakeWorld([Station.with_bikes(1, at(0, 100), 10, 9), Station.with_bikes(2, at(0, 900), 10, 3)])
    assert ids(AvailableResources().recommend_station_to_return_bike(at(), at(), w)) == [2, 1]


def test_avr_dist_return_uses_distance_to_destination():
    dest = at(1000, 1000)
    # A: 4 slots 100 m from the destination (0.04/m); B: 10 slots 500 m away (0.02/m).
    a = Station.with_bikes(1, at(1000, 1100), 20, 16)
    b = Station.with_bikes(2, at(1000, 500), 20, 10)
    w = FakeWorld([b, a])
    assert ids(AvailableResourcesRatio().recommend_station_to_return_bike(at(), dest, w)) == [1, 2]


def test_avr_dist_return_user_distance_option():
    user, dest = at(0, 0), at(1000, 0)
    near_user = Station.with_bikes(1, at(0, 100), 20, 16)  # 4 slots, 100 m from user
    near_dest = Station.with_bikes(2, at(1000, 0), 20, 10)  # 10 slots, 1000 m from user
    w = FakeWorld([near_user, near_dest])
    rec = AvailableResourcesRatio(returnDistance="user")
    assert ids(rec.recommend_station_to_return_bike(user, dest, w)) == [1, 2]
    assert ids(AvailableResourcesRatio().recommend_station_to_return_bike(user, dest, w)) == [2, 1]


def test_single_station_with_slots():
    w = FakeWorld([Station.with_bikes(1, at(), 10, 10), Station.with_bikes(2, at(0, 300), 10, 4)])
    assert ids(AvailableResources().recommend_station_to_return_bike(at(), at(), w)) == [2]


def test_ties_break_by_station_id():
    w = FakeWorld([Station.with_bikes(5, at(0, 100), 20, 7), Station.with_bikes(3, at(0, 900), 20, 7)])
    assert ids(AvailableResources().recommend_station_to_rent_bike(at(), w)) == [3, 5]


def test_colocated_station_floors_distance():
    w = FakeWorld([Station.with_bikes(1, at(), 20, 1), Station.with_bikes(2, at(0, 50), 20, 20)])
    # 1 bike at 0 m is treated as 1 m: ratio 1.0 beats 20/50 = 0.4.
    assert ids(AvailableResourcesRatio().recommend_station_to_rent_bike(at(), w)) == [1, 2]


def test_max_distance_parameter():
    w = FakeWorld([Station.with_bikes(1, at(0, 300), 20, 3), Station.with_bikes(2, at(0, 900), 20, 9)])
    assert ids(AvailableResources(maxDistance=600).recommend_station_to_rent_bike(at(), w)) == [1]
    assert ids(AvailableResources().recommend_station_to_rent_bike(at(), w)) == [2, 1]
    with pytest.raises(ValueError):
        AvailableResources(maxDistance=0)


def test_registry():
    assert isinstance(make_recommender("AVAILABLE_RESOURCES"), AvailableResources)
    assert isinstance(make_recommender("AVAILABLE_RESOURCES_RATIO", {"returnDistance": "user"}),
                      AvailableResourcesRatio)
    with pytest.raises(UnknownRecommenderError):
        make_recommender("NOPE")
    with pytest.raises(TypeError):
        make_recommender("AVAILABLE_RESOURCES", {"bogus": 1})


def _random_world(seed, n):
    rng = random.Random(seed)
    stations = []
    for i in range(n):
        cap = rng.randint(1, 30)
        stations.append(Station.with_bikes(i, at(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000)), cap,
                                           rng.randint(0, cap)))
    return stations


@given(st.integers(0, 10_000), st.integers(1, 25))
def test_lists_never_contain_empty_stations_and_do_not_mutate(seed, n):
    stations = _random_world(seed, n)
    w = FakeWorld(stations)
    before = [s.snapshot() for s in stations]
    for rec in (AvailableResources(), AvailableResourcesRatio()):
        assert all(s.available_bikes > 0 for s in rec.recommend_station_to_rent_bike(at(), w))
        assert all(s.available_slots > 0 for s in rec.recommend_station_to_return_bike(at(), at(500, 500), w))
    assert [s.snapshot() for s in stations] == before


@given(st.integers(0, 10_000), st.integers(1, 25), st.floats(1.0, 3.0))
def test_ordering_invariant_under_distance_rescaling(seed, n, factor):
    stations = _random_world(seed, n)
    plain = FakeWorld(stations, GreatCircleRouter())
    stretched = FakeWorld(stations, GreatCircleRouter(circuity_walk=factor, circuity_cycle=factor))
    p = at(37, -21)
    assert ids(AvailableResources().recommend_station_to_rent_bike(p, plain)) == \
        ids(AvailableResources().recommend_station_to_rent_bike(p, stretched))
    top_plain = AvailableResourcesRatio().recommend_station_to_rent_bike(p, plain)
    top_stretched = AvailableResourcesRatio().recommend_station_to_rent_bike(p, stretched)
    if top_plain:
        # Co-located stations hit the 1 m floor, which does not rescale.
        if all(plain.router.distance(p, s.position, "walk") * 1 >= 1.0 for s in stations):
            assert top_plain[0].id == top_stretched[0].id
