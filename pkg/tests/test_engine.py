import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bikeshare_sim.analysis.history import HistoryWriter, MemoryHistory
from bikeshare_sim.analysis.validate import check_history
from bikeshare_sim.config import RecommenderConfig
from bikeshare_sim.engine import EventKind as K
from bikeshare_sim.engine import EventQueue, SimulationError, initialize, run_simulation
from bikeshare_sim.users import UserConfig

from conftest import at, make_global, station


def run(stations, users, **g):
    sink = MemoryHistory()
    summary = run_simulation(make_global(**g), stations, users, sink)
    return summary, sink


def kinds(sink, user=0):
    return [r["kind"] for r in sink.records if r["user"] == user]


def test_queue_orders_by_time():
    q = EventQueue()
    q.schedule(340, K.USER_APPEARS, 1)
    q.schedule(120, K.USER_APPEARS, 2)
    assert q.pop().time == 120


def test_queue_ties_pop_in_insertion_order():
    q = EventQueue()
    q.schedule(100, K.USER_APPEARS, 1)
    q.schedule(100, K.USER_APPEARS, 2)
    assert [q.pop().user_id, q.pop().user_id] == [1, 2]


def test_queue_example_pops_ascending():
    q = EventQueue()
    for i, t in enumerate([710, 100, 800, 340, 120]):
        q.schedule(t, K.USER_APPEARS, i)
    assert [q.pop().time for _ in range(5)] == [100, 120, 340, 710, 800]


def test_queue_rejects_past():
    q = EventQueue()
    q.schedule(50, K.USER_APPEARS, 1)
    q.pop()
    with pytest.raises(SimulationError):
        q.schedule(10, K.USER_APPEARS, 1)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), max_size=60))
def test_queue_pop_order_non_decreasing(times):
    q = EventQueue()
    for i, t in enumerate(times):
        q.schedule(t, K.USER_APPEARS, i)
    popped = [q.pop() for _ in range(len(times))]
    keys = [(e.time, e.seq) for e in popped]
    assert keys == sorted(keys)


def test_station_events_need_station():
    q = EventQueue()
    with pytest.raises(SimulationError):
        q.schedule(0, K.USER_TAKES_BIKE, 1)


def test_empty_run_terminates():
    summary, sink = run([station(1)], [])
    assert summary.events == 0 and sink.records == []


def test_initialize_schedules_one_appearance_per_user():
    users = [UserConfig("INFORMED", at(10, 0), at(), 100.0), UserConfig("INFORMED", at(), at(), 20.0)]
    sim = initialize(make_global(), [station(1)], users)
    assert len(sim.queue) == 2
    first = sim.queue.pop()
    assert (first.time, first.kind, first.user_id) == (20.0, K.USER_APPEARS, 1)
    ev = sim.queue.pop()
    assert (ev.time, ev.user_id) == (100.0, 0)
    assert sim.world.users[0].runtime.position == at(10, 0)


def test_initialize_skips_late_users(caplog):
    users = [UserConfig("INFORMED", at(), at(), 5000.0)]
    sim = initialize(make_global(total_simulation_time=3600.0), [station(1)], users)
    assert len(sim.queue) == 0
    assert "after the simulation time" in caplog.text


def test_same_seed_same_initial_queue():
    users = [UserConfig("INFORMED", at(), at(), float(t)) for t in (5, 1, 3)]
    a = initialize(make_global(), [station(1)], users)
    b = initialize(make_global(), [station(1)], users)
    assert [a.queue.pop() for _ in range(3)] == [b.queue.pop() for _ in range(3)]


def test_obedient_requires_recommender():
    with pytest.raises(SimulationError):
        initialize(make_global(), [station(1)], [UserConfig("OBEDIENT", at(), at(), 0.0)])


def test_single_uninformed_user_trace():
    # Two stations: one 100 m from the origin (pickup) and one near the destination.
    stations = [station(1, 0, 100, bikes=5), station(2, 1500, 0, bikes=5)]
    summary, sink = run(stations, [UserConfig("UNINFORMED", at(), at(1500, 50), 0.0)])
    assert kinds(sink) == [
        "UserAppears", "UserDecidesRental", "UserArrivesAtStationToRent", "UserTakesBike",
        "UserDecidesReturn", "UserArrivesAtStationToReturn", "UserReturnsBike",
        "UserArrivesAtDestination", "UserLeavesSystem",
    ]
    assert summary.successful_hires == 1 and summary.successful_returns == 1
    by_kind = {r["kind"]: r for r in sink.records}
    assert by_kind["UserArrivesAtStationToRent"]["t"] == pytest.approx(100 / 1.4, rel=1e-3)
    assert by_kind["UserTakesBike"]["state"] == [4, 0, 6, 0]
    assert by_kind["UserReturnsBike"]["state"] == [6, 0, 4, 0]


def test_walk_of_six_hundred_seconds_arrives_at_700():
    walk = 600 * 1.4
    cfg = UserConfig("UNINFORMED", at(), at(), 100.0, max_distance_to_rent_bike=1000)
    _, sink = run([station(55, 0, walk)], [cfg])
    arrive = next(r for r in sink.records if r["kind"] == "UserArrivesAtStationToRent")
    assert arrive["station"] == 55
    assert arrive["t"] == pytest.approx(700.0, abs=1e-6 * walk)


def test_all_reachable_stations_empty_abandons():
    stations = [station(1, 0, 100, bikes=0), station(2, 0, 300, bikes=0)]
    summary, sink = run(stations, [UserConfig("UNINFORMED", at(), at(1000, 0), 0.0)])
    seq = kinds(sink)
    assert seq[-1] == "UserLeavesSystem" and "UserTakesBike" not in seq
    assert seq.count("UserArrivesAtStationToRent") == 2
    assert summary.abandoned == 1 and summary.failed_hires == 2


def reserve_at_distance(metres):
    cfg = UserConfig("INFORMED_R", at(), at(500, 0), 0.0, max_distance_to_rent_bike=3000)
    return run([station(1, 0, metres, bikes=1)], [cfg])[1]


def test_reservation_reached_in_time():
    sink = reserve_at_distance(900 * 1.4)
    take = next(r for r in sink.records if r["kind"] == "UserTakesBike")
    assert take["t"] == pytest.approx(900.0, rel=1e-6)
    assert "BikeReservationTimeout" not in kinds(sink)


def test_reservation_times_out_before_slow_arrival():
    sink = reserve_at_distance(1500 * 1.4)
    timeout = next(r for r in sink.records if r["kind"] == "BikeReservationTimeout")
    assert timeout["t"] == 1200.0
    assert timeout["state"] == [1, 0, 9, 0]
    assert "UserTakesBike" not in kinds(sink)
    # The user resumes from partway along the walk (1200/1500 of the way).
    decide = [r for r in sink.records if r["kind"] == "UserDecidesRental"][-1]
    assert decide["context"] == "bike_reservation_timeout"


def test_timeout_interpolates_position():
    cfg = UserConfig("INFORMED_R", at(), at(500, 0), 0.0, max_distance_to_rent_bike=3000, min_rental_attempts=1)
    sim = initialize(make_global(), [station(1, 0, 2100, bikes=1)], [cfg])
    sim.run()
    pos = sim.world.users[0].runtime.position
    target = at(0, 2100 * 1200 / 1500)
    from bikeshare_sim.geo import great_circle_distance
    assert great_circle_distance(pos, target) < 1.0


def test_slot_reservation_flow():
    stations = [station(1, 0, 50, bikes=5), station(2, 1000, 0, bikes=5)]
    _, sink = run(stations, [UserConfig("INFORMED_R", at(), at(1000, 0), 0.0)])
    assert kinds(sink) == [
        "UserAppears", "UserDecidesRental", "UserTriesToReserveBike", "UserHasBikeReservation",
        "UserTakesBike", "UserDecidesReturn", "UserTriesToReserveSlot", "UserHasSlotReservation",
        "UserReturnsBike", "UserArrivesAtDestination", "UserLeavesSystem",
    ]


def test_intermediate_ride():
    stations = [station(1, 0, 50), station(2, 1000, 0)]
    cfg = UserConfig("INFORMED", at(), at(1000, 0), 0.0, intermediate_position=at(-1000, 0))
    _, sink = run(stations, [cfg])
    seq = kinds(sink)
    assert seq[seq.index("UserTakesBike") + 1] == "UserFinishesRide"
    finish = next(r for r in sink.records if r["kind"] == "UserFinishesRide")
    take = next(r for r in sink.records if r["kind"] == "UserTakesBike")
    assert finish["t"] - take["t"] == pytest.approx(1000 / 6.0, rel=1e-2)


def test_return_retries_after_every_station_failed():
    # User 0 rides A -> B and finds B full. While they ride back, user 1 takes B's
    # bike and (cycling faster) fills A first, so both docks have failed once.
    stations = [station(1, 0, 0, capacity=1, bikes=1), station(2, 1000, 0, capacity=1, bikes=1)]
    users = [UserConfig("UNINFORMED", at(), at(1000, 0), 0.0),
             UserConfig("UNINFORMED", at(1000, 0), at(), 170.0, cycling_velocity=12.0)]
    summary, sink = run(stations, users)
    assert summary.successful_returns == 2 and summary.failed_returns == 2
    waits = [r for r in sink.records if r.get("decision", {}).get("wait")]
    assert len(waits) == 1 and waits[0]["user"] == 0
    ret = next(r for r in sink.records if r["kind"] == "UserReturnsBike" and r["user"] == 0)
    assert ret["station"] == 2
    assert check_history(sink.header, sink.records) == []


def test_unknown_station_decision_is_hard_error(monkeypatch):
    from bikeshare_sim.users import GoToStation, USER_TYPES
    monkeypatch.setattr(USER_TYPES["INFORMED"], "decide_after_appearing", lambda self, w: GoToStation(99))
    with pytest.raises(SimulationError, match="unknown station 99"):
        run([station(1)], [UserConfig("INFORMED", at(), at(), 0.0)])


def test_dispatch_failure_names_event(monkeypatch):
    from bikeshare_sim.users import USER_TYPES

    def boom(self, world):
        raise KeyError("kaboom")

    monkeypatch.setattr(USER_TYPES["INFORMED"], "decide_after_appearing", boom)
    with pytest.raises(SimulationError, match="UserDecidesRental for user 0 at t=0.0"):
        run([station(1)], [UserConfig("INFORMED", at(), at(), 0.0)])


def crowd(seed_users=40):
    import random
    rng = random.Random(1)
    users = [UserConfig(rng.choice(["UNINFORMED", "INFORMED", "OBEDIENT", "UNINFORMED_R", "INFORMED_R",
                                    "OBEDIENT_R"]),
                        at(rng.uniform(-800, 800), rng.uniform(-800, 800)),
                        at(rng.uniform(-2000, 2000), rng.uniform(-2000, 2000)), rng.uniform(0, 3600))
             for _ in range(seed_users)]
    stations = [station(i, (i // 3) * 700 - 700, (i % 3) * 700 - 700, capacity=4, bikes=2) for i in range(9)]
    return stations, users


def test_byte_identical_histories(tmp_path):
    stations, users = crowd()
    g = make_global(recommender=RecommenderConfig("AVAILABLE_RESOURCES"))
    for name in ("a", "b"):
        run_simulation(g, stations, users, HistoryWriter(tmp_path / f"{name}.jsonl"))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_every_user_leaves_and_history_is_valid():
    stations, users = crowd(80)
    sink = MemoryHistory()
    summary = run_simulation(make_global(recommender=RecommenderConfig("AVAILABLE_RESOURCES_RATIO")),
                             stations, users, sink)
    left = {r["user"] for r in sink.records if r["kind"] == "UserLeavesSystem"}
    assert left == set(range(80))
    assert summary.successful_hires == summary.successful_returns
    assert check_history(sink.header, sink.records) == []


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 30), st.integers(0, 4))
def test_random_worlds_keep_all_invariants(seed, n_users, bikes):
    import random
    rng = random.Random(seed)
    types = ["UNINFORMED", "INFORMED", "OBEDIENT", "UNINFORMED_R", "INFORMED_R", "OBEDIENT_R"]
    users = [UserConfig(rng.choice(types), at(rng.uniform(-600, 600), rng.uniform(-600, 600)),
                        at(rng.uniform(-1500, 1500), rng.uniform(-1500, 1500)), rng.uniform(0, 3000),
                        min_rental_attempts=rng.randint(1, 3))
             for _ in range(n_users)]
    stations = [station(i, rng.uniform(-1000, 1000), rng.uniform(-1000, 1000), capacity=3,
                        bikes=min(3, bikes)) for i in range(5)]
    sink = MemoryHistory()
    g = make_global(recommender=RecommenderConfig("AVAILABLE_RESOURCES"), reservation_time=rng.choice([120, 1200]))
    run_simulation(g, stations, users, sink)
    assert check_history(sink.header, sink.records) == []
    times = [r["t"] for r in sink.records]
    assert times == sorted(times)
