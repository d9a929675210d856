import pytest

from bikeshare_sim.config import GlobalConfig
from bikeshare_sim.fleet import Station
from bikeshare_sim.geo import BoundingBox, GeoPoint, offset_point

ORIGIN = GeoPoint(40.4168, -3.7038)


def at(north_m: float = 0.0, east_m: float = 0.0) -> GeoPoint:
    """Point at a metric offset from a fixed city-centre origin."""
    return offset_point(ORIGIN, north_m, east_m)


def make_global(**overrides) -> GlobalConfig:
    base = dict(
        total_simulation_time=3600.0,
        bounding_box=BoundingBox(at(3000, -3000), at(-3000, 3000)),
        reservation_time=1200.0,
        random_seed=7,
    )
    base.update(overrides)
    return GlobalConfig(**base)


def station(sid, north_m=0.0, east_m=0.0, capacity=10, bikes=5) -> Station:
    return Station.with_bikes(sid, at(north_m, east_m), capacity, bikes)


@pytest.fixture
def global_config():
    return make_global()


# -- acceptance report ------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
