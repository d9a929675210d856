"""Designed benchmark scenario and demand-rate sweeps.

The designed scenario is a 3 km square with 20 stations (capacity 20,
10 bikes each) and five entry points (200 m appearance radius,
destinations anywhere in the square). A sweep runs every behaviour
profile at every arrival rate for a set of seeds; for a given seed all
profiles see the same generated demand.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis.history import HistoryWriter, MemoryHistory
from .analysis.metrics import MetricsReport, compute_report
from .config import Experiment, GlobalConfig, RecommenderConfig
from .demand import EntryPoint, generate_users
from .engine import RunSummary, run_simulation
from .fleet import Station
from .geo import BoundingBox, GeoPoint, offset_point

BENCHMARK_RATES = (10, 20, 40, 60, 80, 120, 150)

# name -> (user type, recommender type name)
PROFILES = {
    "Uninformed": ("UNINFORMED", None),
    "Informed": ("INFORMED", None),
    "Uninformed-R": ("UNINFORMED_R", None),
    "Informed-R": ("INFORMED_R", None),
    "Obedient-AvR": ("OBEDIENT", "AVAILABLE_RESOURCES"),
    "Obedient-AvR/Dist": ("OBEDIENT", "AVAILABLE_RESOURCES_RATIO"),
    "Obedient-AvR-R": ("OBEDIENT_R", "AVAILABLE_RESOURCES"),
}

CENTER = GeoPoint(40.4168, -3.7038)
HALF_SIDE_M = 1500.0
LAYOUT_SEED = 20190601
DESIGNED_SIMULATION_TIME = 4 * 3600.0
# Recommender profiles only consider stations within walking range. Without
# the cap AvR sends riders back to the dock they just emptied by one bike.
RECOMMENDER_MAX_DISTANCE_M = 600.0


def designed_scenario(total_simulation_time: float = DESIGNED_SIMULATION_TIME, rate_per_hour: float = 10.0,
                      user_type: str = "INFORMED") -> tuple[GlobalConfig, list[Station], list[EntryPoint]]:
    bbox = BoundingBox(
        offset_point(CENTER, HALF_SIDE_M, -HALF_SIDE_M),
        offset_point(CENTER, -HALF_SIDE_M, HALF_SIDE_M),
    )
    g = GlobalConfig(total_simulation_time=total_simulation_time, bounding_box=bbox, reservation_time=1200.0)

    layout = random.Random(LAYOUT_SEED)
    stations = []
    for row, north in enumerate((-1050.0, -350.0, 350.0, 1050.0)):
        for col, east in enumerate((-1200.0, -600.0, 0.0, 600.0, 1200.0)):
            pos = offset_point(CENTER, north + layout.uniform(-120, 120), east + layout.uniform(-120, 120))
            stations.append(Station.with_bikes(row * 5 + col, pos, 20, 10))

    params = {"walkingVelocity": 1.4, "cyclingVelocity": 6.0,
              "minRentalAttempts": 2, "maxDistanceToRentBike": 600.0}
    entry_points = [
        EntryPoint(offset_point(CENTER, north, east), 200.0, rate_per_hour, user_type, dict(params))
        for north, east in ((0.0, 0.0), (800.0, -850.0), (800.0, 850.0), (-800.0, -850.0), (-800.0, 850.0))
    ]
    return g, stations, entry_points


def profile_experiment(g: GlobalConfig, stations: list[Station], entry_points: list[EntryPoint], profile: str,
                       rate_per_hour: float | None, seed: int, recommender_parameters: dict | None = None) -> Experiment:
    user_type, recommender = PROFILES[profile]
    if recommender is not None:
        g = replace(g, recommender=RecommenderConfig(recommender, dict(recommender_parameters or {})))
    g = replace(g, random_seed=seed)
    eps = [replace(ep, user_type=user_type) for ep in entry_points]
    users = generate_users(eps, g, random.Random(seed), rate_per_hour)
    return Experiment(g, stations, users)


@dataclass
class PointResult:
    profile: str
    rate: float | None
    seed: int
    summary: RunSummary
    report: MetricsReport
    header: dict
    records: list[dict] | None


def run_experiment(exp: Experiment, history_path=None, keep_records: bool = True):
    extra = {"digests": exp.digests()}
    if history_path is not None:
        sink = HistoryWriter(history_path, keep=keep_records)
    else:
        sink = MemoryHistory()
    summary = run_simulation(exp.global_config, exp.stations, exp.users, sink, header_extra=extra)
    return summary, sink.header, sink.records


def run_point(g, stations, entry_points, profile: str, rate: float | None, seed: int,
              history_path=None, keep_records: bool = False, recommender_parameters: dict | None = None) -> PointResult:
    exp = profile_experiment(g, stations, entry_points, profile, rate, seed, recommender_parameters)
    summary, header, records = run_experiment(exp, history_path, keep_records=True)
    report = compute_report(header, records)
    return PointResult(profile, rate, seed, summary, report, header, records if keep_records else None)


def sweep(g, stations, entry_points, profiles=tuple(PROFILES), rates=BENCHMARK_RATES, seeds=range(10),
          history_dir=None, keep_records: bool = False, recommender_parameters: dict | None = None):
    """Yield a PointResult for every (rate, profile, seed) combination."""
    for rate in rates:
        for profile in profiles:
            for seed in seeds:
                path = None
                if history_dir is not None:
                    slug = profile.replace("/", "_")
                    path = Path(history_dir) / f"rate{rate:g}" / f"{slug}_seed{seed}.jsonl"
                yield run_point(g, stations, entry_points, profile, rate, seed, path, keep_records,
                                recommender_parameters)
