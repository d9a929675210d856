"""Command line entry point: ``bikeshare-sim <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or failed run, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis.history import read_history, HistoryError
from .analysis.metrics import SUMMARY_COLUMNS, compute_report, write_metrics_csv
from .config import (
    ConfigError,
    global_to_json,
    load_and_validate,
    load_global,
    load_stations,
    stations_to_json,
    users_to_json,
    write_json,
)
from .demand import entry_points_to_json, generate_users, load_entry_points, read_trip_log, users_from_trip_log
from .engine import SimulationError
from .scenario import (
    DESIGNED_SIMULATION_TIME,
    BENCHMARK_RATES,
    PROFILES,
    RECOMMENDER_MAX_DISTANCE_M,
    designed_scenario,
    run_experiment,
    run_point,
)

log = logging.getLogger("bikeshare_sim")


def _rates(text: str) -> list[float]:
    try:
        rates = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"rates must be comma-separated numbers, got {text!r}") from None
    if not rates or any(r < 0 for r in rates):
        raise argparse.ArgumentTypeError("rates must be a non-empty list of non-negative numbers")
    return rates


def _profiles(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    unknown = [n for n in names if n not in PROFILES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown profile(s) {unknown}; choose from {list(PROFILES)}")
    return names


def _print_summary(summary) -> None:
    print(f"seed={summary.seed} users={summary.users} hires={summary.successful_hires} "
          f"failed_hires={summary.failed_hires} returns={summary.successful_returns} "
          f"failed_returns={summary.failed_returns} abandoned={summary.abandoned} events={summary.events}")


def cmd_simulate(args) -> int:
    exp = load_and_validate(args.global_path, args.stations, args.users)
    out = Path(args.out or exp.global_config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    summary, header, records = run_experiment(exp, out / "history.jsonl")
    write_metrics_csv(compute_report(header, records), out)
    _print_summary(summary)
    return 0


def cmd_analyze(args) -> int:
    header, records = read_history(args.history)
    summary, stations = write_metrics_csv(compute_report(header, records), args.out)
    print(f"wrote {summary} and {stations}")
    return 0


def cmd_gen_users(args) -> int:
    g = load_global(args.global_path)
    seed = args.seed if args.seed is not None else g.random_seed
    rng = random.Random(seed)
    if args.entry_points:
        users = generate_users(load_entry_points(args.entry_points), g, rng, args.rate_per_hour)
    else:
        if not (args.stations and args.user_type):
            raise ConfigError(["--trip-log needs --stations and --user-type"])
        stations = load_stations(args.stations, g.bounding_box)
        users, skipped = users_from_trip_log(read_trip_log(args.trip_log), stations, rng, args.user_type)
        if skipped:
            log.warning("%d trips skipped (unknown stations)", skipped)
    write_json(users_to_json(users), args.out)
    print(f"wrote {len(users)} users to {args.out}")
    return 0


def cmd_make_scenario(args) -> int:
    g, stations, eps = designed_scenario(args.hours * 3600.0, args.rate_per_hour, args.user_type)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(global_to_json(g), out / "global.json")
    write_json(stations_to_json(stations), out / "stations.json")
    write_json(entry_points_to_json(eps), out / "entry_points.json")
    print(f"wrote global.json, stations.json and entry_points.json to {out}")
    return 0


SWEEP_COLUMNS = ["profile", "seed", "rate_per_hour"] + SUMMARY_COLUMNS


def _sweep_point(task):
    g, stations, eps, profile, rate, seed, history_path, rec_params = task
    res = run_point(g, stations, eps, profile, rate, seed, history_path, recommender_parameters=rec_params)
    return profile, seed, rate, res.report


def cmd_sweep(args) -> int:
    if args.global_path or args.stations or args.entry_points:
        if not (args.global_path and args.stations and args.entry_points):
            raise ConfigError(["--global, --stations and --entry-points must be given together"])
        g = load_global(args.global_path)
        stations = load_stations(args.stations, g.bounding_box)
        eps = load_entry_points(args.entry_points)
    else:
        g, stations, eps = designed_scenario(args.hours * 3600.0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec_params = {"maxDistance": args.max_recommend_distance} if args.max_recommend_distance else {}
    seeds = range(args.seed_start, args.seed_start + args.seeds)
    for rate in args.rates:
        tasks = []
        for profile in args.profiles:
            for seed in seeds:
                path = None
                if args.keep_histories:
                    path = out / f"rate{rate:g}" / f"{profile.replace('/', '_')}_seed{seed}.jsonl"
                tasks.append((g, stations, eps, profile, rate, seed, path, rec_params))
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_sweep_point, tasks))
        else:
            results = [_sweep_point(t) for t in tasks]
        path = out / f"rate_{rate:g}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for profile, seed, r, report in results:
                for row in report.rows:
                    c = row.counters
                    values = [row.user_type, c.n, c.abandoned, row.ds, row.he, row.re, row.tt_min,
                              report.ad, report.aet_min]
                    w.writerow([profile, seed, f"{r:g}"] + ["" if v is None else v for v in values])
        print(f"rate {rate:g}/hr: {len(results)} runs -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bikeshare-sim", description="Discrete-event bike sharing simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation from the three config files")
    s.add_argument("--global", dest="global_path", required=True)
    s.add_argument("--stations", required=True)
    s.add_argument("--users", required=True)
    s.add_argument("--out", help="output directory (default: outputPath from the global config)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("gen-users", help="generate a users config from entry points or a trip log")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--entry-points")
    src.add_argument("--trip-log")
    s.add_argument("--global", dest="global_path", required=True)
    s.add_argument("--stations")
    s.add_argument("--user-type")
    s.add_argument("--rate-per-hour", type=float, help="override every entry point's rate")
    s.add_argument("--seed", type=int, help="generator seed (default: randomSeed from the global config)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_users)

    s = sub.add_parser("analyze", help="recompute metrics CSVs from a stored history")
    s.add_argument("--history", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("make-scenario", help="write the designed benchmark scenario's config files")
    s.add_argument("--out", required=True)
    s.add_argument("--hours", type=float, default=DESIGNED_SIMULATION_TIME / 3600.0)
    s.add_argument("--rate-per-hour", type=float, default=10.0)
    s.add_argument("--user-type", default="INFORMED")
    s.set_defaults(func=cmd_make_scenario)

    s = sub.add_parser("sweep", help="run behaviour profiles across arrival rates and seeds")
    s.add_argument("--rates", type=_rates, default=list(BENCHMARK_RATES))
    s.add_argument("--profiles", type=_profiles, default=list(PROFILES))
    s.add_argument("--seeds", type=int, default=10, help="number of seeds per point")
    s.add_argument("--seed-start", type=int, default=0)
    s.add_argument("--hours", type=float, default=DESIGNED_SIMULATION_TIME / 3600.0,
                   help="simulated hours for the built-in scenario")
    s.add_argument("--global", dest="global_path")
    s.add_argument("--stations")
    s.add_argument("--entry-points")
    s.add_argument("--max-recommend-distance", type=float, default=RECOMMENDER_MAX_DISTANCE_M,
                   help="maxDistance parameter for recommender profiles (0 disables the cap)")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--keep-histories", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    except (SimulationError, HistoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
