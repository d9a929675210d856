"""System quality metrics computed from a simulation history.

User-side metrics (DS, HE, RE, TT) are reported per user type and for
the whole population; station-side metrics (AD, AET) are shared by all
rows since they describe the stations.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

SUMMARY_COLUMNS = ["user_type", "n", "abandoned", "ds", "he", "re", "tt_min", "ad", "aet_min"]
STATION_COLUMNS = ["station_id", "capacity", "empty_time_s", "empty_time_min", "avg_deviation"]
ALL_USERS = "ALL"


@dataclass
class MetricsCounters:
    n: int = 0
    sh: int = 0
    fh: int = 0
    fh_h: int = 0
    sr: int = 0
    fr: int = 0
    abandoned: int = 0


def compute_ds(c: MetricsCounters) -> float | None:
    return c.sh / c.n if c.n else None


def compute_he(c: MetricsCounters) -> float | None:
    denom = c.sh + c.fh_h
    return c.sh / denom if denom else None


def compute_re(c: MetricsCounters, formula: str = "attempts") -> float | None:
    """Return efficiency.

    ``"attempts"``: returns over return attempts, SR / (SR + FR).
    ``"hires"``: SR / (SH + FR); identical once every hirer has returned.
    """
    if formula == "attempts":
        denom = c.sr + c.fr
    elif formula == "hires":
        denom = c.sh + c.fr
    else:
        raise ValueError(f"unknown RE formula {formula!r}")
    return c.sr / denom if denom else None


def counters_from_history(records: list[dict]) -> dict[str, MetricsCounters]:
    """Raw counters per user type plus an ``ALL`` entry."""
    user_type: dict[int, str] = {}
    failed: dict[int, int] = defaultdict(int)
    hired: set[int] = set()
    per_type: dict[str, MetricsCounters] = defaultdict(MetricsCounters)
    for r in records:
        kind, uid = r["kind"], r["user"]
        if kind == "UserAppears":
            user_type[uid] = r["user_type"]
            per_type[r["user_type"]].n += 1
            continue
        c = per_type[user_type[uid]]
        if kind == "UserArrivesAtStationToRent" and not r["success"]:
            c.fh += 1
            failed[uid] += 1
        elif kind == "UserTakesBike":
            c.sh += 1
            hired.add(uid)
        elif kind == "UserArrivesAtStationToReturn" and not r["success"]:
            c.fr += 1
        elif kind == "UserReturnsBike":
            c.sr += 1
        elif kind == "UserLeavesSystem" and uid not in hired:
            c.abandoned += 1
    for uid in hired:
        per_type[user_type[uid]].fh_h += failed.get(uid, 0)

    total = MetricsCounters()
    for c in per_type.values():
        for name in vars(total):
            setattr(total, name, getattr(total, name) + getattr(c, name))
    out = dict(sorted(per_type.items()))
    if out:
        out[ALL_USERS] = total
    return out


def _station_steps(header: dict, records: list[dict]) -> dict[int, list[tuple[float, int]]]:
    """Per station: (time, availableBikes) change points, starting at t=0."""
    steps = {s["id"]: [(0.0, s["state"][0])] for s in header["stations"]}
    for r in records:
        if "state" in r:
            steps[r["station"]].append((r["t"], r["state"][0]))
    return steps


def _horizon(records: list[dict], horizon: float | None) -> float:
    if horizon is not None:
        return horizon
    return records[-1]["t"] if records else 0.0


def _integrate(steps: list[tuple[float, int]], horizon: float, f) -> float:
    total = 0.0
    for (t0, v), (t1, _) in zip(steps, steps[1:] + [(horizon, None)]):
        t0, t1 = min(t0, horizon), min(t1, horizon)
        if t1 > t0:
            total += f(v) * (t1 - t0)
    return total


def compute_aet(header: dict, records: list[dict], horizon: float | None = None) -> tuple[float, dict[int, float]]:
    """Mean per-station time with no rentable bike, in minutes; per-station seconds."""
    h = _horizon(records, horizon)
    per_station = {
        sid: _integrate(steps, h, lambda v: 1.0 if v == 0 else 0.0)
        for sid, steps in _station_steps(header, records).items()
    }
    if not per_station:
        return 0.0, {}
    return sum(per_station.values()) / len(per_station) / 60.0, per_station


def compute_ad(header: dict, records: list[dict], horizon: float | None = None) -> tuple[float, dict[int, float]]:
    """Mean over stations of the time-weighted |availableBikes - capacity/2|."""
    h = _horizon(records, horizon)
    capacity = {s["id"]: s["capacity"] for s in header["stations"]}
    per_station = {}
    for sid, steps in _station_steps(header, records).items():
        half = capacity[sid] / 2.0
        if h > 0:
            per_station[sid] = _integrate(steps, h, lambda v: abs(v - half)) / h
        else:
            per_station[sid] = abs(steps[-1][1] - half)
    if not per_station:
        return 0.0, {}
    return sum(per_station.values()) / len(per_station), per_station


def compute_tt(records: list[dict]) -> tuple[float | None, dict[int, tuple[float, float, float]]]:
    """Mean total time in minutes over users who hired, and each user's split.

    The split is (appearance to bike pickup, pickup to return, return to
    destination), all in seconds.
    """
    marks: dict[int, dict[str, float]] = defaultdict(dict)
    wanted = {"UserAppears": "appear", "UserTakesBike": "take", "UserReturnsBike": "return",
              "UserArrivesAtDestination": "arrive"}
    for r in records:
        tag = wanted.get(r["kind"])
        if tag is not None:
            marks[r["user"]][tag] = r["t"]
    breakdown = {}
    for uid, m in marks.items():
        if len(m) == 4:
            breakdown[uid] = (m["take"] - m["appear"], m["return"] - m["take"], m["arrive"] - m["return"])
    if not breakdown:
        return None, breakdown
    return sum(sum(v) for v in breakdown.values()) / len(breakdown) / 60.0, breakdown


@dataclass
class TypeMetrics:
    user_type: str
    counters: MetricsCounters
    ds: float | None
    he: float | None
    re: float | None
    tt_min: float | None


@dataclass
class MetricsReport:
    rows: list[TypeMetrics]
    ad: float
    aet_min: float
    station_empty_s: dict[int, float] = field(default_factory=dict)
    station_deviation: dict[int, float] = field(default_factory=dict)
    station_capacity: dict[int, int] = field(default_factory=dict)
    time_breakdown: dict[int, tuple[float, float, float]] = field(default_factory=dict)

    def row(self, user_type: str = ALL_USERS) -> TypeMetrics:
        for r in self.rows:
            if r.user_type == user_type:
                return r
        raise KeyError(user_type)


def compute_report(header: dict, records: list[dict], re_formula: str = "attempts") -> MetricsReport:
    counters = counters_from_history(records)
    user_type = {r["user"]: r["user_type"] for r in records if r["kind"] == "UserAppears"}
    _, breakdown = compute_tt(records)
    rows = []
    for label, c in counters.items():
        splits = [sum(v) for uid, v in breakdown.items() if label == ALL_USERS or user_type[uid] == label]
        tt = sum(splits) / len(splits) / 60.0 if splits else None
        rows.append(TypeMetrics(label, c, compute_ds(c), compute_he(c), compute_re(c, re_formula), tt))
    ad, dev = compute_ad(header, records)
    aet, empty = compute_aet(header, records)
    return MetricsReport(
        rows=rows, ad=ad, aet_min=aet, station_empty_s=empty, station_deviation=dev,
        station_capacity={s["id"]: s["capacity"] for s in header["stations"]},
        time_breakdown=breakdown,
    )


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_metrics_csv(report: MetricsReport, out_dir, prefix: str = "") -> tuple[Path, Path]:
    """Write ``<prefix>metrics.csv`` (summary) and ``<prefix>stations.csv``."""
    out_dir = Path(out_dir)
    summary, stations = out_dir / f"{prefix}metrics.csv", out_dir / f"{prefix}stations.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with summary.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for r in report.rows:
                w.writerow([_fmt(x) for x in (r.user_type, r.counters.n, r.counters.abandoned, r.ds, r.he,
                                              r.re, r.tt_min, report.ad, report.aet_min)])
        with stations.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(STATION_COLUMNS)
            for sid in sorted(report.station_empty_s):
                empty = report.station_empty_s[sid]
                w.writerow([sid, report.station_capacity.get(sid, ""), _fmt(empty), _fmt(empty / 60.0),
                            _fmt(report.station_deviation[sid])])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics to {exc.filename or out_dir}: {exc.strerror}") from exc
    return summary, stations


def read_metrics_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
