"""Simulation history files and the quality metrics computed from them."""

from .history import HistoryError, HistoryWriter, MemoryHistory, read_history
from .metrics import (
    MetricsCounters,
    MetricsReport,
    compute_ad,
    compute_aet,
    compute_ds,
    compute_he,
    compute_re,
    compute_report,
    compute_tt,
    counters_from_history,
    write_metrics_csv,
)

__all__ = [
    "HistoryError", "HistoryWriter", "MemoryHistory", "read_history",
    "MetricsCounters", "MetricsReport", "compute_ad", "compute_aet", "compute_ds", "compute_he",
    "compute_re", "compute_report", "compute_tt", "counters_from_history", "write_metrics_csv",
]
