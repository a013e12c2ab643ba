"""Normalized FCT records, size-binned aggregation, and overhead accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .topology import Link
from .workload import PACKET_BYTES

ACK_BYTES = 40

SHORT_BIN = "(0,100KB]"
LARGE_BIN = "(100KB,inf)"
ALL_BIN = "all"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class FctRecord:
    flow_id: int
    size_pkts: int
    start_s: float
    finish_s: float
    fct_s: float
    norm_fct: float
    replicated: bool
    winner_was_replica: bool
    src: int
    dst: int


@dataclass(frozen=True)
class BinStats:
    count: int
    mean_norm_fct: float | None
    p99_norm_fct: float | None


@dataclass(frozen=True)
class FctSummary:
    bins: dict[str, BinStats]
    incomplete: int
    overhead_fraction: float


def nearest_rank_p99(values: list[float]) -> float:
    """99th percentile by nearest rank: the ceil(0.99*n)-th order statistic."""
    if not values:
        raise MetricsError("empty value set")
    ordered = sorted(values)
    rank = math.ceil(0.99 * len(ordered))
    return ordered[rank - 1]


def _path_signature(path: list[Link]) -> tuple:
    return tuple((l.capacity_pps, l.delay_s) for l in path)


@lru_cache(maxsize=100_000)
def _best_case(size: int, sig: tuple, initial_window: int, max_window: int) -> float:
    """Exact completion time of a lone ack-clocked slow-start transfer.

    Models each link as a FIFO server at its own rate, per-packet acks on
    the reverse links, window growth of one packet per ack up to the cap.
    Returns the time from first transmission to delivery of the last
    packet at the receiver.
    """
    n_links = len(sig)
    tx = [1.0 / cap for cap, _ in sig]                       # data serialization
    tx_ack = [ACK_BYTES / (PACKET_BYTES * cap) for cap, _ in sig]
    delays = [d for _, d in sig]

    send = {}
    w0 = min(initial_window, size)
    for j in range(1, w0 + 1):
        send[j] = 0.0
    dep = [0.0] * n_links       # last departure time per forward link
    dep_ack = [0.0] * n_links   # same, reverse direction
    cwnd = initial_window
    next_seq = w0 + 1
    finish = 0.0
    for j in range(1, size + 1):
        t = send.pop(j)
        for i in range(n_links):
            t = max(t, dep[i]) + tx[i]
            dep[i] = t
            t += delays[i]
        if j == size:
            finish = t
            break
        for i in range(n_links):
            t = max(t, dep_ack[i]) + tx_ack[i]
            dep_ack[i] = t
            t += delays[i]
        if cwnd < max_window:
            cwnd += 1
        while next_seq <= size and next_seq - j <= cwnd:
            send[next_seq] = t
            next_seq += 1
    return finish


def best_case_fct(size: int, path: list[Link], initial_window: int = 12,
                  max_window: int = 44) -> float:
    """Best possible completion time of `size` packets over `path` on an
    otherwise empty network; the normalizer for FCT."""
    if size < 1:
        raise MetricsError("size must be >= 1 packet")
    return _best_case(size, _path_signature(path), initial_window, max_window)


def summarize(records: list[FctRecord], threshold_pkts: int = 68,
              incomplete: int = 0, overhead_fraction: float = 0.0) -> FctSummary:
    """Mean and nearest-rank p99 of normalized FCT per size bin."""
    if not records:
        raise MetricsError("no completed flows to summarize")
    groups = {
        SHORT_BIN: [r.norm_fct for r in records if r.size_pkts <= threshold_pkts],
        LARGE_BIN: [r.norm_fct for r in records if r.size_pkts > threshold_pkts],
        ALL_BIN: [r.norm_fct for r in records],
    }
    bins = {}
    for name, vals in groups.items():
        if vals:
            bins[name] = BinStats(len(vals), sum(vals) / len(vals), nearest_rank_p99(vals))
        else:
            bins[name] = BinStats(0, None, None)
    return FctSummary(bins=bins, incomplete=incomplete,
                      overhead_fraction=overhead_fraction)


def overhead_fraction(replica_bytes_sent: int, logical_bytes: int) -> float:
    """Extra bytes injected by replica flows relative to the workload's
    own bytes.  Zero when replication is off."""
    if logical_bytes <= 0:
        return 0.0
    return replica_bytes_sent / logical_bytes
