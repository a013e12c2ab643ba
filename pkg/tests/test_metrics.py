import pytest

from fctsim.metrics import (ACK_BYTES, ALL_BIN, LARGE_BIN, SHORT_BIN,
                            FctRecord, MetricsError, best_case_fct,
                            nearest_rank_p99, overhead_fraction, summarize)
from fctsim.topology import Link
from fctsim.workload import PACKET_BYTES


def _link(lid=0, cap=1000.0, delay=1e-4, buf=100, src=0, dst=1):
    return Link(lid, src, dst, cap, delay, buf)


def test_p99_nearest_rank():
    vals = list(range(1, 101))          # ranks are the values themselves
    assert nearest_rank_p99([float(v) for v in vals]) == 99.0
    assert nearest_rank_p99([5.0]) == 5.0
    assert nearest_rank_p99([3.0, 1.0, 2.0]) == 3.0       # ceil(2.97) = 3rd
    assert nearest_rank_p99([float(v) for v in range(1, 201)]) == 198.0


def test_p99_empty_rejected():
    with pytest.raises(MetricsError):
        nearest_rank_p99([])


def test_best_case_single_packet():
    link = _link(cap=1000.0, delay=1e-4)
    assert best_case_fct(1, [link]) == pytest.approx(1e-3 + 1e-4)


def test_best_case_within_initial_window():
    # all packets leave back to back; the last arrives after size
    # serializations plus the propagation delay
    link = _link(cap=1000.0, delay=1e-4)
    assert best_case_fct(10, [link], initial_window=12) == pytest.approx(
        10 * 1e-3 + 1e-4)


def test_best_case_two_link_pipeline():
    # equal-rate links: the second hop adds one serialization and its delay
    l1 = _link(0, cap=1000.0, delay=1e-4, dst=1)
    l2 = _link(1, cap=1000.0, delay=2e-4, src=1, dst=2)
    assert best_case_fct(10, [l1, l2], initial_window=12) == pytest.approx(
        10 * 1e-3 + 1e-4 + 1e-3 + 2e-4)


def test_best_case_slower_second_hop_dominates():
    l1 = _link(0, cap=4000.0, delay=1e-4, dst=1)
    l2 = _link(1, cap=1000.0, delay=1e-4, src=1, dst=2)
    got = best_case_fct(10, [l1, l2], initial_window=12)
    # bottleneck serialization of all 10 packets plus first-hop head packet
    assert got == pytest.approx(10 * 1e-3 + 1 / 4000.0 + 2e-4)


def test_best_case_ack_clocked_growth():
    link = _link(cap=1000.0, delay=1e-4)
    size = 200
    got = best_case_fct(size, [link], initial_window=12, max_window=44)
    floor = size * 1e-3 + 1e-4          # capacity bound
    assert got >= floor
    # on a single link the ack clock keeps the pipe full after the first
    # window, so the overhead above the capacity bound is at most one RTT
    rtt = 1e-3 + 1e-4 + ACK_BYTES / (PACKET_BYTES * 1000.0) + 1e-4
    assert got <= floor + rtt
    assert got > best_case_fct(size - 1, [link])


def test_best_case_rejects_empty_flow():
    with pytest.raises(MetricsError):
        best_case_fct(0, [_link()])


def _rec(fid, size, norm):
    return FctRecord(flow_id=fid, size_pkts=size, start_s=0.0, finish_s=norm,
                     fct_s=norm, norm_fct=norm, replicated=False,
                     winner_was_replica=False, src=0, dst=1)


def test_summarize_bins_and_stats():
    records = [_rec(0, 10, 2.0), _rec(1, 68, 4.0), _rec(2, 1000, 3.0)]
    s = summarize(records, threshold_pkts=68, incomplete=2,
                  overhead_fraction=0.04)
    assert s.bins[SHORT_BIN].count == 2
    assert s.bins[SHORT_BIN].mean_norm_fct == pytest.approx(3.0)
    assert s.bins[SHORT_BIN].p99_norm_fct == pytest.approx(4.0)
    assert s.bins[LARGE_BIN].count == 1
    assert s.bins[LARGE_BIN].mean_norm_fct == pytest.approx(3.0)
    assert s.bins[ALL_BIN].count == 3
    assert s.incomplete == 2
    assert s.overhead_fraction == pytest.approx(0.04)


def test_summarize_empty_bin_is_none():
    s = summarize([_rec(0, 10, 2.0)])
    assert s.bins[LARGE_BIN].count == 0
    assert s.bins[LARGE_BIN].mean_norm_fct is None
    with pytest.raises(MetricsError):
        summarize([])


def test_overhead_fraction():
    assert overhead_fraction(0, 1_000_000) == 0.0
    assert overhead_fraction(30_000, 1_000_000) == pytest.approx(0.03)
    assert overhead_fraction(500, 0) == 0.0
