"""Deterministic packet-level discrete-event simulation.

One run is strictly single threaded.  The event queue is ordered by
(timestamp, insertion sequence), so simultaneous events resolve in a
fixed order and a (config, seed) pair always produces byte-identical
results.

The transport is deliberately simple: ack-clocked slow start (window +1
per ack) up to a fixed maximum window, go-back-N recovery driven purely
by a retransmission timeout, per-packet acks that traverse the reverse
path, and an optional ECN/alpha window reduction for the dctcp_like
protocol.  Short flows may be replicated once over an independently
hashed path; the first finisher stamps the logical record and the
laggard runs to completion (its bytes count as overhead).
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field, replace
from collections import deque

from . import metrics, workload
from .topology import (FiveTuple, Link, LinkParams, Topology, build_fat_tree,
                       build_toy_pod)
from .workload import PACKET_BYTES, TrafficSpec, host_stream, resolve_workload

ACK_BYTES = 40

# event kinds
_GEN, _TXDONE, _RECV, _RTO = 0, 1, 2, 3

PROTOCOLS = ("tcp", "dctcp_like")
REPLICATION_MODES = ("off", "short_flows")

DCTCP_GAIN = 1.0 / 16.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str = "fat_tree"          # fat_tree | toy
    pods: int = 4
    link_mbps: float = 100.0
    link_delay_us: float = 10.0
    buffer_pkts: int = 100
    workload: str = "web_search"
    load: float = 0.5
    protocol: str = "tcp"
    replication: str = "off"
    short_flow_threshold: int = 68
    initial_window: int = 12
    max_window: int = 44
    ecn_threshold: int | None = None    # derived: 5% of buffer
    duration: float = 0.5
    seed: int = 1
    min_rto_s: float = 0.05
    rto_rtt_mult: float = 4.0
    max_drain_s: float = 30.0
    # toy preset traffic: fixed-size short flows 0 -> 2, optional
    # persistent large flow 1 -> 3
    toy_large_flow: bool = True
    toy_short_size: int = 10
    toy_short_rate: float = 30.0
    toy_host_mult: float = 4.0          # host links faster than fabric links

    def __post_init__(self):
        if self.topology not in ("fat_tree", "toy"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.replication not in REPLICATION_MODES:
            raise ConfigError(f"unknown replication mode {self.replication!r}")
        if self.initial_window > self.max_window:
            raise ConfigError("initial_window must be <= max_window")
        if self.initial_window < 1:
            raise ConfigError("initial_window must be >= 1")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")
        if self.buffer_pkts < 1:
            raise ConfigError("buffer must hold at least one packet")
        if self.ecn_mark_threshold >= self.buffer_pkts:
            raise ConfigError("ecn_threshold must be below the buffer size")

    @property
    def capacity_pps(self) -> float:
        return self.link_mbps * 1e6 / (8.0 * PACKET_BYTES)

    @property
    def ecn_mark_threshold(self) -> int:
        if self.ecn_threshold is not None:
            return self.ecn_threshold
        return max(1, round(0.05 * self.buffer_pkts))

    def link_params(self) -> LinkParams:
        return LinkParams(capacity_pps=self.capacity_pps,
                          delay_s=self.link_delay_us * 1e-6,
                          buffer_pkts=self.buffer_pkts)

    def build_topology(self) -> Topology:
        if self.topology == "toy":
            lp = self.link_params()
            hp = LinkParams(capacity_pps=lp.capacity_pps * self.toy_host_mult,
                            delay_s=lp.delay_s,
                            buffer_pkts=max(lp.buffer_pkts, 100))
            return build_toy_pod(lp, host_params=hp, seed=self.seed)
        return build_fat_tree(self.pods, self.link_params(), seed=self.seed)


def toy_fig3_config(**overrides) -> ScenarioConfig:
    """The regression scenario: 2 equal-cost paths, one persistent large
    flow, and a stream of 10-packet short flows whose original copies are
    deliberately hashed onto the large flow's path (a pinned ECMP
    collision).  Host links are faster than the fabric links, so the
    contention sits at the shared fabric hop; replicas hash freely and
    give short flows an escape route."""
    base = dict(topology="toy", link_mbps=50.0, link_delay_us=100.0,
                buffer_pkts=25, duration=2.0, max_drain_s=1.0,
                min_rto_s=0.03, toy_short_rate=30.0)
    base.update(overrides)
    return ScenarioConfig(**base)


class _LinkState:
    __slots__ = ("link", "tx_data", "tx_ack", "delay", "buffer", "q", "occ",
                 "drops", "ecn_on", "ecn_thresh", "busy_until")

    def __init__(self, link: Link, ecn_on: bool, ecn_thresh: int):
        self.link = link
        self.tx_data = 1.0 / link.capacity_pps
        self.tx_ack = ACK_BYTES / (PACKET_BYTES * link.capacity_pps)
        self.delay = link.delay_s
        self.buffer = link.buffer_pkts
        self.q: deque = deque()
        self.occ = 0
        self.drops = 0
        self.ecn_on = ecn_on
        self.ecn_thresh = ecn_thresh


class _Packet:
    __slots__ = ("flow", "seq", "is_ack", "marked", "hop")

    def __init__(self, flow, seq, is_ack, marked):
        self.flow = flow
        self.seq = seq
        self.is_ack = is_ack
        self.marked = marked
        self.hop = 0


class _Flow:
    __slots__ = ("id", "logical", "is_replica", "tup", "size", "path", "rpath",
                 "next_seq", "max_sent", "acked", "cwnd", "recv_next",
                 "recv_buf", "start",
                 "sender_done", "sent_data", "retransmitted", "timer_gen",
                 "rto", "dctcp", "alpha", "acked_in_win", "marked_in_win",
                 "win_size")

    def __init__(self, fid, logical, is_replica, tup, size, path, rpath,
                 iw, rto, dctcp):
        self.id = fid
        self.logical = logical
        self.is_replica = is_replica
        self.tup = tup
        self.size = size
        self.path = path
        self.rpath = rpath
        self.next_seq = 1
        self.max_sent = 0
        self.acked = 0
        self.cwnd = float(iw)
        self.recv_next = 1
        self.recv_buf: set = set()
        self.start = 0.0
        self.sender_done = False
        self.sent_data = 0
        self.retransmitted = 0
        self.timer_gen = 0
        self.rto = rto
        self.dctcp = dctcp
        self.alpha = 0.0
        self.acked_in_win = 0
        self.marked_in_win = 0
        self.win_size = iw

    @property
    def delivered(self) -> bool:
        return self.recv_next > self.size


class _Logical:
    __slots__ = ("id", "size", "start", "finish", "winner_was_replica",
                 "replicated", "orig", "replica", "src", "dst")

    def __init__(self, lid, size, start, src, dst):
        self.id = lid
        self.size = size
        self.start = start
        self.finish = None
        self.winner_was_replica = False
        self.replicated = False
        self.orig = None
        self.replica = None
        self.src = src
        self.dst = dst


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[metrics.FctRecord]
    incomplete: int
    summary: metrics.FctSummary
    data_injected: int = 0
    data_delivered: int = 0
    data_dropped: int = 0
    ack_dropped: int = 0
    retransmitted: int = 0
    replica_bytes_sent: int = 0
    logical_bytes: int = 0
    trace_hash: str = ""
    end_time: float = 0.0

    @property
    def drained(self) -> bool:
        return self.incomplete == 0


class Simulation:
    """One deterministic run of a scenario."""

    def __init__(self, config: ScenarioConfig, topo: Topology | None = None):
        self.cfg = config
        self.topo = topo if topo is not None else config.build_topology()
        ecn_on = config.protocol == "dctcp_like"
        self.links = [_LinkState(l, ecn_on, config.ecn_mark_threshold)
                      for l in self.topo.links]
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._flows: list[_Flow] = []
        self._logicals: list[_Logical] = []
        self._active = 0          # flows whose receiver has not seen all data
        self._next_flow_id = 0
        self.data_injected = 0
        self.data_delivered = 0
        self.data_dropped = 0
        self.ack_dropped = 0
        self._hash = hashlib.sha256()

    # -- scheduling --------------------------------------------------------

    def _push(self, t, kind, a=None, b=None):
        heapq.heappush(self._heap, (t, self._seq, kind, a, b))
        self._seq += 1

    # -- flow setup --------------------------------------------------------

    def _base_rtt(self, path, rpath) -> float:
        fwd = sum(ls.tx_data + ls.delay for ls in path)
        rev = sum(ls.tx_ack + ls.delay for ls in rpath)
        return fwd + rev

    def _make_flow(self, logical, tup, size, is_replica) -> _Flow:
        path = [self.links[l.id] for l in self.topo.ecmp_route(tup)]
        rpath = [self.links[l.id] for l in self.topo.ecmp_route(tup.reversed())]
        rto = max(self.cfg.min_rto_s,
                  self.cfg.rto_rtt_mult * self._base_rtt(path, rpath))
        f = _Flow(self._next_flow_id, logical, is_replica, tup, size, path,
                  rpath, min(self.cfg.initial_window, self.cfg.max_window),
                  rto, self.cfg.protocol == "dctcp_like")
        self._next_flow_id += 1
        f.start = self.now
        self._flows.append(f)
        self._active += 1
        return f

    def _start_flow(self, src, dst, size, src_port, dst_port=443):
        logical = _Logical(len(self._logicals), size, self.now, src, dst)
        self._logicals.append(logical)
        tup = FiveTuple(src, dst, src_port, dst_port)
        logical.orig = self._make_flow(logical, tup, size, False)
        if (self.cfg.replication == "short_flows"
                and size <= self.cfg.short_flow_threshold):
            # same transfer, distinct five-tuple: only dst_port differs
            logical.replicated = True
            rep_tup = replace(tup, dst_port=dst_port + 1)
            logical.replica = self._make_flow(logical, rep_tup, size, True)
        for f in (logical.orig, logical.replica):
            if f is not None:
                self._send_window(f)
                self._arm_timer(f)
        return logical

    # -- transport ---------------------------------------------------------

    def _send_window(self, f: _Flow):
        limit = int(f.cwnd)
        while f.next_seq <= f.size and f.next_seq - f.acked <= limit:
            pkt = _Packet(f, f.next_seq, False, False)
            if f.next_seq <= f.max_sent:
                f.retransmitted += 1
            else:
                f.max_sent = f.next_seq
            f.next_seq += 1
            f.sent_data += 1
            self.data_injected += 1
            self._enqueue(f.path[0], pkt)

    def _arm_timer(self, f: _Flow):
        f.timer_gen += 1
        self._push(self.now + f.rto, _RTO, f, f.timer_gen)

    def _on_rto(self, f: _Flow, gen: int):
        if gen != f.timer_gen or f.sender_done:
            return
        # go-back-N: rewind to the first unacked packet, reset the window
        f.next_seq = f.acked + 1
        f.cwnd = float(min(self.cfg.initial_window, self.cfg.max_window))
        f.acked_in_win = 0
        f.marked_in_win = 0
        f.win_size = int(f.cwnd)
        self._send_window(f)
        self._arm_timer(f)

    def _on_ack(self, f: _Flow, ack_no: int, marked: bool):
        if f.sender_done:
            return
        if ack_no <= f.acked:
            return                      # duplicate cumulative ack
        newly = ack_no - f.acked
        f.acked = ack_no
        if f.next_seq <= ack_no:
            # an ack jump past a rewound sender: the receiver already holds
            # that data, so skip ahead instead of resending it
            f.next_seq = ack_no + 1
        if f.dctcp:
            f.acked_in_win += newly
            if marked:
                f.marked_in_win += 1
            if f.acked_in_win >= f.win_size:
                frac = f.marked_in_win / f.acked_in_win
                f.alpha = (1.0 - DCTCP_GAIN) * f.alpha + DCTCP_GAIN * frac
                if f.marked_in_win:
                    f.cwnd = max(1.0, f.cwnd * (1.0 - f.alpha / 2.0))
                f.acked_in_win = 0
                f.marked_in_win = 0
                f.win_size = max(1, int(f.cwnd))
        if f.cwnd < self.cfg.max_window:
            f.cwnd = min(float(self.cfg.max_window), f.cwnd + newly)
        if f.acked >= f.size:
            f.sender_done = True
            f.timer_gen += 1            # cancel pending timer
            return
        self._send_window(f)
        self._arm_timer(f)

    def _on_data(self, f: _Flow, pkt: _Packet):
        self.data_delivered += 1
        if pkt.seq == f.recv_next:
            f.recv_next += 1
            while f.recv_next in f.recv_buf:
                f.recv_buf.discard(f.recv_next)
                f.recv_next += 1
            if f.delivered:
                self._active -= 1
                self._finish(f)
        elif pkt.seq > f.recv_next:
            # cumulative acks only, but out-of-order data is buffered so a
            # single retransmission fills the gap
            f.recv_buf.add(pkt.seq)
        # cumulative ack (possibly duplicate), echoing this packet's mark
        ack = _Packet(f, f.recv_next - 1, True, pkt.marked)
        self._enqueue(f.rpath[0], ack)

    def _finish(self, f: _Flow):
        lf = f.logical
        if lf.finish is None:
            lf.finish = self.now
            lf.winner_was_replica = f.is_replica
            self._hash.update(repr((lf.id, lf.size, lf.start, lf.finish)).encode())

    # -- link layer --------------------------------------------------------

    def _enqueue(self, ls: _LinkState, pkt: _Packet):
        if ls.occ >= ls.buffer:
            ls.drops += 1
            if pkt.is_ack:
                self.ack_dropped += 1
            else:
                self.data_dropped += 1
            return
        if ls.ecn_on and not pkt.is_ack and ls.occ >= ls.ecn_thresh:
            pkt.marked = True
        ls.q.append(pkt)
        ls.occ += 1
        if len(ls.q) == 1:
            tx = ls.tx_ack if pkt.is_ack else ls.tx_data
            self._push(self.now + tx, _TXDONE, ls)

    def _on_txdone(self, ls: _LinkState):
        pkt = ls.q.popleft()
        ls.occ -= 1
        self._push(self.now + ls.delay, _RECV, pkt)
        if ls.q:
            head = ls.q[0]
            tx = ls.tx_ack if head.is_ack else ls.tx_data
            self._push(self.now + tx, _TXDONE, ls)

    def _on_recv(self, pkt: _Packet):
        f = pkt.flow
        path = f.rpath if pkt.is_ack else f.path
        pkt.hop += 1
        if pkt.hop == len(path):
            if pkt.is_ack:
                self._on_ack(f, pkt.seq, pkt.marked)
            else:
                self._on_data(f, pkt)
        else:
            self._enqueue(path[pkt.hop], pkt)

    # -- traffic generation ------------------------------------------------

    def _toy_colliding_port(self, src: int, dst: int, start: int) -> int:
        """Smallest port >= start whose ECMP hash routes (src, dst) over the
        first upper switch.  The toy scenario deliberately pins the original
        copies and the large flow onto one equal-cost path to reproduce a
        hash collision; replicas still hash freely."""
        upper = 6
        port = start
        while self.topo.ecmp_route(
                FiveTuple(src, dst, port, 443))[1].dst != upper:
            port += 1
        return port

    def _setup_traffic(self):
        cfg = self.cfg
        if cfg.topology == "toy":
            self._toy_rng = host_stream(cfg.seed, 0)
            self._toy_port = 10000
            if cfg.toy_large_flow:
                # effectively persistent: cannot finish before the drain cap
                horizon = cfg.duration + cfg.max_drain_s
                size = int(cfg.capacity_pps * horizon * 2) + 1000
                self._start_flow(1, 3, size,
                                 src_port=self._toy_colliding_port(1, 3, 9000))
            self._push(self._toy_rng.exponential(1.0 / cfg.toy_short_rate),
                       _GEN, -1)
            return
        self._dist = resolve_workload(cfg.workload)
        self._spec = TrafficSpec(self._dist, cfg.load, cfg.capacity_pps)
        self._rngs = {}
        self._ports = {}
        for h in self.topo.hosts:
            rng = host_stream(cfg.seed, h)
            self._rngs[h] = rng
            self._ports[h] = 10000
            self._push(rng.exponential(1.0 / self._spec.arrival_rate), _GEN, h)

    def _on_gen(self, host: int):
        if self.now >= self.cfg.duration:
            return
        if host == -1:                  # toy short-flow source
            rng = self._toy_rng
            port = self._toy_colliding_port(0, 2, self._toy_port)
            self._start_flow(0, 2, self.cfg.toy_short_size, src_port=port)
            self._toy_port = port + 1
            self._push(self.now + rng.exponential(1.0 / self.cfg.toy_short_rate),
                       _GEN, -1)
            return
        rng = self._rngs[host]
        size = int(self._dist.sample(rng))
        n = len(self.topo.hosts)
        j = int(rng.integers(0, n - 1))
        if j >= host:
            j += 1
        dst = self.topo.hosts[j]
        self._start_flow(host, dst, size, src_port=self._ports[host])
        self._ports[host] += 1
        self._push(self.now + rng.exponential(1.0 / self._spec.arrival_rate),
                   _GEN, host)

    # -- main loop ---------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        self._setup_traffic()
        cap = cfg.duration + cfg.max_drain_s
        heap = self._heap
        while heap:
            t, _, kind, a, b = heapq.heappop(heap)
            if t > cap:
                self.now = cap
                break
            self.now = t
            if kind == _TXDONE:
                self._on_txdone(a)
            elif kind == _RECV:
                self._on_recv(a)
            elif kind == _RTO:
                self._on_rto(a, b)
            else:
                self._on_gen(a)
            if self._active == 0 and self.now >= cfg.duration:
                break
        return self._collect()

    def residual_data_packets(self) -> int:
        """Data packets still in queues or in flight (for conservation checks)."""
        in_queues = sum(1 for ls in self.links for p in ls.q if not p.is_ack)
        in_events = sum(1 for ev in self._heap
                        if ev[2] == _RECV and not ev[3].is_ack)
        return in_queues + in_events

    def _collect(self) -> RunResult:
        cfg = self.cfg
        records = []
        incomplete = 0
        replica_bytes = 0
        logical_bytes = 0
        retrans = 0
        for f in self._flows:
            retrans += f.retransmitted
            if f.is_replica:
                replica_bytes += f.sent_data * PACKET_BYTES
            else:
                logical_bytes += f.sent_data * PACKET_BYTES
        for lf in self._logicals:
            if lf.finish is None:
                incomplete += 1
                continue
            fct = lf.finish - lf.start
            best = metrics.best_case_fct(lf.size, [ls.link for ls in lf.orig.path],
                                         cfg.initial_window, cfg.max_window)
            records.append(metrics.FctRecord(
                flow_id=lf.id, size_pkts=lf.size, start_s=lf.start,
                finish_s=lf.finish, fct_s=fct, norm_fct=fct / best,
                replicated=lf.replicated,
                winner_was_replica=lf.winner_was_replica,
                src=lf.src, dst=lf.dst))
        overhead = metrics.overhead_fraction(replica_bytes, logical_bytes)
        if records:
            summary = metrics.summarize(records, cfg.short_flow_threshold,
                                        incomplete, overhead)
        else:
            summary = metrics.FctSummary(bins={}, incomplete=incomplete,
                                         overhead_fraction=overhead)
        self._hash.update(repr((self.data_injected, self.data_delivered,
                                self.data_dropped, incomplete)).encode())
        return RunResult(
            config=cfg, records=records, incomplete=incomplete,
            summary=summary, data_injected=self.data_injected,
            data_delivered=self.data_delivered, data_dropped=self.data_dropped,
            ack_dropped=self.ack_dropped, retransmitted=retrans,
            replica_bytes_sent=replica_bytes, logical_bytes=logical_bytes,
            trace_hash=self._hash.hexdigest(), end_time=self.now)


def run(config: ScenarioConfig, topo: Topology | None = None) -> RunResult:
    """Run one scenario to completion and aggregate its results."""
    return Simulation(config, topo).run()
